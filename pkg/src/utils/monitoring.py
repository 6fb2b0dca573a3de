"""Helpers de monitoring : contexte de run et ligne de métriques JSON."""

from __future__ import annotations

import json
import sys
from typing import Any, Dict

_RUN_CONTEXT: Dict[str, Any] = {}

# Clés toujours présentes dans `record["extra"]` (référencées par le format texte)
_DEFAULT_CONTEXT = {"experiment": "-"}


def set_run_context(**kwargs: Any) -> None:
    """Met à jour le contexte statique injecté dans chaque log."""
    for key, value in kwargs.items():
        if value is None:
            _RUN_CONTEXT.pop(key, None)
        else:
            _RUN_CONTEXT[key] = value


def get_run_context() -> Dict[str, Any]:
    """Renvoie une copie du contexte courant."""
    return dict(_RUN_CONTEXT)


def clear_run_context() -> None:
    _RUN_CONTEXT.clear()


def patch_log_context(record: Dict[str, Any]) -> None:
    """Ajoute les paires run-context à tous les enregistrements loguru."""
    extra = record.setdefault("extra", {})
    for key, value in {**_DEFAULT_CONTEXT, **get_run_context()}.items():
        if value is not None:
            extra.setdefault(key, value)


def emit_run_metrics(stats: Dict[str, Any]) -> None:
    """Affiche une ligne JSON compacte reprenant les métriques essentielles du run."""
    context = get_run_context()
    checks_passed = stats.get("checks_passed", 0)
    checks_failed = stats.get("checks_failed", 0)
    status = stats.get("status", "UNKNOWN")

    payload = {
        "event": "run_metrics",
        "run_id": context.get("run_id"),
        "experiment": context.get("experiment"),
        "seed": context.get("seed"),
        "config_hash": context.get("config_hash"),
        "status": status,
        "exit_code": stats.get("exit_code"),
        "duration_seconds": round(float(stats.get("duration_seconds", 0.0)), 3),
        "rows_written": stats.get("rows_written", 0),
        "checks_passed": checks_passed,
        "checks_failed": checks_failed,
        "run_success": 1 if status == "SUCCESS" else 0,
    }

    print(json.dumps(payload, separators=(",", ":")), file=sys.stdout, flush=True)
