"""Configuration du système de logging (texte en TTY, JSON sinon)."""

import os
import sys
from pathlib import Path

from loguru import logger

from utils.monitoring import patch_log_context

PLAIN_FORMAT = (
    "<green>{time:HH:mm:ss.SSS}</green> | "
    "<level>{level: <8}</level> | "
    "<cyan>{extra[experiment]}</cyan> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> | "
    "<level>{message}</level>"
)


def setup_logger(level: str = "INFO", log_file: str | None = None, log_format: str | None = None) -> str:
    """Configure loguru avec contexte de run, format JSON ou texte.

    Les logs partent sur stderr : stdout reste réservé aux résumés PASS/FAIL et
    à la ligne de métriques. `log_file` ajoute une copie du flux au même niveau.

    Args:
        level: Niveau (DEBUG/INFO/WARNING/ERROR).
        log_file: Fichier de log optionnel.
        log_format: `plain` ou `json` ; sinon `LOG_FORMAT`, sinon `plain` en TTY et `json` ailleurs.

    Returns:
        Le format retenu.
    """
    logger.remove()
    logger.configure(patcher=patch_log_context)

    default_format = "plain" if sys.stderr.isatty() else "json"
    format_choice = (log_format or os.getenv("LOG_FORMAT", default_format)).lower()
    if format_choice not in {"plain", "json"}:
        format_choice = "json"
    use_json = format_choice == "json"
    sink_format = "{message}" if use_json else PLAIN_FORMAT

    logger.add(sys.stderr, format=sink_format, level=level, colorize=not use_json, serialize=use_json)
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        logger.add(log_file, format=sink_format, level=level, colorize=False, serialize=use_json)

    logger.debug(f"Logger configuré - format={format_choice} niveau={level} fichier={log_file or '-'}")
    return format_choice
