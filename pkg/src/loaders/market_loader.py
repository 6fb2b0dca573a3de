"""
Chargement des instances de marché
Document JSON validé par `config/market_instance_schema.json` puis converti en
`MarketInstance` (table de capacité complète et validée).
"""

import json
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, FrozenSet, Optional

from jsonschema import Draft7Validator
from loguru import logger

from lab.errors import ConfigError, LabError
from lab.market.capacity import SubmodularCapacity, subset_label
from lab.market.operator import MarketInstance
from lab.scoring.generators import Generator

SCHEMA_PATH = Path(__file__).resolve().parent.parent / "config" / "market_instance_schema.json"


@lru_cache(maxsize=1)
def _validator() -> Draft7Validator:
    with open(SCHEMA_PATH, "r", encoding="utf-8") as f:
        return Draft7Validator(json.load(f))


def _subset(key: str, n: int) -> FrozenSet[int]:
    if key == "":
        return frozenset()
    agents = [int(part) for part in key.split(",")]
    if any(not 1 <= a <= n for a in agents):
        raise ConfigError(f"Sous-ensemble « {key} »: agents attendus entre 1 et {n}")
    if len(set(agents)) != len(agents):
        raise ConfigError(f"Sous-ensemble « {key} »: agent répété")
    return frozenset(a - 1 for a in agents)


def parse_market_instance(document: Dict[str, Any], compliance: Optional[Generator] = None) -> MarketInstance:
    """Valide le document (schéma puis invariants de capacité) et construit l'instance.

    Raises:
        ConfigError: schéma violé, table incomplète ou capacité invalide.
    """
    errors = sorted(_validator().iter_errors(document), key=lambda e: list(e.absolute_path))
    if errors:
        first = errors[0]
        where = "/".join(str(p) for p in first.absolute_path) or "<racine>"
        raise ConfigError(f"Instance de marché invalide ({where}): {first.message}")

    n = document["n"]
    if len(document["bids"]) != n:
        raise ConfigError(f"bids: {len(document['bids'])} enchères pour n={n} agents")

    table: Dict[FrozenSet[int], float] = {}
    for key, value in document["nu"].items():
        subset = _subset(key, n)
        if subset in table:
            raise ConfigError(f"Sous-ensemble {{{subset_label(sum(1 << i for i in subset), n)}}} défini deux fois")
        table[subset] = float(value)

    try:
        instance = MarketInstance(
            capacity=SubmodularCapacity.from_subsets(n, table),
            bids=tuple(document["bids"]),
            delta_rep=float(document["delta_rep"]),
            gamma=float(document["gamma"]),
            bid_cap=float(document.get("bid_cap", 1.0)),
            compliance=compliance or Generator.brier(),
            allow_ties=bool(document.get("allow_ties", False)),
        )
    except LabError as exc:
        raise ConfigError(f"Instance de marché invalide: {exc}") from exc

    logger.debug(f"Instance de marché chargée: n={n}, enchères={list(instance.bids)}")
    return instance


def load_market_instance(path: str, compliance: Optional[Generator] = None) -> MarketInstance:
    """Lit un fichier JSON d'instance de marché."""
    file_path = Path(path)
    try:
        with open(file_path, "r", encoding="utf-8") as f:
            document = json.load(f)
    except FileNotFoundError as exc:
        raise ConfigError(f"Instance de marché introuvable: {file_path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{file_path}: JSON invalide ligne {exc.lineno}, colonne {exc.colno}: {exc.msg}") from exc
    return parse_market_instance(document, compliance)
