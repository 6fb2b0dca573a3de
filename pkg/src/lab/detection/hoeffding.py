"""
Détection d'un rapporteur isolé
Borne de Hoeffding sur le nombre d'issues nécessaires et vérification Monte Carlo
du test |moyenne empirique − rapport| ≥ Δ/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
import pandas as pd
from loguru import logger

from lab.errors import ParameterError, PreconditionError
from utils.parallel import ordered_map

MC_BLOCK = 10_000
SEED_MAX = 2**64 - 1


@dataclass(frozen=True)
class DetectionSpec:
    """Paramètres d'un test de détection et de sa vérification Monte Carlo."""

    delta: float = 0.1
    alpha: float = 0.05
    sigma: float = 1.0
    n: int = 2
    trials: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise ParameterError(f"Amplitude d'inflation delta={self.delta} hors [0, 1]")
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError(f"Niveau alpha={self.alpha} hors (0, 1)")
        if not self.sigma > 0.0:
            raise ParameterError(f"Bruit sigma={self.sigma} (doit être > 0)")
        if self.trials < 1:
            raise ParameterError(f"Nombre de tirages trials={self.trials} (doit être ≥ 1)")
        if not 0 <= self.seed <= SEED_MAX:
            raise ParameterError(f"Graine seed={self.seed} hors de [0, 2^64 − 1]")


def hoeffding_sample_bound(delta: float, alpha: float) -> int:
    """Nombre d'issues K = ⌈(2/Δ²)·ln(2/α)⌉ pour détecter une inflation Δ au niveau α."""
    if not 0.0 < delta <= 1.0:
        raise ParameterError(f"Amplitude delta={delta} hors (0, 1]")
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"Niveau alpha={alpha} hors (0, 1)")
    raw = (2.0 / delta**2) * math.log(2.0 / alpha)
    # absorbe l'arrondi quand la borne tombe sur un entier
    return int(math.ceil(raw - 1e-9))


def monte_carlo_se(rate: float, trials: int) -> float:
    """Erreur-type binomiale d'une fréquence estimée sur `trials` tirages."""
    if trials < 1:
        raise ParameterError(f"trials={trials} (doit être ≥ 1)")
    return math.sqrt(max(rate * (1.0 - rate), 0.0) / trials)


def block_sizes(trials: int, block: int = MC_BLOCK) -> list[int]:
    full, rest = divmod(trials, block)
    return [block] * full + ([rest] if rest else [])


def simulate_detection(p_true: float, r_report: float, K: int, spec: DetectionSpec) -> float:
    """Fréquence de détection sur `spec.trials` répétitions de K issues Bernoulli(p_true).

    Chaque bloc de tirages a son propre flux `default_rng([seed, bloc])` : le
    résultat ne dépend pas de l'ordonnancement.
    """
    for name, value in (("p_true", p_true), ("r_report", r_report)):
        if not 0.0 <= value <= 1.0:
            raise ParameterError(f"{name}={value} hors [0, 1]")
    if K < 1:
        raise ParameterError(f"Horizon K={K} (doit être ≥ 1)")
    gap = abs(r_report - p_true)
    if gap == 0.0:
        raise PreconditionError("Inflation nulle: rien à détecter (r_report = p_true)")

    def run_block(job: tuple[int, int]) -> int:
        index, size = job
        rng = np.random.default_rng([spec.seed, index])
        means = rng.binomial(K, p_true, size=size) / K
        return int(np.count_nonzero(np.abs(means - r_report) >= gap / 2.0))

    flagged = ordered_map(run_block, enumerate(block_sizes(spec.trials)))
    return sum(flagged) / spec.trials


def detection_curve(p_true: float, r_report: float, horizons: Iterable[int], spec: DetectionSpec) -> pd.DataFrame:
    """Taux de détection empirique et erreur-type pour chaque horizon K."""
    rows = []
    for K in horizons:
        rate = simulate_detection(p_true, r_report, int(K), spec)
        rows.append({"K": int(K), "rate": rate, "se": monte_carlo_se(rate, spec.trials)})
    logger.debug(f"Courbe de détection: {len(rows)} horizons (p={p_true:g}, r={r_report:g})")
    return pd.DataFrame(rows, columns=["K", "rate", "se"])
