"""Détection par compétition : un rapport dévié comparé à n rapports honnêtes bruités."""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import norm

from lab.detection.hoeffding import DetectionSpec, block_sizes
from lab.errors import ParameterError, PreconditionError
from utils.parallel import ordered_map

# Valeur critique du test unilatéral implicite de la forme close
CRITICAL_Z = 0.0
# Bloc plus petit que pour Bernoulli : n tirages gaussiens par répétition
COMPETITION_BLOCK = 5_000


def competition_detection_prob(delta: float, sigma: float, n: int) -> float:
    """1 − Φ(−Δ√n/σ)."""
    if not sigma > 0.0:
        raise ParameterError(f"Bruit sigma={sigma} (doit être > 0)")
    if n < 1:
        raise ParameterError(f"Nombre de rapporteurs n={n} (doit être ≥ 1)")
    if delta < 0.0:
        raise ParameterError(f"Amplitude delta={delta} (doit être ≥ 0)")
    return float(1.0 - norm.cdf(-delta * math.sqrt(n) / sigma))


def competition_mc(delta: float, sigma: float, n: int, spec: DetectionSpec) -> float:
    """Fréquence à laquelle le récepteur signale le rapport dévié.

    n rapports honnêtes vérité + N(0, σ²), un rapport dévié vérité + Δ ;
    statistique z = (dévié − moyenne honnête)/(σ/√n), signalement si z > 0.
    """
    if n < 2:
        raise PreconditionError(f"La comparaison demande au moins 2 rapporteurs (n={n})")
    competition_detection_prob(delta, sigma, n)
    scale = sigma / math.sqrt(n)

    def run_block(job: tuple[int, int]) -> int:
        index, size = job
        rng = np.random.default_rng([spec.seed, index])
        honest = rng.normal(0.0, sigma, size=(size, n)).mean(axis=1)
        z = (delta - honest) / scale
        return int(np.count_nonzero(z > CRITICAL_Z))

    flagged = ordered_map(run_block, enumerate(block_sizes(spec.trials, COMPETITION_BLOCK)))
    return sum(flagged) / spec.trials
