"""
Écart de bien-être sous surveillance lisse
Estimation numérique (borne supérieure) de l'écart au premier rang sur la famille
sigmoïde τ ≥ tau_min, courbe en α de la famille puissance et dispersion de courbure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd
from loguru import logger
from scipy.optimize import minimize

from lab.agent.approval import Sigmoid
from lab.errors import LabError, NumericsError, ParameterError
from lab.oversight.game import OversightGame
from lab.oversight.screening import first_best_utility, principal_utility
from lab.scoring.generators import Generator
from utils.parallel import ordered_map


@dataclass(frozen=True)
class GapSearch:
    """Grille (r_min, τ) de la recherche sigmoïde, puis raffinement Nelder-Mead."""

    r_min_values: Tuple[float, ...] = tuple(np.round(np.linspace(0.55, 0.85, 7), 6))
    tau_values: Tuple[float, ...] = (1e-3, 1e-2, 3e-2)
    refine: bool = True
    max_evals: int = 40


@dataclass
class GapEstimate:
    gap_hat: float
    best_q: Sigmoid
    utility: float
    first_best: float
    evaluations: int = 0
    grid_utilities: List[float] = field(default_factory=list, repr=False)


def _candidates(tau_min: float, search: GapSearch) -> List[Sigmoid]:
    seen, out = set(), []
    for r_min in search.r_min_values:
        for tau in search.tau_values:
            key = (float(r_min), max(float(tau), tau_min))
            if key not in seen:
                seen.add(key)
                out.append(Sigmoid(*key))
    return out


def _utility_or_none(game: OversightGame, q: Sigmoid) -> Optional[float]:
    try:
        return principal_utility(game, q)
    except NumericsError as exc:
        logger.warning(f"Utilité non évaluable pour {q.label}: {exc}")
        return None


def welfare_gap_smooth(game: OversightGame, tau_min: float, search: Optional[GapSearch] = None) -> GapEstimate:
    """Écart U* − max_q U_P(q) sur les sigmoïdes de largeur ≥ tau_min.

    Estimateur par excès : l'infimum sur toutes les fonctions C¹ n'est pas calculé.
    """
    search = search or GapSearch()
    if not tau_min > 0.0:
        raise ParameterError(f"Largeur minimale tau_min={tau_min} (doit être > 0)")
    if not search.r_min_values or not search.tau_values:
        raise ParameterError("Grille de recherche sigmoïde vide")

    candidates = _candidates(tau_min, search)
    utilities = ordered_map(lambda q: _utility_or_none(game, q), candidates, desc="grille sigmoïde")
    scored = [(u, i) for i, u in enumerate(utilities) if u is not None]
    if not scored:
        raise NumericsError("Aucune sigmoïde de la grille n'a pu être évaluée")
    best_u, best_i = max(scored, key=lambda item: (item[0], -item[1]))
    best_q = candidates[best_i]
    evaluations = len(candidates)

    if search.refine:
        tau_hi = max(max(search.tau_values), tau_min)
        cache = {}

        def objective(x: np.ndarray) -> float:
            r_min = float(np.clip(x[0], 0.0, 1.0))
            tau = float(np.clip(x[1], tau_min, tau_hi))
            key = (r_min, tau)
            if key not in cache:
                try:
                    cache[key] = principal_utility(game, Sigmoid(r_min, tau))
                except LabError:
                    cache[key] = -math.inf
            return -cache[key]

        x0 = np.array([best_q.r_min, best_q.tau])
        simplex = np.array([x0, x0 + [0.01, 0.0], x0 + [0.0, 0.5 * best_q.tau]])
        simplex[:, 0] = np.clip(simplex[:, 0], 0.0, 1.0)
        simplex[:, 1] = np.clip(simplex[:, 1], tau_min, tau_hi)
        result = minimize(
            objective,
            x0,
            method="Nelder-Mead",
            bounds=[(0.0, 1.0), (tau_min, tau_hi)],
            options={"maxfev": search.max_evals, "xatol": 1e-5, "fatol": 1e-10, "initial_simplex": simplex},
        )
        evaluations += len(cache)
        refined_u = -float(result.fun)
        if refined_u > best_u:
            best_u = refined_u
            best_q = Sigmoid(float(np.clip(result.x[0], 0.0, 1.0)), float(np.clip(result.x[1], tau_min, tau_hi)))

    first_best = first_best_utility(game)
    estimate = GapEstimate(
        gap_hat=first_best - best_u,
        best_q=best_q,
        utility=best_u,
        first_best=first_best,
        evaluations=evaluations,
        grid_utilities=[u if u is not None else math.nan for u in utilities],
    )
    logger.info(
        f"Écart lisse {game.gen.label}: gap_hat={estimate.gap_hat:.6g} avec {best_q.label} "
        f"({evaluations} évaluations)"
    )
    return estimate


@dataclass(frozen=True)
class CurvatureDispersion:
    var_inv_curvature: float
    var_log_p: float
    binding_mass: float


def curvature_dispersion(game: OversightGame) -> CurvatureDispersion:
    """Variances de 1/G''(p) et de log p sur les types liants p < p_min (pondérées par f)."""
    lo, _ = game.dist.support
    mids, weights = game.dist.midpoint_weights(lo, game.p_min)
    mass = float(weights.sum())
    if mass <= 0.0:
        return CurvatureDispersion(0.0, 0.0, 0.0)
    w = weights / mass

    def variance(x: np.ndarray) -> float:
        mean = float(np.dot(w, x))
        return float(np.dot(w, (x - mean) ** 2))

    inv_curv = 1.0 / np.asarray(game.gen.second_derivative(mids), dtype=float)
    return CurvatureDispersion(
        var_inv_curvature=variance(inv_curv),
        var_log_p=variance(np.log(mids)),
        binding_mass=mass,
    )


GAP_CURVE_COLUMNS = [
    "alpha",
    "gap_hat",
    "r_min",
    "tau",
    "utility",
    "first_best",
    "var_inv_curvature",
    "var_log_p",
]


def power_family_gap_curve(
    game_template: OversightGame,
    alphas: Iterable[float],
    tau_min: float,
    search: Optional[GapSearch] = None,
) -> pd.DataFrame:
    """gap_hat pour chaque α de la famille puissance, mêmes (γ, β, F, u) et même domaine."""
    rows = []
    lo, hi = game_template.gen.domain_lo, game_template.gen.domain_hi
    for alpha in alphas:
        game = game_template.with_generator(Generator.power(alpha, domain_lo=lo, domain_hi=hi))
        estimate = welfare_gap_smooth(game, tau_min, search)
        dispersion = curvature_dispersion(game)
        rows.append(
            {
                "alpha": float(alpha),
                "gap_hat": estimate.gap_hat,
                "r_min": estimate.best_q.r_min,
                "tau": estimate.best_q.tau,
                "utility": estimate.utility,
                "first_best": estimate.first_best,
                "var_inv_curvature": dispersion.var_inv_curvature,
                "var_log_p": dispersion.var_log_p,
            }
        )
    return pd.DataFrame(rows, columns=GAP_CURVE_COLUMNS)
