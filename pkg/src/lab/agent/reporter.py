"""
Module du rapporteur stratégique
Objectif combiné V(r; p) = −β·regret(r, p) + γ·q(r), meilleure réponse exacte,
prédictions au premier ordre et seuils γ des types résiduels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from loguru import logger

from lab.agent.approval import Affine, ApprovalFunction, Step
from lab.errors import DomainError, NoConflictError, ParameterError, PreconditionError
from lab.numerics import golden_section_max
from lab.scoring.generators import Generator, curvature, scoring_regret

REPORT_GRID_POINTS = 4001
REFINE_TOL = 1e-10
# Ecart de valeur en dessous duquel deux rapports sont considérés à égalité
TIE_TOL = 1e-15
# Condition d'inflation faible du seuil net (type indifférent approuvé)
STEP_TIE_TOL = 1e-12
ZERO_GRADIENT_TOL = 1e-10
BATCH_ROWS = 256


@dataclass(frozen=True)
class AgentParams:
    """Poids de calibration β > 0 et d'autonomie γ ≥ 0 (γ = 0 : sans perturbation)."""

    beta: float = 1.0
    gamma: float = 0.04

    def __post_init__(self):
        if not self.beta > 0.0:
            raise ParameterError(f"Poids de calibration invalide: beta={self.beta} (doit être > 0)")
        if not self.gamma >= 0.0:
            raise ParameterError(f"Poids d'autonomie invalide: gamma={self.gamma} (doit être ≥ 0)")

    @property
    def ratio(self) -> float:
        return self.gamma / self.beta


@dataclass(frozen=True)
class ResidualThreshold:
    """Seuils γ au-delà desquels un type à gradient nul cesse d'être véridique."""

    gamma_local: float
    gamma_global: float
    r1: float

    @property
    def effective(self) -> float:
        return min(self.gamma_local, self.gamma_global)


def report_grid(gen: Generator) -> np.ndarray:
    return np.linspace(gen.domain_lo, gen.domain_hi, REPORT_GRID_POINTS)


def combined_objective(gen: Generator, q: ApprovalFunction, params: AgentParams, r: float, p: float) -> float:
    """V(r; p) = −β·regret(r, p) + γ·q(r)."""
    return -params.beta * scoring_regret(gen, r, p) + params.gamma * float(q(r))


def _step_responses(gen: Generator, q: Step, params: AgentParams, types: np.ndarray) -> np.ndarray:
    """Choix binaire exact {p, r0} face à un seuil net."""
    responses = types.copy()
    if q.r0 > gen.domain_hi:
        return responses
    below = types < q.r0
    gain = params.gamma - params.beta * gen.regret(q.r0, types)
    responses[below & (gain >= -STEP_TIE_TOL)] = q.r0
    return responses


def _affine_quadratic_responses(gen: Generator, q: Affine, params: AgentParams, types: np.ndarray) -> np.ndarray:
    """Regret quadratique face à une approbation affine saturée : V est concave sur chaque morceau de q.

    Le maximum d'un morceau est la projection de son optimum libre (p, ou p + γb/(2β)
    sur la partie pentue) ; on retient le meilleur morceau avec les mêmes départages
    que la recherche sur grille.
    """
    if q.b == 0.0:
        return types.copy()
    lo, hi = gen.domain_lo, gen.domain_hi
    knots = sorted(min(max(x, lo), hi) for x in ((0.0 - q.a) / q.b, (1.0 - q.a) / q.b))
    edges = [lo, *knots, hi]
    shift = params.gamma * q.b / (2.0 * params.beta)

    candidates = []
    for a, b in zip(edges[:-1], edges[1:]):
        raw = q.a + q.b * 0.5 * (a + b)
        target = types + shift if 0.0 < raw < 1.0 else types
        candidates.append(np.clip(target, a, b))
    cands = np.stack(candidates, axis=1)
    values = -params.beta * gen.regret(cands, types[:, None]) + params.gamma * np.asarray(q(cands), dtype=float)

    best = values.max(axis=1)
    distance = np.where(values >= best[:, None] - TIE_TOL, np.abs(cands - types[:, None]), np.inf)
    idx = distance.argmin(axis=1)
    rows = np.arange(types.size)
    r_best, v_best = cands[rows, idx], values[rows, idx]
    v_truth = params.gamma * np.asarray(q(types), dtype=float)
    return np.where(v_truth >= v_best - TIE_TOL, types, r_best)


def _smooth_responses(gen: Generator, q: ApprovalFunction, params: AgentParams, types: np.ndarray) -> np.ndarray:
    """Grille exhaustive puis section dorée sur le crochet de l'argmax."""
    grid = report_grid(gen)
    step = grid[1] - grid[0]
    q_grid = np.asarray(q(grid), dtype=float)
    beta, gamma = params.beta, params.gamma
    out = np.empty_like(types)

    for start in range(0, types.size, BATCH_ROWS):
        p = types[start:start + BATCH_ROWS]
        values = -beta * gen.regret(grid[None, :], p[:, None]) + gamma * q_grid[None, :]
        best = values.max(axis=1)
        # égalités : le rapport le plus proche de p l'emporte
        distance = np.where(values >= best[:, None] - TIE_TOL, np.abs(grid[None, :] - p[:, None]), np.inf)
        idx = distance.argmin(axis=1)
        r_grid = grid[idx]
        v_grid = values[np.arange(p.size), idx]

        def objective(x: np.ndarray, p=p) -> np.ndarray:
            return -beta * gen.regret(x, p) + gamma * q(x)

        lo = np.maximum(r_grid - step, gen.domain_lo)
        hi = np.minimum(r_grid + step, gen.domain_hi)
        r_ref = golden_section_max(objective, lo, hi, tol=REFINE_TOL)
        v_ref = objective(r_ref)
        r_best = np.where(v_ref > v_grid, r_ref, r_grid)
        v_best = np.maximum(v_ref, v_grid)

        v_truth = gamma * np.asarray(q(p), dtype=float)
        out[start:start + BATCH_ROWS] = np.where(v_truth >= v_best - TIE_TOL, p, r_best)

    return out


def best_response_batch(gen: Generator, q: ApprovalFunction, params: AgentParams, types: np.ndarray) -> np.ndarray:
    """Meilleure réponse pour un tableau de types (même règle que `best_response`)."""
    types = np.asarray(types, dtype=float)
    if types.size == 0:
        return types.copy()
    if types.min() < gen.domain_lo - 1e-12 or types.max() > gen.domain_hi + 1e-12:
        raise DomainError(
            f"Types hors du domaine [{gen.domain_lo}, {gen.domain_hi}] du générateur {gen.label}"
        )
    flat = types.ravel()
    if isinstance(q, Step):
        result = _step_responses(gen, q, params, flat)
    elif isinstance(q, Affine) and gen.is_quadratic:
        result = _affine_quadratic_responses(gen, q, params, flat)
    else:
        result = _smooth_responses(gen, q, params, flat)
    return result.reshape(types.shape)


def best_response(gen: Generator, q: ApprovalFunction, params: AgentParams, p: float) -> float:
    """Maximiseur global de l'objectif combiné sur le domaine des rapports."""
    gen.check_domain("p", p)
    return float(best_response_batch(gen, q, params, np.array([p]))[0])


def first_order_prediction(gen: Generator, q: ApprovalFunction, params: AgentParams, p: float) -> float:
    """Formule de perturbation tronquée à l'ordre γ : p + γ·q'(p)/(β·G''(p))."""
    slope = q.derivative(p)
    if isinstance(q, Affine) and q.is_clamped_near(p, params.ratio):
        raise PreconditionError(
            f"Saturation affine active à moins de γ/β={params.ratio:g} de p={p}: utiliser best_response"
        )
    return p + params.gamma * slope / (params.beta * curvature(gen, p))


def predicted_scoring_loss(gen: Generator, q: ApprovalFunction, params: AgentParams, p: float) -> float:
    """Perte de score prédite (γ²/2)·q'(p)²/(β·G''(p)), quadratique en γ."""
    slope = q.derivative(p)
    return 0.5 * params.gamma**2 * slope**2 / (params.beta * curvature(gen, p))


def residual_gamma_threshold(gen: Generator, beta: float, p0: float, q: ApprovalFunction) -> ResidualThreshold:
    """Seuils local (second ordre) et global (saut vers l'argmax de q) d'un type à gradient nul.

    Raises:
        NoConflictError: q constante, ou p0 atteint déjà le maximum de q.
        PreconditionError: q'(p0) non nul (le cas du premier ordre s'applique).
    """
    gen.check_domain("p0", p0)
    grid = report_grid(gen)
    q_grid = np.asarray(q(grid), dtype=float)
    if float(np.ptp(q_grid)) < 1e-12:
        raise NoConflictError(f"{q.label} est constante: aucun conflit de perturbation")

    slope = q.derivative(p0)
    if abs(slope) > ZERO_GRADIENT_TOL:
        raise PreconditionError(f"q'(p0)={slope:.3e} non nul: le cas du premier ordre s'applique")

    bend = q.second_derivative(p0)
    gamma_local = beta * curvature(gen, p0) / bend if bend > 0.0 else math.inf

    q_max = q_grid.max()
    candidates = grid[q_grid >= q_max - 1e-12]
    costs = beta * gen.regret(candidates, p0)
    # coût minimal, puis rapport le plus grand
    order = np.lexsort((-candidates, costs))
    r1 = float(candidates[order[0]])
    delta_s = float(costs[order[0]])
    delta_h = float(q(r1)) - float(q(p0))
    if delta_h <= 0.0:
        raise NoConflictError(f"p0={p0} atteint déjà le maximum de {q.label}")

    result = ResidualThreshold(gamma_local=gamma_local, gamma_global=delta_s / delta_h, r1=r1)
    logger.debug(
        f"Seuils résiduels p0={p0}: local={result.gamma_local:.6g} global={result.gamma_global:.6g} (r1={r1:g})"
    )
    return result
