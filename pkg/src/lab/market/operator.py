"""
Opérateur de la place de marché
L'opérateur choisit les enchères effectives b̂ en arbitrant conformité
(−δ_rep·Σ D_G(b̂_j, b_j)) et revenu DSIC γ·R(b̂).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.optimize import minimize_scalar

from lab.errors import ConvergenceError, ParameterError, PreconditionError
from lab.market.capacity import SubmodularCapacity, validate_capacity
from lab.market.mechanism import (
    at_payments,
    greedy_allocation,
    greedy_order,
    marginal_revenue_formula,
    revenue,
)
from lab.scoring.generators import Generator, curvature

MAX_SWEEPS = 100
MOVE_TOL = 1e-12


@dataclass(frozen=True)
class MarketInstance:
    capacity: SubmodularCapacity
    bids: Tuple[float, ...]
    delta_rep: float = 1.0
    gamma: float = 0.1
    bid_cap: float = 1.0
    compliance: Generator = field(default_factory=Generator.brier)
    allow_ties: bool = False

    def __post_init__(self):
        bids = tuple(float(b) for b in self.bids)
        object.__setattr__(self, "bids", bids)
        if len(bids) != self.capacity.n:
            raise ParameterError(f"{len(bids)} enchères pour {self.capacity.n} agents")
        if not self.delta_rep > 0.0:
            raise ParameterError(f"Poids réputationnel delta_rep={self.delta_rep} (doit être > 0)")
        if not self.gamma >= 0.0:
            raise ParameterError(f"Poids de revenu gamma={self.gamma} (doit être ≥ 0)")
        if not 0.0 < self.bid_cap <= self.compliance.domain_hi:
            raise ParameterError(f"Plafond d'enchère bid_cap={self.bid_cap} hors du domaine de conformité")
        if any(not 0.0 <= b <= self.bid_cap for b in bids):
            raise ParameterError(f"Enchères hors de [0, {self.bid_cap:g}]: {list(bids)}")
        if not self.allow_ties and len(set(bids)) != len(bids):
            raise ParameterError(f"Enchères non distinctes: {list(bids)} (allow_ties désactivé)")
        validate_capacity(self.capacity)

    @property
    def n(self) -> int:
        return self.capacity.n

    def with_gamma(self, gamma: float) -> "MarketInstance":
        return MarketInstance(
            self.capacity, self.bids, self.delta_rep, gamma, self.bid_cap, self.compliance, self.allow_ties
        )


def compliance_cost(instance: MarketInstance, effective: np.ndarray) -> float:
    truth = np.asarray(instance.bids)
    return float(np.sum(instance.compliance.regret(effective, truth)))


def operator_objective(instance: MarketInstance, effective: Sequence[float]) -> float:
    """V(b̂; b, γ) = −δ_rep·Σ_j D_G(b̂_j, b_j) + γ·R(b̂)."""
    b_hat = np.asarray(effective, dtype=float)
    return -instance.delta_rep * compliance_cost(instance, b_hat) + instance.gamma * revenue(instance.capacity, b_hat)


def _coordinate_step(instance: MarketInstance, current: np.ndarray, j: int) -> float:
    """Meilleure valeur de b̂_j, autres coordonnées fixées : R est affine entre les enchères des autres."""
    cap, gen = instance.capacity, instance.compliance
    delta, gamma, truth = instance.delta_rep, instance.gamma, instance.bids[j]
    others = np.delete(current, j)
    cuts = np.unique(np.concatenate(([0.0, instance.bid_cap], others[(others > 0.0) & (others < instance.bid_cap)])))

    shifted = current.copy()

    def value_at(z: float) -> float:
        shifted[j] = z
        return operator_objective(instance, shifted)

    best_z, best_v = float(current[j]), value_at(float(current[j]))
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        z1, z2 = lo + (hi - lo) / 3.0, lo + 2.0 * (hi - lo) / 3.0
        shifted[j] = z1
        r1 = revenue(cap, shifted)
        shifted[j] = z2
        slope = (revenue(cap, shifted) - r1) / (z2 - z1)

        if gen.is_quadratic:
            z = float(np.clip(truth + gamma * slope / (2.0 * delta), lo, hi))
        else:
            res = minimize_scalar(
                lambda t: delta * float(gen.regret(t, truth)) - gamma * (r1 + slope * (t - z1)),
                bounds=(lo, hi),
                method="bounded",
                options={"xatol": 1e-13},
            )
            z = float(res.x)
        v = value_at(z)
        if v > best_v + 1e-15:
            best_z, best_v = z, v
    return best_z


def operator_best_response(instance: MarketInstance) -> np.ndarray:
    """Montée par coordonnées cyclique depuis b̂ = b (équilibre local à petit γ).

    Raises:
        ConvergenceError: plus de MAX_SWEEPS balayages.
    """
    current = np.asarray(instance.bids, dtype=float).copy()
    if instance.gamma == 0.0:
        return current
    for sweep in range(1, MAX_SWEEPS + 1):
        moved = 0.0
        for j in range(instance.n):
            z = _coordinate_step(instance, current, j)
            moved = max(moved, abs(z - current[j]))
            current[j] = z
        if moved <= MOVE_TOL:
            logger.debug(f"Montée par coordonnées convergée en {sweep} balayages")
            return current
    raise ConvergenceError(f"Montée par coordonnées non convergée après {MAX_SWEEPS} balayages")


def first_order_inflation(instance: MarketInstance, j: int) -> float:
    """γ·MR_j/(δ_rep·G''(b_j)) ; pour Brier, (γ/(2·δ_rep))·MR_j."""
    mr = marginal_revenue_formula(instance.capacity, instance.bids, j)
    return instance.gamma * mr / (instance.delta_rep * curvature(instance.compliance, instance.bids[j]))


# ----------------------------------------------------------------------
# Indétectabilité et bien-être
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class AgentObservation:
    own_bid: float
    own_allocation: float
    own_payment: float


def _observations(cap: SubmodularCapacity, own_bids: np.ndarray, executed: np.ndarray) -> Dict[int, AgentObservation]:
    x = greedy_allocation(cap, executed)
    p = at_payments(cap, executed)
    return {i: AgentObservation(float(own_bids[i]), float(x[i]), float(p[i])) for i in range(cap.n)}


def verify_nt3_signals(
    cap: SubmodularCapacity,
    true_bids: Sequence[float],
    inflated_bids: Sequence[float],
) -> Dict[int, bool]:
    """Pour chaque agent i ≠ j : observation identique sous exécution gonflée et sous profil vrai b̂."""
    truth = np.asarray(true_bids, dtype=float)
    inflated = np.asarray(inflated_bids, dtype=float)
    changed = np.flatnonzero(truth != inflated)
    if changed.size > 1:
        raise PreconditionError(f"Inflation sur plusieurs coordonnées: {(changed + 1).tolist()}")

    scenario_a = _observations(cap, truth, inflated)
    scenario_b = _observations(cap, inflated, inflated)
    return {i: scenario_a[i] == scenario_b[i] for i in range(cap.n) if i not in changed}


@dataclass
class DeviationWelfare:
    surplus_change: np.ndarray
    operator_change: float
    predicted_gain: float
    ordering_changed: bool

    @property
    def total_surplus_change(self) -> float:
        return float(self.surplus_change.sum())


def deviation_welfare(
    cap: SubmodularCapacity,
    true_bids: Sequence[float],
    inflated_bids: Sequence[float],
    delta_rep: float,
    gamma: float,
) -> DeviationWelfare:
    """Variation de surplus des enchérisseurs, gain de l'opérateur et prédiction γ²‖∇R‖²/(4δ_rep)."""
    truth = np.asarray(true_bids, dtype=float)
    inflated = np.asarray(inflated_bids, dtype=float)

    def surplus(executed: np.ndarray) -> np.ndarray:
        return truth * greedy_allocation(cap, executed) - at_payments(cap, executed)

    def objective(executed: np.ndarray) -> float:
        return -delta_rep * float(np.sum((executed - truth) ** 2)) + gamma * revenue(cap, executed)

    gradient = np.array([marginal_revenue_formula(cap, truth, j) for j in range(cap.n)])
    return DeviationWelfare(
        surplus_change=surplus(inflated) - surplus(truth),
        operator_change=objective(inflated) - objective(truth),
        predicted_gain=gamma**2 * float(gradient @ gradient) / (4.0 * delta_rep),
        ordering_changed=not np.array_equal(greedy_order(truth), greedy_order(inflated)),
    )
