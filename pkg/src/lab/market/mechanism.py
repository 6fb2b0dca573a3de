"""
Mécanisme du marché polymatroïdal
Allocation gloutonne d'Edmonds, paiements d'Archer–Tardos calculés exactement
par intervalles, revenu et revenu marginal (formule et différence finie).
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
import pandas as pd
from loguru import logger

from lab.errors import OrderingChangedError, ParameterError, PreconditionError
from lab.market.capacity import SubmodularCapacity

FD_TOLERANCE = 1e-10


def _as_bids(cap: SubmodularCapacity, bids: Sequence[float]) -> np.ndarray:
    b = np.asarray(bids, dtype=float)
    if b.shape != (cap.n,):
        raise ParameterError(f"{b.size} enchères pour {cap.n} agents")
    if np.any(b < 0.0):
        raise ParameterError("Enchères négatives")
    return b


def _require_distinct(b: np.ndarray) -> None:
    if np.unique(b).size != b.size:
        raise PreconditionError(f"Enchères non distinctes: {b.tolist()}")


def greedy_order(bids: Sequence[float]) -> np.ndarray:
    """Agents par enchère décroissante, égalités par indice croissant."""
    b = np.asarray(bids, dtype=float)
    return np.lexsort((np.arange(b.size), -b))


def greedy_allocation(cap: SubmodularCapacity, effective_bids: Sequence[float]) -> np.ndarray:
    """x_i = ν(S_i ∪ {i}) − ν(S_i), S_i les agents traités avant i."""
    b = _as_bids(cap, effective_bids)
    table = cap.table
    x = np.zeros(cap.n)
    ahead = 0
    for i in greedy_order(b):
        x[i] = table[ahead | (1 << i)] - table[ahead]
        ahead |= 1 << i
    return x


def _own_allocation_integral(cap: SubmodularCapacity, b: np.ndarray, i: int) -> float:
    """∫₀^{b_i} x_i(z, b_{−i}) dz, x_i constant entre les enchères des autres."""
    others = np.delete(b, i)
    cuts = np.unique(np.concatenate(([0.0, b[i]], others[(others > 0.0) & (others < b[i])])))
    total = 0.0
    shifted = b.copy()
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        shifted[i] = 0.5 * (lo + hi)
        total += greedy_allocation(cap, shifted)[i] * (hi - lo)
    return total


def at_payments(cap: SubmodularCapacity, effective_bids: Sequence[float]) -> np.ndarray:
    """p_i = b_i·x_i(b) − ∫₀^{b_i} x_i(z, b_{−i}) dz."""
    b = _as_bids(cap, effective_bids)
    x = greedy_allocation(cap, b)
    return np.array([b[i] * x[i] - _own_allocation_integral(cap, b, i) for i in range(cap.n)])


def revenue(cap: SubmodularCapacity, effective_bids: Sequence[float]) -> float:
    return float(at_payments(cap, effective_bids).sum())


def nonmodularity_gap(cap: SubmodularCapacity, i: int, j: int) -> float:
    """κ_ij = ν({i}) + ν({j}) − ν({i, j})."""
    if i == j:
        raise ParameterError(f"Écart de non-modularité demandé pour i = j = {i}")
    return cap.value([i]) + cap.value([j]) - cap.value([i, j])


def marginal_revenue_formula(cap: SubmodularCapacity, bids: Sequence[float], j: int) -> float:
    """Σ_{i≠j} κ_ij·1{b_i > b_j}."""
    b = _as_bids(cap, bids)
    _require_distinct(b)
    return float(sum(nonmodularity_gap(cap, i, j) for i in range(cap.n) if i != j and b[i] > b[j]))


def marginal_revenue_fd(cap: SubmodularCapacity, bids: Sequence[float], j: int, delta: float) -> float:
    """(R(b + δ·e_j) − R(b))/δ, l'ordre glouton devant rester inchangé."""
    if not delta > 0.0:
        raise ParameterError(f"Pas de différence finie delta={delta} (doit être > 0)")
    b = _as_bids(cap, bids)
    raised = b.copy()
    raised[j] += delta
    if not np.array_equal(greedy_order(b), greedy_order(raised)):
        raise OrderingChangedError(
            f"Le pas δ={delta:g} sur l'agent {j + 1} change l'ordre glouton: réduire δ"
        )
    return (revenue(cap, raised) - revenue(cap, b)) / delta


def compare_marginal_revenue(cap: SubmodularCapacity, bids: Sequence[float], delta: float) -> pd.DataFrame:
    """Formule contre différence finie pour chaque agent ; écarts journalisés, jamais corrigés."""
    rows = []
    for j in range(cap.n):
        formula = marginal_revenue_formula(cap, bids, j)
        try:
            fd = marginal_revenue_fd(cap, bids, j, delta)
        except OrderingChangedError as exc:
            logger.warning(str(exc))
            fd = float("nan")
        diff = abs(formula - fd)
        if diff > FD_TOLERANCE:
            logger.warning(
                f"Revenu marginal agent {j + 1} (n={cap.n}): formule={formula:.12g} "
                f"différence finie={fd:.12g} écart={diff:.3e}"
            )
        rows.append({"agent": j + 1, "formula": formula, "finite_difference": fd, "abs_diff": diff})
    return pd.DataFrame(rows, columns=["agent", "formula", "finite_difference", "abs_diff"])


def bidder_utility_profile(
    cap: SubmodularCapacity,
    values: Sequence[float],
    i: int,
    grid: Sequence[float],
) -> np.ndarray:
    """Utilité v_i·x_i − p_i de l'agent i pour chaque enchère de la grille, autres véridiques."""
    v = _as_bids(cap, values)
    out = np.empty(len(grid))
    for k, z in enumerate(grid):
        b = v.copy()
        b[i] = z
        x = greedy_allocation(cap, b)
        p = b[i] * x[i] - _own_allocation_integral(cap, b, i)
        out[k] = v[i] * x[i] - p
    return out
