"""Routines numériques partagées : quadrature de Simpson à doublement de panneaux,
section dorée vectorisée et ordre de convergence empirique."""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
from loguru import logger

from lab.errors import NumericsError

ArrayFunc = Callable[[np.ndarray], np.ndarray]

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
INV_PHI_SQ = (3.0 - math.sqrt(5.0)) / 2.0

EXACT_ERROR_FLOOR = 1e-13


def _simpson_sum(values: np.ndarray, h: float) -> float:
    """Simpson composite sur des valeurs equireparties (nombre pair de panneaux)."""
    return float(h / 3.0 * (values[0] + values[-1] + 4.0 * values[1:-1:2].sum() + 2.0 * values[2:-1:2].sum()))


def composite_simpson(func: ArrayFunc, a: float, b: float, panels: int) -> float:
    """Simpson composite a nombre de panneaux fixe (arrondi au pair superieur)."""
    if a == b:
        return 0.0
    panels += panels % 2
    x = np.linspace(a, b, panels + 1)
    return _simpson_sum(np.asarray(func(x), dtype=float), (b - a) / panels)


def integrate(
    func: ArrayFunc,
    a: float,
    b: float,
    tol: float = 1e-8,
    fail_tol: float = 1e-6,
    min_panels: int = 64,
    max_panels: int = 16384,
) -> float:
    """Integre `func` (vectorisee) sur [a, b] par Simpson en doublant les panneaux.

    Les valeurs deja calculees sont reutilisees : chaque doublement n'evalue que
    les nouveaux noeuds impairs.

    Raises:
        NumericsError: si l'ecart entre les deux dernieres estimations depasse
            `fail_tol` a `max_panels` panneaux.
    """
    if a == b:
        return 0.0
    if b < a:
        return -integrate(func, b, a, tol, fail_tol, min_panels, max_panels)

    panels = min_panels + min_panels % 2
    values = np.asarray(func(np.linspace(a, b, panels + 1)), dtype=float)
    estimate = _simpson_sum(values, (b - a) / panels)

    while True:
        new_panels = 2 * panels
        h = (b - a) / new_panels
        odd_nodes = a + h * np.arange(1, new_panels, 2)
        refined = np.empty(new_panels + 1)
        refined[0::2] = values
        refined[1::2] = np.asarray(func(odd_nodes), dtype=float)
        new_estimate = _simpson_sum(refined, h)
        diff = abs(new_estimate - estimate)
        values, panels, estimate = refined, new_panels, new_estimate

        if diff < tol:
            return estimate
        if panels >= max_panels:
            if diff <= fail_tol:
                logger.warning(
                    f"Quadrature [{a:.6g}, {b:.6g}] arretee a {panels} panneaux (ecart={diff:.3e})"
                )
                return estimate
            raise NumericsError(
                f"Quadrature non convergee sur [{a:.6g}, {b:.6g}]: ecart {diff:.3e} > {fail_tol:.1e}"
            )


def golden_section_max(
    objective: ArrayFunc,
    lo: np.ndarray,
    hi: np.ndarray,
    tol: float = 1e-10,
) -> np.ndarray:
    """Section doree vectorisee : maximise `objective` element par element.

    `objective` recoit un tableau de la forme de `lo` (un point par probleme).
    Renvoie le milieu du crochet final, de largeur <= `tol`.
    """
    a = np.array(lo, dtype=float, copy=True)
    b = np.array(hi, dtype=float, copy=True)
    dist = float(np.max(b - a)) if a.size else 0.0
    if dist <= tol:
        return (a + b) / 2.0

    n_iter = int(math.ceil(math.log(tol / dist) / math.log(INV_PHI)))
    c = a + INV_PHI_SQ * (b - a)
    d = a + INV_PHI * (b - a)
    yc = objective(c)
    yd = objective(d)

    for _ in range(n_iter):
        left = yc >= yd
        # maximum a gauche : [a, d]
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = a + INV_PHI_SQ * (b - a)
        new_d = a + INV_PHI * (b - a)
        c_next = np.where(left, new_c, d)
        d_next = np.where(left, c, new_d)
        y_new = objective(np.where(left, new_c, new_d))
        yc, yd = np.where(left, y_new, yd), np.where(left, yc, y_new)
        c, d = c_next, d_next

    return (a + b) / 2.0


def empirical_order(steps: Sequence[float], errors: Sequence[float]) -> float:
    """Ordre de convergence observe (minimum sur les paires successives).

    Renvoie +inf quand les erreurs sont nulles au plancher numerique pres.
    """
    if len(steps) != len(errors) or len(steps) < 2:
        raise ValueError("Au moins deux niveaux (pas, erreur) sont necessaires")
    orders = []
    for (s0, e0), (s1, e1) in zip(zip(steps[:-1], errors[:-1]), zip(steps[1:], errors[1:])):
        if e1 <= EXACT_ERROR_FLOOR:
            orders.append(math.inf)
            continue
        if e0 <= EXACT_ERROR_FLOOR:
            # erreur qui remonte depuis le plancher: pas d'ordre mesurable
            orders.append(0.0)
            continue
        orders.append(math.log(e0 / e1) / math.log(s0 / s1))
    return min(orders)
