"""
Module de filtrage induit
q̃(p) = q(r*(p)) après meilleure réponse de l'agent, intégrales de bien-être du
principal, condition de régulation et statique comparative.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence

import numpy as np
from loguru import logger

from lab.agent.approval import Affine, ApprovalFunction, Step
from lab.agent.reporter import best_response_batch, report_grid
from lab.detection.hoeffding import hoeffding_sample_bound
from lab.errors import ParameterError
from lab.numerics import integrate
from lab.oversight.game import (
    Beta,
    OversightGame,
    PrincipalParams,
    Uniform,
    optimal_step_threshold,
    p_min,
    surplus,
    threshold_type,
)

SCAN_POINTS = 513
JUMP_SIZE = 0.05
JUMP_XTOL = 1e-12
# Décalage des noeuds d'extrémité vers l'intérieur d'un segment (limites latérales)
EDGE_NUDGE = 1e-10

Weight = Callable[[np.ndarray, np.ndarray], np.ndarray]


def induced_screening_batch(game: OversightGame, q: ApprovalFunction, types: np.ndarray) -> np.ndarray:
    """q̃ vectorisée sur un tableau de types."""
    responses = best_response_batch(game.gen, q, game.agent, types)
    return np.asarray(q(responses), dtype=float)


def induced_screening(game: OversightGame, q: ApprovalFunction, p: float) -> float:
    """Probabilité d'approbation subie par le type p : q(r*(p))."""
    game.gen.check_domain("p", p)
    return float(induced_screening_batch(game, q, np.array([p]))[0])


def _step_breakpoints(game: OversightGame, q: Step) -> List[float]:
    if not game.gen.domain_lo <= q.r0 <= game.gen.domain_hi:
        return []
    cut = threshold_type(game, q.r0)
    return [] if cut.all_inflate else [cut.p_star]


def _located_jumps(game: OversightGame, q: ApprovalFunction, lo: float, hi: float) -> List[float]:
    """Balayage des types puis bissection simultanée sur chaque saut détecté."""
    types = np.linspace(lo, hi, SCAN_POINTS)
    values = induced_screening_batch(game, q, types)
    idx = np.flatnonzero(np.abs(np.diff(values)) > JUMP_SIZE)
    if idx.size == 0:
        return []

    a, b = types[idx].copy(), types[idx + 1].copy()
    qa, qb = values[idx], values[idx + 1]
    while float(np.max(b - a)) > JUMP_XTOL:
        mid = 0.5 * (a + b)
        qm = induced_screening_batch(game, q, mid)
        left_side = np.abs(qm - qa) <= np.abs(qm - qb)
        a = np.where(left_side, mid, a)
        b = np.where(left_side, b, mid)
    jumps = [float(x) for x in 0.5 * (a + b)]
    logger.debug(f"Sauts de q̃ pour {q.label}: {', '.join(f'{x:.10g}' for x in jumps)}")
    return jumps


def _affine_kinks(game: OversightGame, q: Affine) -> List[float]:
    """Types dont la réponse touche une saturation c : c lui-même et c − γb/(β·G''(c))."""
    gen, agent = game.gen, game.agent
    kinks: List[float] = []
    for c in q.clamp_points:
        if not gen.domain_lo <= c <= gen.domain_hi or (c <= 0.0 and not gen.is_quadratic):
            continue
        kinks.extend([c, c - agent.gamma * q.b / (agent.beta * float(gen.second_derivative(c)))])
    return kinks


def screening_breakpoints(game: OversightGame, q: ApprovalFunction) -> List[float]:
    """Discontinuités de q̃ (et coudes des réponses affines) dans le support des types."""
    lo, hi = game.dist.support
    if isinstance(q, Step):
        cuts = _step_breakpoints(game, q)
    else:
        cuts = _located_jumps(game, q, lo, hi)
        if isinstance(q, Affine):
            cuts = [*cuts, *_affine_kinks(game, q)]
    return sorted({x for x in cuts if lo < x < hi})


def _screening_integral(
    game: OversightGame,
    q: ApprovalFunction,
    weight: Weight,
    extra_breaks: Sequence[float] = (),
) -> float:
    """∫ weight(p, q̃(p)) dp sur le support, découpé aux discontinuités de q̃.

    q̃ est évaluée à l'intérieur strict de chaque segment : les noeuds d'extrémité
    prennent la limite latérale.
    """
    lo, hi = game.dist.support
    cuts = sorted({*screening_breakpoints(game, q), *(x for x in extra_breaks if lo < x < hi)})
    edges = [lo, *cuts, hi]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b - a <= 1e-14:
            continue
        nudge = min(EDGE_NUDGE, (b - a) / 4.0)

        def integrand(p: np.ndarray, a=a, b=b, nudge=nudge) -> np.ndarray:
            inner = np.clip(p, a + nudge, b - nudge)
            return weight(p, induced_screening_batch(game, q, inner))

        total += integrate(integrand, a, b)
    return total


def principal_utility(game: OversightGame, q: ApprovalFunction) -> float:
    """U_P(q) = u_d + ∫ q̃(p)·Π(p)·f(p) dp."""
    principal, dist = game.principal, game.dist

    def weight(p: np.ndarray, screened: np.ndarray) -> np.ndarray:
        return screened * surplus(principal, p) * dist.pdf(p)

    return principal.u_d + _screening_integral(game, q, weight)


def first_best_utility(game: OversightGame) -> float:
    """u_d + ∫_{p_min}^{hi} Π(p) f(p) dp."""
    principal, dist = game.principal, game.dist
    lo, hi = dist.support
    start = max(game.p_min, lo)
    if start >= hi:
        return principal.u_d
    return principal.u_d + integrate(lambda p: surplus(principal, p) * dist.pdf(p), start, hi)


def affine_welfare_gap(game: OversightGame, a: float, b: float) -> float:
    """Perte de bien-être de l'approbation affine clamp(a + b·r) face au premier rang."""
    return first_best_utility(game) - principal_utility(game, Affine(a, b))


@dataclass(frozen=True)
class RegulationGain:
    gain: float
    gain_quadratic: float
    c_reg: float
    regulate: bool


def regulation_gain(game: OversightGame, q_organic: ApprovalFunction, c_reg: float) -> RegulationGain:
    """Bien-être récupéré en imposant le filtrage de premier rang ; régule si gain > C_reg."""
    if c_reg < 0.0:
        raise ParameterError(f"Coût de régulation c_reg={c_reg} (doit être ≥ 0)")
    principal, dist, pm = game.principal, game.dist, game.p_min

    def linear(p: np.ndarray, screened: np.ndarray) -> np.ndarray:
        pi = surplus(principal, p)
        lost = np.where(p < pm, screened * np.abs(pi), (1.0 - screened) * pi)
        return lost * dist.pdf(p)

    def quadratic(p: np.ndarray, screened: np.ndarray) -> np.ndarray:
        target = (p >= pm).astype(float)
        return np.abs(surplus(principal, p)) * (target - screened) ** 2 * dist.pdf(p)

    gain = _screening_integral(game, q_organic, linear, extra_breaks=[pm])
    gain_quadratic = _screening_integral(game, q_organic, quadratic, extra_breaks=[pm])
    result = RegulationGain(gain=gain, gain_quadratic=gain_quadratic, c_reg=c_reg, regulate=gain > c_reg)
    logger.info(
        f"Régulation {q_organic.label}: gain={gain:.6g} (quadratique {gain_quadratic:.6g}) "
        f"vs C_reg={c_reg:g} → {'réguler' if result.regulate else 'laisser faire'}"
    )
    return result


# ----------------------------------------------------------------------
# Conditions NT et statique comparative
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class NTConditions:
    nt1: bool
    nt2: bool
    nt3: bool
    binding_mass: float


def check_nt_conditions(game: OversightGame, q: ApprovalFunction) -> NTConditions:
    """Vérifications numériques des conditions de conflit, de non-affinité et d'indétectabilité."""
    gen, dist = game.gen, game.dist
    lo, hi = dist.support
    grid = report_grid(gen)
    q_grid = np.asarray(q(grid), dtype=float)
    q_sup = float(q_grid.max())

    mids, weights = dist.midpoint_weights(lo, hi)
    binding = np.asarray(q(mids), dtype=float) < q_sup - 1e-9
    binding_mass = float(weights[binding].sum())
    nt1 = game.agent.gamma > 0.0 and binding_mass > 0.0

    if isinstance(q, Step):
        nt2 = True
    else:
        second = q_grid[2:] - 2.0 * q_grid[1:-1] + q_grid[:-2]
        inner = grid[1:-1]
        region = (q_grid[1:-1] < q_sup - 1e-9) & (inner >= lo) & (inner <= hi)
        nt2 = bool(np.any(np.abs(second[region]) > 1e-12))

    types = np.linspace(lo, hi, SCAN_POINTS)
    responses = best_response_batch(gen, q, game.agent, types)
    nt3 = bool(np.all((responses >= lo - 1e-12) & (responses <= hi + 1e-12)))

    return NTConditions(nt1=nt1, nt2=nt2, nt3=nt3, binding_mass=binding_mass)


def population_welfare(game: OversightGame, n_agents: int) -> float:
    """Bien-être sous seuil commun pour n agents indépendants : n·U*."""
    if n_agents < 1:
        raise ParameterError(f"Population n_agents={n_agents} (doit être ≥ 1)")
    return n_agents * first_best_utility(game)


def _p_min_partial(principal: PrincipalParams, name: str, step: float = 1e-6) -> float:
    fields = {"u_s": principal.u_s, "u_f": principal.u_f, "u_d": principal.u_d}
    # le pas reste sous l'écart le plus serré pour conserver u_s > u_d > u_f
    margin = min(principal.u_s - principal.u_d, principal.u_d - principal.u_f)
    step = min(step, 0.25 * margin)
    up, down = dict(fields), dict(fields)
    up[name] += step
    down[name] -= step
    return (p_min(PrincipalParams(**up)) - p_min(PrincipalParams(**down))) / (2.0 * step)


@dataclass
class StaticsReport:
    p_min: float
    dpmin_du_s: float
    dpmin_du_f: float
    dpmin_du_d: float
    r0_by_distribution: Dict[str, float] = field(default_factory=dict)
    sample_delta: float = 0.1
    sample_alpha: float = 0.05
    sample_size: int = 0
    n_agents: int = 1
    population_welfare: float = 0.0

    @property
    def r0_spread(self) -> float:
        values = list(self.r0_by_distribution.values())
        return max(values) - min(values) if values else 0.0


def statics_report(
    game: OversightGame,
    delta: float = 0.1,
    alpha: float = 0.05,
    n_agents: int = 10,
) -> StaticsReport:
    """Sensibilités de p_min, invariance de r0 en F, taille d'échantillon inter-agents."""
    principal = game.principal
    report = StaticsReport(
        p_min=game.p_min,
        dpmin_du_s=_p_min_partial(principal, "u_s"),
        dpmin_du_f=_p_min_partial(principal, "u_f"),
        dpmin_du_d=_p_min_partial(principal, "u_d"),
        sample_delta=delta,
        sample_alpha=alpha,
        sample_size=hoeffding_sample_bound(delta, alpha),
        n_agents=n_agents,
        population_welfare=population_welfare(game, n_agents),
    )

    gen = game.gen
    candidates = [game.dist, Uniform(gen.domain_lo, gen.domain_hi)]
    if gen.domain_lo == 0.0 and gen.domain_hi == 1.0:
        candidates.append(Beta(2.0, 2.0))
    for dist in candidates:
        if dist.label not in report.r0_by_distribution:
            report.r0_by_distribution[dist.label] = optimal_step_threshold(game.with_distribution(dist))

    logger.info(
        f"Statique comparative: ∂p_min/∂u_d={report.dpmin_du_d:.6g}, "
        f"écart r0 entre distributions={report.r0_spread:.3e}, n(Δ={delta:g}, α={alpha:g})={report.sample_size}"
    )
    return report
