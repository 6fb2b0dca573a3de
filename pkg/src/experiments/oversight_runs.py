"""
Expériences du rapporteur et de la surveillance
Perturbation au premier ordre, premier rang du seuil en marche, écart affine,
écart lisse de la famille puissance, régulation et statique comparative.
"""

from __future__ import annotations

import math
from typing import Dict, List

import numpy as np
import pandas as pd
from loguru import logger

from experiments.base import ExperimentResult, check, note, sections
from lab.agent.approval import Affine, Step, TabulatedGrid
from lab.agent.reporter import (
    AgentParams,
    best_response,
    first_order_prediction,
    predicted_scoring_loss,
    residual_gamma_threshold,
)
from lab.numerics import empirical_order, integrate
from lab.oversight.game import OversightGame, PrincipalParams, Uniform, optimal_step_threshold, threshold_type
from lab.oversight.screening import (
    affine_welfare_gap,
    check_nt_conditions,
    first_best_utility,
    principal_utility,
    regulation_gain,
    statics_report,
    surplus,
)
from lab.oversight.welfare_gap import GapSearch, power_family_gap_curve, welfare_gap_smooth
from lab.scoring.generators import Generator, GeneratorKind, scoring_regret
from loaders.config_loader import (
    AffineGapParams,
    PerturbationParams,
    RegulationParams,
    StaticsParams,
    StepFirstBestParams,
    WelfareGapParams,
)
from utils.parallel import ordered_map

# Écart à p0 en dessous duquel un rapport est considéré véridique
TRUTHFUL_TOL = 1e-9


# ----------------------------------------------------------------------
# perturbation_check
# ----------------------------------------------------------------------


def run_perturbation_check(params: PerturbationParams, seed: int) -> ExperimentResult:
    """Formule de perturbation (ordre de Richardson), loi quadratique de la perte et types résiduels."""
    game = params.game.build()
    gen, beta = game.gen, game.agent.beta
    q = params.approval.build()

    # 1. Ordre de convergence de |r* − prédiction|
    order_rows: List[Dict] = []
    errors: List[float] = []
    for k, gamma in enumerate(params.gammas):
        agent = AgentParams(beta=beta, gamma=gamma)
        response = best_response(gen, q, agent, params.p)
        prediction = first_order_prediction(gen, q, agent, params.p)
        errors.append(abs(response - prediction))
        local = math.nan if k == 0 else empirical_order(params.gammas[k - 1:k + 1], errors[k - 1:k + 1])
        order_rows.append(
            {
                "approval": q.label,
                "p": params.p,
                "gamma": gamma,
                "best_response": response,
                "first_order_prediction": prediction,
                "abs_error": errors[-1],
                "order": local,
            }
        )
    order = empirical_order(params.gammas, errors)
    checks = [check("perturbation_order", order >= params.min_order, f"ordre={order:.4g} (min {params.min_order:g})")]

    # 2. Perte de score quadratique en γ
    loss_agent = AgentParams(beta=beta, gamma=params.loss_gamma)
    loss_rows: List[Dict] = []
    lo_band, hi_band = params.loss_band
    for approval in params.loss_approvals:
        q_loss = approval.build()
        for p in params.loss_types:
            response = best_response(gen, q_loss, loss_agent, p)
            actual = beta * scoring_regret(gen, response, p)
            predicted = predicted_scoring_loss(gen, q_loss, loss_agent, p)
            ratio = actual / predicted if predicted > 0.0 else math.nan
            loss_rows.append(
                {
                    "approval": q_loss.label,
                    "p": p,
                    "gamma": params.loss_gamma,
                    "best_response": response,
                    "actual_loss": actual,
                    "predicted_loss": predicted,
                    "ratio": ratio,
                }
            )
    ratios = np.array([row["ratio"] for row in loss_rows])
    in_band = bool(np.all((ratios >= lo_band) & (ratios <= hi_band)))
    checks.append(
        check(
            "scoring_loss_quadratic",
            in_band,
            f"ratios dans [{np.nanmin(ratios):.4f}, {np.nanmax(ratios):.4f}] (bande [{lo_band:g}, {hi_band:g}])",
        )
    )

    # 3. Type résiduel à gradient nul : q(r) = (r − p0)²
    p0 = params.residual_p0
    q_res = TabulatedGrid.from_function(lambda r: (r - p0) ** 2)
    threshold = residual_gamma_threshold(gen, beta, p0, q_res)
    gamma_bar = threshold.effective
    residual_rows: List[Dict] = []
    for factor in (0.5, 1.5):
        agent = AgentParams(beta=beta, gamma=factor * gamma_bar)
        response = best_response(gen, q_res, agent, p0)
        residual_rows.append(
            {
                "approval": q_res.label,
                "p": p0,
                "gamma": agent.gamma,
                "best_response": response,
                "gamma_local": threshold.gamma_local,
                "gamma_global": threshold.gamma_global,
                "truthful": abs(response - p0) <= TRUTHFUL_TOL,
            }
        )
    below, above = residual_rows
    checks.append(
        check(
            "residual_threshold",
            below["truthful"] and not above["truthful"],
            f"γ̄={gamma_bar:.6g}: r*(0.5γ̄)={below['best_response']:.6g}, r*(1.5γ̄)={above['best_response']:.6g}",
        )
    )

    frame = sections(
        [
            ("order", pd.DataFrame(order_rows)),
            ("loss", pd.DataFrame(loss_rows)),
            ("residual", pd.DataFrame(residual_rows)),
        ]
    )
    return ExperimentResult(frame=frame, checks=checks)


# ----------------------------------------------------------------------
# step_first_best
# ----------------------------------------------------------------------


def _step_row(game: OversightGame) -> Dict:
    r0 = optimal_step_threshold(game)
    utility = principal_utility(game, Step(r0))
    first_best = first_best_utility(game)
    return {
        "generator": game.gen.label,
        "gamma": game.agent.gamma,
        "beta": game.agent.beta,
        "p_min": game.p_min,
        "r0": r0,
        "p_star": threshold_type(game, r0).p_star,
        "utility": utility,
        "first_best": first_best,
        "abs_diff": abs(utility - first_best),
    }


def run_step_first_best(params: StepFirstBestParams, seed: int) -> ExperimentResult:
    """Le seuil optimal atteint le premier rang : grille Brier, famille puissance, condition du premier ordre."""
    base = params.game.build()
    brier = base.with_generator(Generator.brier())

    games: List[OversightGame] = []
    for gamma in params.gammas:
        for beta in params.betas:
            for pm in params.p_mins:
                principal = PrincipalParams(u_s=1.0, u_f=-1.0, u_d=2.0 * pm - 1.0)
                game = OversightGame(brier.gen, principal, AgentParams(beta=beta, gamma=gamma), brier.dist)
                if game.non_degenerate:
                    games.append(game)
                else:
                    logger.warning(f"Combinaison dégénérée ignorée: γ={gamma:g}, β={beta:g}, p_min={pm:g}")

    brier_rows = ordered_map(_step_row, games, desc="grille Brier")
    worst = max((row["abs_diff"] for row in brier_rows), default=math.inf)
    checks = [
        check(
            "brier_first_best",
            bool(brier_rows) and worst < params.tolerance,
            f"{len(brier_rows)} combinaisons, écart max={worst:.3e}",
        )
    ]

    lo, hi = params.power_domain
    power_rows = []
    for alpha in params.power_alphas:
        game = OversightGame(Generator.power(alpha, lo, hi), base.principal, base.agent, Uniform(lo, hi))
        power_rows.append(_step_row(game))
    power_ok = all(
        abs(row["p_star"] - row["p_min"]) < params.threshold_tolerance and row["abs_diff"] < params.tolerance
        for row in power_rows
    )
    checks.append(check("power_first_best", power_ok, f"{len(power_rows)} générateurs puissance"))

    # Condition du premier ordre : meilleur seuil de la grille fine
    r0_star = optimal_step_threshold(base)
    grid = np.linspace(base.p_min, base.gen.domain_hi, params.foc_points)
    utilities = ordered_map(lambda r0: principal_utility(base, Step(float(r0))), grid, desc="seuils")
    best = float(grid[int(np.argmax(utilities))])
    step = float(grid[1] - grid[0])
    foc_rows = [{"generator": base.gen.label, "r0": float(r), "utility": u} for r, u in zip(grid, utilities)]
    checks.append(
        check("step_threshold_foc", abs(best - r0_star) <= step + 1e-12, f"argmax grille={best:.6g}, r0={r0_star:.6g}")
    )

    frame = sections(
        [
            ("brier", pd.DataFrame(brier_rows)),
            ("power", pd.DataFrame(power_rows)),
            ("foc", pd.DataFrame(foc_rows)),
        ]
    )
    return ExperimentResult(frame=frame, checks=checks)


# ----------------------------------------------------------------------
# affine_gap
# ----------------------------------------------------------------------


def run_affine_gap(params: AffineGapParams, seed: int) -> ExperimentResult:
    """Aucune approbation affine n'atteint le premier rang."""
    game = params.game.build()
    first_best = first_best_utility(game)
    pairs = [(a, b) for a in params.a_values for b in params.b_values]
    gaps = ordered_map(lambda ab: first_best - principal_utility(game, Affine(*ab)), pairs, desc="grille affine")
    frame = pd.DataFrame([{"a": a, "b": b, "gap": g} for (a, b), g in zip(pairs, gaps)], columns=["a", "b", "gap"])

    lo, hi = game.dist.support
    two_sided = lo < game.p_min < hi
    smallest = min(gaps)
    checks = [
        check(
            "affine_gap_positive",
            smallest > 0.0 or not two_sided,
            f"{len(gaps)} couples (a, b), écart min={smallest:.6g}",
        )
    ]

    a0, b0 = params.canonical
    canonical_gap = affine_welfare_gap(game, a0, b0)
    if params.oracle_gap is not None:
        checks.append(
            check(
                "affine_gap_oracle",
                abs(canonical_gap - params.oracle_gap) <= params.oracle_tolerance,
                f"écart({a0:g}, {b0:g})={canonical_gap:.6g} vs oracle {params.oracle_gap:g}",
            )
        )
    return ExperimentResult(frame=frame, checks=checks)


# ----------------------------------------------------------------------
# welfare_gap_sweep
# ----------------------------------------------------------------------


def run_welfare_gap_sweep(params: WelfareGapParams, seed: int) -> ExperimentResult:
    """Écart lisse de la famille puissance : nul en α = 2, borné par le premier rang, évanescent quand τ → 0.

    L'ordre en |α − 2| et la loi (γ/β)² de l'écart sont rapportés en constats
    informatifs : le seuil en marche atteint le premier rang pour tout G et la
    sigmoïde y converge, donc l'écart lisse tend vers 0 avec tau_min.
    """
    template = params.game.build()
    search = GapSearch(
        r_min_values=tuple(params.r_min_values),
        tau_values=tuple(params.tau_values),
        refine=params.refine,
        max_evals=params.max_evals,
    )
    curve = power_family_gap_curve(template, params.alphas, params.tau_min, search)
    coarse = power_family_gap_curve(template, params.alphas, params.tau_min_coarse, search)
    checks = []

    at_two = curve.loc[np.isclose(curve["alpha"], 2.0), "gap_hat"]
    lo, hi = template.gen.domain_lo, template.gen.domain_hi
    if not at_two.empty:
        gap_two = float(at_two.iloc[0])
        checks.append(
            check(
                "gap_at_brier",
                gap_two <= params.gap_at_two_max,
                f"gap_hat(2)={gap_two:.3e} (max {params.gap_at_two_max:g})",
            )
        )
        brier = template.with_generator(Generator(kind=GeneratorKind.BRIER, domain_lo=lo, domain_hi=hi))
        brier_gap = welfare_gap_smooth(brier, params.tau_min, search).gap_hat
        identity = abs(brier_gap - gap_two)
        checks.append(
            check(
                "power_two_matches_brier",
                identity <= params.identity_tolerance,
                f"|gap_hat(power 2) − gap_hat(brier)|={identity:.3e}",
            )
        )

    smallest = float(curve["gap_hat"].min())
    checks.append(
        check("gap_nonnegative", smallest >= -params.identity_tolerance, f"gap_hat min={smallest:.3e}")
    )

    ratios = (curve["gap_hat"] / coarse["gap_hat"]).to_numpy()
    vanishing = bool(np.all((curve["gap_hat"] <= params.tau_ratio_max * coarse["gap_hat"]).to_numpy()))
    checks.append(
        check(
            "gap_vanishes_with_tau",
            vanishing,
            f"gap_hat(τ≥{params.tau_min:g})/gap_hat(τ≥{params.tau_min_coarse:g}) ≤ {ratios.max():.4g} "
            f"(max {params.tau_ratio_max:g})",
        )
    )

    by_distance = curve.assign(distance=(curve["alpha"] - 2.0).abs()).sort_values("distance", kind="stable")
    dispersion_ok = all(
        _strictly_increasing(side, "var_inv_curvature")
        for side in (by_distance[by_distance["alpha"] >= 2.0], by_distance[by_distance["alpha"] <= 2.0])
    )
    checks.append(
        check("curvature_dispersion_ordering", dispersion_ok, "Var(1/G'') croissant en |α − 2| de chaque côté")
    )

    # Constats : ordre en |α − 2| et loi (γ/β)² à γ multiplié par `scaling_factor`
    ordering = _strictly_increasing(by_distance, "gap_hat")
    checks.append(
        note(
            "gap_ordering",
            ordering,
            "gap_hat en |α − 2|: " + ", ".join(f"{a:g}→{g:.3e}" for a, g in zip(curve["alpha"], curve["gap_hat"])),
        )
    )

    scaled_game = template.with_generator(Generator.power(params.scaling_alpha, domain_lo=lo, domain_hi=hi))
    base_gap = welfare_gap_smooth(scaled_game, params.tau_min, search).gap_hat
    boosted = scaled_game.with_agent(
        AgentParams(beta=template.agent.beta, gamma=template.agent.gamma * params.scaling_factor)
    )
    boosted_gap = welfare_gap_smooth(boosted, params.tau_min, search).gap_hat
    ratio = boosted_gap / base_gap if base_gap > 0.0 else math.inf
    band_lo, band_hi = params.scaling_band
    scaling_holds = band_lo <= ratio <= band_hi
    checks.append(
        note(
            "gap_gamma_scaling",
            scaling_holds,
            f"gap_hat({params.scaling_factor:g}γ)/gap_hat(γ)={ratio:.4g} (bande [{band_lo:g}, {band_hi:g}])",
        )
    )

    spread = float(by_distance["gap_hat"].iloc[-1] - by_distance["gap_hat"].iloc[0])
    claims = pd.DataFrame(
        [
            {"claim": "gap_ordering", "observed": spread, "holds": ordering},
            {"claim": "gap_gamma_scaling", "observed": ratio, "holds": scaling_holds},
        ]
    )
    scaling = pd.DataFrame(
        [
            {"alpha": params.scaling_alpha, "gamma": template.agent.gamma, "gap_hat": base_gap},
            {"alpha": params.scaling_alpha, "gamma": boosted.agent.gamma, "gap_hat": boosted_gap, "ratio": ratio},
        ]
    )
    frame = sections(
        [
            ("curve", curve.assign(gamma=template.agent.gamma, tau_floor=params.tau_min)),
            ("coarse", coarse.assign(gamma=template.agent.gamma, tau_floor=params.tau_min_coarse)),
            ("scaling", scaling),
            ("claims", claims),
        ]
    )
    return ExperimentResult(frame=frame, checks=checks)


def _strictly_increasing(ordered: pd.DataFrame, column: str) -> bool:
    """Valeurs strictement croissantes entre lignes de distance strictement croissante."""
    distances, values = ordered["distance"].to_numpy(), ordered[column].to_numpy()
    return all(v1 > v0 for d0, d1, v0, v1 in zip(distances[:-1], distances[1:], values[:-1], values[1:]) if d1 > d0)


# ----------------------------------------------------------------------
# regulation
# ----------------------------------------------------------------------


def run_regulation(params: RegulationParams, seed: int) -> ExperimentResult:
    """Gain de régulation par approbation organique, conditions NT et témoins analytiques."""
    game = params.game.build()
    approvals = [cfg.build() for cfg in params.approvals]
    first_best_step = None
    if game.non_degenerate:
        first_best_step = Step(optimal_step_threshold(game))
        approvals.append(first_best_step)

    rows: List[Dict] = []
    for q in approvals:
        nt = check_nt_conditions(game, q)
        for c_reg in params.c_reg_values:
            result = regulation_gain(game, q, c_reg)
            rows.append(
                {
                    "approval": q.label,
                    "c_reg": c_reg,
                    "gain": result.gain,
                    "gain_quadratic": result.gain_quadratic,
                    "regulate": result.regulate,
                    "nt1": nt.nt1,
                    "nt2": nt.nt2,
                    "nt3": nt.nt3,
                    "binding_mass": nt.binding_mass,
                }
            )
    frame = pd.DataFrame(rows)
    checks = []

    # approbation constante égale à 1 : gain = ∫_{p < p_min} |Π| f
    principal, dist, pm = game.principal, game.dist, game.p_min
    lo, _ = dist.support
    oracle = integrate(lambda p: np.abs(surplus(principal, p)) * dist.pdf(p), lo, pm) if pm > lo else 0.0
    constant_labels = [q.label for q in approvals if isinstance(q, Affine) and q.b == 0.0 and q.a >= 1.0]
    if constant_labels:
        gains = frame.loc[frame["approval"].isin(constant_labels), "gain"].to_numpy()
        checks.append(
            check(
                "regulation_constant_oracle",
                bool(np.all(np.abs(gains - oracle) <= 1e-6)),
                f"gain={gains[0]:.6g} vs oracle {oracle:.6g}",
            )
        )
    if first_best_step is not None:
        fb = frame[(frame["approval"] == first_best_step.label) & (frame["c_reg"] > 0.0)]
        checks.append(
            check(
                "regulation_first_best_idle",
                not bool(fb["regulate"].any()),
                f"{first_best_step.label}: gain max={frame.loc[frame['approval'] == first_best_step.label, 'gain'].max():.3e}",
            )
        )
    return ExperimentResult(frame=frame, checks=checks)


# ----------------------------------------------------------------------
# statics
# ----------------------------------------------------------------------


def _uniform_first_best(game: OversightGame) -> float:
    """U* sous Uniform(lo, hi) : Π affine de pente u_s − u_f, intégrée sur [max(p_min, lo), hi]."""
    u = game.principal
    lo, hi = game.dist.support
    pm = game.p_min
    if pm >= hi:
        return u.u_d
    start = max(pm, lo)
    return u.u_d + (u.u_s - u.u_f) * ((hi - pm) ** 2 - (start - pm) ** 2) / (2.0 * (hi - lo))


def _hoeffding_guarantee(delta: float, alpha: float, k: int) -> bool:
    """K garantit 2·exp(−KΔ²/2) ≤ α et K − 1 ne le garantit pas."""
    def level(m: int) -> float:
        return 2.0 * math.exp(-m * delta**2 / 2.0)

    return level(k) <= alpha * (1.0 + 1e-12) and (k <= 1 or level(k - 1) > alpha)


def run_statics(params: StaticsParams, seed: int) -> ExperimentResult:
    """Sensibilités de p_min, invariance de r0 en F, taille d'échantillon et bien-être de population."""
    game = params.game.build()
    report = statics_report(game, delta=params.delta, alpha=params.alpha, n_agents=params.n_agents)
    u = game.principal
    span = u.u_s - u.u_f
    expected = {
        "dpmin_du_s": -(u.u_d - u.u_f) / span**2,
        "dpmin_du_f": (u.u_d - u.u_s) / span**2,
        "dpmin_du_d": 1.0 / span,
    }
    uniform = isinstance(game.dist, Uniform)
    welfare_expected = params.n_agents * _uniform_first_best(game) if uniform else math.nan

    rows = [
        {"quantity": "p_min", "value": report.p_min},
        *({"quantity": name, "value": getattr(report, name), "expected": value} for name, value in expected.items()),
        *({"quantity": f"r0[{label}]", "value": r0} for label, r0 in report.r0_by_distribution.items()),
        {"quantity": "r0_spread", "value": report.r0_spread},
        {"quantity": "sample_size", "value": report.sample_size},
        {"quantity": "population_welfare", "value": report.population_welfare, "expected": welfare_expected},
    ]
    frame = pd.DataFrame(rows, columns=["quantity", "value", "expected"])

    sensitivities_ok = all(abs(getattr(report, k) - v) <= params.tolerance for k, v in expected.items())
    checks = [
        check(
            "pmin_sensitivities",
            sensitivities_ok and report.dpmin_du_d > 0.0,
            f"∂p_min/∂u_d={report.dpmin_du_d:.6g} (attendu {expected['dpmin_du_d']:.6g})",
        ),
        check("r0_distribution_free", report.r0_spread <= 1e-12, f"écart={report.r0_spread:.3e}"),
        check(
            "cross_agent_sample_size",
            _hoeffding_guarantee(params.delta, params.alpha, report.sample_size),
            f"n(Δ={params.delta:g}, α={params.alpha:g})={report.sample_size}, "
            f"2·exp(−nΔ²/2)={2.0 * math.exp(-report.sample_size * params.delta**2 / 2.0):.4g}",
        ),
    ]
    if uniform:
        checks.append(
            check(
                "population_welfare",
                abs(report.population_welfare - welfare_expected) <= params.tolerance,
                f"n·U*={report.population_welfare:.6g} (forme close {welfare_expected:.6g})",
            )
        )
    return ExperimentResult(frame=frame, checks=checks)
