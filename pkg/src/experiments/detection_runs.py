"""
Expérience de détection
Courbe de détection d'un rapporteur isolé, batterie Hoeffding, frontière du
régime non détectable et détection par compétition.
"""

from __future__ import annotations

from typing import Dict, List

import numpy as np
import pandas as pd

from experiments.base import ExperimentResult, check, sections
from lab.detection.competition import competition_detection_prob, competition_mc
from lab.detection.hoeffding import (
    DetectionSpec,
    detection_curve,
    hoeffding_sample_bound,
    monte_carlo_se,
    simulate_detection,
)
from loaders.config_loader import DetectionParams

MC_SE_MULTIPLIER = 3.0


def default_horizons(K: int) -> List[int]:
    """Horizons de 10 issues jusqu'à 2K, bornes de Hoeffding incluses."""
    return sorted({10, max(1, K // 8), max(1, K // 4), max(1, K // 2), K, 2 * K})


def run_detection_curves(params: DetectionParams, seed: int) -> ExperimentResult:
    """Détection Monte Carlo contre la borne de Hoeffding et la forme close de compétition."""
    spec = DetectionSpec(delta=params.delta, alpha=params.alpha, trials=params.trials, seed=seed)
    p_true, r_report = params.p_true, params.p_true + params.delta
    K = hoeffding_sample_bound(params.delta, params.alpha)
    horizons = params.horizons or default_horizons(K)
    if K not in horizons:
        horizons = sorted({*horizons, K})

    curve = detection_curve(p_true, r_report, horizons, spec).assign(
        delta=params.delta, alpha=params.alpha, bound=K
    )
    at_bound = curve.loc[curve["K"] == K].iloc[0]
    checks = [
        check(
            "detection_at_bound",
            at_bound["rate"] >= 1.0 - params.alpha - MC_SE_MULTIPLIER * at_bound["se"],
            f"taux={at_bound['rate']:.4f} à K={K} (seuil {1.0 - params.alpha:g})",
        )
    ]

    # Batterie (Δ, α) : validité de la borne et frontière T ≤ ⌊K/8⌋
    battery_rows: List[Dict] = []
    for delta in params.battery_deltas:
        for alpha in params.battery_alphas:
            if p_true + delta > 1.0:
                continue
            sub_spec = DetectionSpec(delta=delta, alpha=alpha, trials=params.trials, seed=seed)
            bound = hoeffding_sample_bound(delta, alpha)
            for label, horizon in (("bound", bound), ("undetectable", max(1, bound // params.nt3_fraction))):
                rate = simulate_detection(p_true, p_true + delta, horizon, sub_spec)
                se = monte_carlo_se(rate, params.trials)
                if label == "bound":
                    passed = rate >= 1.0 - alpha - MC_SE_MULTIPLIER * se
                else:
                    passed = rate < 1.0 - alpha
                battery_rows.append(
                    {"delta": delta, "alpha": alpha, "regime": label, "K": horizon, "bound": bound,
                     "rate": rate, "se": se, "passed": passed}
                )
    battery = pd.DataFrame(battery_rows)
    if not battery.empty:
        hoeffding = battery[battery["regime"] == "bound"]
        boundary = battery[battery["regime"] == "undetectable"]
        checks.append(
            check(
                "hoeffding_validity",
                bool(hoeffding["passed"].all()),
                f"{int(hoeffding['passed'].sum())}/{len(hoeffding)} combinaisons (Δ, α)",
            )
        )
        checks.append(
            check(
                "undetectable_regime",
                bool(boundary["passed"].all()),
                f"{int(boundary['passed'].sum())}/{len(boundary)} horizons T = ⌊K/{params.nt3_fraction}⌋ sous 1 − α",
            )
        )

    # Compétition : σ = 1, Δ = rapport signal/bruit
    competition_rows: List[Dict] = []
    for ratio in params.competition_ratios:
        for n in params.competition_ns:
            comp_spec = DetectionSpec(
                delta=min(ratio, 1.0), sigma=1.0, n=n, trials=params.competition_trials, seed=seed
            )
            closed = competition_detection_prob(ratio, 1.0, n)
            empirical = competition_mc(ratio, 1.0, n, comp_spec)
            competition_rows.append(
                {"ratio": ratio, "n": n, "closed_form": closed, "rate": empirical,
                 "se": monte_carlo_se(empirical, params.competition_trials), "abs_diff": abs(empirical - closed)}
            )
    competition = pd.DataFrame(competition_rows)
    if not competition.empty:
        worst = float(competition["abs_diff"].max())
        checks.append(
            check(
                "competition_closed_form",
                worst <= params.competition_tolerance,
                f"écart max={worst:.4f} (tolérance {params.competition_tolerance:g})",
            )
        )
        trend = all(
            bool(np.all(np.diff(group.sort_values("n")["rate"].to_numpy()) > 0.0))
            for ratio, group in competition.groupby("ratio", sort=True)
            if ratio > 0.0
        )
        checks.append(check("competition_trend", trend, "taux croissant en n à Δ/σ fixé"))

    frame = sections([("curve", curve), ("battery", battery), ("competition", competition)])
    return ExperimentResult(frame=frame, checks=checks)
