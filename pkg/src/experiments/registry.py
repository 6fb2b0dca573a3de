"""Table des expériences exécutables par la CLI."""

from typing import Callable, Dict

from experiments.base import ExperimentResult
from experiments.detection_runs import run_detection_curves
from experiments.market_runs import run_market_inflation
from experiments.oversight_runs import (
    run_affine_gap,
    run_perturbation_check,
    run_regulation,
    run_statics,
    run_step_first_best,
    run_welfare_gap_sweep,
)
from loaders.config_loader import ExperimentConfigBase, ExperimentName

Runner = Callable[..., ExperimentResult]

EXPERIMENTS: Dict[ExperimentName, Runner] = {
    ExperimentName.PERTURBATION_CHECK: run_perturbation_check,
    ExperimentName.STEP_FIRST_BEST: run_step_first_best,
    ExperimentName.AFFINE_GAP: run_affine_gap,
    ExperimentName.WELFARE_GAP_SWEEP: run_welfare_gap_sweep,
    ExperimentName.MARKET_INFLATION: run_market_inflation,
    ExperimentName.DETECTION_CURVES: run_detection_curves,
    ExperimentName.REGULATION: run_regulation,
    ExperimentName.STATICS: run_statics,
}


def run_experiment(config: ExperimentConfigBase) -> ExperimentResult:
    """Exécute l'expérience nommée par la configuration validée."""
    runner = EXPERIMENTS[ExperimentName(config.experiment)]
    return runner(config.parameters, config.seed)
