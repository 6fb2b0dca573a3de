"""
Chargement des configurations d'expérience
Document JSON {"experiment", "parameters", "output_path", "seed"} validé par des
modèles pydantic (un modèle de paramètres par expérience, champs inconnus rejetés).
"""

from __future__ import annotations

import hashlib
import json
from enum import Enum
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError, field_validator, model_validator

from lab.agent.approval import Affine, ApprovalFunction, Sigmoid, Step, TabulatedGrid
from lab.agent.reporter import AgentParams
from lab.errors import ConfigError, LabError
from lab.market.operator import MarketInstance
from lab.oversight.game import Beta, OversightGame, PrincipalParams, TypeDistribution, Uniform
from lab.scoring.generators import Generator
from loaders.market_loader import load_market_instance, parse_market_instance

SEED_MAX = 2**64 - 1

PositiveFloat = Annotated[float, Field(gt=0.0)]
Probability = Annotated[float, Field(ge=0.0, le=1.0)]


class ExperimentName(str, Enum):
    PERTURBATION_CHECK = "perturbation_check"
    STEP_FIRST_BEST = "step_first_best"
    AFFINE_GAP = "affine_gap"
    WELFARE_GAP_SWEEP = "welfare_gap_sweep"
    MARKET_INFLATION = "market_inflation"
    DETECTION_CURVES = "detection_curves"
    REGULATION = "regulation"
    STATICS = "statics"


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class BuildableModel(StrictModel):
    """Modèle traduit en objet métier ; les invariants de l'objet remontent comme erreurs de champ."""

    @model_validator(mode="after")
    def check_build(self):
        try:
            self.build()
        except LabError as exc:
            raise ValueError(str(exc)) from exc
        return self

    def build(self) -> Any:
        raise NotImplementedError


# ----------------------------------------------------------------------
# Briques communes
# ----------------------------------------------------------------------


class GeneratorConfig(BuildableModel):
    kind: Literal["brier", "power"] = "brier"
    alpha: float = Field(2.0, gt=1.0, le=10.0)
    domain_lo: Optional[Probability] = None
    domain_hi: Optional[Probability] = None

    def build(self) -> Generator:
        if self.kind == "brier":
            if self.domain_lo is not None or self.domain_hi is not None:
                return Generator(domain_lo=self.domain_lo or 0.0, domain_hi=1.0 if self.domain_hi is None else self.domain_hi)
            return Generator.brier()
        return Generator.power(self.alpha, self.domain_lo, self.domain_hi)


class PrincipalConfig(StrictModel):
    u_s: float = 1.0
    u_f: float = -1.0
    u_d: float = 0.0

    @model_validator(mode="after")
    def check_ordering(self):
        if not self.u_s > self.u_d > self.u_f:
            raise ValueError(f"u_s > u_d > u_f attendu (reçu u_s={self.u_s}, u_d={self.u_d}, u_f={self.u_f})")
        return self

    def build(self) -> PrincipalParams:
        return PrincipalParams(self.u_s, self.u_f, self.u_d)


class AgentConfig(StrictModel):
    beta: PositiveFloat = 1.0
    gamma: float = Field(0.04, ge=0.0)

    def build(self) -> AgentParams:
        return AgentParams(beta=self.beta, gamma=self.gamma)


class DistributionConfig(BuildableModel):
    kind: Literal["uniform", "beta"] = "uniform"
    lo: Probability = 0.0
    hi: Probability = 1.0
    a: float = Field(2.0, gt=0.0, le=50.0)
    b: float = Field(2.0, gt=0.0, le=50.0)

    def build(self) -> TypeDistribution:
        if self.kind == "beta":
            return Beta(self.a, self.b)
        return Uniform(self.lo, self.hi)


class GameConfig(BuildableModel):
    """Jeu canonique par défaut : Brier, Uniform(0,1), u=(1,−1,0), β=1, γ=0.04."""

    generator: GeneratorConfig = GeneratorConfig()
    principal: PrincipalConfig = PrincipalConfig()
    agent: AgentConfig = AgentConfig()
    distribution: DistributionConfig = DistributionConfig()

    def build(self) -> OversightGame:
        return OversightGame(
            gen=self.generator.build(),
            principal=self.principal.build(),
            agent=self.agent.build(),
            dist=self.distribution.build(),
        )


class ApprovalConfig(BuildableModel):
    kind: Literal["affine", "sigmoid", "step", "tabulated"] = "sigmoid"
    a: float = 0.0
    b: float = 1.0
    r_min: Probability = 0.5
    tau: PositiveFloat = 0.05
    r0: Probability = 0.7
    values: Optional[List[Probability]] = Field(None, min_length=3)

    def build(self) -> ApprovalFunction:
        if self.kind == "affine":
            return Affine(self.a, self.b)
        if self.kind == "step":
            return Step(self.r0)
        if self.kind == "tabulated":
            if self.values is None:
                raise ValueError("values requis pour une approbation tabulée")
            return TabulatedGrid(tuple(self.values))
        return Sigmoid(self.r_min, self.tau)


def _grid(lo: float, hi: float, points: int) -> List[float]:
    return [float(x) for x in np.round(np.linspace(lo, hi, points), 10)]


# ----------------------------------------------------------------------
# Paramètres par expérience
# ----------------------------------------------------------------------


class PerturbationParams(StrictModel):
    game: GameConfig = GameConfig()
    approval: ApprovalConfig = ApprovalConfig(kind="sigmoid", r_min=0.5, tau=0.05)
    p: Probability = 0.5
    gammas: List[PositiveFloat] = Field(default_factory=lambda: [1e-2, 5e-3, 2.5e-3], min_length=2)
    min_order: PositiveFloat = 1.8
    loss_gamma: PositiveFloat = 1e-3
    loss_types: List[Probability] = Field(default_factory=lambda: [0.3, 0.4, 0.5, 0.6, 0.7], min_length=1)
    loss_approvals: List[ApprovalConfig] = Field(
        default_factory=lambda: [ApprovalConfig(kind="affine", a=0.0, b=1.0), ApprovalConfig(kind="sigmoid")],
        min_length=1,
    )
    loss_band: Tuple[PositiveFloat, PositiveFloat] = (0.95, 1.05)
    residual_p0: Probability = 0.5

    @field_validator("approval", "loss_approvals")
    @classmethod
    def check_differentiable(cls, value):
        for item in value if isinstance(value, list) else [value]:
            if item.kind == "step":
                raise ValueError("l'approbation doit être dérivable (affine, sigmoid ou tabulated)")
        return value


class StepFirstBestParams(StrictModel):
    game: GameConfig = GameConfig()
    gammas: List[PositiveFloat] = Field(default_factory=lambda: [0.005, 0.01, 0.02, 0.03, 0.04], min_length=1)
    betas: List[PositiveFloat] = Field(default_factory=lambda: [1.0, 1.5, 2.0, 3.0, 4.0], min_length=1)
    p_mins: List[Annotated[float, Field(gt=0.0, lt=1.0)]] = Field(default_factory=lambda: [0.4, 0.5, 0.6], min_length=1)
    power_alphas: List[Annotated[float, Field(gt=1.0)]] = Field(default_factory=lambda: [1.5, 2.5, 3.0])
    power_domain: Tuple[Probability, Probability] = (0.05, 0.95)
    tolerance: PositiveFloat = 1e-6
    threshold_tolerance: PositiveFloat = 1e-8
    foc_points: int = Field(201, ge=11, le=5001)


class AffineGapParams(StrictModel):
    game: GameConfig = GameConfig()
    a_values: List[float] = Field(default_factory=lambda: _grid(-1.0, 1.0, 21), min_length=1)
    b_values: List[float] = Field(default_factory=lambda: _grid(0.0, 2.0, 21), min_length=1)
    canonical: Tuple[float, float] = (0.0, 1.0)
    oracle_gap: Optional[float] = 0.08353
    oracle_tolerance: PositiveFloat = 1e-3


class WelfareGapParams(StrictModel):
    game: GameConfig = GameConfig(
        generator=GeneratorConfig(kind="power", alpha=2.0, domain_lo=0.05, domain_hi=0.95),
        distribution=DistributionConfig(kind="uniform", lo=0.05, hi=0.95),
    )
    alphas: List[Annotated[float, Field(gt=1.0)]] = Field(default_factory=lambda: [2.0, 2.25, 2.5, 3.0], min_length=1)
    tau_min: PositiveFloat = 1e-3
    tau_min_coarse: PositiveFloat = 2e-2
    tau_ratio_max: Annotated[float, Field(gt=0.0, lt=1.0)] = 0.5
    r_min_values: List[Probability] = Field(default_factory=lambda: _grid(0.6, 0.8, 9), min_length=1)
    tau_values: List[PositiveFloat] = Field(default_factory=lambda: [1e-3, 1e-2, 3e-2], min_length=1)
    refine: bool = True
    max_evals: int = Field(40, ge=1, le=1000)
    gap_at_two_max: PositiveFloat = 1e-3
    identity_tolerance: PositiveFloat = 1e-9
    scaling_alpha: Annotated[float, Field(gt=1.0)] = 3.0
    scaling_factor: Annotated[float, Field(gt=1.0)] = 2.0
    scaling_band: Tuple[PositiveFloat, PositiveFloat] = (3.0, 5.0)

    @model_validator(mode="after")
    def check_tau_floors(self):
        if not self.tau_min < self.tau_min_coarse:
            raise ValueError(f"tau_min={self.tau_min} doit être < tau_min_coarse={self.tau_min_coarse}")
        return self


class MarketParams(StrictModel):
    instance: Optional[Dict[str, Any]] = None
    instance_path: Optional[str] = None
    gammas: List[PositiveFloat] = Field(default_factory=lambda: [0.1, 0.05, 0.025], min_length=2)
    expected_inflation: Optional[float] = 0.025
    inflation_tolerance: PositiveFloat = 1e-4
    min_order: PositiveFloat = 1.8
    fd_delta: PositiveFloat = 0.01
    fd_instances: int = Field(20, ge=0, le=1000)
    dsic_instances: int = Field(50, ge=0, le=1000)
    dsic_max_agents: int = Field(4, ge=2, le=6)
    dsic_grid: int = Field(101, ge=3, le=1001)
    nt3_instances: int = Field(20, ge=0, le=1000)
    statics_max_agents: int = Field(5, ge=2, le=8)
    witness_alpha: Annotated[float, Field(gt=1.0)] = 3.0

    @model_validator(mode="after")
    def check_single_source(self):
        if self.instance is not None and self.instance_path is not None:
            raise ValueError("instance et instance_path sont exclusifs")
        if self.instance is not None:
            try:
                parse_market_instance(self.instance)
            except ConfigError as exc:
                raise ValueError(str(exc)) from exc
        return self

    def build_instance(self) -> MarketInstance:
        if self.instance_path is not None:
            return load_market_instance(self.instance_path)
        return parse_market_instance(self.instance or CANONICAL_MARKET)


CANONICAL_MARKET: Dict[str, Any] = {
    "n": 2,
    "nu": {"": 0.0, "1": 1.0, "2": 1.0, "1,2": 1.5},
    "bids": [0.9, 0.4],
    "delta_rep": 1.0,
    "gamma": 0.1,
}


class DetectionParams(StrictModel):
    p_true: Probability = 0.5
    delta: Annotated[float, Field(gt=0.0, le=1.0)] = 0.1
    alpha: Annotated[float, Field(gt=0.0, lt=1.0)] = 0.05
    horizons: Optional[List[Annotated[int, Field(ge=1)]]] = None
    trials: int = Field(10_000, ge=1, le=10_000_000)
    battery_deltas: List[Annotated[float, Field(gt=0.0, le=1.0)]] = Field(default_factory=lambda: [0.05, 0.1, 0.2])
    battery_alphas: List[Annotated[float, Field(gt=0.0, lt=1.0)]] = Field(default_factory=lambda: [0.01, 0.05])
    nt3_fraction: int = Field(8, ge=2)
    competition_ratios: List[Annotated[float, Field(ge=0.0)]] = Field(default_factory=lambda: [0.5, 1.0])
    competition_ns: List[Annotated[int, Field(ge=2)]] = Field(default_factory=lambda: [2, 4, 16])
    competition_trials: int = Field(100_000, ge=1, le=10_000_000)
    competition_tolerance: PositiveFloat = 0.02

    @model_validator(mode="after")
    def check_reachable(self):
        if not 0.0 <= self.p_true + self.delta <= 1.0:
            raise ValueError(f"p_true + delta = {self.p_true + self.delta:g} hors de [0, 1]")
        return self


class RegulationParams(StrictModel):
    game: GameConfig = GameConfig()
    approvals: List[ApprovalConfig] = Field(
        default_factory=lambda: [
            ApprovalConfig(kind="affine", a=1.0, b=0.0),
            ApprovalConfig(kind="affine", a=0.0, b=1.0),
            ApprovalConfig(kind="sigmoid", r_min=0.5, tau=0.05),
            ApprovalConfig(kind="step", r0=0.5),
        ],
        min_length=1,
    )
    c_reg_values: List[Annotated[float, Field(ge=0.0)]] = Field(default_factory=lambda: [0.0, 0.1, 0.3], min_length=1)


class StaticsParams(StrictModel):
    game: GameConfig = GameConfig()
    delta: Annotated[float, Field(gt=0.0, le=1.0)] = 0.1
    alpha: Annotated[float, Field(gt=0.0, lt=1.0)] = 0.05
    n_agents: int = Field(10, ge=1)
    tolerance: PositiveFloat = 1e-6


# ----------------------------------------------------------------------
# Enveloppe
# ----------------------------------------------------------------------


class ExperimentConfigBase(StrictModel):
    output_path: str = "results"
    seed: int = Field(0, ge=0, le=SEED_MAX)


class PerturbationConfig(ExperimentConfigBase):
    experiment: Literal["perturbation_check"]
    parameters: PerturbationParams = PerturbationParams()


class StepFirstBestConfig(ExperimentConfigBase):
    experiment: Literal["step_first_best"]
    parameters: StepFirstBestParams = StepFirstBestParams()


class AffineGapConfig(ExperimentConfigBase):
    experiment: Literal["affine_gap"]
    parameters: AffineGapParams = AffineGapParams()


class WelfareGapConfig(ExperimentConfigBase):
    experiment: Literal["welfare_gap_sweep"]
    parameters: WelfareGapParams = WelfareGapParams()


class MarketConfig(ExperimentConfigBase):
    experiment: Literal["market_inflation"]
    parameters: MarketParams = MarketParams()


class DetectionConfig(ExperimentConfigBase):
    experiment: Literal["detection_curves"]
    parameters: DetectionParams = DetectionParams()


class RegulationConfig(ExperimentConfigBase):
    experiment: Literal["regulation"]
    parameters: RegulationParams = RegulationParams()


class StaticsConfig(ExperimentConfigBase):
    experiment: Literal["statics"]
    parameters: StaticsParams = StaticsParams()


ExperimentConfig = Annotated[
    Union[
        PerturbationConfig,
        StepFirstBestConfig,
        AffineGapConfig,
        WelfareGapConfig,
        MarketConfig,
        DetectionConfig,
        RegulationConfig,
        StaticsConfig,
    ],
    Field(discriminator="experiment"),
]

_ADAPTER: TypeAdapter = TypeAdapter(ExperimentConfig)

VALID_EXPERIMENTS = [name.value for name in ExperimentName]


def format_validation_error(exc: ValidationError) -> str:
    """Une ligne par erreur, préfixée du chemin du champ."""
    lines = []
    for err in exc.errors():
        # le premier élément du chemin est l'étiquette du discriminant
        loc = [str(part) for part in err["loc"]]
        if loc and loc[0] in VALID_EXPERIMENTS:
            loc = loc[1:]
        where = ".".join(loc) or "<racine>"
        lines.append(f"{where}: {err['msg']}")
    return "\n".join(lines)


def parse_config(document: Any) -> ExperimentConfigBase:
    """Valide un document déjà décodé."""
    if isinstance(document, dict):
        name = document.get("experiment")
        if name is not None and name not in VALID_EXPERIMENTS:
            raise ConfigError(
                f"experiment: expérience inconnue « {name} » (valides: {', '.join(VALID_EXPERIMENTS)})"
            )
    try:
        return _ADAPTER.validate_python(document)
    except ValidationError as exc:
        raise ConfigError(f"Configuration invalide:\n{format_validation_error(exc)}") from exc


def load_config(path: str) -> ExperimentConfigBase:
    """Charge et valide un fichier de configuration d'expérience.

    Raises:
        ConfigError: fichier absent, JSON invalide (ligne/colonne) ou champ invalide (chemin).
    """
    file_path = Path(path)
    try:
        text = file_path.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise ConfigError(f"Configuration introuvable: {file_path}") from exc
    except OSError as exc:
        raise ConfigError(f"Configuration illisible: {file_path} ({exc})") from exc

    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{file_path}: JSON invalide ligne {exc.lineno}, colonne {exc.colno}: {exc.msg}") from exc

    config = parse_config(document)
    logger.info(f"Configuration chargée: {file_path} ({config.experiment})")
    return config


def config_digest(config: ExperimentConfigBase) -> str:
    """sha256 de la configuration validée (forme JSON canonique)."""
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
