"""
Module du jeu de surveillance
Paramètres du principal, distribution des types, seuil de premier rang p_min
et seuils optimaux de la fonction d'approbation en marche.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from loguru import logger
from scipy.optimize import bisect
from scipy.special import betaln, xlog1py, xlogy

from lab.agent.reporter import AgentParams
from lab.errors import DegenerateRegimeError, ParameterError
from lab.numerics import integrate
from lab.scoring.generators import Generator, GeneratorKind

ArrayLike = Union[float, np.ndarray]

BISECT_XTOL = 1e-14
BETA_SHAPE_MAX = 50.0


@dataclass(frozen=True)
class PrincipalParams:
    """Utilités du principal : succès u_s, échec u_f, délégation u_d."""

    u_s: float = 1.0
    u_f: float = -1.0
    u_d: float = 0.0

    def __post_init__(self):
        if not self.u_s > self.u_d > self.u_f:
            raise ParameterError(
                f"Ordre des utilités violé: u_s={self.u_s}, u_d={self.u_d}, u_f={self.u_f} "
                "(attendu u_s > u_d > u_f)"
            )


def p_min(principal: PrincipalParams) -> float:
    """Type d'indifférence (u_d − u_f)/(u_s − u_f), dans (0, 1)."""
    return (principal.u_d - principal.u_f) / (principal.u_s - principal.u_f)


def surplus(principal: PrincipalParams, p: ArrayLike) -> ArrayLike:
    """Surplus d'approbation Π(p) = p(u_s − u_f) − (u_d − u_f)."""
    return np.asarray(p, dtype=float) * (principal.u_s - principal.u_f) - (principal.u_d - principal.u_f)


# ----------------------------------------------------------------------
# Distributions des types
# ----------------------------------------------------------------------


class TypeDistribution(ABC):
    """Densité f > 0 sur un support inclus dans [0, 1]."""

    @property
    @abstractmethod
    def support(self) -> Tuple[float, float]:
        """Bornes (lo, hi) du support."""

    @abstractmethod
    def pdf(self, p: ArrayLike) -> np.ndarray:
        """Densité vectorisée, nulle hors du support."""

    @property
    @abstractmethod
    def label(self) -> str:
        """Nom lisible."""

    def mass(self) -> float:
        """Masse totale sous la quadrature du module (1 à 1e-8 près)."""
        lo, hi = self.support
        return integrate(self.pdf, lo, hi)

    def midpoint_weights(self, lo: float, hi: float, cells: int = 2000) -> Tuple[np.ndarray, np.ndarray]:
        """Points milieux et poids f·dx sur [lo, hi] ∩ support."""
        s_lo, s_hi = self.support
        lo, hi = max(lo, s_lo), min(hi, s_hi)
        if hi <= lo:
            return np.empty(0), np.empty(0)
        edges = np.linspace(lo, hi, cells + 1)
        mids = 0.5 * (edges[:-1] + edges[1:])
        return mids, self.pdf(mids) * (hi - lo) / cells


@dataclass(frozen=True)
class Uniform(TypeDistribution):
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.lo < self.hi <= 1.0:
            raise ParameterError(f"Support uniforme invalide: [{self.lo}, {self.hi}]")

    @property
    def support(self) -> Tuple[float, float]:
        return (self.lo, self.hi)

    def pdf(self, p: ArrayLike) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        inside = (p >= self.lo) & (p <= self.hi)
        return np.where(inside, 1.0 / (self.hi - self.lo), 0.0)

    @property
    def label(self) -> str:
        return f"uniform({self.lo:g},{self.hi:g})"


@dataclass(frozen=True)
class Beta(TypeDistribution):
    """Loi Beta(a, b) sur [0, 1], normalisée par log-gamma."""

    a: float = 2.0
    b: float = 2.0

    def __post_init__(self):
        for name, shape in (("a", self.a), ("b", self.b)):
            if not 0.0 < shape <= BETA_SHAPE_MAX:
                raise ParameterError(f"Paramètre Beta {name}={shape} hors de (0, {BETA_SHAPE_MAX:g}]")

    @property
    def support(self) -> Tuple[float, float]:
        return (0.0, 1.0)

    def pdf(self, p: ArrayLike) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        inside = (p >= 0.0) & (p <= 1.0)
        x = np.clip(p, 0.0, 1.0)
        with np.errstate(divide="ignore"):
            log_pdf = xlogy(self.a - 1.0, x) + xlog1py(self.b - 1.0, -x) - betaln(self.a, self.b)
        return np.where(inside, np.exp(log_pdf), 0.0)

    @property
    def label(self) -> str:
        return f"beta({self.a:g},{self.b:g})"


# ----------------------------------------------------------------------
# Jeu
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class OversightGame:
    """Jeu de surveillance : générateur, principal, agent et distribution des types."""

    gen: Generator
    principal: PrincipalParams
    agent: AgentParams
    dist: TypeDistribution

    def __post_init__(self):
        lo, hi = self.dist.support
        if lo < self.gen.domain_lo - 1e-12 or hi > self.gen.domain_hi + 1e-12:
            raise ParameterError(
                f"Support {self.dist.label} hors du domaine [{self.gen.domain_lo}, {self.gen.domain_hi}] "
                f"du générateur {self.gen.label}"
            )
        if not self.non_degenerate:
            logger.warning(
                f"Régime dégénéré: γ/β={self.agent.ratio:g} rend le seuil en marche infaisable "
                f"(p_min={self.p_min:g}, {self.gen.label})"
            )

    @property
    def p_min(self) -> float:
        return p_min(self.principal)

    @property
    def non_degenerate(self) -> bool:
        """Brier : γ/β ≤ (1 − p_min)² ; en général : coût d'atteindre domain_hi ≥ γ/β."""
        pm = self.p_min
        if self.gen.kind is GeneratorKind.BRIER:
            return self.agent.ratio <= (1.0 - pm) ** 2 + 1e-15
        if not self.gen.domain_lo <= pm <= self.gen.domain_hi:
            return False
        return float(self.gen.regret(self.gen.domain_hi, pm)) >= self.agent.ratio

    def with_agent(self, agent: AgentParams) -> "OversightGame":
        return OversightGame(gen=self.gen, principal=self.principal, agent=agent, dist=self.dist)

    def with_distribution(self, dist: TypeDistribution) -> "OversightGame":
        return OversightGame(gen=self.gen, principal=self.principal, agent=self.agent, dist=dist)

    def with_generator(self, gen: Generator) -> "OversightGame":
        return OversightGame(gen=gen, principal=self.principal, agent=self.agent, dist=self.dist)


@dataclass(frozen=True)
class ThresholdType:
    """Type p* à partir duquel les agents gonflent jusqu'au seuil r0."""

    p_star: float
    all_inflate: bool = False


def threshold_type(game: OversightGame, r0: float) -> ThresholdType:
    """Plus petit type gonflant jusqu'à r0 : β·regret(r0, p*) = γ, par bissection."""
    gen, agent = game.gen, game.agent
    gen.check_domain("r0", r0)
    if agent.gamma == 0.0:
        return ThresholdType(p_star=r0)

    def excess(p: float) -> float:
        return agent.beta * float(gen.regret(r0, p)) - agent.gamma

    if excess(gen.domain_lo) < 0.0:
        return ThresholdType(p_star=gen.domain_lo, all_inflate=True)
    if gen.domain_lo >= r0:
        return ThresholdType(p_star=r0)
    return ThresholdType(p_star=float(bisect(excess, gen.domain_lo, r0, xtol=BISECT_XTOL)))


def optimal_step_threshold(game: OversightGame) -> float:
    """Seuil r0 dont le type d'inflation limite est p_min.

    Brier : forme close p_min + √(γ/β). Générateur quelconque : bissection sur
    β·regret(r0, p_min) = γ.

    Raises:
        DegenerateRegimeError: aucun r0 ≤ domain_hi (la marche dégénère en q ≡ 0).
    """
    gen, agent = game.gen, game.agent
    pm = game.p_min
    gen.check_domain("p_min", pm)

    if gen.kind is GeneratorKind.BRIER:
        r0 = pm + math.sqrt(agent.ratio)
        if r0 > gen.domain_hi + 1e-12:
            raise DegenerateRegimeError(
                f"Seuil optimal r0={r0:.6g} > {gen.domain_hi:g}: γ/β={agent.ratio:g} > (1 − p_min)²"
            )
        return min(r0, gen.domain_hi)

    if agent.gamma == 0.0:
        return pm

    def excess(r: float) -> float:
        return agent.beta * float(gen.regret(r, pm)) - agent.gamma

    if excess(gen.domain_hi) < 0.0:
        raise DegenerateRegimeError(
            f"Aucun seuil r0 ≤ {gen.domain_hi:g} pour {gen.label}: coût maximal "
            f"{excess(gen.domain_hi) + agent.gamma:.6g} < γ={agent.gamma:g}"
        )
    r0 = float(bisect(excess, pm, gen.domain_hi, xtol=BISECT_XTOL))
    logger.debug(f"Seuil optimal {gen.label}: r0={r0:.12g} (p_min={pm:g})")
    return r0
