"""
Module des règles de score strictement propres
Représente chaque règle par son générateur convexe G et calcule score espéré,
courbure et coût de calibration (divergence de Bregman).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Union

import numpy as np

from lab.errors import DomainError, ParameterError
from lab.numerics import composite_simpson

ArrayLike = Union[float, np.ndarray]

# Tolérance sur les bornes du domaine (erreurs d'arrondi des grilles)
DOMAIN_SLACK = 1e-12


class GeneratorKind(str, Enum):
    BRIER = "brier"
    POWER = "power"


@dataclass(frozen=True)
class Generator:
    """Générateur strictement convexe G d'une règle de score binaire.

    Brier : G(p) = p², puissance : G(p) = p^α. `offset` et `slope` portent une
    éventuelle transformation affine G + a + b·p (même regret, même courbure).
    """

    kind: GeneratorKind = GeneratorKind.BRIER
    alpha: float = 2.0
    domain_lo: float = 0.0
    domain_hi: float = 1.0
    offset: float = 0.0
    slope: float = 0.0

    def __post_init__(self):
        if self.kind is GeneratorKind.POWER and not self.alpha > 1.0:
            raise ParameterError(f"Exposant de puissance invalide: alpha={self.alpha} (doit être > 1)")
        if not (0.0 <= self.domain_lo < self.domain_hi <= 1.0):
            raise ParameterError(
                f"Domaine invalide: [{self.domain_lo}, {self.domain_hi}] (attendu 0 ≤ lo < hi ≤ 1)"
            )

    @classmethod
    def brier(cls) -> "Generator":
        return cls(kind=GeneratorKind.BRIER, alpha=2.0)

    @classmethod
    def power(
        cls,
        alpha: float,
        domain_lo: Optional[float] = None,
        domain_hi: Optional[float] = None,
    ) -> "Generator":
        """Famille puissance ; domaine [0.05, 0.95] par défaut si α < 2."""
        default_lo, default_hi = (0.05, 0.95) if alpha < 2.0 else (0.0, 1.0)
        return cls(
            kind=GeneratorKind.POWER,
            alpha=float(alpha),
            domain_lo=default_lo if domain_lo is None else float(domain_lo),
            domain_hi=default_hi if domain_hi is None else float(domain_hi),
        )

    def shifted(self, a: float, b: float) -> "Generator":
        """Équivalent affine G + a + b·p."""
        return replace(self, offset=self.offset + a, slope=self.slope + b)

    @property
    def label(self) -> str:
        if self.kind is GeneratorKind.BRIER:
            return "brier"
        return f"power({self.alpha:g})"

    @property
    def is_quadratic(self) -> bool:
        """Courbure constante (Brier, ou puissance α = 2)."""
        return self.kind is GeneratorKind.BRIER or self.alpha == 2.0

    # ------------------------------------------------------------------

    def value(self, p: ArrayLike) -> ArrayLike:
        if self.kind is GeneratorKind.BRIER:
            base = np.square(p)
        else:
            base = np.power(p, self.alpha)
        return base + self.offset + self.slope * np.asarray(p)

    def derivative(self, p: ArrayLike) -> ArrayLike:
        if self.kind is GeneratorKind.BRIER:
            base = 2.0 * np.asarray(p, dtype=float)
        else:
            base = self.alpha * np.power(p, self.alpha - 1.0)
        return base + self.slope

    def second_derivative(self, p: ArrayLike) -> ArrayLike:
        if self.kind is GeneratorKind.BRIER:
            return np.full_like(np.asarray(p, dtype=float), 2.0)
        return self.alpha * (self.alpha - 1.0) * np.power(p, self.alpha - 2.0)

    def regret(self, r: ArrayLike, p: ArrayLike) -> ArrayLike:
        """Divergence de Bregman G(p) − G(r) − G'(r)(p − r), vectorisée, sans contrôle."""
        if self.is_quadratic:
            return np.square(np.asarray(r, dtype=float) - p)
        return self.value(p) - self.value(r) - self.derivative(r) * (np.asarray(p) - r)

    # ------------------------------------------------------------------

    def check_domain(self, name: str, x: float) -> None:
        if not (self.domain_lo - DOMAIN_SLACK <= x <= self.domain_hi + DOMAIN_SLACK):
            raise DomainError(
                f"{name}={x} hors du domaine [{self.domain_lo}, {self.domain_hi}] du générateur {self.label}"
            )


def expected_score(gen: Generator, r: float, p: float) -> float:
    """Score espéré de Savage G(r) + G'(r)(p − r) du rapport r pour le type p."""
    gen.check_domain("r", r)
    gen.check_domain("p", p)
    return float(gen.value(r) + gen.derivative(r) * (p - r))


def scoring_regret(gen: Generator, r: float, p: float) -> float:
    """Coût de calibration : score véridique moins score du rapport r (≥ 0)."""
    gen.check_domain("r", r)
    gen.check_domain("p", p)
    return float(gen.regret(r, p))


def curvature(gen: Generator, p: float) -> float:
    """Courbure G''(p) > 0 ; singularité en 0 pour la famille puissance α < 2."""
    gen.check_domain("p", p)
    if gen.kind is GeneratorKind.POWER and gen.alpha < 2.0 and p <= 0.0:
        raise DomainError(f"Courbure singulière en p={p} pour {gen.label}")
    return float(gen.second_derivative(p))


def bregman_quadrature(gen: Generator, r: float, p: float, panels: int = 10_000) -> float:
    """Oracle indépendant du regret : ∫_p^r G''(z)(z − p) dz par Simpson composite."""
    gen.check_domain("r", r)
    gen.check_domain("p", p)
    if r == p:
        return 0.0
    # l'intégrale orientée reste positive dans les deux sens
    return composite_simpson(lambda z: gen.second_derivative(z) * (z - p), p, r, panels)
