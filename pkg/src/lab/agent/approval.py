"""
Fonctions d'approbation du principal
q(r) ∈ [0, 1] : probabilité d'accorder l'autonomie au vu du rapport r. Elle sert
aussi de gain de perturbation h de l'agent (h = q).
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Tuple, Union

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import expit

from lab.errors import NotDifferentiableError, ParameterError

ArrayLike = Union[float, np.ndarray]


class ApprovalFunction(ABC):
    """Interface commune des variantes Affine, Sigmoid, Step, TabulatedGrid."""

    #: True si q est C¹ (raffinement par section dorée autorisé)
    smooth: bool = True

    @abstractmethod
    def evaluate(self, r: ArrayLike) -> np.ndarray:
        """Valeur de q(r), vectorisée."""

    @abstractmethod
    def derivative(self, r: float) -> float:
        """q'(r)."""

    @abstractmethod
    def second_derivative(self, r: float) -> float:
        """q''(r)."""

    def __call__(self, r: ArrayLike) -> np.ndarray:
        return self.evaluate(r)

    @property
    @abstractmethod
    def label(self) -> str:
        """Nom lisible pour les logs et les CSV."""


@dataclass(frozen=True)
class Affine(ApprovalFunction):
    """q(r) = clamp(a + b·r, 0, 1)."""

    a: float
    b: float

    def evaluate(self, r: ArrayLike) -> np.ndarray:
        return np.clip(self.a + self.b * np.asarray(r, dtype=float), 0.0, 1.0)

    @property
    def clamp_points(self) -> Tuple[float, ...]:
        """Rapports de [0, 1] où la saturation à 0 ou 1 s'active."""
        if self.b == 0.0:
            return ()
        points = ((0.0 - self.a) / self.b, (1.0 - self.a) / self.b)
        return tuple(sorted(x for x in points if 0.0 <= x <= 1.0))

    def is_clamped_near(self, r: float, radius: float) -> bool:
        """Vrai si une saturation intervient dans [r − radius, r + radius]."""
        if self.b == 0.0:
            return False
        lo, hi = r - radius, r + radius
        raw = (self.a + self.b * lo, self.a + self.b * hi)
        return min(raw) < 0.0 or max(raw) > 1.0

    def derivative(self, r: float) -> float:
        raw = self.a + self.b * r
        return self.b if 0.0 < raw < 1.0 else 0.0

    def second_derivative(self, r: float) -> float:
        return 0.0

    @property
    def label(self) -> str:
        return f"affine(a={self.a:g},b={self.b:g})"


@dataclass(frozen=True)
class Sigmoid(ApprovalFunction):
    """Seuil lissé q(r) = ς((r − r_min)/τ), ς logistique."""

    r_min: float
    tau: float

    def __post_init__(self):
        if not self.tau > 0.0:
            raise ParameterError(f"Largeur de sigmoïde invalide: tau={self.tau} (doit être > 0)")
        if not 0.0 <= self.r_min <= 1.0:
            raise ParameterError(f"Seuil de sigmoïde hors [0, 1]: r_min={self.r_min}")

    def evaluate(self, r: ArrayLike) -> np.ndarray:
        return expit((np.asarray(r, dtype=float) - self.r_min) / self.tau)

    def derivative(self, r: float) -> float:
        s = float(expit((r - self.r_min) / self.tau))
        return s * (1.0 - s) / self.tau

    def second_derivative(self, r: float) -> float:
        s = float(expit((r - self.r_min) / self.tau))
        return s * (1.0 - s) * (1.0 - 2.0 * s) / self.tau**2

    @property
    def label(self) -> str:
        return f"sigmoid(r_min={self.r_min:g},tau={self.tau:g})"


@dataclass(frozen=True)
class Step(ApprovalFunction):
    """Seuil net q(r) = 1{r ≥ r0}."""

    r0: float
    smooth = False

    def __post_init__(self):
        if not 0.0 <= self.r0 <= 1.0:
            raise ParameterError(f"Seuil hors [0, 1]: r0={self.r0}")

    def evaluate(self, r: ArrayLike) -> np.ndarray:
        return (np.asarray(r, dtype=float) >= self.r0).astype(float)

    def derivative(self, r: float) -> float:
        raise NotDifferentiableError(f"Step(r0={self.r0:g}) n'est pas dérivable")

    def second_derivative(self, r: float) -> float:
        raise NotDifferentiableError(f"Step(r0={self.r0:g}) n'est pas dérivable")

    @property
    def label(self) -> str:
        return f"step(r0={self.r0:g})"


@dataclass(frozen=True)
class TabulatedGrid(ApprovalFunction):
    """Valeurs tabulées sur une grille uniforme de [0, 1], spline cubique bornée à [0, 1].

    La spline reproduit exactement les tabulations polynomiales de degré ≤ 3 ; les
    dérivées sont des différences centrées au pas de la grille.
    """

    values: Tuple[float, ...]
    _array: np.ndarray = field(init=False, repr=False, compare=False)
    _spline: CubicSpline = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        array = np.asarray(self.values, dtype=float)
        if array.ndim != 1 or array.size < 3:
            raise ParameterError("Une grille tabulée demande au moins 3 valeurs")
        if np.any(array < 0.0) or np.any(array > 1.0):
            raise ParameterError("Valeurs tabulées hors [0, 1]")
        object.__setattr__(self, "values", tuple(float(v) for v in array))
        object.__setattr__(self, "_array", array)
        object.__setattr__(self, "_spline", CubicSpline(np.linspace(0.0, 1.0, array.size), array))

    @classmethod
    def from_function(cls, fn, points: int = 4001) -> "TabulatedGrid":
        """Tabule une fonction sur `points` noeuds uniformes, valeurs bornées à [0, 1]."""
        grid = np.linspace(0.0, 1.0, points)
        return cls(tuple(np.clip(fn(grid), 0.0, 1.0)))

    @property
    def spacing(self) -> float:
        return 1.0 / (self._array.size - 1)

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self._array.size)

    def evaluate(self, r: ArrayLike) -> np.ndarray:
        return np.clip(self._spline(np.asarray(r, dtype=float)), 0.0, 1.0)

    def derivative(self, r: float) -> float:
        h = self.spacing
        return float((self.evaluate(r + h) - self.evaluate(r - h)) / (2.0 * h))

    def second_derivative(self, r: float) -> float:
        h = self.spacing
        return float((self.evaluate(r + h) - 2.0 * self.evaluate(r) + self.evaluate(r - h)) / h**2)

    @property
    def label(self) -> str:
        return f"tabulated(n={self._array.size})"
