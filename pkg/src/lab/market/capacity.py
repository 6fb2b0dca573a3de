"""
Fonctions de capacité sous-modulaires
Table ν(S) indexée par masque binaire (bit i = agent i, indices à partir de 0)
et validation exhaustive des invariants du polymatroïde.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from lab.errors import CapacityError, ParameterError

N_MIN, N_MAX = 2, 12


def mask_of(agents: Iterable[int]) -> int:
    mask = 0
    for i in agents:
        mask |= 1 << i
    return mask


def members(mask: int, n: int) -> FrozenSet[int]:
    return frozenset(i for i in range(n) if mask >> i & 1)


def subset_label(mask: int, n: int) -> str:
    """Clé « 1,3 » (agents numérotés à partir de 1), « » pour ∅."""
    return ",".join(str(i + 1) for i in sorted(members(mask, n)))


@dataclass(frozen=True)
class SubmodularCapacity:
    """Table complète de ν sur les 2ⁿ sous-ensembles de n agents."""

    n: int
    values: Tuple[float, ...]
    _table: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not N_MIN <= self.n <= N_MAX:
            raise ParameterError(f"Nombre d'agents n={self.n} hors de [{N_MIN}, {N_MAX}]")
        table = np.asarray(self.values, dtype=float)
        if table.shape != (1 << self.n,):
            raise CapacityError(
                f"Table incomplète: {table.size} valeurs pour 2^{self.n}={1 << self.n} sous-ensembles"
            )
        table.setflags(write=False)
        object.__setattr__(self, "values", tuple(float(v) for v in table))
        object.__setattr__(self, "_table", table)

    # ------------------------------------------------------------------
    # Constructeurs
    # ------------------------------------------------------------------

    @classmethod
    def from_function(cls, n: int, fn: Callable[[FrozenSet[int]], float]) -> "SubmodularCapacity":
        return cls(n, tuple(float(fn(members(mask, n))) for mask in range(1 << n)))

    @classmethod
    def from_subsets(cls, n: int, table: Mapping[FrozenSet[int], float]) -> "SubmodularCapacity":
        missing = [subset_label(m, n) for m in range(1 << n) if members(m, n) not in table]
        if missing:
            raise CapacityError(f"Sous-ensembles sans valeur: {missing[:5]}", witness={"missing": missing})
        return cls.from_function(n, lambda s: table[s])

    @classmethod
    def modular(cls, weights: Sequence[float]) -> "SubmodularCapacity":
        w = list(weights)
        return cls.from_function(len(w), lambda s: sum(w[i] for i in s))

    @classmethod
    def concave_of_modular(cls, weights: Sequence[float]) -> "SubmodularCapacity":
        """ν(S) = 1 − exp(−Σ_{i∈S} w_i) : monotone, sous-modulaire, marges ≤ 1."""
        w = np.asarray(weights, dtype=float)
        if np.any(w < 0.0):
            raise ParameterError("Poids négatifs dans une capacité concave")
        return cls.from_function(len(w), lambda s: 1.0 - np.exp(-sum(w[i] for i in s)))

    def restricted(self, m: int) -> "SubmodularCapacity":
        """Restriction aux m premiers agents (capacités emboîtées)."""
        if not N_MIN <= m <= self.n:
            raise ParameterError(f"Restriction à m={m} agents hors de [{N_MIN}, {self.n}]")
        return SubmodularCapacity(m, self.values[: 1 << m])

    # ------------------------------------------------------------------

    @property
    def table(self) -> np.ndarray:
        return self._table

    def value(self, agents: Iterable[int]) -> float:
        return float(self._table[mask_of(agents)])

    def as_mapping(self) -> Dict[str, float]:
        return {subset_label(m, self.n): float(v) for m, v in enumerate(self._table)}


def random_capacity(n: int, rng: np.random.Generator) -> SubmodularCapacity:
    """Mélange concave-de-modulaire et modulaire à coefficients tirés : non-modularité > 0."""
    weights = rng.uniform(0.3, 1.5, size=n)
    linear = rng.uniform(0.0, 1.0, size=n)
    mix = rng.uniform(0.5, 1.0)

    def fn(s: FrozenSet[int]) -> float:
        idx = list(s)
        return mix * (1.0 - np.exp(-weights[idx].sum())) + (1.0 - mix) * linear[idx].sum()

    return SubmodularCapacity.from_function(n, fn)


class CapacityValidator:
    """
    Classe pour valider une table de capacité : ν(∅) = 0, monotonie, marges ≤ 1
    et sous-modularité, dans cet ordre
    """

    def __init__(self, config: Optional[Dict] = None):
        """
        Args:
            config: Options de validation ({"tolerance": float, "max_errors": int})
        """
        config = config or {}
        self.tolerance = float(config.get("tolerance", 1e-12))
        self.max_errors = int(config.get("max_errors", 10))

    def validate(self, cap: SubmodularCapacity) -> Dict:
        """
        Valide la table complète

        Returns:
            {
                "is_valid": bool,
                "errors": List[str],
                "warnings": List[str],
                "witness": dict du premier triplet violé (vide si valide)
            }
        """
        errors: List[str] = []
        witnesses: List[Dict] = []
        warnings: List[str] = []

        # 1. ν(∅)
        if abs(cap.table[0]) > self.tolerance:
            errors.append(f"ν(∅)={cap.table[0]:.6g} ≠ 0")
            witnesses.append({"check": "empty", "value": float(cap.table[0])})

        # 2-3. Monotonie et marges
        for check, found in (("monotone", self._marginal_violations(cap, upper=False)),
                             ("marginal", self._marginal_violations(cap, upper=True))):
            for witness in found:
                errors.append(self._describe(check, witness, cap.n))
                witnesses.append(witness)

        # 4. Sous-modularité
        for witness in self._submodular_violations(cap):
            errors.append(self._describe("submodular", witness, cap.n))
            witnesses.append(witness)

        if cap.n >= 10:
            warnings.append(f"Table de {1 << cap.n} valeurs: validation exhaustive coûteuse")

        return {
            "is_valid": not errors,
            "errors": errors[: self.max_errors],
            "warnings": warnings,
            "witness": witnesses[0] if witnesses else {},
        }

    def _marginal_violations(self, cap: SubmodularCapacity, upper: bool) -> List[Dict]:
        table, n = cap.table, cap.n
        masks = np.arange(1 << n)
        found: List[Dict] = []
        for i in range(n):
            bit = 1 << i
            base = masks[(masks & bit) == 0]
            gains = table[base | bit] - table[base]
            bad = np.flatnonzero(gains > 1.0 + self.tolerance if upper else gains < -self.tolerance)
            for k in bad[: self.max_errors]:
                found.append({
                    "check": "marginal" if upper else "monotone",
                    "S": int(base[k]),
                    "i": i,
                    "gain": float(gains[k]),
                })
        return found

    def _submodular_violations(self, cap: SubmodularCapacity) -> List[Dict]:
        table, n = cap.table, cap.n
        masks = np.arange(1 << n)
        found: List[Dict] = []
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                bi, bj = 1 << i, 1 << j
                base = masks[(masks & (bi | bj)) == 0]
                small = table[base | bi] - table[base]
                large = table[base | bj | bi] - table[base | bj]
                bad = np.flatnonzero(large - small > self.tolerance)
                for k in bad[: self.max_errors]:
                    found.append({
                        "check": "submodular",
                        "S": int(base[k]),
                        "T": int(base[k] | bj),
                        "i": i,
                        "gain_small": float(small[k]),
                        "gain_large": float(large[k]),
                    })
                if len(found) >= self.max_errors:
                    return found
        return found

    @staticmethod
    def _describe(check: str, witness: Dict, n: int) -> str:
        agent = witness["i"] + 1
        s = subset_label(witness["S"], n)
        if check == "monotone":
            return f"Non monotone: ν({{{s}}} ∪ {{{agent}}}) − ν({{{s}}}) = {witness['gain']:.6g} < 0"
        if check == "marginal":
            return f"Marge > 1: ν({{{s}}} ∪ {{{agent}}}) − ν({{{s}}}) = {witness['gain']:.6g}"
        t = subset_label(witness["T"], n)
        return (
            f"Non sous-modulaire pour l'agent {agent}: marge {witness['gain_large']:.6g} sur {{{t}}} "
            f"> {witness['gain_small']:.6g} sur {{{s}}}"
        )


def validate_capacity(cap: SubmodularCapacity, config: Optional[Dict] = None) -> None:
    """Lève CapacityError avec le premier témoin de violation."""
    result = CapacityValidator(config).validate(cap)
    for warning in result["warnings"]:
        logger.warning(warning)
    if not result["is_valid"]:
        raise CapacityError(result["errors"][0], witness=result["witness"])
    logger.debug(f"✓ Capacité valide (n={cap.n})")
