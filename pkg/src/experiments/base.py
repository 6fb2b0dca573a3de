"""
Résultats d'expérience et contrôles d'acceptation
Chaque expérience renvoie une table (écrite en CSV) et une liste de contrôles PASS/FAIL.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np
import pandas as pd
from loguru import logger

# Flux aléatoires indépendants par batterie : default_rng([seed, flux, indice])
STREAM_FD = 1
STREAM_DSIC = 2
STREAM_NT3 = 3
STREAM_STATICS = 4


@dataclass(frozen=True)
class CheckResult:
    """Contrôle d'acceptation ; un contrôle informatif rapporte un constat sans jouer sur le code de sortie."""

    name: str
    passed: bool
    detail: str = ""
    informational: bool = False

    @property
    def summary(self) -> str:
        if self.informational:
            status = "INFO"
        else:
            status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.detail}" if self.detail else f"{status} {self.name}"


@dataclass
class ExperimentResult:
    """Table de résultats et contrôles d'une expérience."""

    frame: pd.DataFrame
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def gating(self) -> List[CheckResult]:
        return [c for c in self.checks if not c.informational]

    @property
    def checks_passed(self) -> int:
        return sum(1 for c in self.gating if c.passed)

    @property
    def checks_failed(self) -> int:
        return len(self.gating) - self.checks_passed

    @property
    def success(self) -> bool:
        return self.checks_failed == 0


def check(name: str, passed: bool, detail: str = "") -> CheckResult:
    """Construit un contrôle et le journalise."""
    result = CheckResult(name=name, passed=bool(passed), detail=detail)
    if result.passed:
        logger.success(f"✓ {result.summary}")
    else:
        logger.error(result.summary)
    return result


def note(name: str, holds: bool, detail: str = "") -> CheckResult:
    """Constat informatif : journalisé en avertissement quand il ne tient pas, jamais compté en échec."""
    result = CheckResult(name=name, passed=bool(holds), detail=detail, informational=True)
    if result.passed:
        logger.info(result.summary)
    else:
        logger.warning(f"{result.summary} (non reproduit)")
    return result


def sections(frames: Sequence[tuple[str, pd.DataFrame]]) -> pd.DataFrame:
    """Concatène des sous-tables sous une colonne `section` (colonnes réunies, ordre conservé)."""
    parts = [frame.assign(section=name) for name, frame in frames if not frame.empty]
    if not parts:
        return pd.DataFrame(columns=["section"])
    combined = pd.concat(parts, ignore_index=True, sort=False)
    return combined[["section", *[c for c in combined.columns if c != "section"]]]


def battery_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream, index])


def distinct_uniform(rng: np.random.Generator, n: int, lo: float = 0.05, hi: float = 0.95, gap: float = 1e-3) -> np.ndarray:
    """n tirages uniformes deux à deux distants d'au moins `gap` (retirage sinon)."""
    while True:
        values = rng.uniform(lo, hi, size=n)
        if n < 2 or np.min(np.diff(np.sort(values))) >= gap:
            return values
