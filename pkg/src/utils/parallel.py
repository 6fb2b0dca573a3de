"""Réglages d'exécution et map ordonné sur pool de threads."""

from __future__ import annotations

import os
import sys
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from typing import Callable, Iterable, List, Optional, Sequence, TypeVar

from loguru import logger
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict
from tqdm import tqdm

T = TypeVar("T")
R = TypeVar("R")


class RuntimeSettings(BaseSettings):
    """Variables d'environnement `CREDLAB_*` (fichier .env accepté)."""

    model_config = SettingsConfigDict(env_prefix="CREDLAB_", env_file=".env", extra="ignore")

    threads: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1, le=256)
    progress: bool = Field(default=True, description="Barre tqdm si la sortie est un terminal")


@lru_cache(maxsize=1)
def get_runtime_settings() -> RuntimeSettings:
    settings = RuntimeSettings()
    logger.debug(f"Réglages d'exécution: threads={settings.threads} progress={settings.progress}")
    return settings


def ordered_map(
    fn: Callable[[T], R],
    items: Iterable[T],
    threads: Optional[int] = None,
    desc: Optional[str] = None,
) -> List[R]:
    """Applique `fn` à chaque élément ; l'ordre des résultats suit celui des entrées."""
    work: Sequence[T] = list(items)
    settings = get_runtime_settings()
    workers = max(1, min(threads or settings.threads, len(work) or 1))
    show = bool(desc) and settings.progress and sys.stderr.isatty()

    if workers == 1:
        return [fn(item) for item in tqdm(work, desc=desc, disable=not show, leave=False)]

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(tqdm(pool.map(fn, work), total=len(work), desc=desc, disable=not show, leave=False))
