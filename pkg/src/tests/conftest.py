"""
Configuration pytest et fixtures partagées
"""

import os
from pathlib import Path

import numpy as np
import pytest
from loguru import logger

from lab.agent.reporter import AgentParams
from lab.market.capacity import SubmodularCapacity
from lab.market.operator import MarketInstance
from lab.oversight.game import OversightGame, PrincipalParams, Uniform
from lab.scoring.generators import Generator
from utils.logger import setup_logger
from utils.monitoring import clear_run_context


@pytest.fixture(scope="session", autouse=True)
def configure_test_logging() -> None:
    """Logs des tests : WARNING par défaut (PYTEST_LOG_LEVEL), fichier si PYTEST_LOG_FILE est fourni."""
    level = os.getenv("PYTEST_LOG_LEVEL", "WARNING")
    log_file = os.getenv("PYTEST_LOG_FILE") or None

    setup_logger(level=level, log_file=log_file, log_format="plain")
    logger.info(f"Pytest logging actif: niveau={level} fichier={log_file or '-'}")


@pytest.fixture(autouse=True)
def reset_run_context():
    """Chaque test part d'un contexte de run vide."""
    clear_run_context()
    yield
    clear_run_context()


def pytest_sessionfinish(session, exitstatus: int) -> None:
    """Log a deterministic test summary (useful in CI logs)."""
    stats = session.testscollected or 0
    tr = session.config.pluginmanager.get_plugin("terminalreporter")
    if tr is None:
        logger.info(f"Pytest terminé: collected={stats} exitstatus={exitstatus}")
        return

    def _count(key: str) -> int:
        return len(tr.stats.get(key, []))

    logger.info(
        "Pytest summary: "
        f"{_count('passed')} passed, "
        f"{_count('failed')} failed, "
        f"{_count('error')} errors, "
        f"{_count('skipped')} skipped "
        f"(collected={stats}, exitstatus={exitstatus})"
    )


# ----------------------------------------------------------------------
# Fixtures du domaine
# ----------------------------------------------------------------------


@pytest.fixture(scope="session")
def config_dir() -> Path:
    """Répertoire des configurations d'exemple versionnées"""
    return Path(__file__).resolve().parent.parent / "config" / "experiments"


@pytest.fixture
def brier() -> Generator:
    return Generator.brier()


@pytest.fixture
def canonical_game() -> OversightGame:
    """Jeu canonique : Brier, Uniform(0,1), u=(1,−1,0), β=1, γ=0.04"""
    return OversightGame(
        gen=Generator.brier(),
        principal=PrincipalParams(1.0, -1.0, 0.0),
        agent=AgentParams(beta=1.0, gamma=0.04),
        dist=Uniform(0.0, 1.0),
    )


@pytest.fixture
def canonical_capacity() -> SubmodularCapacity:
    """ν(∅)=0, ν({1})=ν({2})=1, ν({1,2})=1.5"""
    return SubmodularCapacity(2, (0.0, 1.0, 1.0, 1.5))


@pytest.fixture
def canonical_market(canonical_capacity) -> MarketInstance:
    return MarketInstance(canonical_capacity, (0.9, 0.4), delta_rep=1.0, gamma=0.1)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
