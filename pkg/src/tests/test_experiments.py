"""
Tests des briques d'expérience et des utilitaires d'exécution
"""

import json

import numpy as np
import pandas as pd
import pytest
from loguru import logger

from experiments.base import (
    STREAM_DSIC,
    STREAM_FD,
    ExperimentResult,
    battery_rng,
    check,
    distinct_uniform,
    note,
    sections,
)
from utils.logger import setup_logger
from utils.monitoring import emit_run_metrics, patch_log_context, set_run_context
from utils.parallel import RuntimeSettings, ordered_map


class TestExperimentHelpers:
    """Sections CSV, contrôles et flux aléatoires"""

    def test_sections_union_columns(self):
        frame = sections(
            [
                ("a", pd.DataFrame({"x": [1.0]})),
                ("empty", pd.DataFrame()),
                ("b", pd.DataFrame({"y": [2.0, 3.0]})),
            ]
        )
        assert list(frame.columns) == ["section", "x", "y"]
        assert list(frame["section"]) == ["a", "b", "b"]

    def test_sections_all_empty(self):
        assert list(sections([]).columns) == ["section"]

    def test_check_summary(self):
        assert check("ok", True).summary == "PASS ok"
        assert check("ko", False, "écart=1").summary == "FAIL ko: écart=1"

    def test_result_counters(self):
        result = ExperimentResult(frame=pd.DataFrame(), checks=[check("a", True), check("b", False)])
        assert result.checks_passed == 1
        assert result.checks_failed == 1
        assert not result.success

    def test_notes_do_not_gate(self):
        result = ExperimentResult(
            frame=pd.DataFrame(), checks=[check("a", True), note("constat", False, "rapport=1.4")]
        )
        assert result.checks[1].summary == "INFO constat: rapport=1.4"
        assert result.checks_passed == 1
        assert result.checks_failed == 0
        assert [c.name for c in result.gating] == ["a"]
        assert result.success

    def test_battery_streams_are_independent(self):
        first = battery_rng(0, STREAM_FD, 3).uniform(size=4)
        np.testing.assert_array_equal(first, battery_rng(0, STREAM_FD, 3).uniform(size=4))
        assert not np.array_equal(first, battery_rng(0, STREAM_DSIC, 3).uniform(size=4))

    def test_distinct_uniform_gap(self, rng):
        values = distinct_uniform(rng, 6, gap=0.01)
        assert values.shape == (6,)
        assert np.min(np.diff(np.sort(values))) >= 0.01
        assert ((values >= 0.05) & (values <= 0.95)).all()


class TestRuntimeUtils:
    """Réglages d'environnement, map ordonné et métriques"""

    def test_settings_from_environment(self, monkeypatch):
        monkeypatch.setenv("CREDLAB_THREADS", "3")
        monkeypatch.setenv("CREDLAB_PROGRESS", "false")
        settings = RuntimeSettings()
        assert settings.threads == 3
        assert settings.progress is False

    @pytest.mark.parametrize("threads", [1, 4])
    def test_ordered_map_keeps_order(self, threads):
        assert ordered_map(lambda x: x * x, range(20), threads=threads) == [x * x for x in range(20)]

    def test_log_context_injected(self):
        set_run_context(run_id="r1", experiment="statics", seed=None)
        record = {"extra": {}}
        patch_log_context(record)
        assert record["extra"]["run_id"] == "r1"
        assert record["extra"]["experiment"] == "statics"
        assert "seed" not in record["extra"]

    def test_run_metrics_line(self, capsys):
        set_run_context(run_id="r2", experiment="regulation", seed=9)
        emit_run_metrics({"status": "SUCCESS", "exit_code": 0, "checks_passed": 4, "duration_seconds": 1.23456})
        payload = json.loads(capsys.readouterr().out.strip())
        assert payload["run_id"] == "r2"
        assert payload["seed"] == 9
        assert payload["duration_seconds"] == 1.235
        assert payload["run_success"] == 1
        assert payload["checks_failed"] == 0

    def test_logger_file_copy(self, tmp_path):
        log_file = tmp_path / "logs" / "run.log"
        assert setup_logger(level="INFO", log_file=str(log_file), log_format="json") == "json"
        logger.info("ligne de contrôle")
        logger.remove()
        lines = log_file.read_text(encoding="utf-8").splitlines()
        assert json.loads(lines[-1])["record"]["message"] == "ligne de contrôle"
        setup_logger(level="WARNING", log_format="plain")
