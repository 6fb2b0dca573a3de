"""
Tests de la détection : borne de Hoeffding, Monte Carlo et compétition
"""

import math

import pytest

from lab.detection.competition import competition_detection_prob, competition_mc
from lab.detection.hoeffding import (
    DetectionSpec,
    block_sizes,
    detection_curve,
    hoeffding_sample_bound,
    monte_carlo_se,
    simulate_detection,
)
from lab.errors import ParameterError, PreconditionError


class TestHoeffding:
    """Borne et vérification Monte Carlo"""

    def test_sample_bound(self):
        assert hoeffding_sample_bound(0.1, 0.05) == 738

    def test_sample_bound_exact_integer(self):
        assert hoeffding_sample_bound(1.0, 2.0 / math.e**2) == 4

    @pytest.mark.parametrize("delta, alpha", [(0.0, 0.05), (1.5, 0.05), (0.1, 0.0), (0.1, 1.0)])
    def test_sample_bound_validation(self, delta, alpha):
        with pytest.raises(ParameterError):
            hoeffding_sample_bound(delta, alpha)

    def test_standard_error(self):
        assert monte_carlo_se(0.5, 100) == pytest.approx(0.05)
        assert monte_carlo_se(1.0, 100) == 0.0

    def test_block_sizes(self):
        assert block_sizes(25_000) == [10_000, 10_000, 5_000]
        assert block_sizes(10_000) == [10_000]

    def test_detection_at_bound(self):
        spec = DetectionSpec(delta=0.1, alpha=0.05, trials=4_000, seed=7)
        assert simulate_detection(0.5, 0.6, 738, spec) >= 0.95

    def test_short_horizon_undetectable(self):
        spec = DetectionSpec(delta=0.1, alpha=0.05, trials=4_000, seed=7)
        assert simulate_detection(0.5, 0.6, 738 // 8, spec) < 0.95

    def test_seeded_runs_are_identical(self):
        spec = DetectionSpec(trials=12_000, seed=42)
        assert simulate_detection(0.5, 0.6, 100, spec) == simulate_detection(0.5, 0.6, 100, spec)

    def test_zero_inflation_rejected(self):
        with pytest.raises(PreconditionError):
            simulate_detection(0.5, 0.5, 100, DetectionSpec())

    def test_spec_validation(self):
        with pytest.raises(ParameterError):
            DetectionSpec(alpha=1.0)
        with pytest.raises(ParameterError):
            DetectionSpec(seed=-1)

    def test_detection_curve(self):
        spec = DetectionSpec(trials=1_000, seed=3)
        curve = detection_curve(0.5, 0.6, [10, 100, 738], spec)
        assert list(curve.columns) == ["K", "rate", "se"]
        assert list(curve["K"]) == [10, 100, 738]
        assert curve["rate"].iloc[-1] > curve["rate"].iloc[0]


class TestCompetition:
    """Détection par comparaison à n rapports honnêtes"""

    def test_closed_form(self):
        assert competition_detection_prob(1.0, 1.0, 1) == pytest.approx(0.8413, abs=1e-4)
        assert competition_detection_prob(1.0, 1.0, 4) == pytest.approx(0.9772, abs=1e-4)
        assert competition_detection_prob(0.0, 1.0, 8) == pytest.approx(0.5)

    def test_increasing_in_n(self):
        probs = [competition_detection_prob(0.5, 1.0, n) for n in (2, 4, 16)]
        assert probs == sorted(probs)
        assert probs[0] < probs[-1]

    def test_monte_carlo_matches_closed_form(self):
        spec = DetectionSpec(delta=0.5, sigma=1.0, n=4, trials=20_000, seed=11)
        empirical = competition_mc(0.5, 1.0, 4, spec)
        assert empirical == pytest.approx(competition_detection_prob(0.5, 1.0, 4), abs=0.02)

    def test_needs_two_reporters(self):
        with pytest.raises(PreconditionError):
            competition_mc(0.5, 1.0, 1, DetectionSpec())

    def test_invalid_noise(self):
        with pytest.raises(ParameterError):
            competition_detection_prob(0.5, 0.0, 4)


class TestCompetitionMonteCarlo:
    """Monte Carlo à 10⁵ tirages contre la forme close"""

    @pytest.mark.parametrize("ratio", [0.0, 0.25, 0.5, 1.0])
    @pytest.mark.parametrize("n", [2, 4, 16])
    def test_matches_closed_form(self, ratio, n):
        spec = DetectionSpec(delta=ratio, sigma=1.0, n=n, trials=100_000, seed=3)
        empirical = competition_mc(ratio, 1.0, n, spec)
        assert empirical == pytest.approx(competition_detection_prob(ratio, 1.0, n), abs=0.01)
