"""
Tests du jeu de surveillance : premier rang, filtrage induit, régulation et statique
"""

import numpy as np
import pytest

from lab.agent.approval import Affine, Sigmoid, Step
from lab.agent.reporter import AgentParams
from lab.errors import DegenerateRegimeError, ParameterError
from lab.oversight.game import (
    Beta,
    OversightGame,
    PrincipalParams,
    Uniform,
    optimal_step_threshold,
    p_min,
    surplus,
    threshold_type,
)
from lab.oversight.screening import (
    _p_min_partial,
    affine_welfare_gap,
    check_nt_conditions,
    first_best_utility,
    induced_screening,
    population_welfare,
    principal_utility,
    regulation_gain,
    screening_breakpoints,
    statics_report,
)
from lab.oversight.welfare_gap import GapSearch, curvature_dispersion, power_family_gap_curve, welfare_gap_smooth
from lab.scoring.generators import Generator


class TestGameParameters:
    """Principal, distributions et régime"""

    def test_p_min_and_surplus(self):
        principal = PrincipalParams(1.0, -1.0, 0.0)
        assert p_min(principal) == pytest.approx(0.5)
        np.testing.assert_allclose(surplus(principal, np.array([0.0, 0.5, 1.0])), [-1.0, 0.0, 1.0])

    def test_utility_ordering_enforced(self):
        with pytest.raises(ParameterError):
            PrincipalParams(0.0, 0.0, 1.0)

    def test_uniform_support_validation(self):
        with pytest.raises(ParameterError):
            Uniform(0.5, 0.2)

    def test_beta_normalized(self):
        assert Beta(2.0, 2.0).mass() == pytest.approx(1.0, abs=1e-8)
        assert Beta(2.0, 5.0).mass() == pytest.approx(1.0, abs=1e-8)

    def test_support_must_fit_generator_domain(self):
        with pytest.raises(ParameterError):
            OversightGame(Generator.power(1.5), PrincipalParams(), AgentParams(), Uniform(0.0, 1.0))

    def test_degenerate_regime(self, canonical_game):
        game = canonical_game.with_agent(AgentParams(beta=1.0, gamma=0.3))
        assert not game.non_degenerate
        with pytest.raises(DegenerateRegimeError):
            optimal_step_threshold(game)


class TestStepFirstBest:
    """Seuil net optimal et premier rang"""

    def test_canonical_threshold(self, canonical_game):
        assert canonical_game.p_min == pytest.approx(0.5)
        assert optimal_step_threshold(canonical_game) == pytest.approx(0.7)

    def test_threshold_type_is_p_min(self, canonical_game):
        cut = threshold_type(canonical_game, 0.7)
        assert cut.p_star == pytest.approx(0.5, abs=1e-12)
        assert not cut.all_inflate

    def test_first_best_canonical(self, canonical_game):
        assert first_best_utility(canonical_game) == pytest.approx(0.25, abs=1e-10)

    def test_step_attains_first_best(self, canonical_game):
        utility = principal_utility(canonical_game, Step(0.7))
        assert utility == pytest.approx(0.25, abs=1e-6)

    def test_first_best_under_beta_types(self, canonical_game):
        game = canonical_game.with_distribution(Beta(2.0, 2.0))
        assert first_best_utility(game) == pytest.approx(0.1875, abs=1e-8)
        assert principal_utility(game, Step(optimal_step_threshold(game))) == pytest.approx(0.1875, abs=1e-6)

    @pytest.mark.parametrize("alpha", [1.5, 2.5, 3.0])
    def test_power_threshold_type(self, alpha):
        game = OversightGame(
            Generator.power(alpha, 0.05, 0.95), PrincipalParams(), AgentParams(beta=1.0, gamma=0.04), Uniform(0.05, 0.95)
        )
        r0 = optimal_step_threshold(game)
        assert threshold_type(game, r0).p_star == pytest.approx(game.p_min, abs=1e-8)
        assert principal_utility(game, Step(r0)) == pytest.approx(first_best_utility(game), abs=1e-6)

    @pytest.mark.parametrize("gamma", [0.005, 0.01, 0.02, 0.03, 0.04])
    @pytest.mark.parametrize("beta", [1.0, 1.5, 2.0, 3.0, 4.0])
    @pytest.mark.parametrize("pm", [0.4, 0.5, 0.6])
    def test_brier_step_attains_first_best_grid(self, gamma, beta, pm):
        principal = PrincipalParams(u_s=1.0, u_f=-1.0, u_d=2.0 * pm - 1.0)
        game = OversightGame(Generator.brier(), principal, AgentParams(beta=beta, gamma=gamma), Uniform(0.0, 1.0))
        r0 = optimal_step_threshold(game)
        assert r0 == pytest.approx(pm + np.sqrt(gamma / beta), abs=1e-9)
        assert principal_utility(game, Step(r0)) == pytest.approx(first_best_utility(game), abs=1e-6)


class TestInducedScreening:
    """Filtrage q̃ = q(r*(p))"""

    def test_step_screening(self, canonical_game):
        q = Step(0.7)
        assert induced_screening(canonical_game, q, 0.6) == 1.0
        assert induced_screening(canonical_game, q, 0.4) == 0.0

    def test_step_breakpoint(self, canonical_game):
        assert screening_breakpoints(canonical_game, Step(0.7)) == pytest.approx([0.5])

    def test_affine_gap_oracle(self, canonical_game):
        assert affine_welfare_gap(canonical_game, 0.0, 1.0) == pytest.approx(0.08353, abs=1e-3)

    def test_affine_gap_positive(self, canonical_game):
        for a, b in [(0.0, 2.0), (-0.5, 2.0), (1.0, 0.0), (0.0, 0.0)]:
            assert affine_welfare_gap(canonical_game, a, b) > 0.0

    @pytest.mark.parametrize("a", np.round(np.linspace(-1.0, 1.0, 21), 6))
    def test_affine_never_attains_first_best(self, canonical_game, a):
        first_best = first_best_utility(canonical_game)
        for b in np.round(np.linspace(0.0, 2.0, 21), 6):
            assert principal_utility(canonical_game, Affine(float(a), float(b))) < first_best

    @pytest.mark.parametrize(
        "q",
        [Affine(0.0, 1.0), Affine(-0.5, 2.0), Sigmoid(0.5, 0.05), Sigmoid(0.7, 1e-3), Step(0.5), Step(0.7), Step(0.9)],
        ids=lambda q: q.label,
    )
    @pytest.mark.parametrize(
        "dist", [Uniform(0.0, 1.0), Beta(2.0, 2.0), Uniform(0.2, 0.9)], ids=lambda d: d.label
    )
    def test_principal_utility_below_first_best(self, canonical_game, q, dist):
        game = canonical_game.with_distribution(dist)
        assert principal_utility(game, q) <= first_best_utility(game) + 1e-9


class TestRegulation:
    """Gain de régulation et conditions NT"""

    def test_constant_approval_gain(self, canonical_game):
        result = regulation_gain(canonical_game, Affine(1.0, 0.0), 0.1)
        assert result.gain == pytest.approx(0.25, abs=1e-8)
        assert result.regulate

    def test_low_step_gain(self, canonical_game):
        result = regulation_gain(canonical_game, Step(0.5), 0.1)
        assert result.gain == pytest.approx(0.04, abs=1e-6)
        assert not result.regulate

    def test_first_best_step_gain_vanishes(self, canonical_game):
        assert regulation_gain(canonical_game, Step(0.7), 0.0).gain == pytest.approx(0.0, abs=1e-6)

    def test_negative_cost_rejected(self, canonical_game):
        with pytest.raises(ParameterError):
            regulation_gain(canonical_game, Step(0.7), -0.1)

    def test_nt_conditions(self, canonical_game):
        smooth = check_nt_conditions(canonical_game, Sigmoid(0.5, 0.05))
        assert smooth.nt1 and smooth.nt2 and smooth.nt3
        affine = check_nt_conditions(canonical_game, Affine(0.0, 1.0))
        assert affine.nt1 and not affine.nt2
        assert affine.binding_mass == pytest.approx(1.0)


class TestStatics:
    """Statique comparative"""

    def test_statics_report(self, canonical_game):
        report = statics_report(canonical_game, delta=0.1, alpha=0.05, n_agents=10)
        assert report.dpmin_du_d == pytest.approx(0.5, abs=1e-6)
        assert report.dpmin_du_s == pytest.approx(-0.25, abs=1e-6)
        assert report.dpmin_du_f == pytest.approx(-0.25, abs=1e-6)
        assert report.r0_spread <= 1e-12
        assert report.sample_size == 738
        assert report.population_welfare == pytest.approx(2.5, abs=1e-8)

    def test_population_welfare_requires_agents(self, canonical_game):
        with pytest.raises(ParameterError):
            population_welfare(canonical_game, 0)

    def test_population_welfare_closed_form(self, canonical_game):
        game = canonical_game.with_distribution(Uniform(0.2, 0.9))
        # u_d + (u_s − u_f)(hi − p_min)² / (2(hi − lo))
        assert population_welfare(game, 4) == pytest.approx(4 * 2.0 * 0.16 / 1.4, abs=1e-9)

    def test_sensitivities_with_narrow_utility_gap(self):
        principal = PrincipalParams(u_s=1.0, u_f=-1.0, u_d=1.0 - 1e-7)
        span = principal.u_s - principal.u_f
        assert _p_min_partial(principal, "u_d") == pytest.approx(1.0 / span, abs=1e-6)
        assert _p_min_partial(principal, "u_s") == pytest.approx(-(principal.u_d - principal.u_f) / span**2, abs=1e-6)
        assert _p_min_partial(principal, "u_f") == pytest.approx((principal.u_d - principal.u_s) / span**2, abs=1e-6)


class TestWelfareGap:
    """Écart lisse et famille puissance"""

    @pytest.fixture
    def power_game(self):
        return OversightGame(
            Generator.power(2.0, 0.05, 0.95), PrincipalParams(), AgentParams(beta=1.0, gamma=0.04), Uniform(0.05, 0.95)
        )

    @pytest.fixture
    def narrow_search(self):
        return GapSearch(r_min_values=(0.7,), tau_values=(1e-3,), refine=False)

    def test_power_two_matches_brier(self, power_game):
        search = GapSearch(r_min_values=(0.68, 0.7, 0.72), tau_values=(1e-3, 1e-2), refine=False)
        brier = power_game.with_generator(Generator(domain_lo=0.05, domain_hi=0.95))
        expected = welfare_gap_smooth(power_game, 1e-3, search).gap_hat
        assert welfare_gap_smooth(brier, 1e-3, search).gap_hat == pytest.approx(expected, abs=1e-9)

    @pytest.mark.slow
    @pytest.mark.parametrize("alpha", [2.0, 3.0])
    def test_gap_shrinks_with_tau_floor(self, power_game, alpha):
        game = power_game.with_generator(Generator.power(alpha, 0.05, 0.95))
        search = GapSearch(
            r_min_values=tuple(np.round(np.linspace(0.6, 0.8, 9), 6)), tau_values=(1e-3, 1e-2, 3e-2), refine=False
        )
        fine = welfare_gap_smooth(game, 1e-3, search).gap_hat
        coarse = welfare_gap_smooth(game, 2e-2, search).gap_hat
        assert -1e-9 <= fine < 0.5 * coarse

    def test_gap_vanishes_for_quadratic_generator(self, power_game, narrow_search):
        estimate = welfare_gap_smooth(power_game, 1e-3, narrow_search)
        assert -1e-8 <= estimate.gap_hat <= 1e-3
        assert estimate.best_q == Sigmoid(0.7, 1e-3)

    def test_tau_floor_applied(self, power_game):
        search = GapSearch(r_min_values=(0.7,), tau_values=(1e-4,), refine=False)
        assert welfare_gap_smooth(power_game, 1e-3, search).best_q.tau == pytest.approx(1e-3)

    def test_invalid_search(self, power_game):
        with pytest.raises(ParameterError):
            welfare_gap_smooth(power_game, 0.0)
        with pytest.raises(ParameterError):
            welfare_gap_smooth(power_game, 1e-3, GapSearch(r_min_values=(), tau_values=(1e-3,)))

    def test_curvature_dispersion(self, power_game):
        assert curvature_dispersion(power_game).var_inv_curvature == pytest.approx(0.0, abs=1e-15)
        cubic = power_game.with_generator(Generator.power(3.0, 0.05, 0.95))
        assert curvature_dispersion(cubic).var_inv_curvature > 0.0

    @pytest.mark.slow
    def test_power_family_curve_columns(self, power_game, narrow_search):
        curve = power_family_gap_curve(power_game, [2.0, 3.0], 1e-3, narrow_search)
        assert list(curve["alpha"]) == [2.0, 3.0]
        assert (curve["gap_hat"] >= -1e-9).all()
        assert (curve["utility"] <= curve["first_best"] + 1e-9).all()
        assert curve.loc[1, "var_inv_curvature"] > curve.loc[0, "var_inv_curvature"]
