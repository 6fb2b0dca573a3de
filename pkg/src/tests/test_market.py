"""
Tests du marché polymatroïdal : capacités, mécanisme d'Archer–Tardos et opérateur
"""

import numpy as np
import pytest

from lab.errors import (
    CapacityError,
    ConvergenceError,
    OrderingChangedError,
    ParameterError,
    PreconditionError,
)
from lab.market.capacity import (
    CapacityValidator,
    SubmodularCapacity,
    mask_of,
    random_capacity,
    subset_label,
    validate_capacity,
)
from lab.market.mechanism import (
    at_payments,
    bidder_utility_profile,
    compare_marginal_revenue,
    greedy_allocation,
    greedy_order,
    marginal_revenue_fd,
    marginal_revenue_formula,
    nonmodularity_gap,
    revenue,
)
from lab.market.operator import (
    MarketInstance,
    deviation_welfare,
    first_order_inflation,
    operator_best_response,
    operator_objective,
    verify_nt3_signals,
)
from lab.scoring.generators import Generator


class TestCapacity:
    """Table ν et validation du polymatroïde"""

    def test_labels_and_masks(self):
        assert mask_of([0, 2]) == 5
        assert subset_label(5, 3) == "1,3"
        assert subset_label(0, 3) == ""

    def test_canonical_is_valid(self, canonical_capacity):
        result = CapacityValidator().validate(canonical_capacity)
        assert result["is_valid"]
        assert result["witness"] == {}
        assert canonical_capacity.as_mapping() == {"": 0.0, "1": 1.0, "2": 1.0, "1,2": 1.5}

    def test_supermodular_rejected_with_witness(self):
        cap = SubmodularCapacity(2, (0.0, 0.5, 0.5, 1.2))
        with pytest.raises(CapacityError) as exc_info:
            validate_capacity(cap)
        assert exc_info.value.witness["check"] == "submodular"

    def test_non_monotone_rejected(self):
        result = CapacityValidator().validate(SubmodularCapacity(2, (0.0, 1.0, 0.5, 0.8)))
        assert not result["is_valid"]
        assert result["witness"]["check"] == "monotone"

    def test_marginal_above_one_rejected(self):
        result = CapacityValidator().validate(SubmodularCapacity(2, (0.0, 1.5, 1.0, 2.0)))
        assert result["witness"]["check"] == "marginal"

    def test_empty_set_must_be_zero(self):
        result = CapacityValidator().validate(SubmodularCapacity(2, (0.1, 1.0, 1.0, 1.5)))
        assert result["witness"]["check"] == "empty"

    def test_incomplete_table(self):
        with pytest.raises(CapacityError):
            SubmodularCapacity(2, (0.0, 1.0, 1.0))

    def test_missing_subsets(self):
        with pytest.raises(CapacityError):
            SubmodularCapacity.from_subsets(2, {frozenset(): 0.0, frozenset({0}): 1.0})

    def test_generated_capacities_are_valid(self, rng):
        for n in (2, 3, 4):
            validate_capacity(random_capacity(n, rng))
        validate_capacity(SubmodularCapacity.concave_of_modular([0.3, 0.8, 1.2]))

    def test_restriction(self):
        cap = SubmodularCapacity.concave_of_modular([0.5, 0.5, 0.5])
        small = cap.restricted(2)
        assert small.n == 2
        assert small.value([0, 1]) == pytest.approx(cap.value([0, 1]))


class TestMechanism:
    """Allocation gloutonne, paiements et revenu marginal"""

    def test_greedy_order_ties_by_index(self):
        np.testing.assert_array_equal(greedy_order([0.4, 0.9, 0.4]), [1, 0, 2])

    def test_canonical_allocation(self, canonical_capacity):
        np.testing.assert_allclose(greedy_allocation(canonical_capacity, [0.9, 0.4]), [1.0, 0.5])

    def test_canonical_payments(self, canonical_capacity):
        np.testing.assert_allclose(at_payments(canonical_capacity, [0.9, 0.4]), [0.2, 0.0], atol=1e-12)
        assert revenue(canonical_capacity, [0.9, 0.4]) == pytest.approx(0.2)
        assert revenue(canonical_capacity, [0.9, 0.5]) == pytest.approx(0.25)

    def test_nonmodularity_gap(self, canonical_capacity):
        assert nonmodularity_gap(canonical_capacity, 0, 1) == pytest.approx(0.5)
        with pytest.raises(ParameterError):
            nonmodularity_gap(canonical_capacity, 0, 0)

    def test_marginal_revenue(self, canonical_capacity):
        assert marginal_revenue_formula(canonical_capacity, [0.9, 0.4], 1) == pytest.approx(0.5)
        assert marginal_revenue_formula(canonical_capacity, [0.9, 0.4], 0) == 0.0
        assert marginal_revenue_fd(canonical_capacity, [0.9, 0.4], 1, 0.01) == pytest.approx(0.5, abs=1e-10)

    def test_finite_difference_order_change(self, canonical_capacity):
        with pytest.raises(OrderingChangedError):
            marginal_revenue_fd(canonical_capacity, [0.9, 0.4], 1, 0.6)

    def test_formula_needs_distinct_bids(self, canonical_capacity):
        with pytest.raises(PreconditionError):
            marginal_revenue_formula(canonical_capacity, [0.5, 0.5], 0)

    def test_two_agent_formula_matches_finite_difference(self, rng):
        for bids in ([0.8, 0.3], [0.2, 0.6], [0.55, 0.45], [0.1, 0.9], [0.7, 0.65]):
            cap = random_capacity(2, rng)
            table = compare_marginal_revenue(cap, bids, 1e-3)
            assert list(table.columns) == ["agent", "formula", "finite_difference", "abs_diff"]
            assert (table["abs_diff"] <= 1e-10).all()

    def test_truthful_bid_maximizes_utility(self, rng):
        cap = random_capacity(3, rng)
        values = np.array([0.7, 0.35, 0.55])
        grid = np.linspace(0.0, 1.0, 101)
        for i in range(3):
            utilities = bidder_utility_profile(cap, values, i, grid)
            truthful = bidder_utility_profile(cap, values, i, [values[i]])[0]
            assert truthful >= utilities.max() - 1e-12


class TestOperator:
    """Inflation de l'opérateur et indétectabilité"""

    def test_canonical_inflation(self, canonical_market):
        effective = operator_best_response(canonical_market)
        np.testing.assert_allclose(effective, [0.9, 0.425], atol=1e-10)
        assert first_order_inflation(canonical_market, 1) == pytest.approx(0.025)
        assert first_order_inflation(canonical_market, 0) == 0.0

    def test_inflation_improves_objective(self, canonical_market):
        effective = operator_best_response(canonical_market)
        assert operator_objective(canonical_market, effective) > operator_objective(canonical_market, canonical_market.bids)

    def test_zero_gamma_is_compliant(self, canonical_market):
        np.testing.assert_array_equal(operator_best_response(canonical_market.with_gamma(0.0)), [0.9, 0.4])

    def test_non_quadratic_compliance_still_inflates(self, canonical_capacity):
        market = MarketInstance(canonical_capacity, (0.9, 0.4), gamma=0.1, compliance=Generator.power(3.0, 0.0, 1.0))
        effective = operator_best_response(market)
        assert effective[1] > 0.4
        assert effective[1] - 0.4 == pytest.approx(first_order_inflation(market, 1), rel=0.2)

    def test_deviation_welfare(self, canonical_capacity):
        welfare = deviation_welfare(canonical_capacity, [0.9, 0.4], [0.9, 0.425], 1.0, 0.1)
        assert welfare.operator_change == pytest.approx(0.000625)
        assert welfare.predicted_gain == pytest.approx(0.000625)
        assert not welfare.ordering_changed

        raised = deviation_welfare(canonical_capacity, [0.9, 0.4], [0.9, 0.5], 1.0, 0.1)
        assert raised.surplus_change[0] == pytest.approx(-0.05)
        assert raised.total_surplus_change == pytest.approx(-0.05)

    def test_nt3_signals_equal(self, canonical_capacity):
        equal = verify_nt3_signals(canonical_capacity, [0.9, 0.4], [0.9, 0.425])
        assert equal == {0: True}

    def test_nt3_single_coordinate(self, canonical_capacity):
        with pytest.raises(PreconditionError):
            verify_nt3_signals(canonical_capacity, [0.9, 0.4], [0.95, 0.45])

    def test_instance_validation(self, canonical_capacity):
        with pytest.raises(ParameterError):
            MarketInstance(canonical_capacity, (0.5, 0.5))
        with pytest.raises(ParameterError):
            MarketInstance(canonical_capacity, (0.9, 0.4), delta_rep=0.0)
        with pytest.raises(CapacityError):
            MarketInstance(SubmodularCapacity(2, (0.0, 0.5, 0.5, 1.2)), (0.9, 0.4))

    def test_convergence_limit(self, canonical_market, mocker):
        mocker.patch("lab.market.operator.MAX_SWEEPS", 0)
        with pytest.raises(ConvergenceError):
            operator_best_response(canonical_market)


class TestTruthfulness:
    """Enchère véridique optimale sur instances aléatoires graînées"""

    @pytest.mark.parametrize("k", range(50))
    def test_truthful_bid_is_dominant(self, k):
        rng = np.random.default_rng([0, 2, k])
        n = int(rng.integers(2, 5))
        cap = random_capacity(n, rng)
        values = rng.uniform(0.05, 0.95, size=n)
        grid = np.linspace(0.0, 1.0, 101)
        for i in range(n):
            utilities = bidder_utility_profile(cap, values, i, grid)
            truthful = bidder_utility_profile(cap, values, i, [values[i]])[0]
            assert truthful >= utilities.max() - 1e-12
