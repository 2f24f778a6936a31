"""Axioms, dual representation and supergradients of the convex expectation families."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import E, random_density, random_rho, random_space
from convex_np.errors import DimensionMismatch, InvalidParameter, ValidationError
from convex_np.measure import expectation, make_space
from convex_np.oracle import finite_diff_check
from convex_np.risk_models import (
    Entropic,
    FinitelyGenerated,
    Linear,
    attainment_residual,
    evaluate,
    mixture,
    penalty,
    supergradient,
)

FAMILIES = ("linear", "entropic", "finitely_generated")


@pytest.fixture
def q0(half_space):
    return half_space.density_from_probabilities([0.75, 0.25])


@pytest.fixture
def entropic_q0(half_space, q0):
    return Entropic(half_space, q0, 1.0)


class TestEntropic:
    def test_evaluate(self, entropic_q0):
        assert evaluate(entropic_q0, [0.0, 1.0]) == pytest.approx(math.log((3 + E) / 4), abs=1e-12)
        assert math.log((3 + E) / 4) == pytest.approx(0.357374, abs=1e-6)

    def test_supergradient_tilts(self, half_space, entropic_q0):
        sg = supergradient(entropic_q0, [0.0, 1.0])
        np.testing.assert_allclose(sg.density.values, [6 / (3 + E), 2 * E / (3 + E)], atol=1e-12)
        np.testing.assert_allclose(
            half_space.probabilities(sg.density), [3 / (E + 3), E / (E + 3)], atol=1e-12
        )
        assert attainment_residual(entropic_q0, [0.0, 1.0], sg) <= 1e-12

    def test_supergradient_for_other_base(self, half_space):
        rho = Entropic(half_space, half_space.density_from_probabilities([0.25, 0.75]))
        sg = supergradient(rho, [1.0, 0.0])
        np.testing.assert_allclose(
            half_space.probabilities(sg.density), [E / (E + 3), 3 / (E + 3)], atol=1e-12
        )

    def test_penalty_at_base_vanishes(self, entropic_q0, q0):
        assert penalty(entropic_q0, q0) == 0.0

    @pytest.mark.parametrize("q", [0.1, 0.5, 0.9])
    def test_penalty_closed_form(self, half_space, entropic_q0, q):
        density = half_space.density_from_probabilities([q, 1 - q])
        expected = q * math.log(q) + (1 - q) * math.log(1 - q) - q * math.log(3) + 2 * math.log(2)
        assert penalty(entropic_q0, density) == pytest.approx(expected, abs=1e-12)

    def test_constant_input_returns_base(self, entropic_q0, q0):
        sg = supergradient(entropic_q0, [2.0, 2.0])
        np.testing.assert_allclose(sg.density.values, q0.values, atol=1e-12)
        assert evaluate(entropic_q0, [2.0, 2.0]) == pytest.approx(2.0, abs=1e-12)

    def test_large_inputs_do_not_overflow(self, entropic_q0):
        value = evaluate(entropic_q0, [1000.0, 0.0])
        assert value == pytest.approx(1000.0 + math.log(0.75), abs=1e-9)

    def test_theta_scales(self, half_space, q0):
        rho = Entropic(half_space, q0, 2.0)
        x = np.array([0.0, 1.0])
        expected = math.log(0.75 + 0.25 * math.exp(2.0)) / 2.0
        assert evaluate(rho, x) == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("theta", [0.0, -1.0, math.inf])
    def test_invalid_theta(self, half_space, q0, theta):
        with pytest.raises(InvalidParameter):
            Entropic(half_space, q0, theta)

    def test_invalid_theta_is_a_validation_error(self, half_space, q0):
        with pytest.raises(ValidationError, match="theta"):
            Entropic(half_space, q0, 0.0)

    def test_finite_differences_match(self, entropic_q0):
        assert finite_diff_check(entropic_q0, [0.3, -0.7]) <= 1e-6


class TestFinitelyGenerated:
    def test_evaluate_max_of_scores(self):
        space = make_space([0.5, 0.5])
        x = np.array([1.0, 0.0])
        d1 = space.density([1.0, 1.0])
        d2 = space.density([1.4, 0.6])
        rho = FinitelyGenerated(space, [d1, d2], [0.0, 0.1])
        assert expectation(space, d1, x) == pytest.approx(0.5)
        assert expectation(space, d2, x) == pytest.approx(0.7)
        assert evaluate(rho, x) == pytest.approx(0.6, abs=1e-12)

    def test_tie_goes_to_lowest_index(self, half_space):
        d1 = half_space.density([1.5, 0.5])
        d2 = half_space.density([0.5, 1.5])
        rho = FinitelyGenerated(half_space, [d1, d2])
        sg = supergradient(rho, [1.0, 1.0])
        assert sg.density is rho.generators[0]

    def test_penalty_of_generator(self, half_space):
        d1 = half_space.density([1.5, 0.5])
        d2 = half_space.density([0.5, 1.5])
        rho = FinitelyGenerated(half_space, [d1, d2], [0.2, 0.4])
        assert penalty(rho, d2) == pytest.approx(0.4)

    def test_penalty_of_mixture_is_linearized(self, half_space):
        d1 = half_space.density([1.5, 0.5])
        d2 = half_space.density([0.5, 1.5])
        rho = FinitelyGenerated(half_space, [d1, d2], [0.2, 0.4])
        mid = half_space.density([1.0, 1.0])
        assert penalty(rho, mid) == pytest.approx(0.3, abs=1e-9)

    def test_penalty_outside_hull(self, half_space):
        d1 = half_space.density([1.5, 0.5])
        d2 = half_space.density([1.0, 1.0])
        rho = FinitelyGenerated(half_space, [d1, d2])
        assert penalty(rho, half_space.density([0.5, 1.5])) == math.inf

    def test_empty_generators(self, half_space):
        with pytest.raises(InvalidParameter):
            FinitelyGenerated(half_space, [])

    def test_penalty_count_mismatch(self, half_space):
        with pytest.raises(DimensionMismatch):
            FinitelyGenerated(half_space, [half_space.base], [0.0, 1.0])

    def test_infinite_penalty_rejected(self, half_space):
        with pytest.raises(InvalidParameter):
            FinitelyGenerated(half_space, [half_space.base], [math.inf])


class TestLinear:
    def test_base_has_zero_penalty(self, half_space, q0):
        rho = Linear(half_space, q0)
        assert penalty(rho, q0) == 0.0
        assert penalty(rho, half_space.base) == math.inf

    def test_supergradient_is_base(self, half_space, q0):
        rho = Linear(half_space, q0)
        sg = supergradient(rho, [0.3, 0.9])
        np.testing.assert_allclose(sg.density.values, q0.values)
        assert sg.penalty == 0.0

    def test_permuted(self, q0):
        space = make_space([0.25, 0.75])
        rho = Linear(space, space.density([2.0, 2.0 / 3.0]))
        moved = rho.permuted([1, 0])
        assert evaluate(moved, [0.0, 1.0]) == pytest.approx(evaluate(rho, [1.0, 0.0]))


class TestIntersection:
    def test_shared_base(self, half_space, q0):
        assert Linear(half_space, q0).intersects(Entropic(half_space, q0))

    def test_disjoint_linear(self, half_space, q0):
        assert not Linear(half_space, q0).intersects(Linear(half_space, half_space.base))

    def test_entropic_admits_everything_on_full_support(self, half_space, q0):
        assert Entropic(half_space, half_space.base).intersects(Linear(half_space, q0))


class TestMixture:
    def test_linear_penalty(self, half_space):
        d1 = half_space.density([1.5, 0.5])
        d2 = half_space.density([0.5, 1.5])
        sg = mixture(half_space, [d1, d2], [1.0, 3.0], [0.4, 0.0])
        np.testing.assert_allclose(sg.density.values, [0.75, 1.25])
        assert sg.penalty == pytest.approx(0.1)


def _instance(seed, family):
    rng = np.random.default_rng(seed)
    space = random_space(rng, int(rng.integers(1, 6)))
    rho = random_rho(rng, space, family)
    x = rng.normal(scale=2.0, size=space.size)
    y = rng.normal(scale=2.0, size=space.size)
    return rng, space, rho, x, y


@pytest.mark.parametrize("family", FAMILIES)
class TestAxioms:
    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=1000, deadline=None)
    def test_monotone(self, family, seed):
        rng, space, rho, x, _ = _instance(seed, family)
        bigger = x + rng.uniform(0.0, 1.0, size=space.size)
        assert evaluate(rho, bigger) >= evaluate(rho, x) - 1e-12

    @given(seed=st.integers(0, 2**32 - 1), c=st.floats(-50.0, 50.0))
    @settings(max_examples=1000, deadline=None)
    def test_cash_invariant(self, family, seed, c):
        _, _, rho, x, _ = _instance(seed, family)
        assert abs(evaluate(rho, x + c) - evaluate(rho, x) - c) <= 1e-10

    @given(seed=st.integers(0, 2**32 - 1), lam=st.floats(0.0, 1.0))
    @settings(max_examples=1000, deadline=None)
    def test_convex(self, family, seed, lam):
        _, _, rho, x, y = _instance(seed, family)
        mixed = evaluate(rho, lam * x + (1 - lam) * y)
        assert mixed <= lam * evaluate(rho, x) + (1 - lam) * evaluate(rho, y) + 1e-10

    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=1000, deadline=None)
    def test_fenchel_inequality(self, family, seed):
        rng, space, rho, x, _ = _instance(seed, family)
        if family == "finitely_generated":
            # points of the generator hull have finite linearized penalty
            weights = rng.dirichlet(np.ones(len(rho.generators)))
            q = space.normalized_density(sum(w * g.values for w, g in zip(weights, rho.generators)))
        else:
            q = random_density(rng, space)
        value = penalty(rho, q)
        if math.isfinite(value):
            assert evaluate(rho, x) >= expectation(space, q, x) - value - 1e-9

    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=1000, deadline=None)
    def test_supergradient_attains(self, family, seed):
        _, _, rho, x, _ = _instance(seed, family)
        assert attainment_residual(rho, x, supergradient(rho, x)) <= 1e-9
