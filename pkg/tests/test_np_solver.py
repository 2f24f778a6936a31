"""Tests for the convex Neyman-Pearson solver and its certificates."""

import inspect
import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.optimize import linprog

from conftest import E, random_rho, random_space
from convex_np import np_solver
from convex_np.errors import (
    DegenerateBounds,
    DimensionMismatch,
    InfeasibleSpec,
    InvalidParameter,
    NoConvergence,
    SaddleViolation,
    StructureViolation,
    TrivialCase,
)
from convex_np.measure import RandomVariable, make_space
from convex_np.np_solver import (
    ACCURACY_FLOOR,
    CERTIFICATE_TOL,
    RESIDUAL_NAMES,
    Certificate,
    CertificateReport,
    NPSolver,
    ProblemSpec,
    Solution,
    SolverOptions,
    extract_p_star,
    extract_q_star,
    gamma_alpha,
    infer_threshold,
    solve,
    solve_dual,
    solve_primal,
    threshold_violation,
    tilt_reduction,
    verify_solution,
)
from convex_np.oracle import grid_search
from convex_np.risk_models import Entropic, Linear, Supergradient


def _unit_bounds(n=2):
    return RandomVariable(np.zeros(n)), RandomVariable(np.ones(n))


@pytest.fixture
def linear_pair(half_space):
    """Classical problem: rho1 = E_mu, rho2 = E_Q0 with Q0 = (3/4, 1/4)."""
    k1, k2 = _unit_bounds()
    q0 = half_space.density_from_probabilities([0.75, 0.25])
    return ProblemSpec(half_space, Linear(half_space, half_space.base), Linear(half_space, q0), k1, k2, 0.5)


class TestSolverOptions:
    def test_defaults_per_strategy(self):
        options = SolverOptions()
        assert options.certificate_tol("lp") == 1e-6
        assert options.certificate_tol("subgradient") == 1e-4
        assert options.feas_tol("lp") == 1e-9
        assert options.feas_tol("subgradient") == 1e-6

    def test_explicit_tolerance_wins(self):
        assert SolverOptions(tol=1e-3).certificate_tol("lp") == 1e-3

    def test_threshold_slack_follows_feasibility(self):
        assert SolverOptions().threshold_tol("lp") == pytest.approx(1e-7)
        assert SolverOptions().threshold_tol("subgradient") == pytest.approx(1e-4)
        assert SolverOptions(feasibility_tol=1e-8).threshold_tol("subgradient") == pytest.approx(1e-6)

    def test_unknown_strategy(self):
        with pytest.raises(ValueError):
            SolverOptions(strategy="newton")

    def test_auto_resolution(self, example_41, linear_pair):
        assert SolverOptions().resolve(example_41) == "subgradient"
        assert SolverOptions().resolve(linear_pair) == "lp"


class TestProblemSpec:
    def test_alpha_below_lower_bound(self, half_space):
        k1, k2 = _unit_bounds()
        with pytest.raises(InfeasibleSpec):
            ProblemSpec(half_space, Linear(half_space, half_space.base), Linear(half_space, half_space.base), k1, k2, -0.1)

    def test_equal_bounds(self, half_space):
        k = RandomVariable([0.5, 0.5])
        with pytest.raises(DegenerateBounds):
            ProblemSpec(half_space, Linear(half_space, half_space.base), Linear(half_space, half_space.base), k, k, 0.5)

    def test_crossed_bounds(self, half_space):
        with pytest.raises(DegenerateBounds):
            ProblemSpec(
                half_space,
                Linear(half_space, half_space.base),
                Linear(half_space, half_space.base),
                RandomVariable([0.0, 1.0]),
                RandomVariable([1.0, 0.5]),
                0.5,
            )

    def test_negative_lower_bound(self, half_space):
        with pytest.raises(DegenerateBounds):
            ProblemSpec(
                half_space,
                Linear(half_space, half_space.base),
                Linear(half_space, half_space.base),
                RandomVariable([-1.0, 0.0]),
                RandomVariable([1.0, 1.0]),
                0.5,
            )

    def test_wrong_length(self, half_space):
        with pytest.raises(DimensionMismatch):
            ProblemSpec(
                half_space,
                Linear(half_space, half_space.base),
                Linear(half_space, half_space.base),
                RandomVariable([0.0, 0.0, 0.0]),
                RandomVariable([1.0, 1.0, 1.0]),
                0.5,
            )

    def test_rho_on_other_space(self, half_space):
        other = make_space([0.25, 0.75])
        k1, k2 = _unit_bounds()
        with pytest.raises(DimensionMismatch):
            ProblemSpec(half_space, Linear(other, other.base), Linear(half_space, half_space.base), k1, k2, 0.5)


class TestSolvePrimal:
    def test_example_41(self, example_41):
        x, beta = solve_primal(example_41)
        np.testing.assert_allclose(x.values, [1.0, 0.0], atol=1e-6)
        assert beta == pytest.approx(math.log((E + 3) / 4), abs=1e-6)

    def test_example_42(self, example_42):
        x, beta = solve_primal(example_42)
        np.testing.assert_allclose(x.values, [1.0, 0.0], atol=1e-6)
        assert beta == pytest.approx(0.5, abs=1e-6)

    def test_upper_bound_feasible(self, example_41):
        spec = replace(example_41, alpha=1.0)
        x, beta = solve_primal(spec)
        np.testing.assert_array_equal(x.values, [1.0, 1.0])
        assert beta == pytest.approx(0.0, abs=1e-12)

    def test_linear_pair_by_lp(self, linear_pair):
        solver = NPSolver()
        result = solver.solve_primal(linear_pair)
        assert result.strategy == "lp"
        np.testing.assert_allclose(result.x.values, [1.0, 0.0], atol=1e-9)
        assert result.beta == pytest.approx(0.25, abs=1e-12)

    def test_lp_requires_finitely_generated(self, example_41):
        with pytest.raises(InvalidParameter):
            NPSolver(SolverOptions(strategy="lp")).solve_primal(example_41)

    def test_stays_in_box_and_budget(self, example_43):
        x, _ = solve_primal(example_43)
        assert np.all(x.values >= -1e-12) and np.all(x.values <= 1 + 1e-12)
        assert example_43.rho1.evaluate(x) <= example_43.alpha + 1e-6


class TestRepresentatives:
    def test_q_star_example_41(self, example_41):
        q_star = extract_q_star(example_41, RandomVariable([1.0, 0.0]))
        np.testing.assert_allclose(
            example_41.space.probabilities(q_star.density), [3 / (E + 3), E / (E + 3)], atol=1e-12
        )

    def test_q_star_linear_is_base(self, linear_pair):
        q_star = extract_q_star(linear_pair, RandomVariable([1.0, 0.0]))
        np.testing.assert_allclose(q_star.density.values, [1.5, 0.5])
        assert q_star.penalty == 0.0

    def test_q_star_rejects_wrong_test(self, example_41):
        with pytest.raises(SaddleViolation):
            extract_q_star(example_41, RandomVariable([0.0, 1.0]))

    def test_gamma_example_41(self, example_41):
        q_star = extract_q_star(example_41, RandomVariable([1.0, 0.0]))
        gamma = gamma_alpha(example_41, q_star, RandomVariable([1.0, 0.0]))
        assert gamma == pytest.approx(E / (E + 3), abs=1e-12)

    def test_gamma_example_42(self, example_42):
        q_star = extract_q_star(example_42, RandomVariable([1.0, 0.0]))
        assert gamma_alpha(example_42, q_star) == pytest.approx(0.5, abs=1e-5)

    def test_gamma_vanishes_at_upper_bound(self, example_41):
        spec = replace(example_41, alpha=1.0)
        q_star = extract_q_star(spec, RandomVariable([1.0, 1.0]))
        assert gamma_alpha(spec, q_star) == pytest.approx(0.0, abs=1e-12)

    def test_p_star_example_42(self, example_42):
        x = RandomVariable([1.0, 0.0])
        q_star = extract_q_star(example_42, x)
        p_star = extract_p_star(example_42, q_star, 0.5, x)
        np.testing.assert_allclose(
            example_42.space.probabilities(p_star.density), [E / (E + 3), 3 / (E + 3)], atol=1e-12
        )

    def test_p_star_linear_is_base(self, example_41):
        x = RandomVariable([1.0, 0.0])
        q_star = extract_q_star(example_41, x)
        p_star = extract_p_star(example_41, q_star, E / (E + 3), x)
        np.testing.assert_allclose(p_star.density.values, [1.0, 1.0])

    def test_p_star_trivial_case(self, example_41):
        x = RandomVariable([1.0, 0.0])
        q_star = extract_q_star(example_41, x)
        with pytest.raises(TrivialCase):
            extract_p_star(example_41, q_star, 0.0, x)

    def test_solve_dual_example_42(self, example_42):
        q_star = Supergradient(example_42.space.base, 0.0)
        x, value = solve_dual(example_42, q_star, 0.5)
        np.testing.assert_allclose(x.values, [1.0, 0.0], atol=1e-4)
        assert value == pytest.approx(math.log(E + 3) - 2 * math.log(2), abs=1e-5)

    def test_solve_dual_linear(self, example_41):
        q_star = extract_q_star(example_41, RandomVariable([1.0, 0.0]))
        x, value = solve_dual(example_41, q_star, E / (E + 3))
        np.testing.assert_allclose(x.values, [1.0, 0.0], atol=1e-12)
        assert value == pytest.approx(0.5, abs=1e-12)


class TestTiltReduction:
    def test_unit_box_leaves_measures(self, half_space):
        k1, k2 = _unit_bounds()
        p = Supergradient(half_space.density([1.5, 0.5]), 0.0)
        q = Supergradient(half_space.base, 0.0)
        p_hat, q_hat, gamma = tilt_reduction(half_space, k1, k2, p, q, 0.3)
        np.testing.assert_allclose(p_hat.values, [1.5, 0.5])
        np.testing.assert_allclose(q_hat.values, [1.0, 1.0])
        assert gamma == pytest.approx(0.3)

    def test_wide_box(self, half_space):
        p = Supergradient(half_space.base, 0.0)
        p_hat, _, gamma = tilt_reduction(
            half_space, RandomVariable([0.0, 0.0]), RandomVariable([2.0, 1.0]), p, p, 0.0
        )
        np.testing.assert_allclose(p_hat.values, [4 / 3, 2 / 3])
        assert gamma == 0.0


class TestInferThreshold:
    def test_example_43(self, half_space):
        q_star = Supergradient(half_space.density_from_probabilities([3 / (E + 3), E / (E + 3)]), 0.0)
        p_star = Supergradient(half_space.density_from_probabilities([E / (E + 3), 3 / (E + 3)]), 0.0)
        k1, k2 = _unit_bounds()
        z, boundary = infer_threshold(RandomVariable([1.0, 0.0]), q_star, p_star, k1, k2)
        assert z == pytest.approx(E / 3, abs=1e-10)
        assert boundary == {1: 0.0}

    def test_upper_bound_gives_zero(self, half_space):
        sg = Supergradient(half_space.base, 0.0)
        k1, k2 = _unit_bounds()
        z, _ = infer_threshold(k2, sg, sg, k1, k2)
        assert z == 0.0

    def test_malformed_interior_value(self):
        space = make_space([1 / 3, 1 / 3, 1 / 3])
        q_star = Supergradient(space.density([1.5, 1.0, 0.5]), 0.0)
        p_star = Supergradient(space.base, 0.0)
        k1, k2 = _unit_bounds(3)
        with pytest.raises(StructureViolation):
            infer_threshold(RandomVariable([0.5, 1.0, 0.0]), q_star, p_star, k1, k2)

    def test_violation_is_zero_in_threshold_form(self):
        ratios = np.array([3.0, 2.0, 1.0])
        x = np.array([1.0, 0.4, 0.0])
        assert threshold_violation(x, ratios, np.zeros(3), np.ones(3), 2.0) == 0.0
        assert threshold_violation(x, ratios, np.zeros(3), np.ones(3), 1.0) == pytest.approx(0.6)

    @pytest.fixture
    def split_boundary(self):
        # one boundary level whose ratios drifted apart by a few 1e-8
        space = make_space([1 / 3, 1 / 3, 1 / 3])
        q_star = Supergradient(space.density([1.0, 1.0 - 1e-8, 1.0 + 1e-8]), 0.0)
        p_star = Supergradient(space.base, 0.0)
        return space, q_star, p_star

    def test_nearly_equal_ratios_share_the_boundary(self, split_boundary):
        _, q_star, p_star = split_boundary
        k1, k2 = _unit_bounds(3)
        x = RandomVariable([0.3, 0.5, 0.7])
        z, boundary = infer_threshold(x, q_star, p_star, k1, k2, tol=1e-4)
        assert z == pytest.approx(1.0, abs=1e-7)
        assert boundary == {0: 0.3, 1: 0.5, 2: 0.7}

    def test_exact_ratio_matching_splits_the_boundary(self, split_boundary):
        _, q_star, p_star = split_boundary
        k1, k2 = _unit_bounds(3)
        x = RandomVariable([0.3, 0.5, 0.7])
        with pytest.raises(StructureViolation):
            infer_threshold(x, q_star, p_star, k1, k2, tol=1e-4, ratio_tol=0.0)

    def test_ratio_tolerance_is_relative(self):
        ratios = np.array([100.0, 100.0 + 5e-6, 1.0])
        x = np.array([0.2, 0.9, 0.0])
        assert threshold_violation(x, ratios, np.zeros(3), np.ones(3), 100.0, ratio_tol=1e-7) == 0.0
        assert threshold_violation(x, ratios, np.zeros(3), np.ones(3), 100.0) == pytest.approx(0.1)

    def test_infinite_ratios_form_their_own_level(self):
        ratios = np.array([np.inf, 1e12, 0.0])
        x = np.array([0.5, 1.0, 0.0])
        assert threshold_violation(x, ratios, np.zeros(3), np.ones(3), np.inf, ratio_tol=1e-4) == 1.0
        assert threshold_violation(x, ratios, np.zeros(3), np.ones(3), 1.0, ratio_tol=1e-4) == 0.5

    def test_structure_residual_uses_the_ratio_tolerance(self, split_boundary):
        _, q_star, p_star = split_boundary
        x = np.array([0.3, 0.5, 0.7])
        lower, upper = np.zeros(3), np.ones(3)
        assert np_solver._structure_residual(x, q_star, p_star, lower, upper, 1e-4) == 0.0
        assert np_solver._structure_residual(x, q_star, p_star, lower, upper) >= 0.2


class TestSolve:
    def test_example_41(self, example_41):
        solution = solve(example_41)
        space = example_41.space
        np.testing.assert_allclose(solution.x_star.values, [1.0, 0.0], atol=1e-6)
        assert solution.beta == pytest.approx(math.log((E + 3) / 4), abs=1e-6)
        np.testing.assert_allclose(
            space.probabilities(solution.q_star.density), [3 / (E + 3), E / (E + 3)], atol=1e-4
        )
        assert solution.gamma_alpha == pytest.approx(E / (E + 3), abs=1e-4)
        assert solution.z == pytest.approx(2 * E / (E + 3), abs=1e-4)
        assert list(solution.boundary_values) == [1]
        assert solution.boundary_values[1] == pytest.approx(0.0, abs=1e-6)
        assert solution.certificates.passed(1e-4)
        assert not solution.trivial

    def test_example_42(self, example_42):
        solution = solve(example_42)
        np.testing.assert_allclose(
            example_42.space.probabilities(solution.p_star.density), [E / (E + 3), 3 / (E + 3)], atol=1e-4
        )
        assert solution.gamma_alpha == pytest.approx(0.5, abs=1e-4)
        assert solution.certificates.passed(1e-4)

    def test_example_43(self, example_43):
        solution = solve(example_43)
        space = example_43.space
        np.testing.assert_allclose(
            space.probabilities(solution.q_star.density), [3 / (E + 3), E / (E + 3)], atol=1e-4
        )
        np.testing.assert_allclose(
            space.probabilities(solution.p_star.density), [E / (E + 3), 3 / (E + 3)], atol=1e-4
        )
        assert solution.z == pytest.approx(E / 3, abs=1e-4)
        assert solution.z_from_tilt is not None
        assert solution.certificates.passed(1e-4)

    def test_trivial_case(self, example_41):
        solution = solve(replace(example_41, alpha=1.0))
        assert solution.trivial
        assert solution.gamma_alpha == pytest.approx(0.0, abs=1e-12)
        assert solution.z == 0.0
        certificate = solution.certificates["alpha_tightness"]
        assert not certificate.applicable
        assert "gamma_alpha" in certificate.reason
        assert solution.regions(example_41.k1.values, example_41.k2.values) == ["upper", "upper"]

    def test_linear_pair(self, linear_pair):
        solution = solve(linear_pair)
        assert solution.strategy == "lp"
        assert solution.beta == pytest.approx(0.25, abs=1e-9)
        assert solution.gamma_alpha == pytest.approx(0.25, abs=1e-9)
        assert solution.z == pytest.approx(0.5, abs=1e-9)
        assert solution.certificates.passed(1e-6)

    def test_permutation_equivariance(self, example_43):
        order = [1, 0]
        solution = solve(example_43)
        moved = solve(example_43.permuted(order))
        np.testing.assert_allclose(moved.x_star.values, solution.x_star.values[order], atol=1e-6)
        np.testing.assert_allclose(moved.q_star.density.values, solution.q_star.density.values[order], atol=1e-4)
        np.testing.assert_allclose(moved.p_star.density.values, solution.p_star.density.values[order], atol=1e-4)
        assert moved.beta == pytest.approx(solution.beta, abs=1e-6)
        assert moved.gamma_alpha == pytest.approx(solution.gamma_alpha, abs=1e-6)
        assert moved.z == pytest.approx(solution.z, abs=1e-6)

    def test_intersecting_sets_only_warn(self, half_space):
        k1, k2 = _unit_bounds()
        spec = ProblemSpec(
            half_space, Linear(half_space, half_space.base), Entropic(half_space, half_space.base), k1, k2, 0.5
        )
        solution = solve(spec, SolverOptions(require_certificate=False))
        assert solution.beta == pytest.approx(spec.rho2.evaluate(k2.values - solution.x_star.values))
        # symmetric problem: the optimum splits the budget evenly
        np.testing.assert_allclose(solution.x_star.values, [0.5, 0.5], atol=1e-2)

    @pytest.mark.slow
    def test_monotone_in_alpha(self, example_41):
        betas, gammas = [], []
        for alpha in (0.1, 0.3, 0.5, 0.7, 0.9):
            solution = solve(replace(example_41, alpha=alpha), SolverOptions(require_certificate=False))
            betas.append(solution.beta)
            gammas.append(solution.gamma_alpha)
        assert np.all(np.diff(betas) <= 1e-6)
        assert np.all(np.diff(gammas) <= 1e-4)


class TestVerifySolution:
    @pytest.fixture
    def closed_form(self, example_41):
        space = example_41.space
        x = RandomVariable([1.0, 0.0])
        q_star = example_41.rho2.supergradient(example_41.k2.values - x.values)
        return Solution(
            x_star=x,
            beta=math.log((E + 3) / 4),
            gamma_alpha=E / (E + 3),
            q_star=q_star,
            p_star=Supergradient(space.base, 0.0),
            z=2 * E / (E + 3),
            boundary_values={1: 0.0},
            strategy="subgradient",
        )

    def test_closed_form_residuals_vanish(self, example_41, closed_form):
        report = verify_solution(example_41, closed_form, tol=1e-8)
        assert [c.name for c in report.certificates] == list(RESIDUAL_NAMES)
        assert report.passed(1e-8), report.as_dict()
        assert report.minimax_gap <= 1e-8

    def test_perturbed_test_fails(self, example_41, closed_form):
        perturbed = replace(closed_form, x_star=RandomVariable([1.0, 0.1]))
        report = verify_solution(example_41, perturbed, tol=1e-6)
        assert max(report.primal_feasibility, report.q_saddle) > 1e-3
        assert not report.passed(1e-6)

    def test_strict_solve_raises_on_failure(self, example_41, monkeypatch):
        failing = CertificateReport((Certificate("q_saddle", 1.0),))
        monkeypatch.setattr(np_solver, "verify_solution", lambda *args, **kwargs: failing)
        solution = NPSolver().solve(example_41)
        assert solution.certificates.failures(1e-4) == ["q_saddle"]
        with pytest.raises(SaddleViolation):
            NPSolver().solve(example_41, strict=True)


class TestSolveBatch:
    def test_collects_results_and_errors(self, example_41, linear_pair, monkeypatch):
        original = NPSolver.solve

        def flaky(self, spec, strict=False):
            if spec.name == "broken":
                raise NoConvergence("gave up")
            return original(self, spec, strict)

        monkeypatch.setattr(NPSolver, "solve", flaky)
        broken = replace(linear_pair, name="broken")
        batch = NPSolver(SolverOptions(max_workers=2)).solve_batch([example_41, linear_pair, broken])
        assert batch["statistics"] == {"total": 3, "successful": 2, "failed": 1}
        assert sorted(batch["results"]) == [0, 1]
        assert batch["errors"] == {2: "NoConvergence: gave up"}
        assert batch["results"][1].beta == pytest.approx(0.25, abs=1e-9)


def _random_spec(seed, families):
    rng = np.random.default_rng(seed)
    space = random_space(rng, int(rng.integers(2, 4)))
    rho1 = random_rho(rng, space, families[0])
    rho2 = random_rho(rng, space, families[1])
    k1 = RandomVariable(rng.uniform(0.0, 0.3, size=space.size))
    k2 = RandomVariable(k1.values + rng.uniform(0.5, 1.0, size=space.size))
    low, high = rho1.evaluate(k1), rho1.evaluate(k2)
    alpha = low + float(rng.uniform(0.2, 0.8)) * (high - low)
    return ProblemSpec(space, rho1, rho2, k1, k2, alpha, f"random-{seed}")


FAMILY_MIX = [
    ("linear", "entropic"),
    ("entropic", "linear"),
    ("entropic", "entropic"),
    ("finitely_generated", "entropic"),
    ("entropic", "finitely_generated"),
    ("finitely_generated", "finitely_generated"),
    ("linear", "finitely_generated"),
]
# residuals bounded by the strategy's accuracy on the random suite
SUITE_TOL = {"lp": 1e-8, "subgradient": 1e-4}
SADDLE_RESIDUALS = ("q_attainment", "q_saddle", "p_attainment", "p_saddle", "minimax_gap")


@pytest.mark.slow
class TestRandomInstances:
    @pytest.fixture(scope="class", params=range(50), ids=lambda seed: f"seed-{seed}")
    def solved(self, request):
        spec = _random_spec(request.param, FAMILY_MIX[request.param % len(FAMILY_MIX)])
        return spec, NPSolver().solve(spec)

    def test_agrees_with_grid_oracle(self, solved):
        spec, solution = solved
        grid = grid_search(spec, 200)
        slack = CERTIFICATE_TOL[solution.strategy]
        assert solution.beta <= grid.value + slack
        assert solution.beta >= grid.value - grid.error_bound - slack

    def test_saddle_certificates(self, solved):
        _, solution = solved
        tol = SUITE_TOL[solution.strategy]
        report = solution.certificates
        for name in SADDLE_RESIDUALS:
            assert report[name].passed(tol), (name, report[name])

    def test_alpha_is_tight_when_gamma_is_positive(self, solved):
        spec, solution = solved
        if solution.gamma_alpha <= 1e-6:
            pytest.skip("gamma_alpha vanishes; the level need not bind")
        tol = SUITE_TOL[solution.strategy]
        assert abs(spec.rho1.evaluate(solution.x_star) - spec.alpha) <= tol

    def test_threshold_form_is_found(self, solved):
        _, solution = solved
        assert not math.isnan(solution.z)
        assert solution.certificates.structure_violation <= SolverOptions().threshold_tol(solution.strategy)

    def test_finitely_generated_pairs_take_the_lp(self, solved):
        spec, solution = solved
        if isinstance(spec.rho1, Entropic) or isinstance(spec.rho2, Entropic):
            assert solution.strategy == "subgradient"
        else:
            assert solution.strategy == "lp"


def _plain(matrix):
    if matrix is None:
        return None
    matrix = np.asarray(matrix, dtype=float)
    return None if matrix.size == 0 else matrix


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(40, 56))
def test_recorded_lps_match_highs(seed, monkeypatch):
    recorded = []
    original = np_solver.linprog_simplex

    def recording(*args, **kwargs):
        result = original(*args, **kwargs)
        recorded.append((inspect.signature(original).bind(*args, **kwargs), result))
        return result

    monkeypatch.setattr(np_solver, "linprog_simplex", recording)
    spec = _random_spec(seed, ("entropic", "finitely_generated"))
    NPSolver(SolverOptions(require_certificate=False)).solve(spec)
    assert recorded
    for bound, result in recorded:
        bound.apply_defaults()
        lp = bound.arguments
        reference = linprog(
            lp["c"],
            A_ub=_plain(lp["A_ub"]),
            b_ub=_plain(lp["b_ub"]),
            A_eq=_plain(lp["A_eq"]),
            b_eq=_plain(lp["b_eq"]),
            bounds=lp["bounds"] if lp["bounds"] is not None else (0, None),
            method="highs",
        )
        assert reference.status == 0
        assert result.fun == pytest.approx(reference.fun, abs=1e-8 * max(1.0, abs(reference.fun)))


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(4))
def test_strategies_agree_on_finitely_generated(seed):
    spec = _random_spec(100 + seed, ("finitely_generated", "finitely_generated"))
    lp = NPSolver(SolverOptions(strategy="lp", require_certificate=False)).solve_primal(spec)
    descent = NPSolver(SolverOptions(strategy="subgradient", require_certificate=False)).solve_primal(spec)
    assert abs(lp.beta - descent.beta) <= 1e-3


def test_accuracy_floor_is_strategy_specific():
    assert ACCURACY_FLOOR["lp"] < ACCURACY_FLOOR["subgradient"]
