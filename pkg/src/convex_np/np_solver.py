"""Neyman-Pearson problems for convex expectations.

The problem solved here is::

    minimize    rho2(k2 - X)
    over        k1 <= X <= k2,  rho1(X) <= alpha

Solving happens in two phases. First the optimal test ``X*`` and the
representative ``Q*`` (the measure at which the Type II error is evaluated)
are found. Then, under that fixed ``Q*``, the representative ``P*`` is found,
and ``X*`` is written in threshold form
``X* = k2 on {H_Q* > z G_P*}, B on {H_Q* = z G_P*}, k1 on {H_Q* < z G_P*}``.
Every claim is then re-checked numerically by :func:`verify_solution`.
"""
from __future__ import annotations

import concurrent.futures
import logging
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from .classical_np import likelihood_ratios, min_cost_test, most_powerful_test, tilt
from .errors import (
    ConvexNPError,
    DegenerateBounds,
    DimensionMismatch,
    InfeasibleSpec,
    InvalidParameter,
    NoConvergence,
    SaddleViolation,
    StructureViolation,
    TrivialCase,
)
from .measure import Density, RandomVariable, SampleSpace, expectation
from .risk_models import (
    ConvexExpectation,
    Entropic,
    FinitelyGenerated,
    Linear,
    Supergradient,
    attainment_residual,
    mixture,
)
from .simplex import linprog_simplex

logger = logging.getLogger(__name__)

STRATEGIES = ("auto", "lp", "subgradient")
LP, SUBGRADIENT = "lp", "subgradient"
CERTIFICATE_TOL = {LP: 1e-6, SUBGRADIENT: 1e-4}
FEASIBILITY_TOL = {LP: 1e-9, SUBGRADIENT: 1e-6}
TIGHTNESS_TOL = 1e-8
SNAP_TOL = 1e-12
THRESHOLD_SLACK = 100.0
# best accuracy each strategy can certify
ACCURACY_FLOOR = {LP: FEASIBILITY_TOL[LP], SUBGRADIENT: TIGHTNESS_TOL}

RESIDUAL_NAMES = (
    "primal_feasibility",
    "q_attainment",
    "q_saddle",
    "alpha_tightness",
    "p_attainment",
    "p_saddle",
    "minimax_gap",
    "structure_violation",
    "dual_value_gap",
)


@dataclass(frozen=True)
class SolverOptions:
    strategy: str = "auto"
    tol: Optional[float] = None
    max_iters: int = 100_000
    seed: int = 0
    feasibility_tol: Optional[float] = None
    max_workers: int = 1
    require_certificate: bool = True
    restarts: int = 2

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise InvalidParameter(f"Unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.max_iters < 1:
            raise InvalidParameter("max_iters must be positive")

    def resolve(self, spec: "ProblemSpec") -> str:
        if self.strategy != "auto":
            return self.strategy
        smooth = isinstance(spec.rho1, Entropic) or isinstance(spec.rho2, Entropic)
        return SUBGRADIENT if smooth else LP

    def certificate_tol(self, strategy: str) -> float:
        return self.tol if self.tol is not None else CERTIFICATE_TOL[strategy]

    def feas_tol(self, strategy: str) -> float:
        return self.feasibility_tol if self.feasibility_tol is not None else FEASIBILITY_TOL[strategy]

    def threshold_tol(self, strategy: str) -> float:
        """Slack for reading the threshold form off ``X*``, on values and on ratios."""
        return THRESHOLD_SLACK * self.feas_tol(strategy)


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Data of the convex Neyman-Pearson problem."""

    space: SampleSpace
    rho1: ConvexExpectation
    rho2: ConvexExpectation
    k1: RandomVariable
    k2: RandomVariable
    alpha: float
    name: str = ""

    def __post_init__(self) -> None:
        for what, rv in (("k1", self.k1), ("k2", self.k2)):
            if len(rv) != self.space.size:
                raise DimensionMismatch(
                    f"{what} has {len(rv)} entries, the space has {self.space.size} atoms"
                )
        for what, rho in (("rho1", self.rho1), ("rho2", self.rho2)):
            if rho.space.size != self.space.size or not np.allclose(rho.space.weights, self.space.weights):
                raise DimensionMismatch(f"{what} lives on a different sample space")
        k1, k2 = self.k1.values, self.k2.values
        if np.any(k1 < 0.0) or np.any(k1 > k2):
            raise DegenerateBounds("Bounds must satisfy 0 <= k1 <= k2 componentwise")
        if not np.any(k1 < k2):
            raise DegenerateBounds("k1 < k2 must hold on at least one atom")
        lowest = self.rho1.evaluate(k1)
        if self.alpha < lowest - 1e-9:
            raise InfeasibleSpec(
                f"alpha = {self.alpha!r} is below rho1(k1) = {lowest!r}; "
                "the standing assumption rho1(k1) <= alpha <= rho1(k2) fails"
            )
        highest = self.rho1.evaluate(k2)
        if self.alpha > highest + 1e-9:
            logger.warning(
                "alpha = %r exceeds rho1(k2) = %r; the upper bound k2 is feasible", self.alpha, highest
            )

    @property
    def width(self) -> np.ndarray:
        return self.k2.values - self.k1.values

    def permuted(self, order: Sequence[int]) -> "ProblemSpec":
        return ProblemSpec(
            self.space.permuted(order),
            self.rho1.permuted(order),
            self.rho2.permuted(order),
            self.k1.permuted(order),
            self.k2.permuted(order),
            self.alpha,
            self.name,
        )


@dataclass(frozen=True)
class Certificate:
    name: str
    value: float
    applicable: bool = True
    reason: str = ""

    def passed(self, tol: float) -> bool:
        return (not self.applicable) or (np.isfinite(self.value) and self.value <= tol)


@dataclass(frozen=True)
class CertificateReport:
    """Named residuals of a solution; non-applicable checks carry a reason."""

    certificates: Tuple[Certificate, ...]

    def __getattr__(self, name: str) -> float:
        if name in RESIDUAL_NAMES:
            return self[name].value
        raise AttributeError(name)

    def __getitem__(self, name: str) -> Certificate:
        for certificate in self.certificates:
            if certificate.name == name:
                return certificate
        raise KeyError(name)

    def passed(self, tol: float) -> bool:
        return all(c.passed(tol) for c in self.certificates)

    def failures(self, tol: float) -> List[str]:
        return [c.name for c in self.certificates if not c.passed(tol)]

    def as_dict(self) -> Dict[str, Dict[str, Any]]:
        return {
            c.name: {"value": c.value, "applicable": c.applicable, "reason": c.reason}
            for c in self.certificates
        }


@dataclass(frozen=True, eq=False)
class Solution:
    x_star: RandomVariable
    beta: float
    gamma_alpha: float
    q_star: Supergradient
    p_star: Supergradient
    z: float
    boundary_values: Dict[int, float]
    certificates: Optional[CertificateReport] = None
    strategy: str = LP
    iterations: int = 0
    trivial: bool = False
    z_from_tilt: Optional[float] = None

    def regions(self, k1: np.ndarray, k2: np.ndarray) -> List[str]:
        """Per-atom region label: ``upper``, ``boundary`` or ``lower``."""
        labels = []
        for i, x in enumerate(self.x_star.values):
            if i in self.boundary_values:
                labels.append("boundary")
            elif abs(x - k2[i]) <= abs(x - k1[i]):
                labels.append("upper")
            else:
                labels.append("lower")
        return labels


@dataclass(frozen=True, eq=False)
class PrimalResult:
    x: RandomVariable
    beta: float
    strategy: str
    iterations: int
    q_star: Optional[Supergradient] = None
    p_star: Optional[Supergradient] = None


@dataclass(frozen=True, eq=False)
class _Term:
    """``x -> rho(sign * x + shift)`` with gradients in x coordinates."""

    rho: ConvexExpectation
    sign: float
    shift: np.ndarray

    def value(self, x: np.ndarray) -> float:
        return self.rho.evaluate(self.sign * x + self.shift)

    def value_and_gradient(self, x: np.ndarray) -> Tuple[float, np.ndarray]:
        value, gradient = self.rho.value_and_gradient(self.sign * x + self.shift)
        return value, self.sign * gradient

    def lp_rows(self) -> Tuple[np.ndarray, np.ndarray]:
        """``A, b`` with ``term(x) = max_j (A_j @ x + b_j)``; finitely generated only."""
        rho = self.rho
        assert isinstance(rho, FinitelyGenerated)
        return self.sign * rho.matrix, rho.matrix @ self.shift - rho.penalties


def _single_generator(rho: ConvexExpectation) -> bool:
    return isinstance(rho, FinitelyGenerated) and len(rho.generators) == 1


class NPSolver:
    """Solver for one problem at a time; holds iteration state of the last run.

    Parameters
    ----------
    options:
        Strategy, tolerances and iteration caps. Defaults to ``SolverOptions()``.
    """

    def __init__(self, options: Optional[SolverOptions] = None):
        self.options = options or SolverOptions()
        self.iterations = 0
        self.strategy: Optional[str] = None
        self._rng = np.random.default_rng(self.options.seed)

    # ------------------------------------------------------------------ LP

    def _epigraph_lp(
        self,
        obj: _Term,
        con: _Term,
        level: float,
        lower: np.ndarray,
        upper: np.ndarray,
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Minimize ``obj`` subject to ``con <= level`` when both are finitely generated.

        Returns the minimizer and the multipliers of the objective rows and of
        the constraint rows (both nonnegative).
        """
        a_obj, b_obj = obj.lp_rows()
        a_con, b_con = con.lp_rows()
        n = lower.size
        a_ub = np.vstack([
            np.hstack([a_obj, -np.ones((a_obj.shape[0], 1))]),
            np.hstack([a_con, np.zeros((a_con.shape[0], 1))]),
        ])
        b_ub = np.concatenate([-b_obj, level - b_con])
        cost = np.zeros(n + 1)
        cost[-1] = 1.0
        bounds = [(lo, hi) for lo, hi in zip(lower, upper)] + [(None, None)]
        result = linprog_simplex(
            cost, a_ub, b_ub, bounds=bounds, tol=self.options.feas_tol(LP)
        )
        self.iterations += result.nit
        x = result.x[:n]
        scale = np.maximum(1.0, np.abs(upper))
        x = np.where(np.abs(x - lower) <= SNAP_TOL * scale, lower, x)
        x = np.where(np.abs(x - upper) <= SNAP_TOL * scale, upper, x)
        x = np.clip(x, lower, upper)
        multipliers = np.clip(-result.ineq_marginals, 0.0, None)
        return x, multipliers[: a_obj.shape[0]], multipliers[a_obj.shape[0]:]

    # ----------------------------------------------------------- subgradient

    def _inner_cap(self) -> int:
        return max(200, self.options.max_iters // 25)

    def _descend(
        self,
        obj: _Term,
        con: _Term,
        kappa: float,
        lower: np.ndarray,
        upper: np.ndarray,
        start: np.ndarray,
        inner_tol: float,
    ) -> np.ndarray:
        """Projected subgradient on ``obj + kappa * con`` over the box.

        Steps are ``eta0 / sqrt(t)`` with ``eta0 = max(k2 - k1)``; the best
        iterate is returned. Stops early once the linearization lower bound
        certifies ``inner_tol``.
        """
        eta0 = float(np.max(upper - lower))
        x = np.clip(start, lower, upper)
        best_x, best_f = x.copy(), np.inf
        lower_bound = -np.inf
        for t in range(1, self._inner_cap() + 1):
            f, g = obj.value_and_gradient(x)
            if kappa > 0.0:
                fc, gc = con.value_and_gradient(x)
                f, g = f + kappa * fc, g + kappa * gc
            if f < best_f:
                best_f, best_x = f, x.copy()
            vertex = np.where(g > 0.0, lower, upper)
            lower_bound = max(lower_bound, f - float(g @ (x - vertex)))
            if best_f - lower_bound <= inner_tol:
                break
            x = np.clip(x - (eta0 / np.sqrt(t)) * g, lower, upper)
        self.iterations += t
        return best_x

    @staticmethod
    def _largest_feasible_step(
        con: _Term, level: float, feasible: np.ndarray, target: np.ndarray
    ) -> np.ndarray:
        """Point on ``[feasible, target]`` closest to ``target`` with ``con <= level``."""
        if con.value(target) <= level:
            return target
        lo, hi = 0.0, 1.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if con.value(feasible + mid * (target - feasible)) <= level:
                lo = mid
            else:
                hi = mid
        return feasible + lo * (target - feasible)

    def _lagrangian_solve(
        self,
        obj: _Term,
        con: _Term,
        level: float,
        lower: np.ndarray,
        upper: np.ndarray,
        start: Optional[np.ndarray] = None,
        anchor: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """Minimize ``obj`` subject to ``con <= level`` by bisection on the multiplier.

        ``anchor`` is a point known to satisfy the constraint (default ``lower``).
        """
        feas = self.options.feas_tol(SUBGRADIENT)
        inner_tol = feas * 1e-4
        budget = self.options.max_iters
        begin = self.iterations
        start = 0.5 * (lower + upper) if start is None else start

        x_free = self._descend(obj, con, 0.0, lower, upper, start, inner_tol)
        if con.value(x_free) <= level:
            logger.debug("Constraint inactive; multiplier is zero")
            return x_free

        kappa_lo, x_lo = 0.0, x_free
        kappa_hi = 1.0
        x_hi = self._descend(obj, con, kappa_hi, lower, upper, x_free, inner_tol)
        while con.value(x_hi) > level + feas:
            kappa_lo, x_lo = kappa_hi, x_hi
            kappa_hi *= 4.0
            if kappa_hi > 1e12:
                raise NoConvergence("Multiplier search diverged; is the constraint attainable?")
            x_hi = self._descend(obj, con, kappa_hi, lower, upper, x_hi, inner_tol)

        for _ in range(100):
            gap = con.value(x_hi) - level
            if abs(gap) <= TIGHTNESS_TOL:
                break
            if kappa_hi - kappa_lo <= 1e-12 * max(1.0, kappa_hi):
                break
            if float(np.max(np.abs(x_hi - x_lo))) <= feas * 1e-2:
                break
            if self.iterations - begin >= budget:
                logger.info("Iteration budget exhausted during multiplier bisection")
                break
            kappa = 0.5 * (kappa_lo + kappa_hi)
            x_mid = self._descend(obj, con, kappa, lower, upper, x_hi, inner_tol)
            if con.value(x_mid) > level + feas:
                kappa_lo, x_lo = kappa, x_mid
            else:
                kappa_hi, x_hi = kappa, x_mid
            logger.debug("kappa in [%.6g, %.6g], constraint gap %.3e", kappa_lo, kappa_hi, gap)

        if con.value(x_hi) > level:
            anchor = lower if anchor is None else anchor
            x_hi = self._largest_feasible_step(con, level, anchor.copy(), x_hi)
        if level - con.value(x_hi) > TIGHTNESS_TOL:
            x_hi = self._largest_feasible_step(con, level, x_hi, x_lo)
        return x_hi

    # --------------------------------------------------------------- primal

    def _terms(self, spec: ProblemSpec) -> Tuple[_Term, _Term]:
        n = spec.space.size
        return _Term(spec.rho2, -1.0, spec.k2.values), _Term(spec.rho1, 1.0, np.zeros(n))

    def solve_primal(self, spec: ProblemSpec) -> PrimalResult:
        """Optimal test ``X*`` and optimal value ``beta`` of the primal problem."""
        strategy = self.options.resolve(spec)
        self.strategy = strategy
        self.iterations = 0
        lower, upper = spec.k1.values, spec.k2.values
        feas = self.options.feas_tol(strategy)
        tol = self.options.certificate_tol(strategy)

        if spec.alpha < spec.rho1.evaluate(lower) - feas:
            raise InfeasibleSpec(f"alpha = {spec.alpha!r} is below rho1(k1)")
        if spec.rho1.evaluate(upper) <= spec.alpha + feas:
            logger.info("Upper bound k2 is feasible; optimal test is k2")
            x = RandomVariable(upper.copy())
            return PrimalResult(x, spec.rho2.evaluate(np.zeros(spec.space.size)), strategy, 0)

        obj, con = self._terms(spec)
        if strategy == LP:
            if not (isinstance(spec.rho1, FinitelyGenerated) and isinstance(spec.rho2, FinitelyGenerated)):
                raise InvalidParameter("The LP strategy needs finitely generated rho1 and rho2")
            x, lam, nu = self._epigraph_lp(obj, con, spec.alpha, lower, upper)
            q_star = self._mix_generators(spec.rho2, lam)
            p_star = self._mix_generators(spec.rho1, nu) if nu.sum() > 1e-12 else None
            result = PrimalResult(
                RandomVariable(x), obj.value(x), strategy, self.iterations, q_star, p_star
            )
        else:
            x = self._lagrangian_solve(obj, con, spec.alpha, lower, upper)
            result = PrimalResult(RandomVariable(x), obj.value(x), strategy, self.iterations)
            gap = self._duality_gap(spec, result)
            attempt = 0
            while gap > tol and attempt < self.options.restarts:
                attempt += 1
                start = lower + self._rng.uniform(size=lower.size) * (upper - lower)
                logger.info("Gap %.3e above %.1e; restarting from a random point", gap, tol)
                x_new = self._lagrangian_solve(obj, con, spec.alpha, lower, upper, start)
                candidate = PrimalResult(
                    RandomVariable(x_new), obj.value(x_new), strategy, self.iterations
                )
                candidate_gap = self._duality_gap(spec, candidate)
                if candidate_gap < gap:
                    result, gap = candidate, candidate_gap
            result = replace(result, iterations=self.iterations)

        gap = self._duality_gap(spec, result)
        logger.info(
            "Primal solved with %s strategy in %d iterations; value %.10g, duality gap %.3e",
            strategy, self.iterations, result.beta, gap,
        )
        if gap > tol and self.options.require_certificate:
            raise NoConvergence(
                f"Duality gap {gap:.3e} exceeds tolerance {tol:.1e} after {self.iterations} iterations"
            )
        return result

    def _duality_gap(self, spec: ProblemSpec, primal: PrimalResult) -> float:
        q_star = self.extract_q_star(spec, primal.x, primal, check=False)
        _, inner = self.linear_inner_min(spec, q_star.density)
        return abs(primal.beta - (inner - q_star.penalty))

    # ---------------------------------------------------- representatives

    @staticmethod
    def _mix_generators(rho: ConvexExpectation, weights: np.ndarray) -> Optional[Supergradient]:
        assert isinstance(rho, FinitelyGenerated)
        if weights.sum() <= 1e-12:
            return None
        return mixture(rho.space, rho.generators, weights, rho.penalties)

    def _active(
        self, rho: ConvexExpectation, x: np.ndarray, act_tol: float
    ) -> Tuple[List[Density], List[float]]:
        if isinstance(rho, FinitelyGenerated):
            scores = rho.scores(x)
            active = np.flatnonzero(scores >= scores.max() - act_tol)
            return [rho.generators[j] for j in active], [float(rho.penalties[j]) for j in active]
        sg = rho.supergradient(x)
        return [sg.density], [sg.penalty]

    def recover_representatives(
        self, spec: ProblemSpec, x_star: np.ndarray
    ) -> Tuple[Supergradient, Optional[Supergradient], float]:
        """KKT multipliers at ``x_star`` over the active generators.

        Finds a mixture ``Q*`` of the active measures of ``rho2`` and weights
        ``w >= 0`` on the active measures of ``rho1`` such that ``x_star``
        minimizes ``E_Q*[k2 - X] + E_w[X]`` over the box, minimizing the total
        sign violation. Returns ``(Q*, P*, violation)``.
        """
        strategy = self.strategy or self.options.resolve(spec)
        act_tol = 10.0 * self.options.feas_tol(strategy)
        mu = spec.space.weights
        lower, upper = spec.k1.values, spec.k2.values
        q_dens, q_pen = self._active(spec.rho2, upper - x_star, act_tol)
        if spec.rho1.evaluate(x_star) >= spec.alpha - act_tol:
            p_dens, p_pen = self._active(spec.rho1, x_star, act_tol)
        else:
            p_dens, p_pen = [], []
        m2, m1, n = len(q_dens), len(p_dens), spec.space.size

        # gradient of the Lagrangian at atom i: -mu_i sum lam q_i + mu_i sum w p_i
        grad_q = -np.column_stack([mu * d.values for d in q_dens])
        grad_p = (
            np.column_stack([mu * d.values for d in p_dens]) if m1 else np.zeros((n, 0))
        )
        rows, rhs = [], []
        width = upper - lower
        for i in range(n):
            if width[i] <= 0.0:
                continue
            slack = np.zeros(n)
            slack[i] = -1.0
            row = np.concatenate([grad_q[i], grad_p[i]])
            at_lower = x_star[i] - lower[i] <= act_tol * max(1.0, width[i])
            at_upper = upper[i] - x_star[i] <= act_tol * max(1.0, width[i])
            # gradient >= 0 unless at k2, gradient <= 0 unless at k1
            if not at_upper:
                rows.append(np.concatenate([-row, slack]))
                rhs.append(0.0)
            if not at_lower:
                rows.append(np.concatenate([row, slack]))
                rhs.append(0.0)
        a_ub = np.array(rows) if rows else np.zeros((0, m2 + m1 + n))
        b_ub = np.array(rhs)
        a_eq = np.concatenate([np.ones(m2), np.zeros(m1 + n)])[None, :]
        cost = np.concatenate([np.zeros(m2 + m1), np.ones(n)])
        result = linprog_simplex(
            cost, a_ub, b_ub, a_eq, [1.0], tol=self.options.feas_tol(LP)
        )
        lam, w = result.x[:m2], result.x[m2:m2 + m1]
        q_star = mixture(spec.space, q_dens, lam, q_pen)
        p_star = mixture(spec.space, p_dens, w, p_pen) if m1 and w.sum() > 1e-12 else None
        return q_star, p_star, float(result.fun)

    def extract_q_star(
        self,
        spec: ProblemSpec,
        x_star: RandomVariable,
        primal: Optional[PrimalResult] = None,
        check: bool = True,
    ) -> Supergradient:
        """Representative ``Q*`` of the Type II error at ``x_star``."""
        x = x_star.values
        if primal is not None and primal.q_star is not None:
            q_star = primal.q_star
        elif (
            isinstance(spec.rho2, FinitelyGenerated) and not _single_generator(spec.rho2)
        ) or (isinstance(spec.rho1, FinitelyGenerated) and not _single_generator(spec.rho1)):
            q_star, _, _ = self.recover_representatives(spec, x)
        else:
            q_star = spec.rho2.supergradient(spec.k2.values - x)
        if check:
            strategy = self.strategy or self.options.resolve(spec)
            tol = self.options.certificate_tol(strategy)
            residual = attainment_residual(spec.rho2, spec.k2.values - x, q_star)
            _, inner = self.linear_inner_min(spec, q_star.density)
            saddle = abs(expectation(spec.space, q_star.density, spec.k2.values - x) - inner)
            if max(residual, saddle) > tol:
                raise SaddleViolation(
                    f"Q* certificate failed: attainment {residual:.3e}, saddle {saddle:.3e}"
                )
        return q_star

    def linear_inner_min(self, spec: ProblemSpec, q: Density) -> Tuple[np.ndarray, float]:
        """``min E_q[k2 - X]`` over ``k1 <= X <= k2, rho1(X) <= alpha``."""
        lower, upper = spec.k1.values, spec.k2.values
        rho1 = spec.rho1
        if _single_generator(rho1):
            p = rho1.generators[0]
            budget = spec.alpha + float(rho1.penalties[0]) - expectation(spec.space, p, lower)
            reflected = min_cost_test(spec.space, q, p, max(budget, 0.0), lower, upper).values
            x = lower + upper - reflected
        else:
            obj = _Term(Linear(spec.space, q), -1.0, upper)
            con = _Term(rho1, 1.0, np.zeros(spec.space.size))
            if rho1.evaluate(upper) <= spec.alpha:
                x = upper.copy()
            elif isinstance(rho1, FinitelyGenerated):
                x, _, _ = self._epigraph_lp(obj, con, spec.alpha, lower, upper)
            else:
                x = self._lagrangian_solve(obj, con, spec.alpha, lower, upper)
        return x, expectation(spec.space, q, upper - x)

    def gamma_alpha(
        self,
        spec: ProblemSpec,
        q_star: Supergradient,
        x_star: Optional[RandomVariable] = None,
    ) -> float:
        """``gamma_alpha = min E_Q*[k2 - X]`` over the feasible set."""
        _, gamma = self.linear_inner_min(spec, q_star.density)
        gamma = max(gamma, 0.0)
        if x_star is not None:
            strategy = self.strategy or self.options.resolve(spec)
            tol = self.options.certificate_tol(strategy)
            attained = expectation(spec.space, q_star.density, spec.k2.values - x_star.values)
            if abs(attained - gamma) > tol:
                raise SaddleViolation(
                    f"E_Q*[k2 - X*] = {attained!r} differs from gamma_alpha = {gamma!r}"
                )
        return gamma

    def extract_p_star(
        self,
        spec: ProblemSpec,
        q_star: Supergradient,
        gamma: float,
        x_star: RandomVariable,
        primal: Optional[PrimalResult] = None,
        check: bool = True,
    ) -> Supergradient:
        """Representative ``P*`` of the Type I error under the fixed ``Q*``."""
        strategy = self.strategy or self.options.resolve(spec)
        tol = self.options.certificate_tol(strategy)
        if gamma <= tol:
            raise TrivialCase(f"gamma_alpha = {gamma!r} vanishes; X* = k2 Q*-a.e.")
        x = x_star.values
        if primal is not None and primal.p_star is not None:
            p_star = primal.p_star
        elif isinstance(spec.rho1, FinitelyGenerated) and not _single_generator(spec.rho1):
            _, p_star, _ = self.recover_representatives(spec, x)
            if p_star is None:
                p_star = spec.rho1.supergradient(x)
        else:
            p_star = spec.rho1.supergradient(x)
        if check:
            attain = attainment_residual(spec.rho1, x, p_star)
            best = min_cost_test(
                spec.space, p_star.density, q_star.density, gamma, spec.k1, spec.k2
            )
            saddle = abs(
                expectation(spec.space, p_star.density, x)
                - expectation(spec.space, p_star.density, best)
            )
            tight = abs(spec.rho1.evaluate(x) - spec.alpha)
            if max(attain, saddle, tight) > tol:
                raise SaddleViolation(
                    f"P* certificate failed: attainment {attain:.3e}, saddle {saddle:.3e}, "
                    f"alpha tightness {tight:.3e}"
                )
        return p_star

    def solve_dual(
        self, spec: ProblemSpec, q_star: Supergradient, gamma: float
    ) -> Tuple[RandomVariable, float]:
        """``min rho1(X)`` over ``k1 <= X <= k2, E_Q*[k2 - X] <= gamma``."""
        lower, upper = spec.k1.values, spec.k2.values
        rho1 = spec.rho1
        if _single_generator(rho1):
            x = min_cost_test(spec.space, rho1.generators[0], q_star.density, gamma, lower, upper).values
        else:
            obj = _Term(rho1, 1.0, np.zeros(spec.space.size))
            con = _Term(Linear(spec.space, q_star.density), -1.0, upper)
            if isinstance(rho1, FinitelyGenerated):
                x, _, _ = self._epigraph_lp(obj, con, gamma, lower, upper)
            else:
                x = self._lagrangian_solve(obj, con, gamma, lower, upper, anchor=upper)
        return RandomVariable(x), rho1.evaluate(x)

    # ---------------------------------------------------------- pipeline

    def solve(self, spec: ProblemSpec, strict: bool = False) -> Solution:
        """Run the full pipeline and attach certificates.

        With ``strict`` a failing certificate raises :class:`SaddleViolation`
        instead of only being reported.
        """
        if spec.rho1.intersects(spec.rho2):
            logger.warning(
                "Representing sets of rho1 and rho2 intersect; the problem stays well posed"
            )
        primal = self.solve_primal(spec)
        strategy = primal.strategy
        tol = self.options.certificate_tol(strategy)
        x = primal.x
        q_star = self.extract_q_star(spec, x, primal, check=False)
        gamma = self.gamma_alpha(spec, q_star)
        trivial = gamma <= tol
        z_from_tilt = None
        if trivial:
            p_star = spec.rho1.supergradient(x.values)
        else:
            p_star = self.extract_p_star(spec, q_star, gamma, x, primal, check=False)
            try:
                p_hat, q_hat, gamma_prime = tilt_reduction(
                    spec.space, spec.k1, spec.k2, p_star, q_star, gamma
                )
                test = most_powerful_test(spec.space, p_hat, q_hat, min(gamma_prime, 1.0))
                z_from_tilt = _threshold_from_tilt(spec, p_star, q_star, test.z_prime)
            except DegenerateBounds as exc:
                logger.warning("Tilt reduction skipped: %s", exc)
        try:
            z, boundary = infer_threshold(
                x, q_star, p_star, spec.k1, spec.k2, tol=self.options.threshold_tol(strategy)
            )
        except StructureViolation as exc:
            logger.warning("%s", exc)
            z, boundary = float("nan"), {}
        solution = Solution(
            x_star=x,
            beta=primal.beta,
            gamma_alpha=gamma,
            q_star=q_star,
            p_star=p_star,
            z=z,
            boundary_values=boundary,
            strategy=strategy,
            iterations=self.iterations,
            trivial=trivial,
            z_from_tilt=z_from_tilt,
        )
        report = verify_solution(spec, solution, tol, self)
        failures = report.failures(tol)
        if failures:
            logger.warning("Certificates above %.1e: %s", tol, ", ".join(failures))
            if strict:
                raise SaddleViolation(f"Certificates above {tol:.1e}: {', '.join(failures)}")
        return replace(solution, certificates=report, iterations=self.iterations)

    def solve_batch(self, specs: Sequence[ProblemSpec]) -> Dict[str, Any]:
        """Solve independent problems in parallel.

        Returns
        -------
        dict
            ``results`` and ``errors`` keyed by job index, plus ``statistics``.
        """
        results: Dict[int, Solution] = {}
        errors: Dict[int, str] = {}
        with tqdm(total=len(specs), desc="Solving problems") as pbar:
            with concurrent.futures.ThreadPoolExecutor(max_workers=self.options.max_workers) as executor:
                future_to_index = {
                    executor.submit(NPSolver(self.options).solve, spec): index
                    for index, spec in enumerate(specs)
                }
                for future in concurrent.futures.as_completed(future_to_index):
                    index = future_to_index[future]
                    try:
                        results[index] = future.result()
                    except ConvexNPError as e:
                        errors[index] = f"{type(e).__name__}: {e}"
                    pbar.update(1)
        return {
            "results": dict(sorted(results.items())),
            "errors": dict(sorted(errors.items())),
            "statistics": {
                "total": len(specs),
                "successful": len(results),
                "failed": len(errors),
            },
        }


def _threshold_from_tilt(
    spec: ProblemSpec, p_star: Supergradient, q_star: Supergradient, z_prime: float
) -> float:
    """Map the tilted classical threshold back: ``z = E_Q*[k2-k1] / (z' E_P*[k2-k1])``."""
    width = spec.width
    q_width = expectation(spec.space, q_star.density, width)
    p_width = expectation(spec.space, p_star.density, width)
    if z_prime == 0.0:
        return float("inf")
    if not np.isfinite(z_prime):
        return 0.0
    return q_width / (z_prime * p_width)


def tilt_reduction(
    space: SampleSpace,
    k1: RandomVariable,
    k2: RandomVariable,
    p_star: Supergradient,
    q_star: Supergradient,
    gamma: float,
) -> Tuple[Density, Density, float]:
    """Tilted densities ``(K2-K1) dP*/E_P*[K2-K1]``, same for Q*, and the rescaled budget."""
    width = k2.values - k1.values
    p_hat, _ = tilt(space, p_star.density.values, width)
    q_hat, q_width = tilt(space, q_star.density.values, width)
    return space.density(p_hat), space.density(q_hat), gamma / q_width


def _ratio_regions(
    ratios: np.ndarray, z: float, ratio_tol: float
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Masks of atoms with ratio above, below and equal to ``z``.

    Ratios within ``ratio_tol * max(1, z)`` of a finite ``z`` count as equal.
    """
    if np.isinf(z):
        equal = np.isinf(ratios)
        return np.zeros(ratios.size, dtype=bool), ~equal, equal
    band = ratio_tol * max(1.0, abs(z))
    upper, lower = ratios > z + band, ratios < z - band
    return upper, lower, ~(upper | lower)


def threshold_violation(
    x: np.ndarray,
    ratios: np.ndarray,
    k1: np.ndarray,
    k2: np.ndarray,
    z: float,
    ratio_tol: float = 0.0,
) -> float:
    """Largest deviation of ``x`` from the threshold form at ``z``."""
    upper, lower, equal = _ratio_regions(ratios, z, ratio_tol)
    deviations = [0.0]
    if upper.any():
        deviations.append(float(np.max(np.abs(x[upper] - k2[upper]))))
    if lower.any():
        deviations.append(float(np.max(np.abs(x[lower] - k1[lower]))))
    if equal.any():
        outside = np.maximum(k1[equal] - x[equal], x[equal] - k2[equal])
        deviations.append(float(np.max(np.clip(outside, 0.0, None))))
    return max(deviations)


def _threshold_candidates(ratios: np.ndarray) -> List[float]:
    return sorted({0.0, float("inf"), *ratios.tolist()})


def infer_threshold(
    x_star: RandomVariable,
    q_star: Supergradient,
    p_star: Supergradient,
    k1: RandomVariable,
    k2: RandomVariable,
    tol: float = 1e-6,
    ratio_tol: Optional[float] = None,
) -> Tuple[float, Dict[int, float]]:
    """Smallest ``z`` putting ``x_star`` in threshold form, with the boundary values.

    Ratios are ``H_Q*/G_P*`` with ``0/0 = 0`` and ``positive/0 = +inf``.
    Ratios closer than ``ratio_tol`` (relative, default ``tol``) are treated
    as one level.

    Raises
    ------
    StructureViolation
        When no ``z`` in ``[0, +inf]`` reproduces ``x_star`` within ``tol``.
    """
    ratio_tol = tol if ratio_tol is None else ratio_tol
    x, lower, upper = x_star.values, k1.values, k2.values
    ratios = likelihood_ratios(q_star.density.values, p_star.density.values)
    best = float("inf")
    for z in _threshold_candidates(ratios):
        violation = threshold_violation(x, ratios, lower, upper, z, ratio_tol)
        best = min(best, violation)
        if violation <= tol:
            _, _, equal = _ratio_regions(ratios, z, ratio_tol)
            boundary = {int(i): float(x[i]) for i in np.flatnonzero(equal)}
            return float(z), boundary
    raise StructureViolation(
        f"No threshold reproduces the solution; smallest violation {best:.3e} exceeds {tol:.1e}"
    )


def _structure_residual(
    x: np.ndarray,
    q_star: Supergradient,
    p_star: Supergradient,
    k1: np.ndarray,
    k2: np.ndarray,
    ratio_tol: float = 0.0,
) -> float:
    ratios = likelihood_ratios(q_star.density.values, p_star.density.values)
    return min(
        threshold_violation(x, ratios, k1, k2, z, ratio_tol) for z in _threshold_candidates(ratios)
    )


def verify_solution(
    spec: ProblemSpec,
    solution: Solution,
    tol: float = 1e-6,
    solver: Optional[NPSolver] = None,
) -> CertificateReport:
    """Recompute every certificate of ``solution`` from scratch.

    Never raises on a failing check; the caller decides pass or fail.
    """
    if solver is None:
        strategy = solution.strategy if solution.strategy in (LP, SUBGRADIENT) else "auto"
        solver = NPSolver(SolverOptions(strategy=strategy))
    space = spec.space
    x = solution.x_star.values
    lower, upper = spec.k1.values, spec.k2.values
    q_star, p_star = solution.q_star, solution.p_star

    rho1_x = spec.rho1.evaluate(x)
    beta = spec.rho2.evaluate(upper - x)
    primal = max(
        0.0,
        float(np.max(lower - x)),
        float(np.max(x - upper)),
        rho1_x - spec.alpha,
        abs(beta - solution.beta),
    )
    q_attain = attainment_residual(spec.rho2, upper - x, q_star)
    _, inner = solver.linear_inner_min(spec, q_star.density)
    attained = expectation(space, q_star.density, upper - x)
    q_saddle = abs(attained - inner)
    minimax_gap = abs(beta - (inner - q_star.penalty))
    gamma = max(inner, 0.0)

    certificates = [
        Certificate("primal_feasibility", primal),
        Certificate("q_attainment", q_attain),
        Certificate("q_saddle", q_saddle),
    ]
    if gamma > tol:
        p_attain = attainment_residual(spec.rho1, x, p_star)
        best = min_cost_test(space, p_star.density, q_star.density, gamma, lower, upper)
        p_saddle = abs(expectation(space, p_star.density, x) - expectation(space, p_star.density, best))
        _, dual_value = solver.solve_dual(spec, q_star, gamma)
        certificates += [
            Certificate("alpha_tightness", abs(rho1_x - spec.alpha)),
            Certificate("p_attainment", p_attain),
            Certificate("p_saddle", p_saddle),
        ]
        dual_gap = Certificate("dual_value_gap", abs(dual_value - spec.alpha))
    else:
        reason = f"gamma_alpha = {gamma:.3e} <= {tol:.1e}; X* = k2 Q*-a.e."
        certificates += [
            Certificate("alpha_tightness", float("nan"), False, reason),
            Certificate("p_attainment", float("nan"), False, reason),
            Certificate("p_saddle", float("nan"), False, reason),
        ]
        dual_gap = Certificate("dual_value_gap", float("nan"), False, reason)
    strategy = solution.strategy if solution.strategy in (LP, SUBGRADIENT) else solver.options.resolve(spec)
    structure = _structure_residual(
        x, q_star, p_star, lower, upper, solver.options.threshold_tol(strategy)
    )
    certificates += [
        Certificate("minimax_gap", minimax_gap),
        Certificate("structure_violation", structure),
        dual_gap,
    ]
    return CertificateReport(tuple(certificates))


def _solver(options: Optional[SolverOptions]) -> NPSolver:
    return NPSolver(options)


def solve(
    spec: ProblemSpec, opts: Optional[SolverOptions] = None, strict: bool = False
) -> Solution:
    return _solver(opts).solve(spec, strict=strict)


def solve_primal(spec: ProblemSpec, opts: Optional[SolverOptions] = None) -> Tuple[RandomVariable, float]:
    result = _solver(opts).solve_primal(spec)
    return result.x, result.beta


def extract_q_star(
    spec: ProblemSpec, x_star: RandomVariable, opts: Optional[SolverOptions] = None
) -> Supergradient:
    return _solver(opts).extract_q_star(spec, x_star)


def gamma_alpha(
    spec: ProblemSpec, q_star: Supergradient, x_star: Optional[RandomVariable] = None,
    opts: Optional[SolverOptions] = None,
) -> float:
    return _solver(opts).gamma_alpha(spec, q_star, x_star)


def extract_p_star(
    spec: ProblemSpec,
    q_star: Supergradient,
    gamma: float,
    x_star: RandomVariable,
    opts: Optional[SolverOptions] = None,
) -> Supergradient:
    return _solver(opts).extract_p_star(spec, q_star, gamma, x_star)


def solve_dual(
    spec: ProblemSpec, q_star: Supergradient, gamma: float, opts: Optional[SolverOptions] = None
) -> Tuple[RandomVariable, float]:
    return _solver(opts).solve_dual(spec, q_star, gamma)


__all__ = [
    "ACCURACY_FLOOR",
    "Certificate",
    "CertificateReport",
    "NPSolver",
    "PrimalResult",
    "ProblemSpec",
    "RESIDUAL_NAMES",
    "Solution",
    "SolverOptions",
    "extract_p_star",
    "extract_q_star",
    "gamma_alpha",
    "infer_threshold",
    "solve",
    "solve_dual",
    "solve_primal",
    "threshold_violation",
    "tilt_reduction",
    "verify_solution",
]
