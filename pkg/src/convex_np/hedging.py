"""Shortfall-risk hedging in a one-period market with one risky asset.

The budget constraint ``sup_P E_P[X_T] <= budget`` over the martingale
measures is a sublinear expectation generated by the vertices of the
martingale-measure polytope, so minimizing the shortfall risk
``rho((H - X_T)^+)`` is a Neyman-Pearson problem with ``k1 = 0, k2 = H``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

import numpy as np

from .classical_np import likelihood_ratios, ratio_groups
from .errors import DimensionMismatch, InfeasibleBudget, InvalidParameter, NoEmm, StructureViolation
from .measure import Density, RandomVariable, SampleSpace, expectation
from .np_solver import NPSolver, ProblemSpec, Solution, SolverOptions
from .risk_models import ConvexExpectation, FinitelyGenerated, Supergradient

logger = logging.getLogger(__name__)

PRICE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class MarketSpec:
    space: SampleSpace
    s0: float
    st: RandomVariable
    claim: RandomVariable
    budget: float
    rho: ConvexExpectation
    name: str = ""

    def __post_init__(self) -> None:
        for what, rv in (("st", self.st), ("claim", self.claim)):
            if len(rv) != self.space.size:
                raise DimensionMismatch(
                    f"{what} has {len(rv)} entries, the space has {self.space.size} atoms"
                )
        if not self.s0 > 0.0:
            raise InvalidParameter(f"Initial price s0 must be positive, got {self.s0!r}")
        if np.any(self.st.values < 0.0):
            raise InvalidParameter("Terminal prices must be nonnegative")
        if np.any(self.claim.values < 0.0):
            raise InvalidParameter("The claim must be nonnegative")
        if self.budget < 0.0:
            raise InfeasibleBudget(f"Budget must be nonnegative, got {self.budget!r}")
        if self.rho.space.size != self.space.size:
            raise DimensionMismatch("rho lives on a different sample space")


@dataclass(frozen=True, eq=False)
class HedgeResult:
    u0: float
    xt_star: RandomVariable
    z: float
    b: float
    x0: float
    h: float
    shortfall_risk: float
    full_hedge: bool = False
    formula_residual: float = 0.0
    degenerate: bool = False
    solution: Optional[Solution] = None


def emm_vertices(market: MarketSpec) -> List[Density]:
    """Extreme points of the closed martingale-measure polytope, as densities."""
    st, s0, mu = market.st.values, market.s0, market.space.weights
    scale = max(1.0, abs(s0))
    if st.min() > s0 + PRICE_TOL * scale or st.max() < s0 - PRICE_TOL * scale:
        raise NoEmm(
            f"s0 = {s0!r} lies outside [{st.min()!r}, {st.max()!r}]; the market admits arbitrage"
        )
    n = market.space.size
    vertices: List[Density] = []
    for i in range(n):
        if abs(st[i] - s0) <= PRICE_TOL * scale:
            probabilities = np.zeros(n)
            probabilities[i] = 1.0
            vertices.append(market.space.density(probabilities / mu))
    for i in range(n):
        for j in range(n):
            if st[i] < s0 - PRICE_TOL * scale and st[j] > s0 + PRICE_TOL * scale:
                probabilities = np.zeros(n)
                probabilities[i] = (st[j] - s0) / (st[j] - st[i])
                probabilities[j] = (s0 - st[i]) / (st[j] - st[i])
                vertices.append(market.space.normalized_density(probabilities / mu))
    vertices.sort(key=lambda d: tuple(np.flatnonzero(d.values > 0.0)))
    return vertices


def superhedge_strategy(market: MarketSpec, x) -> Tuple[float, float]:
    """Cheapest ``(x0, h)`` with ``x0 + h (st - s0) >= x`` on every atom.

    The minimum of the convex piecewise-linear ``x0(h) = max_i (x_i - h d_i)``
    sits at a breakpoint or at ``h = 0``; ties go to the smallest ``|h|``.
    """
    emm_vertices(market)
    values = x.values if isinstance(x, RandomVariable) else np.asarray(x, dtype=float)
    moves = market.st.values - market.s0
    candidates = {0.0}
    for i in range(values.size):
        for j in range(i + 1, values.size):
            if moves[i] != moves[j]:
                candidates.add(float((values[j] - values[i]) / (moves[j] - moves[i])))
    scored = [(float(np.max(values - h * moves)), h) for h in candidates]
    best = min(cost for cost, _ in scored)
    _, h = min(
        ((cost, h) for cost, h in scored if cost <= best + PRICE_TOL * max(1.0, abs(best))),
        key=lambda pair: (abs(pair[1]), pair[1]),
    )
    return best, h


def superhedge_price(market: MarketSpec, x) -> float:
    """``max`` of ``E_P[x]`` over the martingale-measure vertices."""
    values = x.values if isinstance(x, RandomVariable) else np.asarray(x, dtype=float)
    price = max(expectation(market.space, d, values) for d in emm_vertices(market))
    x0, _ = superhedge_strategy(market, values)
    if abs(x0 - price) > PRICE_TOL * max(1.0, abs(price)):
        logger.warning("Superhedging price %.12g disagrees with the dual value %.12g", price, x0)
    return price


def to_problem(market: MarketSpec) -> ProblemSpec:
    """Neyman-Pearson form of the shortfall problem; atoms with ``H = 0`` are pinned."""
    n = market.space.size
    vertices = emm_vertices(market)
    rho1 = FinitelyGenerated(market.space, vertices, np.zeros(len(vertices)))
    return ProblemSpec(
        market.space,
        rho1,
        market.rho,
        RandomVariable(np.zeros(n)),
        market.claim,
        market.budget,
        market.name,
    )


def shortfall_formula(
    market: MarketSpec,
    q_star: Supergradient,
    p_star: Supergradient,
    ratio_tol: float = 0.0,
) -> Tuple[float, float, RandomVariable]:
    """Closed-form threshold ``z``, boundary fraction ``b`` and terminal wealth.

    ``z = sup{z' : E_P*[H; z' H_Q* > G_P*] <= budget}``; on the boundary
    ``{z H_Q* = G_P*}`` the wealth is ``b H`` with ``b`` spending the rest of
    the budget, and ``b = 0`` when the boundary carries no ``P*``-mass of H.
    Ratios within ``ratio_tol`` (relative) share a level.
    """
    claim = market.claim.values
    cost = market.space.weights * p_star.density.values * claim
    ratios = likelihood_ratios(q_star.density.values, p_star.density.values)
    ratios = np.where(claim > 0.0, ratios, 0.0)
    wealth = np.zeros(claim.size)
    spent = 0.0
    for ratio, atoms in ratio_groups(ratios, ratio_tol):
        if ratio == 0.0:
            break
        group_cost = float(cost[atoms].sum())
        if spent + group_cost <= market.budget + PRICE_TOL:
            wealth[atoms] = claim[atoms]
            spent += group_cost
            continue
        z = 0.0 if np.isinf(ratio) else 1.0 / ratio
        b = (market.budget - spent) / group_cost if group_cost > 0.0 else 0.0
        b = float(np.clip(b, 0.0, 1.0))
        wealth[atoms] = b * claim[atoms]
        return z, b, RandomVariable(wealth)
    return float("inf"), 0.0, RandomVariable(wealth)


def _full_hedge(market: MarketSpec, u0: float) -> HedgeResult:
    x0, h = superhedge_strategy(market, market.claim)
    risk = market.rho.evaluate(np.zeros(market.space.size))
    logger.info("Budget %.10g covers the superhedging price %.10g; full hedge", market.budget, u0)
    return HedgeResult(
        u0=u0,
        xt_star=market.claim,
        z=float("inf"),
        b=0.0,
        x0=x0,
        h=h,
        shortfall_risk=risk,
        full_hedge=True,
    )


def solve_shortfall(market: MarketSpec, opts: Optional[SolverOptions] = None) -> HedgeResult:
    """Minimize ``rho((H - X_T)^+)`` subject to the superhedging budget."""
    opts = opts or SolverOptions()
    u0 = superhedge_price(market, market.claim)
    if market.budget >= u0 - PRICE_TOL:
        return _full_hedge(market, u0)

    spec = to_problem(market)
    solution = NPSolver(opts).solve(spec)
    xt = np.clip(solution.x_star.values, 0.0, market.claim.values)
    tol = opts.certificate_tol(solution.strategy)

    degenerate = expectation(market.space, solution.p_star.density, market.claim) <= PRICE_TOL
    if degenerate:
        logger.warning("E_P*[H] vanishes; threshold formula is degenerate, reporting solver output")
        z, b, residual = float("inf"), 0.0, float("nan")
    else:
        z, b, rebuilt = shortfall_formula(
            market, solution.q_star, solution.p_star, opts.threshold_tol(solution.strategy)
        )
        residual = float(np.max(np.abs(rebuilt.values - xt)))
        if residual > tol:
            raise StructureViolation(
                f"Threshold formula deviates from the solver by {residual:.3e} (tol {tol:.1e})"
            )
    x0, h = superhedge_strategy(market, xt)
    return HedgeResult(
        u0=u0,
        xt_star=RandomVariable(xt),
        z=z,
        b=b,
        x0=x0,
        h=h,
        shortfall_risk=market.rho.evaluate(market.claim.values - xt),
        formula_residual=residual,
        degenerate=degenerate,
        solution=solution,
    )


def min_budget_for_risk(
    market: MarketSpec,
    risk_bound: float,
    tol: float = 1e-6,
    opts: Optional[SolverOptions] = None,
) -> float:
    """Smallest budget whose optimal shortfall risk stays within ``risk_bound``.

    Bisection on the budget over ``[0, U0]``; the optimal risk is
    nonincreasing in the budget.
    """
    floor = market.rho.evaluate(np.zeros(market.space.size))
    if risk_bound < floor - PRICE_TOL:
        raise InfeasibleBudget(
            f"Risk bound {risk_bound!r} is below rho(0) = {floor!r}; unattainable even fully hedged"
        )
    u0 = superhedge_price(market, market.claim)
    if risk_bound <= floor + PRICE_TOL:
        return u0
    if market.rho.evaluate(market.claim.values) <= risk_bound:
        return 0.0

    def risk(budget: float) -> float:
        return solve_shortfall(replace(market, budget=budget), opts).shortfall_risk

    lo, hi = 0.0, u0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if risk(mid) <= risk_bound:
            hi = mid
        else:
            lo = mid
    logger.info("Budget %.10g achieves shortfall risk bound %.10g", hi, risk_bound)
    return hi


__all__ = [
    "HedgeResult",
    "MarketSpec",
    "emm_vertices",
    "min_budget_for_risk",
    "shortfall_formula",
    "solve_shortfall",
    "superhedge_price",
    "superhedge_strategy",
    "to_problem",
]
