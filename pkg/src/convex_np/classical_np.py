"""Exact randomized Neyman-Pearson tests between two fixed measures."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Tuple, Union

import numpy as np

from .errors import DegenerateBounds, DimensionMismatch, InfeasibleBudget, LevelOutOfRange
from .measure import Density, RandomVariable, SampleSpace, expectation

logger = logging.getLogger(__name__)

RATIO_DIGITS = 12
SIZE_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class NpTest:
    z_prime: float
    boundary_fraction: float
    test: RandomVariable
    power: float
    size: float


def round_ratio(value: float) -> float:
    """Round to 12 significant digits so equal ratios compare exactly."""
    if not np.isfinite(value) or value == 0.0:
        return float(value)
    return float(f"{value:.{RATIO_DIGITS - 1}e}")


def likelihood_ratios(numerator: np.ndarray, denominator: np.ndarray) -> np.ndarray:
    """Componentwise ratio with ``0/0 = 0`` and ``positive/0 = +inf``, rounded."""
    ratios = np.empty(numerator.size)
    for i, (a, b) in enumerate(zip(numerator, denominator)):
        if b > 0.0:
            ratios[i] = round_ratio(a / b)
        else:
            ratios[i] = np.inf if a > 0.0 else 0.0
    return ratios


def ratio_groups(ratios: np.ndarray, rtol: float = 0.0) -> List[Tuple[float, np.ndarray]]:
    """Atoms grouped by equal ratio, groups sorted by ratio descending.

    A ratio within ``rtol * max(1, r)`` of a group's leading ratio ``r``
    joins that group.
    """
    order = sorted(range(ratios.size), key=lambda i: (-ratios[i], i))
    groups: List[Tuple[float, np.ndarray]] = []
    for i in order:
        if groups and _same_level(groups[-1][0], float(ratios[i]), rtol):
            groups[-1] = (groups[-1][0], np.append(groups[-1][1], i))
        else:
            groups.append((float(ratios[i]), np.array([i])))
    return groups


def _same_level(leader: float, ratio: float, rtol: float) -> bool:
    if leader == ratio:
        return True
    if np.isinf(leader) or np.isinf(ratio):
        return False
    return leader - ratio <= rtol * max(1.0, abs(leader))


def _values(d: Union[Density, np.ndarray]) -> np.ndarray:
    return d.values if isinstance(d, Density) else np.asarray(d, dtype=float)


def most_powerful_test(
    space: SampleSpace,
    p_hat: Union[Density, np.ndarray],
    q_hat: Union[Density, np.ndarray],
    level: float,
) -> NpTest:
    """Maximize ``E_p_hat[Z]`` subject to ``E_q_hat[Z] <= level`` and ``0 <= Z <= 1``.

    Atoms are ranked by the likelihood ratio ``p_hat/q_hat``; whole ratio groups
    are rejected while the ``q_hat`` budget lasts and the group where it runs
    out receives one common fractional value. When the budget is exhausted
    exactly at the end of a group, that group's ratio is reported as ``z_prime``
    with boundary fraction 1.
    """
    p_values, q_values = _values(p_hat), _values(q_hat)
    space.check(p_values, "Density")
    space.check(q_values, "Density")
    if not (0.0 <= level <= 1.0) or not np.isfinite(level):
        raise LevelOutOfRange(f"Level must lie in [0, 1], got {level!r}")

    ratios = likelihood_ratios(p_values, q_values)
    test = np.zeros(space.size)
    q_mass = space.weights * q_values
    remaining = float(level)
    z_prime = 0.0
    boundary_fraction = 0.0
    for ratio, atoms in ratio_groups(ratios):
        if ratio == 0.0:
            break
        cost = float(q_mass[atoms].sum())
        if cost <= remaining + SIZE_SLACK:
            test[atoms] = 1.0
            remaining = max(remaining - cost, 0.0)
            if remaining <= SIZE_SLACK and cost > 0.0:
                z_prime, boundary_fraction = ratio, 1.0
                break
            continue
        fraction = remaining / cost
        test[atoms] = fraction
        z_prime, boundary_fraction = ratio, fraction
        break

    power = expectation(space, p_values, test)
    size = expectation(space, q_values, test)
    return NpTest(
        z_prime=float(z_prime),
        boundary_fraction=float(boundary_fraction),
        test=RandomVariable(test),
        power=power,
        size=size,
    )


def tilt(
    space: SampleSpace,
    density: np.ndarray,
    width: np.ndarray,
) -> Tuple[np.ndarray, float]:
    """Reweight ``density`` by ``width = k2 - k1``; returns the tilted density and the normalizer."""
    normalizer = float(np.sum(space.weights * density * width))
    if normalizer <= 0.0:
        raise DegenerateBounds("Tilt denominator E[k2 - k1] vanishes")
    return density * width / normalizer, normalizer


def min_cost_test(
    space: SampleSpace,
    p: Union[Density, np.ndarray],
    q: Union[Density, np.ndarray],
    b: float,
    k1: Union[RandomVariable, np.ndarray],
    k2: Union[RandomVariable, np.ndarray],
) -> RandomVariable:
    """Minimize ``E_p[X]`` subject to ``E_q[k2 - X] <= b`` and ``k1 <= X <= k2``.

    With ``Z = (k2 - X)/(k2 - k1)`` this is the classical test of the tilted
    measures at level ``b / E_q[k2 - k1]``. Atoms with ``k1 = k2`` stay pinned.
    """
    p_values, q_values = _values(p), _values(q)
    lower = k1.values if isinstance(k1, RandomVariable) else np.asarray(k1, dtype=float)
    upper = k2.values if isinstance(k2, RandomVariable) else np.asarray(k2, dtype=float)
    for array, what in ((p_values, "Density"), (q_values, "Density"), (lower, "k1"), (upper, "k2")):
        if array.shape != (space.size,):
            raise DimensionMismatch(f"{what} has {array.size} entries, the space has {space.size} atoms")
    if b < 0.0:
        raise InfeasibleBudget(f"Budget must be nonnegative, got {b!r}")
    if np.any(lower > upper):
        raise DegenerateBounds("k1 must not exceed k2")

    width = upper - lower
    q_width = float(np.sum(space.weights * q_values * width))
    p_width = float(np.sum(space.weights * p_values * width))
    if q_width <= 0.0 or b >= q_width:
        # the budget never binds
        return RandomVariable(lower.copy())
    level = min(b / q_width, 1.0)
    q_hat = q_values * width / q_width
    if p_width <= 0.0:
        # objective is flat in X; any feasible test is optimal
        return RandomVariable(upper - width * level)
    p_hat = p_values * width / p_width
    z_test = most_powerful_test(space, p_hat, q_hat, level).test.values
    return RandomVariable(upper - width * z_test)


__all__ = [
    "NpTest",
    "likelihood_ratios",
    "min_cost_test",
    "most_powerful_test",
    "ratio_groups",
    "round_ratio",
    "tilt",
]
