"""Convex expectations with their penalty functions and supergradients.

A convex expectation ``rho`` is monotone, cash invariant and convex on the
random variables of a finite :class:`~convex_np.measure.SampleSpace`. Each
family below stores the space it lives on and exposes

* ``evaluate(x)``: the value ``rho(x)``,
* ``supergradient(x)``: a measure attaining the dual representation
  ``rho(x) = max_Q (E_Q[x] - rho*(Q))`` together with its penalty,
* ``penalty(q)``: ``rho*(Q)`` (for finitely generated families, the linearized
  value over the generators' convex hull).

Continuity from above and below hold automatically on a finite space and are
not represented.
"""
from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np
from scipy.special import logsumexp, softmax

from .errors import DimensionMismatch, InfeasibleLP, InvalidDensity, InvalidParameter
from .measure import Density, RandomVariable, SampleSpace, expectation, kl_divergence
from .simplex import linprog_simplex

logger = logging.getLogger(__name__)

GENERATOR_MATCH_TOL = 1e-9
TIE_TOL = 1e-12

Payoff = Union[RandomVariable, np.ndarray, Sequence[float]]


def _payoff(space: SampleSpace, x: Payoff) -> np.ndarray:
    values = x.values if isinstance(x, RandomVariable) else np.asarray(x, dtype=float).reshape(-1)
    if values.shape != (space.size,):
        raise DimensionMismatch(
            f"Random variable has {values.size} entries, the space has {space.size} atoms"
        )
    return values


@dataclass(frozen=True, eq=False)
class Supergradient:
    """Attaining measure of the dual representation at a query point."""

    density: Density
    penalty: float


class ConvexExpectation(ABC):
    """Common interface of the convex expectation families."""

    family: str = ""

    def __init__(self, space: SampleSpace):
        self.space = space

    @abstractmethod
    def evaluate(self, x: Payoff) -> float:
        ...

    @abstractmethod
    def supergradient(self, x: Payoff) -> Supergradient:
        ...

    @abstractmethod
    def penalty(self, q: Density) -> float:
        ...

    @abstractmethod
    def value_and_gradient(self, x: np.ndarray) -> Tuple[float, np.ndarray]:
        """Value and a supergradient in coordinates, ``mu * density``."""

    @abstractmethod
    def permuted(self, order: Sequence[int]) -> "ConvexExpectation":
        ...

    @abstractmethod
    def admits(self, q: Density) -> bool:
        """Whether ``q`` has finite penalty."""

    def representing_densities(self) -> Tuple[Density, ...]:
        """Densities that generate (or anchor) the representing set."""
        return ()

    def intersects(self, other: "ConvexExpectation") -> bool:
        """Whether both representing sets share a measure of finite penalty."""
        for density in self.representing_densities():
            if other.admits(density):
                return True
        for density in other.representing_densities():
            if self.admits(density):
                return True
        return False


class Entropic(ConvexExpectation):
    """``rho(X) = (1/theta) ln E_base[exp(theta X)]``; penalty ``KL(.||base)/theta``."""

    family = "entropic"

    def __init__(self, space: SampleSpace, base: Density, theta: float = 1.0):
        super().__init__(space)
        if not np.isfinite(theta) or theta <= 0.0:
            raise InvalidParameter(f"Entropic theta must be positive, got {theta!r}")
        self.base = space.density(base.values)
        self.theta = float(theta)
        self._log_weights = np.log(np.where(self.base.values > 0.0, space.weights * self.base.values, 1.0))
        self._support = self.base.values > 0.0

    def __repr__(self) -> str:
        return f"Entropic(theta={self.theta}, base={self.base.values.tolist()})"

    def _log_partition(self, x: np.ndarray) -> float:
        scaled = self.theta * x[self._support] + self._log_weights[self._support]
        return float(logsumexp(scaled))

    def evaluate(self, x: Payoff) -> float:
        return self._log_partition(_payoff(self.space, x)) / self.theta

    def _tilted(self, x: np.ndarray) -> Tuple[float, np.ndarray]:
        support = self._support
        scaled = self.theta * x[support] + self._log_weights[support]
        density = np.zeros(self.space.size)
        density[support] = softmax(scaled) / self.space.weights[support]
        return float(logsumexp(scaled)) / self.theta, density

    def supergradient(self, x: Payoff) -> Supergradient:
        values = _payoff(self.space, x)
        _, tilted = self._tilted(values)
        # renormalize away rounding so the density passes validation
        density = self.space.normalized_density(tilted)
        return Supergradient(density, self.penalty(density))

    def penalty(self, q: Density) -> float:
        return kl_divergence(self.space, q, self.base) / self.theta

    def value_and_gradient(self, x: np.ndarray) -> Tuple[float, np.ndarray]:
        value, density = self._tilted(x)
        return value, self.space.weights * density

    def permuted(self, order: Sequence[int]) -> "Entropic":
        return Entropic(self.space.permuted(order), self.base.permuted(order), self.theta)

    def admits(self, q: Density) -> bool:
        return bool(np.all(self.base.values[q.values > 0.0] > 0.0))

    def representing_densities(self) -> Tuple[Density, ...]:
        return (self.base,)


class FinitelyGenerated(ConvexExpectation):
    """``rho(X) = max_j (E_{Q_j}[X] - c_j)`` over finitely many generators."""

    family = "finitely_generated"

    def __init__(
        self,
        space: SampleSpace,
        generators: Sequence[Density],
        penalties: Sequence[float] = (),
    ):
        super().__init__(space)
        if len(generators) == 0:
            raise InvalidParameter("A finitely generated expectation needs at least one generator")
        self.generators = tuple(space.density(g.values) for g in generators)
        penalties = np.zeros(len(generators)) if len(penalties) == 0 else np.asarray(penalties, dtype=float)
        if penalties.shape != (len(generators),):
            raise DimensionMismatch(
                f"{penalties.size} penalties given for {len(generators)} generators"
            )
        if not np.all(np.isfinite(penalties)):
            raise InvalidParameter("Generator penalties must be finite")
        penalties.setflags(write=False)
        self.penalties = penalties
        # rows are mu * q_j, so matrix @ x gives every E_{Q_j}[x] at once
        self.matrix = np.vstack([space.weights * g.values for g in self.generators])

    def __repr__(self) -> str:
        return f"FinitelyGenerated({len(self.generators)} generators)"

    def scores(self, x: Payoff) -> np.ndarray:
        return self.matrix @ _payoff(self.space, x) - self.penalties

    def evaluate(self, x: Payoff) -> float:
        return float(self.scores(x).max())

    def _argmax(self, scores: np.ndarray) -> int:
        return int(np.flatnonzero(scores >= scores.max() - TIE_TOL)[0])

    def supergradient(self, x: Payoff) -> Supergradient:
        j = self._argmax(self.scores(x))
        return Supergradient(self.generators[j], float(self.penalties[j]))

    def value_and_gradient(self, x: np.ndarray) -> Tuple[float, np.ndarray]:
        scores = self.matrix @ x - self.penalties
        j = self._argmax(scores)
        return float(scores[j]), self.matrix[j]

    def penalty(self, q: Density) -> float:
        values = q.values
        if values.shape != (self.space.size,):
            raise DimensionMismatch(
                f"Density has {values.size} entries, the space has {self.space.size} atoms"
            )
        for j, generator in enumerate(self.generators):
            if np.max(np.abs(generator.values - values)) <= GENERATOR_MATCH_TOL:
                return float(self.penalties[j])
        if len(self.generators) == 1:
            return float("inf")
        # cheapest convex combination of generators reproducing q
        columns = np.column_stack([g.values for g in self.generators])
        a_eq = np.vstack([columns, np.ones(len(self.generators))])
        b_eq = np.append(values, 1.0)
        try:
            result = linprog_simplex(self.penalties, A_eq=a_eq, b_eq=b_eq)
        except InfeasibleLP:
            return float("inf")
        return float(result.fun)

    def permuted(self, order: Sequence[int]) -> "FinitelyGenerated":
        return FinitelyGenerated(
            self.space.permuted(order),
            [g.permuted(order) for g in self.generators],
            self.penalties,
        )

    def admits(self, q: Density) -> bool:
        return bool(np.isfinite(self.penalty(q)))

    def representing_densities(self) -> Tuple[Density, ...]:
        return self.generators


class Linear(FinitelyGenerated):
    """``rho(X) = E_base[X]``: one generator with zero penalty."""

    family = "linear"

    def __init__(self, space: SampleSpace, base: Density):
        super().__init__(space, [base], [0.0])
        self.base = self.generators[0]

    def __repr__(self) -> str:
        return f"Linear(base={self.base.values.tolist()})"

    def permuted(self, order: Sequence[int]) -> "Linear":
        return Linear(self.space.permuted(order), self.base.permuted(order))


def evaluate(rho: ConvexExpectation, x: Payoff) -> float:
    return rho.evaluate(x)


def supergradient(rho: ConvexExpectation, x: Payoff) -> Supergradient:
    return rho.supergradient(x)


def penalty(rho: ConvexExpectation, q: Density) -> float:
    return rho.penalty(q)


def attainment_residual(rho: ConvexExpectation, x: Payoff, sg: Supergradient) -> float:
    """``|E_sg[x] - sg.penalty - rho(x)|``; zero for an exact supergradient."""
    values = _payoff(rho.space, x)
    if not np.isfinite(sg.penalty):
        return float("inf")
    return abs(expectation(rho.space, sg.density, values) - sg.penalty - rho.evaluate(values))


def mixture(
    space: SampleSpace,
    densities: Sequence[Density],
    weights: Sequence[float],
    penalties: Sequence[float],
) -> Supergradient:
    """Convex combination of supergradients (penalty combined linearly)."""
    weights = np.clip(np.asarray(weights, dtype=float), 0.0, None)
    total = weights.sum()
    if total <= 0.0:
        raise InvalidDensity("Mixture weights vanish")
    weights = weights / total
    combined = sum(w * d.values for w, d in zip(weights, densities))
    density = space.normalized_density(combined)
    return Supergradient(density, float(np.dot(weights, penalties)))


__all__ = [
    "ConvexExpectation",
    "Entropic",
    "FinitelyGenerated",
    "Linear",
    "Supergradient",
    "attainment_residual",
    "evaluate",
    "mixture",
    "penalty",
    "supergradient",
]
