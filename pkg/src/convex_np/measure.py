"""Finite sample spaces, densities, expectations and divergences.

Every probability measure is carried as its density with respect to the base
measure ``mu`` of a :class:`SampleSpace`; conversions from and to plain atom
probabilities divide or multiply by ``mu`` componentwise.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DimensionMismatch, InvalidDensity, InvalidParameter, NonPositiveWeight, NotNormalized

logger = logging.getLogger(__name__)

CONSTRUCTION_TOL = 1e-9
DENSITY_TOL = 1e-10

ArrayLike = Union[Sequence[float], np.ndarray]


def _frozen(values: ArrayLike) -> np.ndarray:
    array = np.array(values, dtype=float).reshape(-1)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class SampleSpace:
    """Finite atom set with strictly positive base weights ``mu``."""

    weights: np.ndarray
    labels: Optional[Tuple[str, ...]] = None

    def __post_init__(self) -> None:
        weights = _frozen(self.weights)
        object.__setattr__(self, "weights", weights)
        if weights.size == 0:
            raise NonPositiveWeight("A sample space needs at least one atom")
        if not np.all(np.isfinite(weights)) or np.any(weights <= 0.0):
            bad = int(np.argmin(np.where(np.isfinite(weights), weights, -np.inf)))
            raise NonPositiveWeight(
                f"Atom {bad} has non-positive weight {weights[bad]!r}"
            )
        if abs(weights.sum() - 1.0) > 1e-12:
            raise NotNormalized(f"Weights sum to {weights.sum()!r}, expected 1")
        if self.labels is not None:
            labels = tuple(str(label) for label in self.labels)
            if len(labels) != weights.size:
                raise DimensionMismatch(
                    f"{len(labels)} labels given for {weights.size} atoms"
                )
            object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        return int(self.weights.size)

    def check(self, values: np.ndarray, what: str = "vector") -> None:
        if values.shape != (self.size,):
            raise DimensionMismatch(
                f"{what} has {values.size} entries, the space has {self.size} atoms"
            )

    def random_variable(self, values: ArrayLike) -> "RandomVariable":
        rv = RandomVariable(values)
        self.check(rv.values, "Random variable")
        return rv

    def density(self, values: ArrayLike, tol: float = DENSITY_TOL) -> "Density":
        """Validate ``values`` as dP/dmu on this space."""
        array = _frozen(values)
        self.check(array, "Density")
        if not np.all(np.isfinite(array)) or np.any(array < 0.0):
            raise InvalidDensity(f"Density has negative or non-finite entries: {array}")
        mass = float(self.weights @ array)
        if abs(mass - 1.0) > tol:
            raise InvalidDensity(f"Density integrates to {mass!r} against mu, expected 1")
        return Density(array)

    def density_from_probabilities(
        self, probabilities: ArrayLike, tol: float = DENSITY_TOL
    ) -> "Density":
        probabilities = np.asarray(probabilities, dtype=float).reshape(-1)
        self.check(probabilities, "Probability vector")
        return self.density(probabilities / self.weights, tol=tol)

    def normalized_density(self, unnormalized: ArrayLike) -> "Density":
        """Rescale a nonnegative vector so that it integrates to one against mu."""
        array = np.asarray(unnormalized, dtype=float).reshape(-1)
        self.check(array, "Density")
        mass = float(self.weights @ array)
        if not np.isfinite(mass) or mass <= 0.0:
            raise InvalidDensity("Cannot normalize a vector with zero or infinite mass")
        return self.density(array / mass)

    @property
    def base(self) -> "Density":
        """The density of mu itself (all ones)."""
        return Density(np.ones(self.size))

    def probabilities(self, density: "Density") -> np.ndarray:
        self.check(density.values, "Density")
        return self.weights * density.values

    def permuted(self, order: Sequence[int]) -> "SampleSpace":
        order = list(order)
        labels = None if self.labels is None else tuple(self.labels[i] for i in order)
        return SampleSpace(self.weights[order], labels)


@dataclass(frozen=True, eq=False)
class Density:
    """Radon-Nikodym derivative dP/dmu (G_P or H_Q)."""

    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _frozen(self.values))

    def __len__(self) -> int:
        return int(self.values.size)

    def permuted(self, order: Sequence[int]) -> "Density":
        return Density(self.values[list(order)])


@dataclass(frozen=True, eq=False)
class RandomVariable:
    """Payoff X(omega_i) per atom."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = _frozen(self.values)
        if not np.all(np.isfinite(values)):
            raise InvalidParameter(f"Random variable has non-finite entries: {values}")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.values.size)

    def permuted(self, order: Sequence[int]) -> "RandomVariable":
        return RandomVariable(self.values[list(order)])


def make_space(weights: ArrayLike, labels: Optional[Sequence[str]] = None) -> SampleSpace:
    """Build a validated :class:`SampleSpace`.

    Weights summing to one within ``1e-9`` are renormalized; larger
    deviations are rejected with :class:`NotNormalized`.
    """
    array = np.asarray(weights, dtype=float).reshape(-1)
    if array.size == 0:
        raise NonPositiveWeight("A sample space needs at least one atom")
    if np.any(~np.isfinite(array)) or np.any(array <= 0.0):
        bad = int(np.flatnonzero(~np.isfinite(array) | (array <= 0.0))[0])
        raise NonPositiveWeight(f"Atom {bad} has non-positive weight {array[bad]!r}")
    total = float(array.sum())
    if abs(total - 1.0) > CONSTRUCTION_TOL:
        raise NotNormalized(f"Weights sum to {total!r}; |sum - 1| exceeds {CONSTRUCTION_TOL}")
    if total != 1.0:
        logger.debug("Renormalizing sample space weights (sum was %r)", total)
        array = array / total
    return SampleSpace(array, None if labels is None else tuple(labels))


def _values(obj: Union[Density, RandomVariable, np.ndarray]) -> np.ndarray:
    return obj.values if isinstance(obj, (Density, RandomVariable)) else np.asarray(obj, dtype=float)


def expectation(
    space: SampleSpace,
    d: Union[Density, np.ndarray],
    x: Union[RandomVariable, np.ndarray],
) -> float:
    """E_P[X] = sum_i mu_i d_i x_i for the measure with density ``d``."""
    dv, xv = _values(d), _values(x)
    space.check(dv, "Density")
    space.check(xv, "Random variable")
    return float(np.sum(space.weights * dv * xv))


def kl_divergence(
    space: SampleSpace,
    q: Union[Density, np.ndarray],
    p: Union[Density, np.ndarray],
) -> float:
    """Relative entropy KL(q || p) in nats; ``math.inf`` without absolute continuity."""
    qv, pv = _values(q), _values(p)
    space.check(qv, "Density")
    space.check(pv, "Density")
    support = qv > 0.0
    if np.any(pv[support] <= 0.0):
        return float("inf")
    terms = space.weights[support] * qv[support] * np.log(qv[support] / pv[support])
    return float(max(terms.sum(), 0.0))


__all__ = [
    "CONSTRUCTION_TOL",
    "DENSITY_TOL",
    "Density",
    "RandomVariable",
    "SampleSpace",
    "expectation",
    "kl_divergence",
    "make_space",
]
