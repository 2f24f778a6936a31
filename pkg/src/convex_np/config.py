"""JSON configs, built-in examples and machine-readable reports.

Problem config::

    {"space": {"weights": [...]},
     "rho1": {"family": "linear", "base": [...]},
     "rho2": {"family": "entropic", "base": {"as": "probabilities", "values": [...]}, "theta": 1},
     "k1": [...], "k2": [...], "alpha": 0.5}

Market config::

    {"space": {...}, "s0": 1, "st": [...], "claim": [...], "budget": 0.1, "rho": {...}}

Densities are given with respect to the base weights unless marked
``"as": "probabilities"``.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Callable, Dict, List, Tuple, Union

import numpy as np

from .classical_np import likelihood_ratios
from .errors import ConfigError
from .hedging import HedgeResult, MarketSpec
from .measure import Density, RandomVariable, SampleSpace, make_space
from .np_solver import Certificate, CertificateReport, ProblemSpec, Solution
from .risk_models import ConvexExpectation, Entropic, FinitelyGenerated, Linear, Supergradient

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _number(value: Any, what: str) -> float:
    if isinstance(value, str) and value in ("inf", "-inf", "nan"):
        return float(value)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{what} must be a number, got {value!r}")
    return float(value)


def _vector(value: Any, what: str) -> List[float]:
    if not isinstance(value, list):
        raise ConfigError(f"{what} must be a list of numbers")
    return [_number(v, f"{what}[{i}]") for i, v in enumerate(value)]


def _require(data: Dict[str, Any], key: str, where: str) -> Any:
    if not isinstance(data, dict) or key not in data:
        raise ConfigError(f"Missing key {key!r} in {where}")
    return data[key]


def parse_density(space: SampleSpace, data: Any, what: str = "density") -> Density:
    if isinstance(data, list):
        return space.density(_vector(data, what))
    kind = data.get("as", "density") if isinstance(data, dict) else None
    values = _vector(_require(data, "values", what), what)
    if kind == "probabilities":
        return space.density_from_probabilities(values)
    if kind == "density":
        return space.density(values)
    raise ConfigError(f"{what}: 'as' must be 'density' or 'probabilities', got {kind!r}")


def parse_rho(space: SampleSpace, data: Dict[str, Any], what: str) -> ConvexExpectation:
    family = _require(data, "family", what)
    if family == "linear":
        return Linear(space, parse_density(space, _require(data, "base", what), f"{what}.base"))
    if family == "entropic":
        base = parse_density(space, _require(data, "base", what), f"{what}.base")
        return Entropic(space, base, _number(data.get("theta", 1.0), f"{what}.theta"))
    if family == "finitely_generated":
        generators = _require(data, "generators", what)
        if not isinstance(generators, list):
            raise ConfigError(f"{what}.generators must be a list")
        densities = [parse_density(space, g, f"{what}.generators[{j}]") for j, g in enumerate(generators)]
        penalties = _vector(data.get("penalties", [0.0] * len(densities)), f"{what}.penalties")
        return FinitelyGenerated(space, densities, penalties)
    raise ConfigError(f"{what}: unknown family {family!r}")


def parse_space(data: Dict[str, Any]) -> SampleSpace:
    weights = _vector(_require(data, "weights", "space"), "space.weights")
    labels = data.get("labels")
    return make_space(weights, labels)


def parse_problem(data: Dict[str, Any], name: str = "") -> ProblemSpec:
    space = parse_space(_require(data, "space", "problem"))
    return ProblemSpec(
        space,
        parse_rho(space, _require(data, "rho1", "problem"), "rho1"),
        parse_rho(space, _require(data, "rho2", "problem"), "rho2"),
        space.random_variable(_vector(_require(data, "k1", "problem"), "k1")),
        space.random_variable(_vector(_require(data, "k2", "problem"), "k2")),
        _number(_require(data, "alpha", "problem"), "alpha"),
        data.get("name", name),
    )


def parse_market(data: Dict[str, Any], name: str = "") -> MarketSpec:
    space = parse_space(_require(data, "space", "market"))
    return MarketSpec(
        space,
        _number(_require(data, "s0", "market"), "s0"),
        space.random_variable(_vector(_require(data, "st", "market"), "st")),
        space.random_variable(_vector(_require(data, "claim", "market"), "claim")),
        _number(_require(data, "budget", "market"), "budget"),
        parse_rho(space, _require(data, "rho", "market"), "rho"),
        data.get("name", name),
    )


def _read_json(path: PathLike) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except OSError as e:
        raise ConfigError(f"Could not read config {path}: {e}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config {path} is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"Config {path} must hold a JSON object")
    return data


def load_problem(path: PathLike) -> ProblemSpec:
    return parse_problem(_read_json(path), Path(path).stem)


def load_market(path: PathLike) -> MarketSpec:
    return parse_market(_read_json(path), Path(path).stem)


# ---------------------------------------------------------------- examples


def _paper_41() -> ProblemSpec:
    space = make_space([0.5, 0.5])
    return ProblemSpec(
        space,
        Linear(space, space.base),
        Entropic(space, space.density_from_probabilities([0.75, 0.25])),
        RandomVariable([0.0, 0.0]),
        RandomVariable([1.0, 1.0]),
        0.5,
        "paper-4.1",
    )


def _paper_42() -> ProblemSpec:
    space = make_space([0.5, 0.5])
    return ProblemSpec(
        space,
        Entropic(space, space.density_from_probabilities([0.25, 0.75])),
        Linear(space, space.base),
        RandomVariable([0.0, 0.0]),
        RandomVariable([1.0, 1.0]),
        math.log(math.e + 3.0) - 2.0 * math.log(2.0),
        "paper-4.2",
    )


def _paper_43() -> ProblemSpec:
    space = make_space([0.5, 0.5])
    return ProblemSpec(
        space,
        Entropic(space, space.density_from_probabilities([0.25, 0.75])),
        Entropic(space, space.density_from_probabilities([0.75, 0.25])),
        RandomVariable([0.0, 0.0]),
        RandomVariable([1.0, 1.0]),
        math.log(math.e + 3.0) - 2.0 * math.log(2.0),
        "paper-4.3",
    )


def _paper_61() -> ProblemSpec:
    e = math.e
    space = make_space([(e - 2.0) / (e - 1.0), 1.0 / (e - 1.0)])
    p = space.density([(e + 1.0) / (e - 1.0), (3.0 - e) / (e - 1.0)])
    return ProblemSpec(
        space,
        Linear(space, p),
        Entropic(space, space.base),
        RandomVariable([0.0, 0.0]),
        RandomVariable([1.0, 1.0]),
        (3.0 - e) / (e - 1.0),
        "paper-6.1",
    )


def _hedge_binomial() -> MarketSpec:
    space = make_space([0.5, 0.5])
    return MarketSpec(
        space,
        1.0,
        RandomVariable([2.0, 0.5]),
        RandomVariable([1.0, 0.0]),
        1.0 / 6.0,
        Entropic(space, space.base),
        "hedge-binomial",
    )


def _hedge_trinomial() -> MarketSpec:
    space = make_space([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0])
    return MarketSpec(
        space,
        1.0,
        RandomVariable([0.5, 1.0, 2.0]),
        RandomVariable([0.0, 0.0, 1.0]),
        1.0 / 6.0,
        Entropic(space, space.base),
        "hedge-trinomial",
    )


PROBLEMS: Dict[str, Callable[[], ProblemSpec]] = {
    "paper-4.1": _paper_41,
    "paper-4.2": _paper_42,
    "paper-4.3": _paper_43,
    "paper-6.1": _paper_61,
}

MARKETS: Dict[str, Callable[[], MarketSpec]] = {
    "hedge-binomial": _hedge_binomial,
    "hedge-trinomial": _hedge_trinomial,
}


def builtin_problem(name: str) -> ProblemSpec:
    try:
        return PROBLEMS[name]()
    except KeyError:
        raise ConfigError(f"Unknown example {name!r}; choose from {sorted(PROBLEMS)}")


def builtin_market(name: str) -> MarketSpec:
    try:
        return MARKETS[name]()
    except KeyError:
        raise ConfigError(f"Unknown market example {name!r}; choose from {sorted(MARKETS)}")


# ---------------------------------------------------------------- reports


def _encode(value: Any) -> Any:
    """Make ``value`` strict JSON: arrays to lists, infinities and NaN to strings."""
    if isinstance(value, dict):
        return {str(k): _encode(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_encode(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_encode(v) for v in value.tolist()]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def dumps(payload: Dict[str, Any]) -> str:
    return json.dumps(_encode(payload), indent=2, sort_keys=True, allow_nan=False)


def write_json(path: PathLike, payload: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(payload) + "\n", encoding="utf-8")
    return path


def rho_to_dict(rho: ConvexExpectation) -> Dict[str, Any]:
    if isinstance(rho, Linear):
        return {"family": "linear", "base": rho.base.values}
    if isinstance(rho, Entropic):
        return {"family": "entropic", "base": rho.base.values, "theta": rho.theta}
    if isinstance(rho, FinitelyGenerated):
        return {
            "family": "finitely_generated",
            "generators": [g.values for g in rho.generators],
            "penalties": rho.penalties,
        }
    raise ConfigError(f"Cannot serialize {type(rho).__name__}")


def problem_to_dict(spec: ProblemSpec) -> Dict[str, Any]:
    space: Dict[str, Any] = {"weights": spec.space.weights}
    if spec.space.labels is not None:
        space["labels"] = list(spec.space.labels)
    return {
        "name": spec.name,
        "space": space,
        "rho1": rho_to_dict(spec.rho1),
        "rho2": rho_to_dict(spec.rho2),
        "k1": spec.k1.values,
        "k2": spec.k2.values,
        "alpha": spec.alpha,
    }


def _supergradient_to_dict(space: SampleSpace, sg: Supergradient) -> Dict[str, Any]:
    return {
        "density": sg.density.values,
        "probabilities": space.probabilities(sg.density),
        "penalty": sg.penalty,
    }


def dump_solution(spec: ProblemSpec, solution: Solution) -> Dict[str, Any]:
    """Machine-readable report of a solved problem (includes the problem)."""
    payload: Dict[str, Any] = {
        "problem": problem_to_dict(spec),
        "x_star": solution.x_star.values,
        "beta": solution.beta,
        "gamma_alpha": solution.gamma_alpha,
        "q_star": _supergradient_to_dict(spec.space, solution.q_star),
        "p_star": _supergradient_to_dict(spec.space, solution.p_star),
        "p_star_used": not solution.trivial,
        "z": solution.z,
        "boundary_values": {str(i): v for i, v in sorted(solution.boundary_values.items())},
        "regions": solution.regions(spec.k1.values, spec.k2.values),
        "strategy": solution.strategy,
        "iterations": solution.iterations,
        "trivial": solution.trivial,
        "z_from_tilt": solution.z_from_tilt,
    }
    if solution.certificates is not None:
        payload["certificates"] = solution.certificates.as_dict()
    return payload


def _sg_from_dict(space: SampleSpace, data: Dict[str, Any], what: str) -> Supergradient:
    return Supergradient(
        Density(np.array(_vector(_require(data, "density", what), what))),
        _number(_require(data, "penalty", what), f"{what}.penalty"),
    )


def load_solution(path: PathLike) -> Tuple[ProblemSpec, Solution]:
    """Read a report written by :func:`dump_solution` back into objects."""
    data = _read_json(path)
    spec = parse_problem(_require(data, "problem", "report"))
    certificates = None
    if "certificates" in data:
        certificates = CertificateReport(tuple(
            Certificate(name, _number(entry["value"], name), bool(entry["applicable"]), entry["reason"])
            for name, entry in data["certificates"].items()
        ))
    z_from_tilt = data.get("z_from_tilt")
    solution = Solution(
        x_star=RandomVariable(_vector(_require(data, "x_star", "report"), "x_star")),
        beta=_number(data["beta"], "beta"),
        gamma_alpha=_number(data["gamma_alpha"], "gamma_alpha"),
        q_star=_sg_from_dict(spec.space, data["q_star"], "q_star"),
        p_star=_sg_from_dict(spec.space, data["p_star"], "p_star"),
        z=_number(data["z"], "z"),
        boundary_values={int(k): _number(v, "boundary") for k, v in data["boundary_values"].items()},
        certificates=certificates,
        strategy=data["strategy"],
        iterations=int(data["iterations"]),
        trivial=bool(data["trivial"]),
        z_from_tilt=None if z_from_tilt is None else _number(z_from_tilt, "z_from_tilt"),
    )
    return spec, solution


def write_csv(path: PathLike, spec: ProblemSpec, solution: Solution) -> Path:
    """Per-atom table: atom_index, k1, k2, x_star, ratio, region."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ratios = likelihood_ratios(solution.q_star.density.values, solution.p_star.density.values)
    regions = solution.regions(spec.k1.values, spec.k2.values)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["atom_index", "k1", "k2", "x_star", "ratio", "region"])
        for i in range(spec.space.size):
            writer.writerow([
                i,
                repr(float(spec.k1.values[i])),
                repr(float(spec.k2.values[i])),
                repr(float(solution.x_star.values[i])),
                repr(float(ratios[i])),
                regions[i],
            ])
    return path


def dump_hedge(market: MarketSpec, result: HedgeResult) -> Dict[str, Any]:
    space: Dict[str, Any] = {"weights": market.space.weights}
    payload: Dict[str, Any] = {
        "market": {
            "name": market.name,
            "space": space,
            "s0": market.s0,
            "st": market.st.values,
            "claim": market.claim.values,
            "budget": market.budget,
            "rho": rho_to_dict(market.rho),
        },
        "u0": result.u0,
        "xt_star": result.xt_star.values,
        "z": result.z,
        "b": result.b,
        "x0": result.x0,
        "h": result.h,
        "shortfall_risk": result.shortfall_risk,
        "full_hedge": result.full_hedge,
        "formula_residual": result.formula_residual,
        "degenerate": result.degenerate,
    }
    if result.solution is not None and result.solution.certificates is not None:
        payload["certificates"] = result.solution.certificates.as_dict()
        payload["strategy"] = result.solution.strategy
        payload["iterations"] = result.solution.iterations
    return payload


__all__ = [
    "MARKETS",
    "PROBLEMS",
    "builtin_market",
    "builtin_problem",
    "dump_hedge",
    "dump_solution",
    "dumps",
    "load_market",
    "load_problem",
    "load_solution",
    "parse_market",
    "parse_problem",
    "problem_to_dict",
    "write_csv",
    "write_json",
]
