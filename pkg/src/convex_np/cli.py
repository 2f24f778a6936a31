"""Command line front end: ``python -m convex_np solve|hedge|audit``."""
from __future__ import annotations

import argparse
import concurrent.futures
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from rich import box
from rich.console import Console
from rich.markup import escape
from rich.table import Table
from tqdm import tqdm

from . import config
from .errors import ConfigError, ConvexNPError, NumericalError, ValidationError
from .hedging import MarketSpec, solve_shortfall
from .logs import configure_logging
from .np_solver import ACCURACY_FLOOR, NPSolver, ProblemSpec, SolverOptions
from .oracle import audit_example_61

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_CERTIFICATE = 4


@dataclass
class JobOutcome:
    label: str
    exit_code: int
    message: str = ""
    payload: Optional[Dict[str, Any]] = None
    rows: List[Tuple[str, str]] = field(default_factory=list)
    certificates: Optional[Dict[str, Dict[str, Any]]] = None


def _fmt(value: Any) -> str:
    if isinstance(value, (list, tuple, np.ndarray)):
        return "(" + ", ".join(_fmt(v) for v in value) + ")"
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def _options(args: argparse.Namespace) -> SolverOptions:
    return SolverOptions(strategy=args.strategy, seed=args.seed, max_workers=args.jobs)


def _output_path(out: Optional[str], index: int, total: int) -> Optional[Path]:
    if out is None:
        return None
    path = Path(out)
    if total == 1:
        return path
    return path.with_name(f"{path.stem}-{index}{path.suffix or '.json'}")


def _certificate_exit(certificates: Dict[str, Dict[str, Any]], tol: float) -> int:
    for entry in certificates.values():
        value = entry["value"]
        if entry["applicable"] and not (math.isfinite(value) and value <= tol):
            return EXIT_CERTIFICATE
    return EXIT_OK


def _guarded(label: str, work: Callable[[], JobOutcome]) -> JobOutcome:
    try:
        return work()
    except ValidationError as e:
        logger.debug("Validation failure in %s", label, exc_info=True)
        return JobOutcome(label, EXIT_CONFIG, f"{type(e).__name__}: {e}")
    except NumericalError as e:
        logger.debug("Solver failure in %s", label, exc_info=True)
        return JobOutcome(label, EXIT_SOLVER, f"{type(e).__name__}: {e}")


def _solve_job(label: str, load: Callable[[], ProblemSpec], args, out: Optional[Path]) -> JobOutcome:
    def work() -> JobOutcome:
        spec = load()
        solution = NPSolver(_options(args)).solve(spec)
        payload = config.dump_solution(spec, solution)
        certificates = solution.certificates.as_dict()
        if out is not None:
            config.write_json(out, payload)
            config.write_csv(out.with_suffix(".csv"), spec, solution)
        rows = [
            ("beta", _fmt(solution.beta)),
            ("X*", _fmt(solution.x_star.values.tolist())),
            ("Q* probabilities", _fmt(spec.space.probabilities(solution.q_star.density).tolist())),
            ("P* probabilities", _fmt(spec.space.probabilities(solution.p_star.density).tolist())),
            ("gamma_alpha", _fmt(solution.gamma_alpha)),
            ("z", _fmt(solution.z)),
            ("boundary", _fmt({i: v for i, v in solution.boundary_values.items()})),
            ("strategy", f"{solution.strategy} ({solution.iterations} iterations)"),
        ]
        code = _certificate_exit(certificates, args.tol)
        return JobOutcome(label, code, "", payload, rows, certificates)

    return _guarded(label, work)


def _hedge_job(label: str, load: Callable[[], MarketSpec], args, out: Optional[Path]) -> JobOutcome:
    def work() -> JobOutcome:
        market = load()
        result = solve_shortfall(market, _options(args))
        payload = config.dump_hedge(market, result)
        if out is not None:
            config.write_json(out, payload)
        rows = [
            ("U0", _fmt(result.u0)),
            ("X_T*", _fmt(result.xt_star.values.tolist())),
            ("(x0, h)", _fmt([result.x0, result.h])),
            ("z", _fmt(result.z)),
            ("B", _fmt(result.b)),
            ("shortfall risk", _fmt(result.shortfall_risk)),
            ("mode", "full hedge" if result.full_hedge else "partial hedge"),
        ]
        certificates = payload.get("certificates")
        code = EXIT_OK if certificates is None else _certificate_exit(certificates, args.tol)
        return JobOutcome(label, code, "", payload, rows, certificates)

    return _guarded(label, work)


def _sources(args, builtin: Callable[[str], Any], loader: Callable[[str], Any]) -> List[Tuple[str, Callable[[], Any]]]:
    sources: List[Tuple[str, Callable[[], Any]]] = []
    for name in args.example or []:
        sources.append((name, lambda name=name: builtin(name)))
    for path in args.configs:
        sources.append((path, lambda path=path: loader(path)))
    return sources


def run_batch(
    sources: Sequence[Tuple[str, Callable[[], Any]]],
    job: Callable[..., JobOutcome],
    args: argparse.Namespace,
) -> List[JobOutcome]:
    """Run independent jobs, in parallel when ``--jobs`` exceeds one."""
    outcomes: Dict[int, JobOutcome] = {}
    total = len(sources)
    with tqdm(total=total, desc="Running jobs", disable=total < 2) as pbar:
        with concurrent.futures.ThreadPoolExecutor(max_workers=args.jobs) as executor:
            future_to_index = {
                executor.submit(job, label, load, args, _output_path(args.out, index, total)): index
                for index, (label, load) in enumerate(sources)
            }
            for future in concurrent.futures.as_completed(future_to_index):
                outcomes[future_to_index[future]] = future.result()
                pbar.update(1)
    return [outcomes[i] for i in range(total)]


def _print_outcome(console: Console, outcome: JobOutcome, tol: float) -> None:
    if outcome.payload is None:
        console.print(f"[red]{escape(outcome.label)}: {escape(outcome.message)}[/red]")
        return
    table = Table(title=outcome.label, box=box.ROUNDED, header_style="dim")
    table.add_column("Quantity", style="white")
    table.add_column("Value", justify="right")
    for name, value in outcome.rows:
        table.add_row(name, value)
    console.print(table)
    if outcome.certificates:
        certs = Table(title="Certificates", box=box.ROUNDED, header_style="dim")
        certs.add_column("Residual")
        certs.add_column("Value", justify="right")
        certs.add_column("Status")
        for name, entry in outcome.certificates.items():
            if not entry["applicable"]:
                certs.add_row(name, "-", f"[dim]N/A[/dim] {entry['reason']}")
                continue
            ok = math.isfinite(entry["value"]) and entry["value"] <= tol
            certs.add_row(name, f"{entry['value']:.3e}", "[green]PASS[/green]" if ok else "[red]FAIL[/red]")
        console.print(certs)


def _finish(console: Console, outcomes: List[JobOutcome], tol: float) -> int:
    for outcome in outcomes:
        _print_outcome(console, outcome, tol)
    if not outcomes:
        console.print("[red]No problem given; pass config paths or --example[/red]")
        return EXIT_CONFIG
    return max(outcome.exit_code for outcome in outcomes)


def run_solve(args: argparse.Namespace, console: Console) -> int:
    sources = _sources(args, config.builtin_problem, config.load_problem)
    return _finish(console, run_batch(sources, _solve_job, args), args.tol)


def run_hedge(args: argparse.Namespace, console: Console) -> int:
    sources = _sources(args, config.builtin_market, config.load_market)
    return _finish(console, run_batch(sources, _hedge_job, args), args.tol)


# ------------------------------------------------------------------ audit


@dataclass(frozen=True)
class AuditRow:
    fixture: str
    quantity: str
    claimed: str
    computed: str
    status: str


def _compare(fixture: str, quantity: str, claimed, computed, tol: float, floor: float) -> AuditRow:
    deviation = float(np.max(np.abs(np.asarray(claimed, dtype=float) - np.asarray(computed, dtype=float))))
    status = "PASS" if deviation <= tol and tol >= floor else "FAIL"
    return AuditRow(fixture, quantity, _fmt(claimed), _fmt(computed), status)


def audit_rows(tol: float, options: Optional[SolverOptions] = None) -> List[AuditRow]:
    """Claimed versus computed values for every built-in fixture."""
    e = math.e
    options = options or SolverOptions()
    rows: List[AuditRow] = []

    def solved(name: str):
        spec = config.builtin_problem(name)
        solution = NPSolver(options).solve(spec)
        return spec, solution, ACCURACY_FLOOR[solution.strategy]

    claims = {
        "paper-4.1": lambda spec, s: [
            ("Q* probabilities", [3 / (e + 3), e / (e + 3)], spec.space.probabilities(s.q_star.density)),
            ("X*", [1.0, 0.0], s.x_star.values),
            ("beta", math.log((e + 3) / 4), s.beta),
        ],
        "paper-4.2": lambda spec, s: [
            ("P* probabilities", [e / (e + 3), 3 / (e + 3)], spec.space.probabilities(s.p_star.density)),
            ("gamma_alpha", 0.5, s.gamma_alpha),
            ("X*", [1.0, 0.0], s.x_star.values),
        ],
        "paper-4.3": lambda spec, s: [
            ("z", e / 3, s.z),
            ("X*", [1.0, 0.0], s.x_star.values),
        ],
    }
    for name, claim in claims.items():
        try:
            spec, solution, floor = solved(name)
        except ConvexNPError as exc:
            rows.append(AuditRow(name, "solve", "-", f"{type(exc).__name__}: {exc}", "FAIL"))
            continue
        for quantity, claimed, computed in claim(spec, solution):
            rows.append(_compare(name, quantity, claimed, computed, tol, floor))

    try:
        market = config.builtin_market("hedge-binomial")
        result = solve_shortfall(market, options)
        floor = ACCURACY_FLOOR[result.solution.strategy] if result.solution else 0.0
        rows += [
            _compare("hedge-binomial", "X_T*", [0.5, 0.0], result.xt_star.values, tol, floor),
            _compare("hedge-binomial", "(x0, h)", [1 / 6, 1 / 3], [result.x0, result.h], tol, floor),
            _compare(
                "hedge-binomial", "shortfall risk",
                math.log((math.exp(0.5) + 1) / 2), result.shortfall_risk, tol, floor,
            ),
        ]
    except ConvexNPError as exc:
        rows.append(AuditRow("hedge-binomial", "solve", "-", f"{type(exc).__name__}: {exc}", "FAIL"))

    report = audit_example_61()
    status = "FLAGGED" if report.flagged else "PASS"
    rows += [
        AuditRow("paper-6.1", "objective of claimed X*", _fmt(math.log(e - 1)), _fmt(report.claimed_value), status),
        AuditRow("paper-6.1", "optimum (KKT)", _fmt(report.claimed_value), _fmt(report.kkt_value), status),
        AuditRow("paper-6.1", "optimum (grid)", _fmt(report.claimed_value), _fmt(report.grid_value), status),
        AuditRow("paper-6.1", "rho1(X*) vs alpha", _fmt(report.alpha), _fmt(report.claimed_rho1), status),
        AuditRow(
            "paper-6.1", "dQ*/dmu", _fmt(list(report.claimed_q_density)), _fmt(list(report.q_density)),
            "PASS" if np.allclose(report.claimed_q_density, report.q_density, atol=tol, rtol=0.0) else "FAIL",
        ),
        AuditRow(
            "paper-6.1", "consistent at tight level", _fmt(report.alternate_alpha),
            "yes" if report.alternate_consistent else "no", status,
        ),
    ]
    return rows


def run_audit(args: argparse.Namespace, console: Console) -> int:
    rows = audit_rows(args.tol, _options(args))
    table = Table(title=f"Fixture audit (tol {args.tol:g})", box=box.ROUNDED, header_style="dim")
    for column in ("Fixture", "Quantity", "Claimed", "Computed", "Status"):
        table.add_column(column)
    styles = {"PASS": "green", "FAIL": "red", "FLAGGED": "yellow"}
    for row in rows:
        table.add_row(
            row.fixture, row.quantity, row.claimed, row.computed,
            f"[{styles[row.status]}]{row.status}[/{styles[row.status]}]",
        )
    console.print(table)
    if args.out:
        config.write_json(args.out, {"rows": [row.__dict__ for row in rows], "tol": args.tol})
    return EXIT_CERTIFICATE if any(row.status == "FAIL" for row in rows) else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=str, default=None, help="Machine-readable JSON report path")
    common.add_argument("--tol", type=float, default=1e-6, help="Certificate tolerance (default: 1e-6)")
    common.add_argument(
        "--strategy", choices=("auto", "lp", "subgradient"), default="auto", help="Primal solver strategy"
    )
    common.add_argument("--seed", type=int, default=0, help="Seed for randomized restarts")
    common.add_argument("--jobs", type=int, default=1, help="Number of parallel jobs")
    common.add_argument("--log-level", type=str, default="WARNING", help="Logging level")
    common.add_argument("--log-file", type=str, default=None, help="Optional log file")

    parser = argparse.ArgumentParser(
        prog="convex_np", description="Neyman-Pearson tests for convex expectations"
    )
    commands = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("solve", "Solve Neyman-Pearson problems"),
        ("hedge", "Minimize shortfall risk in a one-period market"),
    ):
        sub = commands.add_parser(name, parents=[common], help=helptext)
        sub.add_argument("configs", nargs="*", help="JSON config files")
        sub.add_argument("--example", action="append", help="Built-in example name (repeatable)")
    commands.add_parser("audit", parents=[common], help="Audit the built-in fixtures")
    return parser


def main(argv: Optional[Sequence[str]] = None, console: Optional[Console] = None) -> int:
    args = build_parser().parse_args(argv)
    console = console or Console()
    try:
        configure_logging(args.log_level, args.log_file)
    except ConfigError as e:
        console.print(f"[red]{escape(str(e))}[/red]")
        return EXIT_CONFIG
    if args.jobs < 1:
        console.print("[red]--jobs must be at least 1[/red]")
        return EXIT_CONFIG
    handlers = {"solve": run_solve, "hedge": run_hedge, "audit": run_audit}
    return handlers[args.command](args, console)


__all__ = [
    "AuditRow",
    "EXIT_CERTIFICATE",
    "EXIT_CONFIG",
    "EXIT_OK",
    "EXIT_SOLVER",
    "audit_rows",
    "build_parser",
    "main",
    "run_audit",
    "run_batch",
    "run_hedge",
    "run_solve",
]
