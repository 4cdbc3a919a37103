"""Batch front end: ``python -m gaugelab <command> [options]``.

Exit codes: 0 success, 1 usage/config/checkpoint error, 2 a check failed
(or no flat radius, or a claimed equation is violated), 3 numerical
failure (vanishing kappa, non-convergence, Hodge convention mismatch).
"""

from __future__ import annotations

import argparse
import shlex
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from loguru import logger

from gaugelab import __version__
from gaugelab.config import settings
from gaugelab.core.config import ConfigError, RunConfig, build_run_config
from gaugelab.core.fieldkit import standard_points
from gaugelab.services import diagnostics as diag
from gaugelab.services.identities import run_identity_suite
from gaugelab.services.relax import (
    CheckpointError,
    NonConvergenceError,
    flow,
    lattice_from_pair,
    load_checkpoint,
    rms_distance,
    sample_pair,
)
from gaugelab.services.residuals import EQUATIONS, residual_report
from gaugelab.services.solutions import (
    ClaimViolationError,
    HodgeConventionError,
    SolutionPair,
    build_solution,
    list_solutions,
    ps_monopole,
    solution_labels,
)
from gaugelab.utils.tables import header_lines, read_table, render_table, write_text

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CHECK = 2
EXIT_NUMERIC = 3


class UsageError(RuntimeError):
    """Bad command-line arguments."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


# option dest -> RunConfig key
_OVERRIDES = {
    "solution": "solution",
    "r_min": "r_min",
    "r_max": "r_max",
    "samples": "samples",
    "angular_level": "angular_level",
    "radial_level": "radial_level",
    "residual_tol": "residual_tol",
    "report_constant": "report_constant",
    "epsilon": "epsilon",
    "rho": "rho",
    "output": "output",
    "deterministic": "deterministic",
    "seed": "seed",
    "workers": "workers",
    "points": "points",
    "nodes": "relax_nodes",
    "half_width": "relax_half_width",
    "perturbation": "relax_perturbation",
    "tol": "relax_tol",
    "max_iters": "relax_max_iters",
    "checkpoint": "checkpoint",
    "checkpoint_every": "checkpoint_every",
}


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value config file (keys mirror the run configuration)")
    parser.add_argument("--solution", choices=list(solution_labels()))
    parser.add_argument("--angular-level", dest="angular_level", type=int)
    parser.add_argument("--radial-level", dest="radial_level", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--points", type=int, help="number of seeded sample points")
    parser.add_argument("--residual-tol", dest="residual_tol", type=float)
    parser.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=None)
    parser.add_argument("-o", "--output", help="write here instead of standard output")
    parser.add_argument("--log-level", dest="log_level", default=None)


def _window(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--r-min", dest="r_min", type=float)
    parser.add_argument("--r-max", dest="r_max", type=float)
    parser.add_argument("--samples", type=int)


def build_parser() -> _Parser:
    parser = _Parser(prog="gaugelab", description="SU(2) gauge-pair numerical lab")
    parser.add_argument("--version", action="version", version=f"gaugelab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    _common(sub.add_parser("list-solutions", help="list registered exact solutions"))

    profile = sub.add_parser("profile", help="tabulate kappa, N, T and friends on a radius grid")
    _common(profile)
    _window(profile)

    residual = sub.add_parser("residual", help="per-point residuals of one equation")
    _common(residual)
    residual.add_argument("--equation", choices=list(EQUATIONS), default="eq11")
    residual.add_argument("--tau", type=float)

    identity = sub.add_parser("identity-check", help="run the identity and inequality suite")
    _common(identity)
    _window(identity)
    identity.add_argument("--report-constant", dest="report_constant", type=float)

    search = sub.add_parser("search", help="look for a radius where the frequency is small")
    _common(search)
    _window(search)
    search.add_argument("--epsilon", type=float)
    search.add_argument("--rho", type=float)
    search.add_argument("--report-constant", dest="report_constant", type=float)
    search.add_argument("--profile", dest="profile_path", help="reuse a profile CSV instead of sampling")

    relax = sub.add_parser("relax", help="gradient flow of a perturbed lattice sample")
    _common(relax)
    relax.add_argument("--nodes", type=int)
    relax.add_argument("--half-width", dest="half_width", type=float)
    relax.add_argument("--perturbation", type=float)
    relax.add_argument("--tol", type=float)
    relax.add_argument("--max-iters", dest="max_iters", type=int)
    relax.add_argument("--checkpoint")
    relax.add_argument("--checkpoint-every", dest="checkpoint_every", type=int)
    relax.add_argument("--resume", help="start from this checkpoint")
    return parser


def _configure_logging(level: Optional[str]) -> None:
    logger.remove()
    logger.add(sys.stderr, level=(level or settings.log_level).upper(), format="{level: <8} {message} {extra}")


def _run_config(args: argparse.Namespace) -> RunConfig:
    options = vars(args)
    overrides = {key: options[dest] for dest, key in _OVERRIDES.items() if options.get(dest) is not None}
    config = build_run_config(overrides, args.config)
    settings.deterministic = config.deterministic
    settings.workers = config.workers
    settings.angular_level = config.angular_level
    settings.radial_level = config.radial_level
    return config


def _header(args: argparse.Namespace, argv: Sequence[str], config: RunConfig) -> List[str]:
    return header_lines(f"{args.command} {shlex.join(argv[1:])}".strip(), config.seed, config.header_items())


def _solution(config: RunConfig, verify: bool = True) -> SolutionPair:
    points = standard_points(config.points, dim=4, seed=config.seed)
    return build_solution(config.solution, verify, points=points, tol=config.residual_tol)


def cmd_list_solutions(args: argparse.Namespace, argv: Sequence[str], config: RunConfig) -> int:
    frame = pd.DataFrame(
        [(info.label, info.description, " ".join(info.claims)) for info in list_solutions()],
        columns=["label", "description", "claims"],
    )
    write_text(render_table(frame, _header(args, argv, config)), config.output)
    return EXIT_OK


def cmd_profile(args: argparse.Namespace, argv: Sequence[str], config: RunConfig) -> int:
    pair = _solution(config)
    profile = diag.build_profile(pair, config.r_min, config.r_max, config.samples, radial_level=config.radial_level, workers=config.workers)
    footer = []
    if profile.u is not None and profile.v is not None:
        footer = [
            "# u=" + " ".join(f"{value:.12g}" for value in profile.u),
            "# v=" + " ".join(f"{value:.12g}" for value in profile.v),
        ]
    write_text(render_table(diag.profile_to_frame(profile), _header(args, argv, config), footer), config.output)
    return EXIT_OK


def cmd_residual(args: argparse.Namespace, argv: Sequence[str], config: RunConfig) -> int:
    if args.equation == "monopole":
        pair: Any = ps_monopole()
        points = standard_points(config.points, dim=3, seed=config.seed)
    else:
        pair = _solution(config, verify=False)
        points = standard_points(config.points, dim=pair.dim, seed=config.seed)
    report = residual_report(pair, args.equation, points, tau=args.tau)

    coords = np.full((points.shape[0], 4), np.nan)
    coords[:, : points.shape[1]] = points
    rows = []
    for name, norms in report.components.items():
        for index, value in enumerate(norms):
            rows.append((*coords[index], report.label, name, float(value)))
    frame = pd.DataFrame(rows, columns=["x1", "x2", "x3", "x4", "eq", "component", "norm"])
    footer = [
        f"# max_norm={report.max_norm():.12g}",
        f"# rms={report.rms():.12g}",
        f"# residual_tol={config.residual_tol!r}",
    ]
    write_text(render_table(frame, _header(args, argv, config), footer), config.output)
    return EXIT_OK if report.max_norm() < config.residual_tol else EXIT_CHECK


def cmd_identity_check(args: argparse.Namespace, argv: Sequence[str], config: RunConfig) -> int:
    pair = _solution(config)
    results = run_identity_suite(pair, config)
    frame = pd.DataFrame(
        [(item.name, item.value, item.bound, "pass" if item.passed else "FAIL", item.detail) for item in results],
        columns=["check", "value", "bound", "status", "detail"],
    )
    failed = sum(not item.passed for item in results)
    footer = [f"# checks={len(results)} failed={failed}"]
    write_text(render_table(frame, _header(args, argv, config), footer), config.output)
    return EXIT_CHECK if failed else EXIT_OK


def _search_frame(report: diag.FlatRadiusReport) -> pd.DataFrame:
    return pd.DataFrame(
        [(check.name, check.value, check.bound, "pass" if check.passed else "FAIL", check.detail) for check in report.checks],
        columns=["check", "value", "bound", "status", "detail"],
    )


def _search_footer(report: diag.FlatRadiusReport) -> List[str]:
    lines = [
        f"# radius={'' if report.radius is None else format(report.radius, '.12g')}",
        f"# window={report.window[0]:.12g},{report.window[1]:.12g}",
        f"# coverage={report.coverage:.6g}",
        f"# samples_in_window={report.samples_in_window}",
        f"# branch={report.branch}",
    ]
    if report.sub_window is not None:
        lines.append(f"# sub_window={report.sub_window[0]:.12g},{report.sub_window[1]:.12g}")
    return lines


def cmd_search(args: argparse.Namespace, argv: Sequence[str], config: RunConfig) -> int:
    params = diag.SearchParams(config.epsilon, config.rho, report_constant=config.report_constant)
    if args.profile_path:
        profile = diag.profile_from_frame(read_table(args.profile_path), config.solution)
    else:
        pair = _solution(config)
        lo, hi = params.window
        samples = max(config.samples, params.min_samples)
        profile = diag.build_profile(pair, lo, hi, samples, radial_level=config.radial_level, workers=config.workers)

    header = _header(args, argv, config)
    try:
        report = diag.find_flat_radius(profile, params)
    except diag.FlatRadiusNotFoundError as exc:
        write_text(render_table(_search_frame(exc.report), header, _search_footer(exc.report)), config.output)
        print(f"gaugelab: {exc}", file=sys.stderr)
        return EXIT_CHECK
    write_text(render_table(_search_frame(report), header, _search_footer(report)), config.output)
    return EXIT_OK if report.passed else EXIT_CHECK


def cmd_relax(args: argparse.Namespace, argv: Sequence[str], config: RunConfig) -> int:
    pair = _solution(config)
    if args.resume:
        state = load_checkpoint(args.resume, pair.connection, pair.label)
    else:
        state = lattice_from_pair(pair, config.relax_nodes, config.relax_half_width, config.relax_perturbation)
    result = flow(
        state,
        config.relax_tol,
        config.relax_max_iters,
        checkpoint=config.checkpoint or None,
        checkpoint_every=config.checkpoint_every,
    )
    frame = pd.DataFrame({"iteration": np.arange(len(result.trace)), "energy": result.trace})
    footer = [
        f"# iterations={result.iterations}",
        f"# gradient_norm={result.gradient_norm:.12g}",
        f"# rms_to_exact={rms_distance(result.state, sample_pair(pair, result.state)):.12g}",
    ]
    write_text(render_table(frame, _header(args, argv, config), footer), config.output)
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace, Sequence[str], RunConfig], int]] = {
    "list-solutions": cmd_list_solutions,
    "profile": cmd_profile,
    "residual": cmd_residual,
    "identity-check": cmd_identity_check,
    "search": cmd_search,
    "relax": cmd_relax,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    arguments = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(arguments)
    except UsageError as exc:
        print(f"gaugelab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)

    _configure_logging(args.log_level)
    try:
        config = _run_config(args)
        return COMMANDS[args.command](args, arguments, config)
    except (ConfigError, CheckpointError, ValueError) as exc:
        print(f"gaugelab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ClaimViolationError as exc:
        print(f"gaugelab: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (diag.VanishingKappaError, NonConvergenceError, HodgeConventionError) as exc:
        print(f"gaugelab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main() -> None:
    sys.exit(run())


__all__ = ["COMMANDS", "UsageError", "build_parser", "main", "run"]
