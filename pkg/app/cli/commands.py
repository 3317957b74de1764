"""
Command-line entry point: experiments, reports and the acceptance suite
"""
import argparse
import json
import logging
import sys
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import ValidationError

from app.config import settings
from app.exceptions import BeltramiLabError, ConfigurationError, InsufficientDataError
from app.models import BallDomain, Report, RunConfig
from app.services import domains
from app.services.boundary import boundary_analyzer
from app.services.calculus import beltrami_residual, collinearity_residual, helmholtz_residual
from app.services.fields import CATALOG_FORMATS, BeltramiField, SpheromakField, catalog_lookup
from app.services.flow import (
    first_integral_drift,
    flow_integrator,
    recurrence_experiment,
    time_reversal_defect,
    trajectory_frame,
    volume_preservation_check,
)
from app.services.nodal import ZeroSet, box_counting_dimension, box_counts_frame, count_nodal_domains, zero_finder
from app.services.reports import plain, report_writer, timestamp

logger = logging.getLogger(__name__)

COMMANDS = ("catalog", "trace", "zeros", "dimension", "nodal", "boundary", "recurrence", "verify")

# Keys left out of the report params so identical runs give identical bytes
_VOLATILE_PARAMS = {"command", "timestamp", "threads", "output_dir"}


@dataclass
class Outcome:
    results: Dict[str, Any] = dataclass_field(default_factory=dict)
    violations: List[str] = dataclass_field(default_factory=list)
    tables: Dict[str, pd.DataFrame] = dataclass_field(default_factory=dict)

    def merge(self, name: str, other: "Outcome") -> None:
        self.results[name] = other.results
        self.violations.extend(other.violations)
        self.tables.update({f"{name}_{key}": frame for key, frame in other.tables.items()})


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--field", help=f"catalog field: {', '.join(CATALOG_FORMATS)}")
    common.add_argument("--domain", help='JSON descriptor, e.g. {"kind":"ball3","radius":1} (expression fields)')
    common.add_argument("--seed", type=int)
    common.add_argument("--output-dir", dest="output_dir")
    common.add_argument("--format", choices=["json", "csv"])
    common.add_argument("--threads", type=int)
    common.add_argument("--no-timestamp", dest="timestamp", action="store_false", default=None)
    common.add_argument("--config", help="JSON file with RunConfig keys")
    common.add_argument("--verbose", action="store_true")
    common.add_argument("--grid", type=int)
    common.add_argument("--t-end", dest="t_end", type=float)
    common.add_argument("--start", type=float, nargs=3)
    common.add_argument("--horizon", type=float)
    common.add_argument("--eps", type=float)
    common.add_argument("--samples", type=int)
    common.add_argument("--tol", type=float)
    common.add_argument("--traces", type=int)

    parser = argparse.ArgumentParser(prog="beltrami", description=settings.DESCRIPTION)
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        subparsers.add_parser(command, parents=[common])
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    """Merge an optional JSON config file with command-line flags (flags win)"""
    data: Dict[str, Any] = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {args.config!r}: {exc}", "cli.run")
        if not isinstance(data, dict):
            raise ConfigurationError("config file must hold a JSON object", "cli.run")
    flags = {
        key: value
        for key, value in vars(args).items()
        if key not in {"config", "verbose", "command", "domain"} and value is not None
    }
    if args.domain:
        try:
            flags["domain"] = json.loads(args.domain)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"malformed --domain JSON: {exc}", "cli.run")
    data.update(flags)
    data["command"] = args.command
    data.setdefault("seed", settings.DEFAULT_SEED)
    return RunConfig(**data)


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one subcommand

    Returns:
        0 when every check passed, 1 when a verified property is violated,
        2 on usage or configuration errors
    """
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    try:
        config = load_config(args)
        threads = config.threads or settings.THREADS
        field = _resolve_field(config)
        handler = HANDLERS[config.command]
        outcome = handler(config, field, threads)
        report = Report(
            field=field.name if field else None,
            domain=domains.domain_to_json(field.domain) if field else None,
            command=config.command,
            params=_params(config),
            results=plain(outcome.results),
            violations=outcome.violations,
        )
        paths = report_writer.emit(report, config.output_dir, config.format, outcome.tables)
    except ValidationError as exc:
        print(f"error: cli.run: invalid configuration: {exc.errors()[0]['msg']}", file=sys.stderr)
        return 2
    except BeltramiLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    status = "FAIL" if report.violations else "OK"
    print(f"{status} {config.command} {report.field or ''}: {len(report.violations)} violation(s); report {paths[0]}")
    for violation in report.violations:
        logger.warning(f"Violation: {violation}")
    return 1 if report.violations else 0


def _resolve_field(config: RunConfig) -> Optional[BeltramiField]:
    if not config.field:
        if config.command == "catalog":
            return None
        raise ConfigurationError(f"{config.command} needs --field", "cli.run")
    domain = domains.domain_from_json(config.domain) if config.domain else None
    return catalog_lookup(config.field, domain)


def _params(config: RunConfig) -> Dict[str, Any]:
    params = config.model_dump(mode="json", exclude=_VOLATILE_PARAMS | {"field", "domain"}, exclude_none=True)
    if config.timestamp:
        params["generated_at"] = timestamp()
    return params


def _interior_samples(field: BeltramiField, n: int, seed: int, label: str) -> np.ndarray:
    points = domains.sample_uniform(field.domain, n, seed, label)
    if isinstance(field.domain, BallDomain):
        points = 0.9 * points
    return points


# Sections shared by the subcommands and verify

def certification(field: BeltramiField, n: int, seed: int) -> Outcome:
    points = domains.sample_uniform(field.domain, n, seed, "certification")
    outcome = Outcome()
    residuals = {
        "beltrami_residual_max": float(np.max(beltrami_residual(field, points))),
        "collinearity_residual_max": float(np.max(collinearity_residual(field, points))),
        "helmholtz_residual_max": float(np.max(helmholtz_residual(field, points))),
    }
    outcome.results = {"points": n, "lambda": field.lam, **residuals}
    gated = ["beltrami_residual_max", "collinearity_residual_max"]
    if field.lam is not None:
        gated.append("helmholtz_residual_max")
    for key in gated:
        if residuals[key] >= settings.RESIDUAL_THRESHOLD:
            outcome.violations.append(
                f"calculus.{key[:-4]}: {residuals[key]:.3e} >= {settings.RESIDUAL_THRESHOLD:g}"
            )
    return outcome


def flow_quality(field: BeltramiField, seed: int, tol: Optional[float], n: int = 20, T: float = 10.0) -> Outcome:
    outcome = Outcome()
    points = _interior_samples(field, n, seed, "flow_quality")
    volume = max(volume_preservation_check(field, p, T, tol=tol) for p in points)
    reversal = max(time_reversal_defect(field, p, T, tol) for p in points[:5]) / field.scale
    outcome.results = {"volume_defect_max": volume, "time_reversal_defect_max": reversal, "horizon": T}
    if volume >= settings.VOLUME_DEFECT_THRESHOLD:
        outcome.violations.append(f"flow.volume_preservation_check: {volume:.3e} >= {settings.VOLUME_DEFECT_THRESHOLD:g}")
    if reversal >= settings.RESIDUAL_THRESHOLD:
        outcome.violations.append(f"flow.time_reversal_defect: {reversal:.3e} >= {settings.RESIDUAL_THRESHOLD:g}*scale")
    if getattr(field, "is_degenerate", False):
        drift = first_integral_drift(field, (0.0, 1.0, 1.0), 100.0, tol)
        outcome.results["first_integral_drift"] = drift
        if drift >= settings.RESIDUAL_THRESHOLD:
            outcome.violations.append(f"flow.first_integral_drift: {drift:.3e} >= {settings.RESIDUAL_THRESHOLD:g}")
    return outcome


def zero_section(field: BeltramiField, zs: ZeroSet) -> Outcome:
    outcome = Outcome()
    interior = [r for r in zs.records if r.interior]
    undetermined = sum(1 for r in interior if r.order is None)
    broken = 0
    for record in interior:
        data = record.rank_data
        if data is None:
            continue
        limit = settings.RANK_THRESHOLD * data.norm
        if data.rank < 2 or data.symmetry_defect >= limit or data.trace >= limit:
            broken += 1
    outcome.results = {
        "count": len(zs.records),
        "interior_count": len(interior),
        "cluster_count": zs.cluster_count,
        "cluster_sizes": zs.cluster_sizes,
        "cell_size": zs.cell_size,
        "max_residual": max((r.residual for r in zs.records), default=0.0),
        "records": zs.records,
    }
    if undetermined:
        outcome.violations.append(f"nodal.zero_order: order undetermined at {undetermined} interior zero(s)")
    if broken:
        outcome.violations.append(
            f"nodal.rank_identities_at_zero: rank/symmetry/trace identities fail at {broken} of {len(interior)} zeros"
        )
    if getattr(field, "is_degenerate", False):
        off_circle = 0
        if zs.records:
            distances = field.zero_circle_distance(np.array([r.location for r in zs.records]))
            off_circle = int(np.sum(distances >= 1e-8))
        if zs.cluster_count != 2 or off_circle:
            outcome.violations.append(
                f"nodal.find_zeros: expected the two zero circles, got {zs.cluster_count} cluster(s) "
                f"and {off_circle} zero(s) off the circles"
            )
    outcome.tables["records"] = pd.DataFrame(
        [
            {
                "x": r.location[0],
                "y": r.location[1],
                "z": r.location[2],
                "residual": r.residual,
                "order": r.order,
                "rank": r.rank_data.rank if r.rank_data else None,
                "cluster": r.cluster,
            }
            for r in zs.records
        ],
        columns=["x", "y", "z", "residual", "order", "rank", "cluster"],
    )
    return outcome


def dimension_section(field: BeltramiField, zs: ZeroSet) -> Outcome:
    outcome = Outcome()
    if not zs.records:
        outcome.results = {"slope": None, "note": "empty zero set"}
        return outcome
    curves = zero_finder.curve_clusters(field, zs)
    zero_finder.densify_zero_curves(field, zs)
    try:
        fit = box_counting_dimension(zs)
    except InsufficientDataError as exc:
        outcome.results = {"slope": None, "curve_clusters": curves, "note": str(exc)}
        if curves:
            outcome.violations.append(f"nodal.box_counting_dimension: no slope for {curves} zero curve(s): {exc}")
        return outcome
    outcome.results = {**fit.model_dump(), "curve_clusters": curves}
    if fit.slope > settings.DIMENSION_UPPER:
        outcome.violations.append(f"nodal.box_counting_dimension: slope {fit.slope:.4f} > {settings.DIMENSION_UPPER:g}")
    if curves and fit.slope < settings.DIMENSION_LOWER:
        outcome.violations.append(
            f"nodal.box_counting_dimension: slope {fit.slope:.4f} < {settings.DIMENSION_LOWER:g} for a zero set made of curves"
        )
    outcome.tables["box_counts"] = box_counts_frame(fit.box_counts)
    return outcome


def nodal_section(field: BeltramiField, grid: Optional[int], zs: Optional[ZeroSet]) -> Outcome:
    outcome = Outcome()
    grid = grid or settings.NODAL_GRID
    count = count_nodal_domains(field, grid, zs=zs)
    outcome.results = {"grid": grid, "count": count}
    if count != 1:
        outcome.violations.append(f"nodal.count_nodal_domains: {count} nodal domains (expected 1)")
    return outcome


def boundary_section(
    field: BeltramiField, traces: int, seed: int, threads: int, horizon: Optional[float]
) -> Outcome:
    outcome = Outcome()
    report, potential = boundary_analyzer.run_boundary_suite(field, traces, seed, threads, horizon)
    scale, radius = field.scale, report.radius
    outcome.results = report.model_dump()
    checks = [
        ("boundary.restrict_to_boundary tangency", report.tangency_max, 1e-10 * scale),
        ("boundary.closedness_residual", report.closedness_residual, 1e-8),
        ("boundary.recover_potential path defect", report.path_defect, 1e-8 * scale * radius),
        ("boundary.potential_gradient_defect", report.gradient_defect, 1e-5 * scale),
    ]
    for name, value, limit in checks:
        if value >= limit:
            outcome.violations.append(f"{name}: {value:.3e} >= {limit:.1e}")
    if isinstance(field, SpheromakField):
        limit = 1e-6 * scale * radius
        if report.potential_fit_error >= limit:
            outcome.violations.append(f"boundary.recover_potential cosine fit: {report.potential_fit_error:.3e} >= {limit:.1e}")
    if not report.bound_satisfied:
        outcome.violations.append(
            f"boundary.boundary_zero_census: #K = {report.count} < 2N = {2 * report.boundary_components}"
        )
    unresolved = sum(1 for t in report.traces if t.forward_limit is None or t.backward_limit is None)
    not_monotone = sum(1 for t in report.traces if not t.f_monotone)
    if unresolved:
        outcome.violations.append(f"boundary.trace_boundary_line: {unresolved} trace(s) with unresolved limits")
    if not_monotone:
        outcome.violations.append(f"boundary.trace_boundary_line: potential not increasing along {not_monotone} trace(s)")
    outcome.tables["potential"] = potential.frame()
    return outcome


def recurrence_section(field: BeltramiField, config: RunConfig, threads: int) -> Outcome:
    outcome = Outcome()
    n = config.samples or settings.RECURRENCE_SAMPLES
    T = config.horizon or settings.RECURRENCE_HORIZON
    eps = config.eps or settings.RECURRENCE_EPS
    report = recurrence_experiment(field, n, T, eps, config.seed, threads, config.tol)
    longer = recurrence_experiment(field, n, 2.0 * T, eps, config.seed, threads, config.tol)
    outcome.results = {
        "report": report,
        "double_horizon_fraction_forward": longer.recurrent_fraction_forward,
        "double_horizon_fraction_backward": longer.recurrent_fraction_backward,
    }
    minimum = settings.RECURRENCE_MIN_FRACTION
    for label in ("forward", "backward"):
        fraction = getattr(report, f"recurrent_fraction_{label}")
        doubled = getattr(longer, f"recurrent_fraction_{label}")
        if fraction < minimum:
            outcome.violations.append(f"flow.recurrence_experiment: {label} fraction {fraction:.3f} < {minimum:g}")
        if doubled < fraction - 0.02:
            outcome.violations.append(
                f"flow.recurrence_experiment: {label} fraction drops from {fraction:.3f} to {doubled:.3f} "
                f"when the horizon doubles"
            )
    outcome.tables["points"] = pd.DataFrame(
        [
            {
                "index": p.index,
                "forward_distance": p.forward_distance,
                "backward_distance": p.backward_distance,
                "recurrent_forward": p.recurrent_forward,
                "recurrent_backward": p.recurrent_backward,
            }
            for p in report.points
        ]
    )
    return outcome


# Command handlers

def cmd_catalog(config: RunConfig, field: Optional[BeltramiField], threads: int) -> Outcome:
    if field is None:
        return Outcome(results={"formats": CATALOG_FORMATS})
    outcome = certification(field, config.samples or 1000, config.seed)
    outcome.results["tangent_to_boundary"] = field.tangent_to_boundary
    return outcome


def cmd_trace(config: RunConfig, field: BeltramiField, threads: int) -> Outcome:
    start = config.start or tuple(_interior_samples(field, 1, config.seed, "trace_start")[0])
    t_end = config.t_end if config.t_end is not None else 100.0
    trajectory = flow_integrator.integrate(field, start, t_end, tol=config.tol)
    outcome = Outcome(
        results={
            "start": list(start),
            "t_end": t_end,
            "classification": trajectory.classification,
            "stats": trajectory.stats,
            "end": trajectory.final,
            "samples": len(trajectory.times),
        },
        tables={"trajectory": trajectory_frame(trajectory)},
    )
    if isinstance(field.domain, BallDomain) and field.tangent_to_boundary:
        reach = float(np.max(np.linalg.norm(trajectory.points, axis=1)))
        outcome.results["max_radius"] = reach
        if reach > field.domain.radius * (1.0 + 1e-9):
            outcome.violations.append(f"flow.integrate: trajectory reached |p| = {reach:.12g} > R")
    return outcome


def cmd_zeros(config: RunConfig, field: BeltramiField, threads: int) -> Outcome:
    zs = zero_finder.find_zeros(field, config.grid, config.tol, threads)
    return zero_section(field, zs)


def cmd_dimension(config: RunConfig, field: BeltramiField, threads: int) -> Outcome:
    zs = zero_finder.find_zeros(field, config.grid, config.tol, threads, characterize=False)
    return dimension_section(field, zs)


def cmd_nodal(config: RunConfig, field: BeltramiField, threads: int) -> Outcome:
    zs = zero_finder.find_zeros(field, None, config.tol, threads, characterize=False)
    return nodal_section(field, config.grid, zs)


def cmd_boundary(config: RunConfig, field: BeltramiField, threads: int) -> Outcome:
    traces = config.traces if config.traces is not None else 20
    return boundary_section(field, traces, config.seed, threads, config.horizon)


def cmd_recurrence(config: RunConfig, field: BeltramiField, threads: int) -> Outcome:
    return recurrence_section(field, config, threads)


def cmd_verify(config: RunConfig, field: BeltramiField, threads: int) -> Outcome:
    """Every acceptance check relevant to the field"""
    outcome = Outcome()
    outcome.merge("certification", certification(field, config.samples or 1000, config.seed))
    outcome.merge("flow", flow_quality(field, config.seed, config.tol))

    zs = zero_finder.find_zeros(field, config.grid, None, threads)
    outcome.merge("zeros", zero_section(field, zs))
    outcome.merge("dimension", dimension_section(field, zs))
    outcome.merge("nodal", nodal_section(field, None, zs))
    if not isinstance(field.domain, BallDomain):
        outcome.merge("nodal_fine", nodal_section(field, 96, zs))

    if isinstance(field.domain, BallDomain):
        if field.tangent_to_boundary:
            traces = config.traces if config.traces is not None else 20
            outcome.merge("boundary", boundary_section(field, traces, config.seed, threads, config.horizon))
        else:
            outcome.results["boundary"] = {"note": "field is not tangent to the boundary"}
    if getattr(field, "is_degenerate", False):
        outcome.merge("recurrence", recurrence_section(field, config, threads))
    return outcome


HANDLERS: Dict[str, Callable[[RunConfig, Optional[BeltramiField], int], Outcome]] = {
    "catalog": cmd_catalog,
    "trace": cmd_trace,
    "zeros": cmd_zeros,
    "dimension": cmd_dimension,
    "nodal": cmd_nodal,
    "boundary": cmd_boundary,
    "recurrence": cmd_recurrence,
    "verify": cmd_verify,
}
