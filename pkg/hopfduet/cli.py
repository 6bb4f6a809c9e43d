"""Command-line surface: `hopfduet nf curves|sim|classify` and `hopfduet wc extract|sim|sweep|branch|forced-sweep`.

Every command computes all of its results first, then writes the files in
one pass, named `<group>-<command>_<config hash>[_<suffix>].<ext>`.
"""

import argparse
import logging
import math
import os
import sys
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from hopfduet import __version__
from hopfduet.config import RunConfig, SweepBlock, config_hash, ic_list, load_config, resolve_output_dir
from hopfduet.dynamics import (
    Axis,
    Event,
    ModelSpec,
    default_ics,
    find_periodic_orbit,
    follow_branch,
    integrate,
    measure_phase_difference,
    origin_hopf_events,
    sweep,
)
from hopfduet.errors import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_UNEXPECTED,
    ConfigError,
    DomainError,
    HopfDuetError,
    NoOscillationError,
    error,
    exit_code_for,
)
from hopfduet.nf_analysis import (
    BRANCHES,
    bistable,
    hopf_criticality,
    hopf_curve_point,
    region_boundaries,
    summary,
    tr_det_disc,
)
from hopfduet.nf_core import UnfoldingParams
from hopfduet.nf_extract import compare_with_reference, extract_coefficients, orbit_guess
from hopfduet.output import (
    OutputWriter,
    branch_figure,
    curves_figure,
    event_rows,
    regions_figure,
    trajectory_figure,
)
from hopfduet.presets import reference_coefficients, reference_for_bsp

logger = logging.getLogger(__name__)

EXIT_INTERRUPTED = 130
LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"

NF_COLUMNS = {"cartesian": ("t", "x1", "y1", "x2", "y2"), "reduced": ("t", "s", "d", "dphi")}
WC_COLUMNS = ("t", "E1", "I1", "E2", "I2")

DEFAULT_WC_SWEEP = SweepBlock(Axis("lambda_slope", 2.9, 3.4, 26), Axis("eps", 0.0, 0.8, 21))
DEFAULT_FORCED_SWEEP = SweepBlock(Axis("A", 0.0, 2.0, 41))

Command = Callable[[RunConfig, OutputWriter, int], Optional[List[str]]]


def configure_logging(verbose: bool):
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING, format=LOG_FORMAT, stream=sys.stderr)


def _phase_verdict(dphi: Optional[float], tol: float = 0.1) -> str:
    if dphi is None:
        return "FP"
    if abs(math.remainder(dphi, 2 * math.pi)) <= tol:
        return "IP"
    if abs(math.remainder(dphi - math.pi, 2 * math.pi)) <= tol:
        return "AP"
    return "OTHER"


def _initial_states(config: RunConfig, system) -> List[Tuple[str, np.ndarray]]:
    ics = ic_list(config.sim)
    if ics is None:
        return default_ics(system)
    out = []
    for k, (label, state) in enumerate(ics):
        if len(state) != system.dimension:
            raise ConfigError(f"sim.ics[{k}].state: expected {system.dimension} values, got {len(state)}")
        out.append((label, np.asarray(state, dtype=float)))
    return out


def _run_trajectory(system, state, config: RunConfig):
    sim = config.sim
    cfg = config.integrator
    if sim.transient > 0:
        state = integrate(system, state, (0.0, sim.transient), cfg).final
    t_eval = np.linspace(sim.transient, sim.transient + sim.t_end, sim.samples)
    return integrate(system, state, (sim.transient, float(t_eval[-1])), cfg, t_eval=t_eval)


def _trajectory_rows(traj) -> List[Tuple[float, ...]]:
    return [(float(t),) + tuple(float(v) for v in y) for t, y in zip(traj.t, traj.y)]


# ---------------------------------------------------------------------------
# nf commands
# ---------------------------------------------------------------------------


def cmd_nf_curves(config: RunConfig, writer: OutputWriter, jobs: int) -> None:
    """Boundary curves plus the region-label file with the bistability predicate."""
    nf = config.require_nf()
    c = nf.coefficients
    curves = config.curves
    exact = curves.method == "exact"
    points = region_boundaries(curves.eps_values, "both", c, curves.method)
    cells = [
        (float(lam), float(eps))
        for eps in curves.eps_values
        for lam in curves.lam_values
        if bistable(UnfoldingParams(float(lam), float(eps)), c, exact=exact)
    ]
    region = {"nonempty": bool(cells), "cells": [list(cell) for cell in cells]}
    if cells:
        lams, epss = zip(*cells)
        region["lam_range"] = [min(lams), max(lams)]
        region["eps_range"] = [min(epss), max(epss)]
    writer.add_csv("", ("branch", "curve", "eps", "lambda"), [(p.branch, p.curve, p.eps, p.lam) for p in points])
    writer.add_json(
        "regions",
        {
            "source": nf.source,
            "method": curves.method,
            "classification": summary(c),
            "bistable": region,
            "grid": {"lam": list(curves.lam_values), "eps": list(curves.eps_values)},
        },
    )
    writer.add_svg("", lambda: curves_figure(points, title=nf.source))


def cmd_nf_classify(config: RunConfig, writer: OutputWriter, jobs: int) -> List[str]:
    """Case classification, C_det, eps_BT and the bistability predicate at (lam, eps)."""
    nf = config.require_nf()
    c = nf.coefficients
    p = UnfoldingParams(nf.lam, nf.eps)
    info = dict(summary(c))
    info["lam"] = p.lam
    info["eps"] = p.eps
    info["bistable"] = bistable(p, c)
    info["bistable_exact"] = bistable(p, c, exact=True)
    branches = {}
    for branch in BRANCHES:
        entry = {
            "hopf_lambda": hopf_curve_point(p.eps, branch, c).lam,
            "hopf_criticality": hopf_criticality(p.eps, branch, c),
        }
        try:
            report = tr_det_disc(p, branch, c)
        except DomainError as exc:
            entry["status"] = str(exc)
        else:
            entry.update(
                status="admissible",
                s_osc=report.s_osc,
                tr=report.tr,
                det=report.det,
                disc=report.disc,
                node_type=report.node_type,
                stable=report.stable,
                tr2=report.tr2,
                det2=report.det2,
                xi2=report.xi2,
            )
        branches[branch] = entry
    writer.add_json("", {"source": nf.source, "summary": info, "branches": branches})
    writer.add_csv("", ("name", "value"), sorted(info.items()))
    return [f"{key}: {value}" for key, value in sorted(info.items())]


def cmd_nf_sim(config: RunConfig, writer: OutputWriter, jobs: int) -> None:
    """One trajectory file per initial condition, Cartesian or reduced chart."""
    nf = config.require_nf()
    chart = config.sim.chart
    p = UnfoldingParams(nf.lam, nf.eps)
    system = ModelSpec(f"nf-{chart}", p, nf.coefficients).system()
    finals = []
    for label, state in _initial_states(config, system):
        traj = _run_trajectory(system, state, config)
        writer.add_csv(label, NF_COLUMNS[chart], _trajectory_rows(traj))
        y = traj.final
        if chart == "cartesian":
            finals.append((label, math.hypot(y[0], y[1]), math.hypot(y[2], y[3])))
        else:
            finals.append((label, 0.5 * (y[0] + y[1]), 0.5 * (y[0] - y[1])))
    payload = {"chart": chart, "lam": p.lam, "eps": p.eps, "final_amplitudes": [list(f) for f in finals]}
    if p.eps == 0 and p.lam > 0:
        payload["torus_radius"] = math.sqrt(-p.lam / nf.coefficients.alpha01.real)
    writer.add_json("summary", payload)


# ---------------------------------------------------------------------------
# wc commands
# ---------------------------------------------------------------------------


def _reference_for(config: RunConfig):
    name = config.extract.reference
    if name is not None:
        return reference_coefficients(name)
    try:
        return reference_for_bsp(config.require_wc().params.b_sp)
    except ConfigError:
        return None


def cmd_wc_extract(config: RunConfig, writer: OutputWriter, jobs: int) -> List[str]:
    """Coefficients JSON, coefficient/diagnostic table and classification summary."""
    p = config.require_wc().params
    ex = config.extract
    report = extract_coefficients(p, ex.eps_probe, ex.scheme, ex.normalization, ex.scale, ex.divisor_floor)
    c = report.coefficients
    info = dict(summary(c))
    reference = _reference_for(config)
    comparison = None
    if reference is not None:
        cmp = compare_with_reference(c, reference)
        comparison = {
            "factor": cmp.factor,
            "row_ratios": cmp.row_ratios,
            "cdet_delta": cmp.cdet_delta,
            "eps_bautin_delta": cmp.eps_bautin_delta,
            "beta_eps0_delta": cmp.beta_eps0_delta,
            "same_case": cmp.same_case,
        }
    writer.add_json("", c.to_dict())
    writer.add_csv("", ("name", "value"), report.table())
    writer.add_json(
        "summary",
        {
            "b_sp": p.b_sp,
            "classification": info,
            "comparison": comparison,
            "normalization": report.normalization,
            "scheme": report.scheme,
            "eigenvector": report.eigenvector,
            "warnings": list(report.warnings),
        },
    )
    lines = [f"{key}: {value}" for key, value in sorted(info.items())]
    lines.extend(f"warning: {w}" for w in report.warnings)
    return lines


def cmd_wc_sim(config: RunConfig, writer: OutputWriter, jobs: int) -> None:
    """Trajectory per initial condition plus the measured phase difference of each."""
    p = config.require_wc().params
    model = ModelSpec("wc-forced", p, forcing=config.forcing.forcing) if config.forcing else ModelSpec("wc", p)
    system = model.system()
    measured = []
    for label, state in _initial_states(config, system):
        traj = _run_trajectory(system, state, config)
        try:
            dphi: Optional[float] = measure_phase_difference(traj)
        except NoOscillationError:
            dphi = None
        measured.append((label, dphi, _phase_verdict(dphi)))
        writer.add_csv(label, WC_COLUMNS, _trajectory_rows(traj))
        writer.add_svg(label, lambda traj=traj, label=label: trajectory_figure(traj.t, traj.y[:, [0, 2]], ("E1", "E2"), label))
    writer.add_csv("phases", ("ic", "dphi", "verdict"), measured)


def cmd_wc_sweep(config: RunConfig, writer: OutputWriter, jobs: int) -> None:
    """Two-parameter classification map of the coupled pair."""
    p = config.require_wc().params
    block = config.sweep or DEFAULT_WC_SWEEP
    diagram = sweep(ModelSpec("wc", p), block.p1, block.p2, block.classify, None, jobs, block.bisect_tol)
    _write_diagram(writer, diagram)


def _write_diagram(writer: OutputWriter, diagram, extra_events: Sequence[Event] = ()):
    events = list(diagram.events) + list(extra_events)
    writer.add_csv("", ("p1", "p2", "classes", "events"), diagram.rows())
    writer.add_csv("events", ("type", "p1", "p2", "branch"), event_rows(events))
    counts: Dict[str, int] = {}
    for index in diagram.cells:
        key = diagram.key(index)
        counts[key] = counts.get(key, 0) + 1
    writer.add_json(
        "regions",
        {
            "axes": [{"name": a.name, "start": a.start, "stop": a.stop, "n": a.n} for a in diagram.axes],
            "label_counts": counts,
            "regimes": diagram.regimes() if len(diagram.axes) == 1 else None,
            "events": [_event_payload(e) for e in sorted(events, key=lambda e: (e.p1, e.type))],
        },
    )
    writer.add_svg("", lambda: regions_figure(diagram))


def _event_payload(event: Event) -> Dict[str, object]:
    return {
        "type": event.type,
        "p1": event.p1,
        "p2": event.p2,
        "branch": event.branch,
        "bracket": list(event.bracket),
        "multipliers_before": list(event.multipliers_before),
        "multipliers_after": list(event.multipliers_after),
        "criticality": event.criticality,
    }


def cmd_wc_branch(config: RunConfig, writer: OutputWriter, jobs: int) -> None:
    """Follow the in-phase or anti-phase orbit family and report HB/TR/PF/FOLD events."""
    p = config.require_wc().params
    block = config.branch
    model = ModelSpec("wc", p).with_values(**{block.param: block.start})
    ex = config.extract
    report = extract_coefficients(model.params, ex.eps_probe, ex.scheme, ex.normalization, ex.scale, ex.divisor_floor)
    state, period = orbit_guess(model.params, block.family, report)
    orbit0 = find_periodic_orbit(model.system(), state, period, config.integrator)
    branch = follow_branch(model, orbit0, block.param, block.stop, block.policy, config.integrator)

    family_label = "IP" if block.family == "plus" else "AP"
    lo, hi = sorted((block.start - block.hb_window, block.stop))
    births = [e for e in origin_hopf_events(model, block.param, lo, hi) if e.branch == family_label]
    events = births + list(branch.events)
    other = "eps" if block.param != "eps" else "lambda_slope"
    p2 = model.value(other)

    rows = []
    for point in branch.points:
        orbit = point.orbit
        rest = orbit.nontrivial
        rows.append(
            (
                point.value,
                orbit.period,
                orbit.amplitude,
                orbit.stable,
                orbit.unstable_count,
                float(np.abs(rest).max()) if rest.size else math.nan,
                orbit.symmetry,
                orbit.dphi,
            )
        )
    writer.add_csv(
        "",
        (block.param, "period", "amplitude", "stable", "unstable", "max_multiplier", "symmetry", "dphi"),
        rows,
    )
    writer.add_csv("events", ("type", "p1", "p2", "branch"), event_rows(events, default_p2=p2))
    writer.add_json(
        "summary",
        {
            "family": block.family,
            "param": block.param,
            "fixed": {other: p2},
            "stop_reason": branch.stop_reason,
            "points": len(branch.points),
            "events": [_event_payload(e) for e in events],
        },
    )
    writer.add_svg("", lambda: branch_figure([branch], events, block.param))


def _follow_ip(model: ModelSpec, diagram, block: SweepBlock, config: RunConfig) -> List[Event]:
    """Continue the in-phase entrained orbit across the sweep range; its ends give PF/FOLD events."""
    axis = block.p1
    ip_cells = [index for index in sorted(diagram.cells) if "IP" in diagram.cells[index]]
    if not ip_cells:
        return []
    value = float(axis.values[ip_cells[0][0]])
    start_model = model.with_values(**{axis.name: value})
    system = start_model.system()
    cfg = config.integrator
    events: List[Event] = []
    try:
        seed = dict(default_ics(system))["symmetric"]
        # settle on a whole number of forcing periods so the clock restarts in phase
        base = system.forcing_period
        settle = math.ceil(block.classify.transient_periods * system.period_hint / base) * base
        state = integrate(system, seed, (0.0, settle), block.classify.integrator).final
        orbit = find_periodic_orbit(system, state, system.forcing_period, cfg)
        for stop in (axis.start, axis.stop):
            events.extend(follow_branch(start_model, orbit, axis.name, stop, config.branch.policy, cfg).events)
    except HopfDuetError as exc:
        logger.warning("in-phase branch following failed: %s", exc)
        return []
    return [Event(e.type, e.p1, None, "IP", e.bracket, e.multipliers_before, e.multipliers_after, e.criticality) for e in events]


def cmd_wc_forced_sweep(config: RunConfig, writer: OutputWriter, jobs: int) -> None:
    """One-parameter scan of the forced pair: ordered regimes plus events."""
    p = config.require_wc().params
    forcing = config.require_forcing().forcing
    block = config.sweep or DEFAULT_FORCED_SWEEP
    if block.p2 is not None:
        raise ConfigError("sweep.p2: forced-sweep is a one-parameter scan")
    model = ModelSpec("wc-forced", p, forcing=forcing)
    diagram = sweep(model, block.p1, None, block.classify, None, jobs, block.bisect_tol)
    extra = _follow_ip(model, diagram, block, config) if block.follow_ip else []
    _write_diagram(writer, diagram, extra)


COMMANDS: Dict[Tuple[str, str], Command] = {
    ("nf", "curves"): cmd_nf_curves,
    ("nf", "sim"): cmd_nf_sim,
    ("nf", "classify"): cmd_nf_classify,
    ("wc", "extract"): cmd_wc_extract,
    ("wc", "sim"): cmd_wc_sim,
    ("wc", "sweep"): cmd_wc_sweep,
    ("wc", "branch"): cmd_wc_branch,
    ("wc", "forced-sweep"): cmd_wc_forced_sweep,
}

HELP = {
    ("nf", "curves"): "HB/TR0/DET0/DISC0 boundary curves and bistable region",
    ("nf", "sim"): "integrate the normal form from the IC set",
    ("nf", "classify"): "case classification, C_det, Bautin estimate, bistability",
    ("wc", "extract"): "normal-form coefficients of the coupled Wilson-Cowan pair",
    ("wc", "sim"): "integrate the Wilson-Cowan pair and measure phase differences",
    ("wc", "sweep"): "two-parameter attractor map",
    ("wc", "branch"): "follow an in-phase or anti-phase orbit family",
    ("wc", "forced-sweep"): "amplitude scan of the periodically forced pair",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--preset", help="named preset merged into the config (paperP, table2-bsp-*)")
    common.add_argument("--jobs", type=int, default=None, help="worker processes for sweeps (default: CPU count)")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(prog="hopfduet", description="Two coupled oscillators near Hopf bifurcation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    groups = parser.add_subparsers(dest="group", required=True)
    for group in ("nf", "wc"):
        sub = groups.add_parser(group, help=f"{group} commands")
        commands = sub.add_subparsers(dest="command", required=True)
        for (g, name), text in HELP.items():
            if g == group:
                commands.add_parser(name, parents=[common], help=text)
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run one command and return the exit code."""
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    name = f"{args.group} {args.command}"
    jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)
    try:
        if jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        config = load_config(args.config, args.preset)
        writer = OutputWriter(resolve_output_dir(args.out, config), config_hash(config), name, config.output.formats)
        logger.info("running %s (config %s)", name, writer.config_hash)
        lines = COMMANDS[(args.group, args.command)](config, writer, jobs) or []
        written = writer.commit()
    except KeyboardInterrupt:
        print(error("interrupted", "INTERRUPTED"), file=sys.stderr)
        return EXIT_INTERRUPTED
    except HopfDuetError as exc:
        code = exit_code_for(exc)
        print(error(str(exc), "CONFIG" if code == EXIT_CONFIG else "RUNTIME"), file=sys.stderr)
        return code
    except Exception as exc:  # pylint: disable=broad-except
        logger.debug("unexpected failure", exc_info=True)
        print(f"Unexpected error: {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED
    for line in lines:
        print(line)
    for path in written:
        print(path)
    return EXIT_OK
