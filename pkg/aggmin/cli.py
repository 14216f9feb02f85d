"""Command-line front end: ``aggmin simulate|cantor|flic|analyze``.

Every command writes its artifacts into ``--out`` and finishes with
``manifest.json`` listing them. Exit codes: 0 success, 2 usage or
configuration, 3 numerical failure, 4 verification failure.
"""

import argparse
import json
import logging
import math
import sys
import time
from typing import Any, Dict, List, Optional

import numpy as np
from dotenv import find_dotenv, load_dotenv
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import __version__
from .cantor import (
    default_probes,
    gate,
    holder_exponent,
    margin_profile,
    moment_checks,
    potential_profile,
    predicted_dimension,
    self_similarity_check,
    verify_margin,
    verify_steady,
)
from .config import Settings
from .energy import el_residual
from .errors import AggminException, ParameterError, WitnessNotFoundError
from .flow import SimConfig, energy_monitor, load_config, simulate
from .fourier import WITNESS_CELLS, build_witness, scan_windows
from .fractal import (
    asymmetry,
    box_dimension,
    hierarchy_layers,
    histogram_density,
    isolated_points,
    superlevel_interior,
    support_measure,
)
from .measure import ParticleEnsemble, cantor_iterate
from .potential import PotentialSpec, dump_spec, load_spec
from .report import DiagnosticsReport, RunManifest
from .utils import OutputDir, profile_svg, scatter_svg, series_svg

logger = logging.getLogger(__name__)

ENERGY_UPTICK_TOL = 1e-6
PROFILE_SAMPLES = 2801


class AnalysisConfig(BaseModel):
    """Thresholds for ``aggmin analyze``; every one of them ends up in the report."""

    model_config = ConfigDict(extra="forbid")

    spec: Optional[PotentialSpec] = None
    gap_factor: float = 8.0
    bins: int = 6
    modes: int = 4
    base_scale: Optional[float] = None
    ratio_hint: float = 0.15
    eps0: Optional[float] = None
    deltas: List[float] = Field(default_factory=lambda: [0.1, 0.05])
    scales: Optional[List[float]] = None


class _Result(object):
    def __init__(
        self, config: Dict[str, Any], inputs=None, seed: Optional[int] = None, code: int = 0
    ):
        self.config = config
        self.inputs = list(inputs or [])
        self.seed = seed
        self.code = code


def _read_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as e:
        raise ParameterError("cannot read {}: {}".format(path, e))
    except json.JSONDecodeError as e:
        raise ParameterError("{} is not valid JSON: {}".format(path, e))


def _verdict(report: DiagnosticsReport) -> int:
    failed = report.failed
    if failed:
        logger.error({"failed": [r.op for r in failed]})
        return 4
    return 0


# simulate


def cmd_simulate(args, settings: Settings, out: OutputDir, tolerance: float) -> _Result:
    config = load_config(args.config) if args.config else SimConfig()
    overrides = {"seed": args.seed, "N": args.N, "T": args.T, "dt": args.dt}
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if overrides:
        config = SimConfig.model_validate({**config.model_dump(by_alias=True), **overrides})
    traj = simulate(config)

    traj.to_csv(out.path("trajectory.csv"))
    traj.energy_to_csv(out.path("energy.csv"))
    traj.final.to_csv(out.path("final.csv"))
    title = "t = {:g}".format(traj.times[-1])
    scatter_svg(out.path("final.svg"), traj.final.positions, title=title)
    series_svg(out.path("energy.svg"), traj.times, traj.energies, ylabel="energy")

    monitor = energy_monitor(traj)
    report = DiagnosticsReport()
    report.add(
        "energy_monitor",
        params={"snapshots": monitor.snapshots, "tolerance": ENERGY_UPTICK_TOL},
        residuals={"max_uptick": monitor.max_uptick, "final_energy": traj.energies[-1]},
        passed=monitor.max_uptick <= ENERGY_UPTICK_TOL,
    )
    out.write_json("report.json", report)
    inputs = [args.config] if args.config else []
    return _Result(config.model_dump(by_alias=True), inputs, config.seed, _verdict(report))


# cantor


def cmd_cantor(args, settings: Settings, out: OutputDir, tolerance: float) -> _Result:
    M, alpha, k = args.M, args.alpha, args.k
    steady = verify_steady(M, alpha, k, tolerance)
    if args.probes:
        probes = np.loadtxt(args.probes, delimiter=",", ndmin=1).reshape(-1)
    else:
        probes = default_probes(M, level=min(k, 2))
    margin = verify_margin(M, alpha, k, probes, tolerance)

    params = {"M": M, "alpha": alpha, "k": k}
    report = DiagnosticsReport()
    report.add("verify_steady", params, steady.model_dump(), steady.passed)
    report.add("verify_margin", params, margin.model_dump(), margin.passed)
    report.add(
        "gate",
        {"M": M, "alpha": alpha},
        {
            "gate": gate(M, alpha),
            "holder_exponent": holder_exponent(M),
            "predicted_dimension": predicted_dimension(M),
        },
    )
    if k >= 1:
        residual = self_similarity_check(M, alpha, k)
        report.add("self_similarity_check", params, {"max_abs": residual}, residual <= tolerance)
        moments = moment_checks(M, k)
        report.add("moment_checks", {"M": M, "k": k}, moments, max(moments.values()) <= tolerance)
    if args.levels:
        profile = margin_profile(M, alpha, probes, args.levels)
        report.add(
            "margin_profile",
            {**params, "levels": args.levels},
            profile.model_dump(),
            profile.uniform,
        )
    out.write_json("cantor.json", report)

    x = np.linspace(-0.2, 1.2, PROFILE_SAMPLES)
    values = potential_profile(M, alpha, k, x)
    out.write_csv("profile.csv", "x,V", [x, values])
    profile_svg(
        out.path("profile.svg"),
        x,
        values,
        cantor_iterate(M, k).intervals,
        title="M = {:g}, alpha = {:g}, k = {}".format(M, alpha, k),
    )
    config = {**params, "levels": args.levels, "tolerance": tolerance}
    inputs = [args.probes] if args.probes else []
    return _Result(config, inputs, code=_verdict(report))


# flic


def _witness_task(spec, delta, windows):
    try:
        return build_witness(spec, delta, windows)
    except WitnessNotFoundError as e:
        return e


def cmd_flic(args, settings: Settings, out: OutputDir, tolerance: float) -> _Result:
    spec = load_spec(_read_json(args.spec))
    deltas = sorted(set(args.delta), reverse=True)
    if any(not delta > 0 for delta in deltas):
        raise ParameterError("delta must be > 0, got {}".format(deltas))
    xi_max = args.xi_max or WITNESS_CELLS * math.pi / min(deltas)
    scan = scan_windows(spec, xi_max, samples=args.samples)
    out.write_json("windows.json", scan)

    report = DiagnosticsReport()
    if scan.windows:
        workers = settings.worker_count(len(deltas))
        logger.info("building %d witnesses on %d worker(s)", len(deltas), workers)
        results = Parallel(n_jobs=workers)(
            delayed(_witness_task)(spec, d, scan.windows) for d in deltas
        )
        for delta, result in zip(deltas, results):
            name = "witness_delta{:g}".format(delta)
            if isinstance(result, WitnessNotFoundError):
                report.add(
                    "build_witness",
                    {"delta": delta},
                    {"tried": [t.model_dump() for t in result.tried]},
                    False,
                )
                continue
            out.write_json(name + ".json", result)
            result.grid.save(out.path(name + ".npz"))
            report.add(
                "build_witness",
                {"delta": delta},
                {
                    "energy": result.energy,
                    "mean_defect": result.mean_defect,
                    "diameter": result.diameter,
                    "window_center": result.xi_center,
                },
                result.accepted,
            )
    else:
        logger.info("%s has no negative windows below %g", spec.family, xi_max)
    out.write_json("report.json", report)
    config = {"spec": dump_spec(spec), "deltas": deltas, "xi_max": xi_max, "samples": args.samples}
    return _Result(config, [args.spec], code=_verdict(report))


# analyze


def _default_eps0(ensemble: ParticleEnsemble, delta: float) -> float:
    density = histogram_density(ensemble.positions, ensemble.weights, delta / 4, pad=delta)
    return 0.5 * float(density.max())


def cmd_analyze(args, settings: Settings, out: OutputDir, tolerance: float) -> _Result:
    if args.config:
        config = AnalysisConfig.model_validate(_read_json(args.config))
    else:
        config = AnalysisConfig()
    try:
        ensemble = ParticleEnsemble.from_csv(args.snapshot)
    except OSError as e:
        raise ParameterError("cannot read snapshot {}: {}".format(args.snapshot, e))
    report = DiagnosticsReport()
    d = ensemble.dimension

    dim = box_dimension(ensemble, config.scales)
    dim.to_csv(out.path("boxes.csv"))
    report.add(
        "box_dimension",
        {"window": list(dim.window)},
        {"slope": dim.slope, "r2": dim.r2, "decades": dim.decades},
    )
    if ensemble.n >= 4:
        layers = hierarchy_layers(ensemble, config.base_scale, config.ratio_hint)
        report.add(
            "hierarchy_layers",
            {"base_scale": layers.base_scale, "ratio_hint": config.ratio_hint},
            {
                "counts": layers.counts,
                "scales": [layer.scale for layer in layers.layers],
                "ratios": layers.ratios,
            },
        )
    if ensemble.n >= 2:
        isolated = isolated_points(ensemble, config.gap_factor)
        report.add("isolated_points", {"gap_factor": config.gap_factor}, {"indices": isolated})
    for delta in config.deltas:
        eps0 = config.eps0 if config.eps0 is not None else _default_eps0(ensemble, delta)
        level = superlevel_interior(ensemble, eps0, delta)
        report.add(
            "superlevel_interior",
            {"eps0": eps0, "delta": delta, "h": level.h},
            {"occupied": level.occupied, "peak_density": level.peak_density},
        )
    if d == 2:
        spectrum = asymmetry(ensemble, config.bins, config.modes)
        spectrum.to_csv(out.path("spectrum.csv"))
        report.add(
            "asymmetry",
            {"bins": config.bins, "modes": config.modes},
            {"index": spectrum.index, "bound": 5 / math.sqrt(ensemble.n)},
        )
    if d == 1:
        report.add(
            "support_measure",
            {"gap_factor": config.gap_factor},
            {"measure": support_measure(ensemble, config.gap_factor)},
        )
    if config.spec is not None:
        residual = el_residual(config.spec, ensemble)
        report.add("el_residual", {"family": config.spec.family}, residual.model_dump())
    out.write_json("report.json", report)
    scatter_svg(out.path("scatter.svg"), ensemble.positions, title=args.snapshot)
    return _Result(config.model_dump(by_alias=True), [args.snapshot], seed=args.seed)


# parser


COMMANDS = {
    "simulate": cmd_simulate,
    "cantor": cmd_cantor,
    "flic": cmd_flic,
    "analyze": cmd_analyze,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="JSON run configuration")
    common.add_argument("--seed", type=int, default=None, help="random seed (overrides the config)")
    common.add_argument("--out", default=None, help="output directory (default $AGGMIN_OUT)")
    common.add_argument("--tolerance", type=float, default=None, help="verification tolerance")
    common.add_argument(
        "--threads", type=int, default=None, help="worker count (overrides $AGGMIN_THREADS)"
    )
    common.add_argument("--verbose", action="store_true", help="log at DEBUG level")

    parser = argparse.ArgumentParser(
        prog="aggmin", description="interaction energy minimization toolkit"
    )
    parser.add_argument("--version", action="version", version="%(prog)s " + __version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[common], help="run the particle gradient flow")
    sim.add_argument("--N", type=int, default=None, help="particle count")
    sim.add_argument("--T", type=float, default=None, help="final time")
    sim.add_argument("--dt", type=float, default=None, help="time step")

    cantor = sub.add_parser("cantor", parents=[common], help="verify the Cantor steady state")
    cantor.add_argument("M", type=float)
    cantor.add_argument("alpha", type=float)
    cantor.add_argument("k", type=int)
    cantor.add_argument("--probes", default=None, help="file of probe positions")
    cantor.add_argument(
        "--levels", type=int, nargs="+", default=None, help="levels for the margin profile"
    )

    flic = sub.add_parser(
        "flic", parents=[common], help="scan negative windows and build witnesses"
    )
    flic.add_argument("spec", help="potential spec JSON")
    flic.add_argument("--delta", type=float, nargs="+", default=[1.0, 0.25])
    flic.add_argument("--xi-max", type=float, default=None)
    flic.add_argument("--samples", type=int, default=100_000)

    analyze = sub.add_parser(
        "analyze", parents=[common], help="structure diagnostics of a snapshot"
    )
    analyze.add_argument("snapshot", help="particle CSV (x,y[,z],w with optional t column)")
    return parser


def main(argv=None) -> int:
    load_dotenv(find_dotenv(usecwd=True))
    args = build_parser().parse_args(argv)
    try:
        settings = Settings.from_env()
    except AggminException as e:
        print(str(e), file=sys.stderr)
        return e.code
    if args.threads is not None:
        if args.threads < 1:
            print("--threads must be >= 1", file=sys.stderr)
            return 2
        settings = settings.model_copy(update={"threads": args.threads})
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else settings.log_level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    tolerance = args.tolerance if args.tolerance is not None else settings.tolerance

    start = time.perf_counter()
    try:
        out = OutputDir(args.out or settings.out_dir)
        result = COMMANDS[args.command](args, settings, out, tolerance)
    except AggminException as e:
        logger.error("%s failed: %s", args.command, e)
        print(str(e), file=sys.stderr)
        return e.code
    except (ValidationError, OSError) as e:
        logger.error("%s failed: %s", args.command, e)
        print("2:{}".format(e), file=sys.stderr)
        return 2

    manifest = RunManifest(
        command=args.command,
        config=result.config,
        inputs=result.inputs,
        outputs=list(out.outputs),
        version=__version__,
        seed=result.seed if result.seed is not None else args.seed,
        duration=time.perf_counter() - start,
        exit_code=result.code,
    )
    out.write_json("manifest.json", manifest)
    logger.info("%s finished with exit code %d", args.command, result.code)
    return result.code


if __name__ == "__main__":
    sys.exit(main())
