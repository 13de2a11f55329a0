"""Command-line pipeline: composable subcommands over CSV/JSON files.

Exit codes: 0 success, 1 computational failure, 2 usage/configuration
error (including missing input files), 3 I/O failure. Every stage
computes its results fully before writing, and writes atomically, so a
failing run leaves no partial outputs.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import fileio
from .calibration import (
    CalibrationRun,
    assemble_model,
    check_z_insensitivity,
    default_calibration,
    fit_axis,
)
from .decouple import IcaConfig
from .errors import ConfigurationError, FbgForceError, ValidationError
from .frames import NoiseSpec
from .mechanics import DEFAULT_ALPHA_RAD, DEFAULT_K_N, ProngModel
from .pipeline import (
    PipelineConfig,
    compare_paths,
    render_report_table,
    reports_to_dict,
    run_pipeline,
)
from .preprocess import FilterConfig, filter_instability, filter_report
from .simulate import simulate_frame
from .stationarity import TestConfig, analyze_session
from .forces import build_force_series, consistency_check

TRUTH_HEADER = [
    "t_s", "fx_N", "fy_N", "fz_N",
    "fx1_N", "fy1_N", "fx2_N", "fy2_N",
    "wfx1_pm", "wfy1_pm", "wfx2_pm", "wfy2_pm",
    "nins1_pm", "nins2_pm", "nins3_pm", "nins4_pm",
]

EXIT_OK = 0
EXIT_COMPUTE = 1
EXIT_USAGE = 2
EXIT_IO = 3


def _require_file(path, what: str) -> Path:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"{what} not found: {path}")
    return path


def _parse_window(text: str | None, n: int):
    if text is None:
        return (0, n)
    try:
        a, b = text.split(":")
        window = (int(a), int(b))
    except ValueError:
        raise ValidationError(f"window must look like a:b, got {text!r}") from None
    return window


def _load_calibration(path):
    return fileio.read_calibration_json(_require_file(path, "calibration file"))


def _noise_from_config(cfg: dict, seed_override) -> NoiseSpec:
    noise = dict(cfg.get("noise", {}))
    seed = seed_override
    if seed is None:
        seed = noise.get("rng_seed", cfg.get("seed"))
    if seed is None:
        raise ValidationError("a seed is required (flag --seed or config noise.rng_seed)")
    noise["rng_seed"] = int(seed)
    return NoiseSpec(**noise)


def cmd_simulate(args) -> int:
    config = {}
    if args.config:
        config = fileio.read_json(_require_file(args.config, "simulator config"))
    traj_path = args.trajectory or config.get("trajectory")
    if traj_path is None:
        raise ValidationError("a trajectory CSV is required (--trajectory or config)")
    traj_path = _require_file(traj_path, "trajectory file")

    calibration_ref = config.get("calibration")
    if calibration_ref is None:
        calib = default_calibration()
    elif isinstance(calibration_ref, str):
        calib = _load_calibration(calibration_ref)
    else:
        calib = fileio.calibration_from_dict(calibration_ref)
    if "prong" in config:
        prong = ProngModel(**config["prong"])
        calib = dataclasses.replace(calib, k_n=prong.k_n, alpha_rad=prong.alpha_rad)

    noise = _noise_from_config(config, args.seed)
    sample_rate = float(config.get("sample_rate_hz", 100.0))
    traj, _ = fileio.read_trajectory_csv(traj_path, capacity_n=calib.capacity_n)

    sim = simulate_frame(traj, calib, noise, sample_rate_hz=sample_rate)

    out = Path(args.output)
    frame_path = out / "frame.csv"
    truth_path = out / "truth.csv"
    manifest_path = out / "manifest.json"

    fileio.write_frame_csv(sim.frame, frame_path)
    times = sim.frame.times_s
    fileio.atomic_write_text(truth_path, fileio._csv_text(TRUTH_HEADER, [
        times, traj.fx, traj.fy, traj.fz,
        sim.fx1, sim.fy1, sim.fx2, sim.fy2,
        sim.truth_wfx1_pm, sim.truth_wfy1_pm, sim.truth_wfx2_pm, sim.truth_wfy2_pm,
        sim.instability_pm[0], sim.instability_pm[1],
        sim.instability_pm[2], sim.instability_pm[3],
    ]))
    resolved = {
        "calibration": fileio.calibration_to_dict(calib),
        "noise": dataclasses.asdict(noise),
        "sample_rate_hz": sample_rate,
    }
    manifest = {
        "seed": noise.rng_seed,
        "config_sha256": hashlib.sha256(
            fileio.dumps_json(resolved).encode()
        ).hexdigest(),
        "outputs": [frame_path.name, truth_path.name],
    }
    fileio.write_json(manifest, manifest_path)
    print(f"wrote {frame_path}, {truth_path}, {manifest_path}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    fits = {}
    z_run = None
    for run_path in args.runs:
        run = fileio.read_run_csv(_require_file(run_path, "calibration run"))
        if run.loaded_axis == "z":
            z_run = run
        else:
            fits[run.loaded_axis] = fit_axis(run)
    missing = {"x1", "y1", "x2", "y2"} - set(fits)
    if missing:
        raise ValidationError(f"missing calibration runs for axes: {sorted(missing)}")
    model = assemble_model(
        fits["x1"], fits["y1"], fits["x2"], fits["y2"],
        k_n=args.k_n, alpha_rad=args.alpha_rad, capacity_n=args.capacity_n,
    )
    fileio.write_calibration_json(model, args.output)
    print(f"wrote {args.output} (diagonally dominant: {model.diagonally_dominant})")
    for axis, fit in sorted(fits.items()):
        flagged = [i + 1 for i, bad in enumerate(fit.poor_fit) if bad]
        if flagged:
            print(f"note: axis {axis}: R^2 < 0.95 on sensors {flagged}")
    if z_run is not None:
        report = check_z_insensitivity(z_run)
        print(
            f"z-run: sensor-4 dominance ratio {report.dominance_ratio:.2f} "
            f"(threshold {report.threshold}), dominant={report.sensor4_dominant}"
        )
        if args.z_report:
            fileio.write_json(dataclasses.asdict(report) | {
                "slopes_nm_per_n": list(report.slopes_nm_per_n),
            }, args.z_report)
    return EXIT_OK


def cmd_filter(args) -> int:
    frame = fileio.read_frame_csv(_require_file(args.input, "frame file"))
    filtered = filter_instability(frame, FilterConfig(epsilon_pm=args.epsilon_pm))
    fileio.write_frame_csv(filtered, args.output)
    if args.report:
        fileio.write_json(dataclasses.asdict(filter_report(frame, filtered)), args.report)
    print(f"wrote {args.output}")
    return EXIT_OK


def _loading_to_dict(loading) -> dict:
    return {
        "kind": loading.kind,
        "r_squared": loading.r_squared,
        "pair": list(loading.pair),
        "removed_bins": loading.removed_bins,
        "degenerate": loading.degenerate,
    }


def cmd_classify(args) -> int:
    from .classify import classify_frame

    frame = fileio.read_frame_csv(_require_file(args.input, "frame file"))
    first, second = classify_frame(frame, args.removed_bins, args.r2_threshold)
    verdicts = {"pair_12": _loading_to_dict(first), "pair_34": _loading_to_dict(second)}
    fileio.write_json(verdicts, args.output)
    print(f"pair 1-2: {first.kind} (R^2={first.r_squared:.4f}); "
          f"pair 3-4: {second.kind} (R^2={second.r_squared:.4f})")
    return EXIT_OK


def _loading_from_dict(d) -> "LoadingClass":
    from .classify import LoadingClass

    return LoadingClass(
        kind=d["kind"], r_squared=d["r_squared"], pair=tuple(d["pair"]),
        removed_bins=d["removed_bins"], degenerate=d["degenerate"],
    )


def cmd_decouple(args) -> int:
    from .decouple import decouple_frame

    frame = fileio.read_frame_csv(_require_file(args.input, "frame file"))
    calib = _load_calibration(args.calibration)
    verdict_data = fileio.read_json(_require_file(args.verdicts, "verdicts file"))
    verdicts = (
        _loading_from_dict(verdict_data["pair_12"]),
        _loading_from_dict(verdict_data["pair_34"]),
    )
    if args.seed is None:
        raise ValidationError("--seed is required for decoupling")
    cfg = IcaConfig(
        a2=args.a2, max_iterations=args.max_iter,
        convergence_tol=args.tol, rng_seed=args.seed,
        deflation_order=args.order,
    )
    comps = decouple_frame(frame, verdicts, calib, cfg)
    out = Path(args.output)
    for comp, name in zip(comps, ("components_pair12.csv", "components_pair34.csv")):
        fileio.write_components(comp, frame.sample_rate_hz, out / name)
        if not comp.estimate.converged:
            print(f"warning: pair {comp.pair} did not converge "
                  f"in {comp.estimate.iterations} iterations", file=sys.stderr)
    print(f"wrote components to {out}")
    return EXIT_OK


def cmd_forces(args) -> int:
    comp_dir = Path(args.components_dir)
    p12 = _require_file(comp_dir / "components_pair12.csv", "pair 1-2 components")
    p34 = _require_file(comp_dir / "components_pair34.csv", "pair 3-4 components")
    comps1 = fileio.read_components(p12)
    comps2 = fileio.read_components(p34)
    calib = _load_calibration(args.calibration)
    series = build_force_series(comps1, comps2, calib)
    fileio.write_forces_csv(series, args.sample_rate_hz, args.output)
    if args.summary:
        report = consistency_check(series.fx1, series.fx2, args.consistency_tol_n)
        fileio.write_json({"consistency": dataclasses.asdict(report)}, args.summary)
    print(f"wrote {args.output}")
    return EXIT_OK


def _test_config(args) -> TestConfig:
    return TestConfig(
        lb_lags=args.lb_lags,
        kpss_regression=args.kpss_regression,
        adf_regression=args.adf_regression,
        adf_max_lag=args.adf_max_lag,
        alpha=args.alpha,
    )


def cmd_analyze(args) -> int:
    series, _rate = fileio.read_forces_csv(_require_file(args.input, "forces file"))
    window = _parse_window(args.window, series.n_samples)
    reports = analyze_session(series, window, _test_config(args))
    payload = {
        "window": list(window),
        "config": dataclasses.asdict(_test_config(args)),
        "reports": reports_to_dict(reports),
    }
    fileio.write_json(payload, args.output)
    print(f"wrote {args.output}")
    return EXIT_OK


def cmd_report(args) -> int:
    series, _rate = fileio.read_forces_csv(_require_file(args.input, "forces file"))
    window = _parse_window(args.window, series.n_samples)
    reports = analyze_session(series, window, _test_config(args))
    sys.stdout.write(render_report_table(reports))
    if args.json:
        fileio.write_json(reports_to_dict(reports), args.json)
    return EXIT_OK


def _truth_from_csv(path) -> dict:
    rows = fileio._read_csv(path, TRUTH_HEADER)
    data = np.array(
        [[v if v is not None else np.nan for v in row] for row in rows]
    )
    names = ["fx1", "fy1", "fx2", "fy2"]
    truth = {name: data[:, 4 + i] for i, name in enumerate(names)}
    truth["fz"] = data[:, 3]
    return truth


def cmd_pipeline(args) -> int:
    frame = fileio.read_frame_csv(_require_file(args.input, "frame file"))
    calib = _load_calibration(args.calibration)
    naive_calib = None
    if args.naive_calibration:
        naive_calib = _load_calibration(args.naive_calibration)
    truth = None
    if args.truth:
        truth = _truth_from_csv(_require_file(args.truth, "truth file"))

    overrides = {}
    if args.config:
        overrides = fileio.read_json(_require_file(args.config, "pipeline config"))
    ica_over = dict(overrides.get("ica", {}))
    if args.seed is not None:
        ica_over["rng_seed"] = args.seed
    if "rng_seed" not in ica_over and args.decouple_mode != "naive":
        raise ValidationError("a seed is required when the ICA path runs "
                              "(--seed or config ica.rng_seed)")
    cfg = PipelineConfig(
        epsilon_pm=overrides.get("epsilon_pm", args.epsilon_pm),
        removed_bins=overrides.get("removed_bins", 3),
        r2_threshold=overrides.get("r2_threshold", 0.8),
        ica=IcaConfig(**ica_over) if ica_over else IcaConfig(),
        analysis=TestConfig(**overrides.get("analysis", {})),
        decouple_mode=args.decouple_mode,
        window=tuple(overrides["window"]) if "window" in overrides else None,
        consistency_tol_n=overrides.get("consistency_tol_n", 0.005),
    )
    result = run_pipeline(frame, calib, cfg, naive_calib=naive_calib, truth=truth)

    out = Path(args.output)
    rate = frame.sample_rate_hz
    fileio.write_frame_csv(result.filtered, out / "filtered.csv")
    fileio.write_json({
        "pair_12": _loading_to_dict(result.verdicts[0]),
        "pair_34": _loading_to_dict(result.verdicts[1]),
    }, out / "classify.json")
    if result.ica_components is not None:
        for comp, name in zip(
            result.ica_components, ("components_pair12.csv", "components_pair34.csv")
        ):
            fileio.write_components(comp, rate, out / name)
        fileio.write_forces_csv(result.ica_forces, rate, out / "forces_ica.csv")
        fileio.write_json({
            "reports": reports_to_dict(result.ica_reports),
            "consistency": dataclasses.asdict(result.ica_consistency),
        }, out / "report_ica.json")
    if result.naive_forces is not None:
        fileio.write_forces_csv(result.naive_forces, rate, out / "forces_naive.csv")
        fileio.write_json({
            "reports": reports_to_dict(result.naive_reports),
            "consistency": dataclasses.asdict(result.naive_consistency),
        }, out / "report_naive.json")
    if result.comparison is not None:
        fileio.write_json(result.comparison, out / "comparison.json")
    manifest = {
        "seed": cfg.ica.rng_seed if cfg.decouple_mode != "naive" else None,
        "decouple_mode": cfg.decouple_mode,
        "epsilon_pm": cfg.epsilon_pm,
    }
    fileio.write_json(manifest, out / "manifest.json")
    print(f"pipeline outputs written to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fbgforce",
        description="Three-axis forceps force reconstruction from FBG "
                    "wavelength-shift channels.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="forward-simulate a sensor frame")
    p.add_argument("--config", help="simulator config JSON")
    p.add_argument("--trajectory", help="force trajectory CSV")
    p.add_argument("--seed", type=int, help="instability RNG seed")
    p.add_argument("--output", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", help="fit a calibration model from run CSVs")
    p.add_argument("--runs", nargs="+", required=True,
                   help="calibration run CSVs (axis read from JSON sidecars)")
    p.add_argument("--k-n", type=float, default=DEFAULT_K_N)
    p.add_argument("--alpha-rad", type=float, default=DEFAULT_ALPHA_RAD)
    p.add_argument("--capacity-n", type=float, default=1.0)
    p.add_argument("--z-report", help="optional z-sensitivity report JSON")
    p.add_argument("--output", required=True, help="calibration model JSON")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("filter", help="partially remove instability jitter")
    p.add_argument("--input", required=True)
    p.add_argument("--epsilon-pm", type=float, default=2.0)
    p.add_argument("--report", help="optional filter report JSON")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("classify", help="uniaxial vs multiaxial per pair")
    p.add_argument("--input", required=True)
    p.add_argument("--removed-bins", type=int, default=3)
    p.add_argument("--r2-threshold", type=float, default=0.8)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("decouple", help="separate components per sensor pair")
    p.add_argument("--input", required=True)
    p.add_argument("--calibration", required=True)
    p.add_argument("--verdicts", required=True)
    p.add_argument("--seed", type=int, required=False)
    p.add_argument("--a2", type=float, default=1.0)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--order", choices=("parallel", "sequential"), default="parallel")
    p.add_argument("--output", required=True, help="output directory")
    p.set_defaults(func=cmd_decouple)

    p = sub.add_parser("forces", help="convert components to forces")
    p.add_argument("--components-dir", required=True)
    p.add_argument("--calibration", required=True)
    p.add_argument("--sample-rate-hz", type=float, default=100.0)
    p.add_argument("--summary", help="optional consistency summary JSON")
    p.add_argument("--consistency-tol-n", type=float, default=0.005)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_forces)

    def add_analysis_args(p):
        p.add_argument("--window", help="sample window a:b (default: all)")
        p.add_argument("--alpha", type=float, default=0.05)
        p.add_argument("--lb-lags", type=int, default=None)
        p.add_argument("--kpss-regression", choices=("level", "trend"), default="trend")
        p.add_argument("--adf-regression",
                       choices=("constant", "constant+trend"),
                       default="constant+trend")
        p.add_argument("--adf-max-lag", type=int, default=None)

    p = sub.add_parser("analyze", help="stationarity statistics for a force CSV")
    p.add_argument("--input", required=True)
    add_analysis_args(p)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report", help="print a per-column statistics table")
    p.add_argument("--input", required=True)
    add_analysis_args(p)
    p.add_argument("--json", help="also write the report as JSON")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("pipeline", help="filter/classify/decouple/forces/analyze")
    p.add_argument("--input", required=True, help="frame CSV")
    p.add_argument("--calibration", required=True)
    p.add_argument("--config", help="pipeline config JSON")
    p.add_argument("--decouple-mode", choices=("ica", "naive", "both"), default="ica")
    p.add_argument("--naive-calibration",
                   help="alternative calibration for the matrix-inversion path")
    p.add_argument("--truth", help="simulator truth CSV for residual comparison")
    p.add_argument("--seed", type=int)
    p.add_argument("--epsilon-pm", type=float, default=2.0)
    p.add_argument("--output", required=True, help="output directory")
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FbgForceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
