"""End-to-end orchestration: filter -> classify -> decouple -> forces -> analyze.

Pure in-memory composition of the stage functions; the CLI wraps this
with file I/O. In "both" mode the matrix-inversion and ICA paths run
side by side and a comparison (Pearson correlation between the two
paths' outputs, residuals against ground truth when available) is
produced.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .calibration import CalibrationModel, naive_decouple
from .classify import classify_frame
from .decouple import IcaConfig, decouple_frame
from .errors import ValidationError
from .forces import (
    ConsistencyReport,
    ForceSeries,
    build_force_series,
    consistency_check,
    estimate_fz,
)
from .frames import WavelengthFrame
from .preprocess import FilterConfig, filter_instability
from .stationarity import TestConfig, analyze_session

DECOUPLE_MODES = ("ica", "naive", "both")

FORCE_COLUMNS = ("fx1", "fy1", "fx2", "fy2", "fz")


@dataclass(frozen=True)
class PipelineConfig:
    epsilon_pm: float = 2.0
    removed_bins: int = 3
    r2_threshold: float = 0.8
    ica: IcaConfig = field(default_factory=IcaConfig)
    analysis: TestConfig = field(default_factory=TestConfig)
    decouple_mode: str = "ica"
    window: tuple | None = None  # default: whole series
    consistency_tol_n: float = 0.005

    def __post_init__(self):
        if self.decouple_mode not in DECOUPLE_MODES:
            raise ValidationError(f"decouple_mode must be one of {DECOUPLE_MODES}")


@dataclass(frozen=True)
class PipelineResult:
    filtered: WavelengthFrame
    verdicts: tuple
    ica_components: tuple | None
    ica_forces: ForceSeries | None
    naive_forces: ForceSeries | None
    ica_reports: dict | None
    naive_reports: dict | None
    ica_consistency: ConsistencyReport | None
    naive_consistency: ConsistencyReport | None
    comparison: dict | None


def _series_columns(series: ForceSeries) -> dict:
    return {
        "fx1": series.fx1, "fy1": series.fy1,
        "fx2": series.fx2, "fy2": series.fy2, "fz": series.fz,
    }


def _pearson(a: np.ndarray, b: np.ndarray):
    if a.std() == 0.0 or b.std() == 0.0:
        return None
    return float(np.corrcoef(a, b)[0, 1])


def _residual_stats(series: ForceSeries, truth: dict) -> dict:
    out = {}
    cols = _series_columns(series)
    for name, est in cols.items():
        if name not in truth:
            continue
        resid = est - np.asarray(truth[name])
        out[name] = {
            "rms_n": float(np.sqrt(np.mean(resid ** 2))),
            "mae_n": float(np.mean(np.abs(resid))),
            "max_abs_n": float(np.abs(resid).max()),
        }
    return out


def compare_paths(
    ica_forces: ForceSeries,
    naive_forces: ForceSeries,
    truth: dict | None = None,
) -> dict:
    """Side-by-side comparison of the two decoupling paths."""
    ica_cols = _series_columns(ica_forces)
    naive_cols = _series_columns(naive_forces)
    comparison = {
        "pearson_ica_vs_naive": {
            name: _pearson(ica_cols[name], naive_cols[name])
            for name in FORCE_COLUMNS
        },
        "rms_difference_n": {
            name: float(np.sqrt(np.mean((ica_cols[name] - naive_cols[name]) ** 2)))
            for name in FORCE_COLUMNS
        },
    }
    if truth is not None:
        comparison["residuals_vs_truth"] = {
            "ica": _residual_stats(ica_forces, truth),
            "naive": _residual_stats(naive_forces, truth),
        }
    return comparison


def run_pipeline(
    frame: WavelengthFrame,
    calib: CalibrationModel,
    cfg: PipelineConfig,
    naive_calib: CalibrationModel | None = None,
    truth: dict | None = None,
) -> PipelineResult:
    """Run the configured stages on one frame.

    ``naive_calib`` lets the matrix-inversion path use a different
    (e.g. perturbed) calibration than the ICA path's component scaling.
    """
    filtered = filter_instability(frame, FilterConfig(epsilon_pm=cfg.epsilon_pm))
    verdicts = classify_frame(filtered, cfg.removed_bins, cfg.r2_threshold)

    window = cfg.window if cfg.window is not None else (0, filtered.n_samples)

    ica_components = ica_forces = ica_reports = ica_consistency = None
    if cfg.decouple_mode in ("ica", "both"):
        ica_components = decouple_frame(filtered, verdicts, calib, cfg.ica)
        ica_forces = build_force_series(ica_components[0], ica_components[1], calib)
        ica_reports = analyze_session(ica_forces, window, cfg.analysis)
        ica_consistency = consistency_check(
            ica_forces.fx1, ica_forces.fx2, cfg.consistency_tol_n
        )

    naive_forces = naive_reports = naive_consistency = None
    if cfg.decouple_mode in ("naive", "both"):
        ncalib = naive_calib if naive_calib is not None else calib
        fx1, fy1, fx2, fy2 = naive_decouple(filtered, ncalib)
        naive_forces = ForceSeries(
            fx1=fx1, fy1=fy1, fx2=fx2, fy2=fy2,
            fz=estimate_fz(fy1, fy2, ncalib), n_ins_pm=None,
        )
        naive_reports = analyze_session(naive_forces, window, cfg.analysis)
        naive_consistency = consistency_check(
            naive_forces.fx1, naive_forces.fx2, cfg.consistency_tol_n
        )

    comparison = None
    if cfg.decouple_mode == "both":
        comparison = compare_paths(ica_forces, naive_forces, truth)

    return PipelineResult(
        filtered=filtered,
        verdicts=verdicts,
        ica_components=ica_components,
        ica_forces=ica_forces,
        naive_forces=naive_forces,
        ica_reports=ica_reports,
        naive_reports=naive_reports,
        ica_consistency=ica_consistency,
        naive_consistency=naive_consistency,
        comparison=comparison,
    )


def reports_to_dict(reports: dict) -> dict:
    return {name: asdict(rep) for name, rep in reports.items()}


_TABLE_COLUMNS = (
    ("Force", 14), ("Mean +- SD (mN)", 22), ("COV", 8),
    ("arccot(Fx/Fy) (deg)", 20), ("P(L-B)", 9), ("P(KPSS)", 9),
    ("P_i(ADF)", 16), ("Verdict", 28),
)


def render_report_table(reports: dict) -> str:
    """Human-readable per-column statistics table."""

    def cell(value, fmt="{:.4g}"):
        return "" if value is None else fmt.format(value)

    header = "  ".join(name.ljust(width) for name, width in _TABLE_COLUMNS)
    lines = [header, "-" * len(header)]
    for name, rep in reports.items():
        mean_sd = f"{rep.mean_mn:.2f} +- {rep.sd_mn:.2f}"
        angle = ""
        if rep.angle_mean_deg is not None:
            angle = f"{rep.angle_mean_deg:.2f} +- {rep.angle_sd_deg:.2f}"
        if rep.adf_pvalues is None:
            adf = ""
        else:
            adf = " ".join(
                f"P_{d}={p:.3g}" for d, p in sorted(rep.adf_pvalues.items())
            )
        row = (
            name, mean_sd, cell(rep.cov, "{:.3f}"), angle,
            cell(rep.lb_pvalue, "{:.3g}"), cell(rep.kpss_pvalue, "{:.3g}"),
            adf, rep.verdict or "",
        )
        lines.append("  ".join(
            str(v).ljust(width) for v, (_, width) in zip(row, _TABLE_COLUMNS)
        ))
    return "\n".join(lines) + "\n"
