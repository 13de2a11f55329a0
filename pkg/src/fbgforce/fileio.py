"""File formats: CSV frames/trajectories/forces and JSON configs/models.

Floats are serialized with ``repr`` (shortest round-trip form), so a
value survives write/read bit-exactly and staged pipeline runs match
in-memory runs byte for byte. All files are UTF-8 with LF line endings;
writes go through a temp file + rename.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .calibration import CalibrationModel, CalibrationRun
from .decouple import RecoveredComponents, UnmixingEstimate
from .errors import ValidationError
from .forces import ForceSeries
from .frames import ForceTrajectory, WavelengthFrame

FRAME_HEADER = ["t_s", "dw1_pm", "dw2_pm", "dw3_pm", "dw4_pm"]
TRAJECTORY_HEADER = ["t_s", "fx_N", "fy_N", "fz_N"]
RUN_HEADER = ["load_N", "dw1_pm", "dw2_pm", "dw3_pm", "dw4_pm"]
FORCES_HEADER = ["t_s", "fx1_N", "fy1_N", "fx2_N", "fy2_N", "fz_N", "nins_pm"]
COMPONENTS_HEADER = ["t_s", "comp1_pm", "comp2_pm"]


def atomic_write_text(path, text: str):
    """Write text to ``path`` atomically (temp file in the same dir + rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(value) -> str:
    return repr(float(value))


def _csv_text(header, columns) -> str:
    lines = [",".join(header)]
    n = len(columns[0])
    for i in range(n):
        lines.append(",".join(
            "" if col is None else _fmt(col[i]) for col in columns
        ))
    return "\n".join(lines) + "\n"


def _read_csv(path, expected_header):
    path = Path(path)
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}:1: empty file") from None
        if header != expected_header:
            raise ValidationError(
                f"{path}:1: expected header {','.join(expected_header)}, "
                f"got {','.join(header)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected_header):
                raise ValidationError(
                    f"{path}:{lineno}: expected {len(expected_header)} fields, "
                    f"got {len(row)}"
                )
            parsed = []
            for col, cell in zip(expected_header, row):
                if cell == "":
                    parsed.append(None)
                    continue
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise ValidationError(
                        f"{path}:{lineno}: cannot parse {col}={cell!r} as a number"
                    ) from None
            rows.append(parsed)
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    return rows


def _rate_from_times(times) -> float:
    if len(times) < 2:
        return 1.0
    dt = times[1] - times[0]
    if dt <= 0:
        raise ValidationError("time column must be strictly increasing")
    return 1.0 / dt


def write_frame_csv(frame: WavelengthFrame, path):
    atomic_write_text(path, _csv_text(
        FRAME_HEADER, [frame.times_s, *frame.channels]
    ))


def read_frame_csv(path) -> WavelengthFrame:
    rows = _read_csv(path, FRAME_HEADER)
    data = np.array(rows, dtype=np.float64)
    return WavelengthFrame(_rate_from_times(data[:, 0]), data[:, 1:].T)


def write_trajectory_csv(traj: ForceTrajectory, sample_rate_hz: float, path):
    times = np.arange(traj.n_samples) / sample_rate_hz
    atomic_write_text(path, _csv_text(
        TRAJECTORY_HEADER, [times, traj.fx, traj.fy, traj.fz]
    ))


def read_trajectory_csv(path, capacity_n: float = 1.0):
    rows = _read_csv(path, TRAJECTORY_HEADER)
    data = np.array(rows, dtype=np.float64)
    traj = ForceTrajectory(
        data[:, 1], data[:, 2], data[:, 3], capacity_n=capacity_n
    )
    return traj, _rate_from_times(data[:, 0])


def calibration_to_dict(model: CalibrationModel) -> dict:
    return {
        "K": [[float(v) for v in row] for row in model.K],
        "C": [[float(v) for v in row] for row in model.C],
        "offsets_nm": [float(v) for v in model.offsets_nm],
        "k_n": float(model.k_n),
        "alpha_rad": float(model.alpha_rad),
        "capacity_N": float(model.capacity_n),
    }


def calibration_from_dict(data: dict) -> CalibrationModel:
    try:
        return CalibrationModel(
            K=np.array(data["K"], dtype=np.float64),
            C=np.array(data["C"], dtype=np.float64),
            offsets_nm=np.array(data["offsets_nm"], dtype=np.float64),
            k_n=float(data["k_n"]),
            alpha_rad=float(data["alpha_rad"]),
            capacity_n=float(data["capacity_N"]),
        )
    except KeyError as exc:
        raise ValidationError(f"calibration JSON missing key {exc}") from None


def write_calibration_json(model: CalibrationModel, path):
    atomic_write_text(path, dumps_json(calibration_to_dict(model)))


def read_calibration_json(path) -> CalibrationModel:
    with open(path, encoding="utf-8") as fh:
        return calibration_from_dict(json.load(fh))


def write_run_csv(run: CalibrationRun, path, sidecar_path=None):
    path = Path(path)
    atomic_write_text(path, _csv_text(
        RUN_HEADER, [run.applied_forces_n, *run.observed.channels]
    ))
    sidecar = Path(sidecar_path) if sidecar_path else path.with_suffix(".json")
    atomic_write_text(sidecar, dumps_json({"loaded_axis": run.loaded_axis}))


def read_run_csv(path, sidecar_path=None) -> CalibrationRun:
    path = Path(path)
    rows = _read_csv(path, RUN_HEADER)
    data = np.array(rows, dtype=np.float64)
    sidecar = Path(sidecar_path) if sidecar_path else path.with_suffix(".json")
    if not sidecar.exists():
        raise ValidationError(f"{path}: missing sidecar {sidecar.name}")
    with open(sidecar, encoding="utf-8") as fh:
        meta = json.load(fh)
    if "loaded_axis" not in meta:
        raise ValidationError(f"{sidecar}: missing 'loaded_axis'")
    return CalibrationRun(
        loaded_axis=meta["loaded_axis"],
        applied_forces_n=data[:, 0],
        observed=WavelengthFrame(1.0, data[:, 1:].T),
    )


def write_forces_csv(series: ForceSeries, sample_rate_hz: float, path):
    times = np.arange(series.n_samples) / sample_rate_hz
    atomic_write_text(path, _csv_text(
        FORCES_HEADER,
        [times, series.fx1, series.fy1, series.fx2, series.fy2, series.fz,
         series.n_ins_pm],
    ))


def read_forces_csv(path):
    rows = _read_csv(path, FORCES_HEADER)
    nins_cells = [row[6] for row in rows]
    has_nins = all(v is not None for v in nins_cells)
    cols = np.array(
        [[row[i] if row[i] is not None else np.nan for i in range(6)] for row in rows],
        dtype=np.float64,
    )
    series = ForceSeries(
        fx1=cols[:, 1], fy1=cols[:, 2], fx2=cols[:, 3], fy2=cols[:, 4],
        fz=cols[:, 5],
        n_ins_pm=np.array(nins_cells, dtype=np.float64) if has_nins else None,
    )
    return series, _rate_from_times(cols[:, 0])


def unmixing_to_dict(est: UnmixingEstimate) -> dict:
    return {
        "pair_id": est.pair_id,
        "w_raw": est.w_raw.tolist(),
        "whitening": est.whitening.tolist(),
        "means_pm": est.means_pm.tolist(),
        "mean_allocation_pm": (
            None if est.mean_allocation_pm is None
            else est.mean_allocation_pm.tolist()
        ),
        "a_hat": est.a_hat.tolist(),
        "w_re": est.w_re.tolist(),
        "order": list(est.order),
        "signs": list(est.signs),
        "scales": list(est.scales),
        "converged": est.converged,
        "iterations": est.iterations,
        "recon_rel_error": est.recon_rel_error,
    }


def _final_slots(comps: RecoveredComponents):
    slot0 = comps.x_pm if comps.x_pm is not None else comps.instability_pm
    slot1 = comps.y_pm if comps.y_pm is not None else comps.instability_pm
    return slot0, slot1


def write_components(comps: RecoveredComponents, sample_rate_hz: float, path):
    """Component CSV (final, mean-allocated series) plus JSON sidecar."""
    path = Path(path)
    slot0, slot1 = _final_slots(comps)
    times = np.arange(slot0.size) / sample_rate_hz
    atomic_write_text(path, _csv_text(
        COMPONENTS_HEADER, [times, slot0, slot1]
    ))
    meta = unmixing_to_dict(comps.estimate)
    meta["loading"] = {
        "kind": comps.loading.kind,
        "r_squared": comps.loading.r_squared,
        "pair": list(comps.loading.pair),
        "removed_bins": comps.loading.removed_bins,
        "degenerate": comps.loading.degenerate,
    }
    meta["slots"] = {
        "x": comps.x_pm is not None,
        "y": comps.y_pm is not None,
        "instability": comps.instability_pm is not None,
    }
    atomic_write_text(path.with_suffix(".json"), dumps_json(meta))


def read_components(path, sidecar_path=None) -> RecoveredComponents:
    """Rebuild one pair's RecoveredComponents from CSV + JSON sidecar."""
    path = Path(path)
    rows = _read_csv(path, COMPONENTS_HEADER)
    data = np.array(rows, dtype=np.float64)
    sources = data[:, 1:].T
    sidecar = Path(sidecar_path) if sidecar_path else path.with_suffix(".json")
    if not sidecar.exists():
        raise ValidationError(f"{path}: missing sidecar {sidecar.name}")
    with open(sidecar, encoding="utf-8") as fh:
        meta = json.load(fh)
    from .classify import LoadingClass  # local import to avoid cycle at module load

    loading = LoadingClass(
        kind=meta["loading"]["kind"],
        r_squared=meta["loading"]["r_squared"],
        pair=tuple(meta["loading"]["pair"]),
        removed_bins=meta["loading"]["removed_bins"],
        degenerate=meta["loading"]["degenerate"],
    )
    allocation = meta.get("mean_allocation_pm")
    est = UnmixingEstimate(
        pair_id=meta["pair_id"],
        w_raw=np.array(meta["w_raw"]),
        whitening=np.array(meta["whitening"]),
        means_pm=np.array(meta["means_pm"]),
        a_hat=np.array(meta["a_hat"]),
        w_re=np.array(meta["w_re"]),
        order=tuple(meta["order"]),
        signs=tuple(meta["signs"]),
        scales=tuple(meta["scales"]),
        converged=meta["converged"],
        iterations=meta["iterations"],
        sources_pm=sources,  # final (mean-allocated) series as written
        recon_rel_error=meta["recon_rel_error"],
        mean_allocation_pm=None if allocation is None else np.array(allocation),
    )
    slots = meta["slots"]
    x_pm = sources[0] if slots["x"] else None
    y_pm = sources[1] if slots["y"] else None
    instability = None
    if slots["instability"]:
        instability = sources[1] if slots["x"] else sources[0]
    return RecoveredComponents(
        pair=loading.pair, x_pm=x_pm, y_pm=y_pm,
        instability_pm=instability, loading=loading, estimate=est,
    )


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_json(obj, path):
    atomic_write_text(path, dumps_json(obj))


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
