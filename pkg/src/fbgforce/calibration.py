"""Linear sensor calibration: fitting, model assembly, matrix decoupling.

Each sensor pair has a 2x2 sensitivity matrix mapping its planar force to
wavelength shifts: rows are sensors, columns are force axes, so
dw = M @ (F_x, F_y) + offsets. The matrix-inversion path implemented by
``naive_decouple`` is the baseline the ICA path is compared against.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateDataError,
    InsufficientDataError,
    ModelRejectedError,
    ValidationError,
)
from .frames import WavelengthFrame
from .mechanics import DEFAULT_ALPHA_RAD, DEFAULT_K_N

NM_TO_PM = 1000.0

VALID_AXES = ("x1", "y1", "x2", "y2", "z")

# Published fit for the reference forceps, in nm per mN of planar force
# (sensor rows, force-axis columns), with wavelength offsets in nm.
REFERENCE_PAIR1_NM_PER_MN = ((0.0036, 0.00009), (0.0004, -0.0042))
REFERENCE_PAIR2_NM_PER_MN = ((0.0016, 0.0003), (0.0006, -0.0015))
REFERENCE_OFFSETS_NM = (0.0071, -0.0032, 0.0025, -0.0037)


@dataclass(frozen=True)
class CalibrationModel:
    """Immutable calibrated sensor model.

    ``K`` (sensors 1-2) and ``C`` (sensors 3-4) are accepted in nm/N and
    carried internally in pm/N; offsets are accepted in nm and carried in
    pm. ``diagonally_dominant`` records (without enforcing) whether each
    sensor responds most strongly to its own axis.
    """

    K: np.ndarray  # 2x2, nm/N
    C: np.ndarray  # 2x2, nm/N
    offsets_nm: np.ndarray  # 4-vector, nm
    k_n: float = DEFAULT_K_N
    alpha_rad: float = DEFAULT_ALPHA_RAD
    capacity_n: float = 1.0
    diagonally_dominant: bool = field(init=False)

    def __post_init__(self):
        k = np.asarray(self.K, dtype=np.float64)
        c = np.asarray(self.C, dtype=np.float64)
        off = np.asarray(self.offsets_nm, dtype=np.float64)
        if k.shape != (2, 2) or c.shape != (2, 2):
            raise ValidationError("K and C must be 2x2 matrices")
        if off.shape != (4,):
            raise ValidationError("offsets_nm must have 4 entries")
        if not (np.all(np.isfinite(k)) and np.all(np.isfinite(c)) and np.all(np.isfinite(off))):
            raise ValidationError("calibration values must be finite")
        if abs(np.linalg.det(k)) <= 1e-12:
            raise ModelRejectedError("K is singular (|det| <= 1e-12 nm/N units)")
        if abs(np.linalg.det(c)) <= 1e-12:
            raise ModelRejectedError("C is singular (|det| <= 1e-12 nm/N units)")
        if np.sin(self.alpha_rad) == 0.0:
            raise ValidationError("sin(alpha) must be nonzero")
        if self.capacity_n <= 0:
            raise ValidationError("capacity_n must be positive")
        dominant = (
            abs(k[0, 0]) > abs(k[0, 1]) and abs(k[1, 1]) > abs(k[1, 0])
            and abs(c[0, 0]) > abs(c[0, 1]) and abs(c[1, 1]) > abs(c[1, 0])
        )
        for name, arr in (("K", k), ("C", c), ("offsets_nm", off)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "diagonally_dominant", bool(dominant))

    @property
    def k_pm_per_n(self) -> np.ndarray:
        return self.K * NM_TO_PM

    @property
    def c_pm_per_n(self) -> np.ndarray:
        return self.C * NM_TO_PM

    @property
    def offsets_pm(self) -> np.ndarray:
        return self.offsets_nm * NM_TO_PM

    def pair_matrix_pm(self, pair_id: int) -> np.ndarray:
        return self.k_pm_per_n if pair_id == 1 else self.c_pm_per_n

    def pair_offsets_pm(self, pair_id: int) -> np.ndarray:
        return self.offsets_pm[:2] if pair_id == 1 else self.offsets_pm[2:]


def default_calibration(capacity_n: float = 1.0) -> CalibrationModel:
    """Reference calibration for the instrumented forceps.

    The published sensitivities are nm per mN, i.e. x1000 when expressed
    in the model's nm/N convention.
    """
    return CalibrationModel(
        K=np.array(REFERENCE_PAIR1_NM_PER_MN) * 1000.0,
        C=np.array(REFERENCE_PAIR2_NM_PER_MN) * 1000.0,
        offsets_nm=np.array(REFERENCE_OFFSETS_NM),
        capacity_n=capacity_n,
    )


@dataclass(frozen=True)
class CalibrationRun:
    """One loading sweep along a single axis with the observed frame."""

    loaded_axis: str
    applied_forces_n: np.ndarray
    observed: WavelengthFrame

    def __post_init__(self):
        if self.loaded_axis not in VALID_AXES:
            raise ValidationError(f"loaded_axis must be one of {VALID_AXES}")
        loads = np.asarray(self.applied_forces_n, dtype=np.float64)
        if loads.ndim != 1 or not np.all(np.isfinite(loads)):
            raise ValidationError("applied_forces_n must be a finite 1-d array")
        if loads.size != self.observed.n_samples:
            raise ValidationError("applied forces and observed frame must align")
        if np.any(np.diff(loads) < 0):
            raise ValidationError("load steps must be monotone non-decreasing")
        if np.unique(loads).size < 3:
            raise InsufficientDataError("need at least 3 distinct load levels")
        loads = loads.copy()
        loads.setflags(write=False)
        object.__setattr__(self, "applied_forces_n", loads)


@dataclass(frozen=True)
class AxisFit:
    """Per-sensor OLS fit of dw = slope*F + intercept for one loaded axis."""

    loaded_axis: str
    slopes_nm_per_n: np.ndarray  # 4
    intercepts_nm: np.ndarray  # 4
    r_squared: np.ndarray  # 4
    poor_fit: np.ndarray  # 4 bools, True where R^2 < 0.95


def fit_axis(run: CalibrationRun, poor_fit_r2: float = 0.95) -> AxisFit:
    """Least-squares slope/intercept of every sensor against the applied load."""
    loads = run.applied_forces_n
    if np.ptp(loads) == 0.0:
        raise DegenerateDataError("applied load has zero variance")
    slopes_pm = np.empty(4)
    intercepts_pm = np.empty(4)
    r2 = np.empty(4)
    design = np.column_stack([loads, np.ones_like(loads)])
    for i in range(4):
        dw = run.observed.channels[i]
        coef, *_ = np.linalg.lstsq(design, dw, rcond=None)
        slopes_pm[i], intercepts_pm[i] = coef
        resid = dw - design @ coef
        sst = np.sum((dw - dw.mean()) ** 2)
        if sst == 0.0:
            # flat channel: a zero-slope line is an exact fit
            r2[i] = 1.0 if np.allclose(resid, 0.0) else 0.0
        else:
            r2[i] = 1.0 - np.sum(resid ** 2) / sst
    return AxisFit(
        loaded_axis=run.loaded_axis,
        slopes_nm_per_n=slopes_pm / NM_TO_PM,
        intercepts_nm=intercepts_pm / NM_TO_PM,
        r_squared=r2,
        poor_fit=r2 < poor_fit_r2,
    )


def assemble_model(
    fit_x1: AxisFit,
    fit_y1: AxisFit,
    fit_x2: AxisFit,
    fit_y2: AxisFit,
    k_n: float = DEFAULT_K_N,
    alpha_rad: float = DEFAULT_ALPHA_RAD,
    capacity_n: float = 1.0,
) -> CalibrationModel:
    """Build a CalibrationModel from the four planar-axis fits.

    Column j of each pair matrix is that pair's response to its j-th force
    axis; offsets are the mean of the two runs' intercepts per sensor.
    Raises ModelRejectedError if either matrix is singular.
    """
    expected = ("x1", "y1", "x2", "y2")
    got = (fit_x1.loaded_axis, fit_y1.loaded_axis, fit_x2.loaded_axis, fit_y2.loaded_axis)
    if got != expected:
        raise ValidationError(f"fits must be for axes {expected}, got {got}")
    K = np.column_stack([fit_x1.slopes_nm_per_n[:2], fit_y1.slopes_nm_per_n[:2]])
    C = np.column_stack([fit_x2.slopes_nm_per_n[2:], fit_y2.slopes_nm_per_n[2:]])
    offsets = np.concatenate([
        (fit_x1.intercepts_nm[:2] + fit_y1.intercepts_nm[:2]) / 2.0,
        (fit_x2.intercepts_nm[2:] + fit_y2.intercepts_nm[2:]) / 2.0,
    ])
    return CalibrationModel(
        K=K, C=C, offsets_nm=offsets, k_n=k_n, alpha_rad=alpha_rad,
        capacity_n=capacity_n,
    )


def naive_decouple(frame: WavelengthFrame, calib: CalibrationModel):
    """Planar forces by direct matrix inversion of the calibration model.

    Returns per-sample (F_x1, F_y1, F_x2, F_y2) in newtons. Subtracting the
    wavelength offsets before inverting is algebraically identical to the
    printed force-offset form of the inverted equations.
    """
    p1 = frame.pair(1) - calib.pair_offsets_pm(1)[:, None]
    p2 = frame.pair(2) - calib.pair_offsets_pm(2)[:, None]
    f1 = np.linalg.solve(calib.pair_matrix_pm(1), p1)
    f2 = np.linalg.solve(calib.pair_matrix_pm(2), p2)
    return f1[0], f1[1], f2[0], f2[1]


@dataclass(frozen=True)
class ZSensitivityReport:
    """Per-sensor response to a pure-z load sweep."""

    slopes_nm_per_n: np.ndarray  # 4
    dominance_ratio: float  # |slope_4| / max(|slope_1..3|)
    threshold: float
    sensor4_dominant: bool
    no_response: bool
    violation: bool  # some sensor other than 4 dominates


def check_z_insensitivity(run: CalibrationRun, threshold: float = 3.0) -> ZSensitivityReport:
    """Check that only sensor 4 responds appreciably to a pure F_z sweep."""
    if run.loaded_axis != "z":
        raise ValidationError("check_z_insensitivity needs a z-axis run")
    fit = fit_axis(run)
    slopes = np.abs(fit.slopes_nm_per_n)
    others = slopes[:3].max()
    if slopes.max() == 0.0:
        return ZSensitivityReport(
            slopes_nm_per_n=fit.slopes_nm_per_n,
            dominance_ratio=0.0,
            threshold=threshold,
            sensor4_dominant=False,
            no_response=True,
            violation=False,
        )
    ratio = np.inf if others == 0.0 else slopes[3] / others
    dominant = ratio >= threshold
    return ZSensitivityReport(
        slopes_nm_per_n=fit.slopes_nm_per_n,
        dominance_ratio=float(ratio),
        threshold=threshold,
        sensor4_dominant=bool(dominant),
        no_response=False,
        violation=bool(np.argmax(slopes) != 3),
    )
