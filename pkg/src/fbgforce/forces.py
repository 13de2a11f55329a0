"""Wavelength components to forces: diagonal scaling plus the z estimator.

Only the calibration diagonal is needed on this path (each recovered
component is already expressed at its own sensor), which is half the
coefficients the matrix-inversion path uses. F_z comes from differencing
the two frames' y components.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .calibration import CalibrationModel
from .decouple import RecoveredComponents
from .errors import ConfigurationError, ValidationError


@dataclass(frozen=True)
class ForceSeries:
    """Reconstructed forces (newtons) with the recovered instability, if any."""

    fx1: np.ndarray
    fy1: np.ndarray
    fx2: np.ndarray
    fy2: np.ndarray
    fz: np.ndarray
    n_ins_pm: np.ndarray | None = None

    def __post_init__(self):
        arrays = [self.fx1, self.fy1, self.fx2, self.fy2, self.fz]
        n = arrays[0].size
        for arr in arrays:
            if arr.ndim != 1 or arr.size != n:
                raise ValidationError("force series must be 1-d and equally long")
            if not np.all(np.isfinite(arr)):
                raise ValidationError("force series must be finite")
        if self.n_ins_pm is not None and self.n_ins_pm.size != n:
            raise ValidationError("n_ins_pm must align with the force series")

    @property
    def n_samples(self) -> int:
        return self.fx1.size

    def fused_fx(self) -> np.ndarray:
        """Mean of the two x readings (they agree when sensing is healthy)."""
        return (self.fx1 + self.fx2) / 2.0


def _diagonal(calib: CalibrationModel):
    k = calib.k_pm_per_n
    c = calib.c_pm_per_n
    diag = np.array([k[0, 0], k[1, 1], c[0, 0], c[1, 1]])
    if np.any(diag == 0.0):
        raise ConfigurationError("calibration diagonal contains a zero coefficient")
    return diag


def components_to_forces(
    comps_pair1: RecoveredComponents,
    comps_pair2: RecoveredComponents,
    calib: CalibrationModel,
):
    """Per-sample (F_x1, F_y1, F_x2, F_y2) from recovered components.

    An axis the classifier declared unloaded (component is None) is
    reported as zero force.
    """
    diag = _diagonal(calib)
    n = comps_pair1.estimate.sources_pm.shape[1]

    def convert(component, scale_pm_per_n):
        if component is None:
            return np.zeros(n)
        return np.asarray(component) / scale_pm_per_n

    return (
        convert(comps_pair1.x_pm, diag[0]),
        convert(comps_pair1.y_pm, diag[1]),
        convert(comps_pair2.x_pm, diag[2]),
        convert(comps_pair2.y_pm, diag[3]),
    )


def estimate_fz(fy1, fy2, calib: CalibrationModel) -> np.ndarray:
    """Axial force from the two y readings: (F_y2 - k_n F_y1 cos a)/sin a."""
    sin_a = math.sin(calib.alpha_rad)
    if sin_a == 0.0:
        raise ConfigurationError("sin(alpha) is zero; z estimator undefined")
    fy1 = np.asarray(fy1, dtype=np.float64)
    fy2 = np.asarray(fy2, dtype=np.float64)
    if fy1.shape != fy2.shape:
        raise ValidationError("fy1 and fy2 must align")
    return (fy2 - calib.k_n * math.cos(calib.alpha_rad) * fy1) / sin_a


def build_force_series(
    comps_pair1: RecoveredComponents,
    comps_pair2: RecoveredComponents,
    calib: CalibrationModel,
) -> ForceSeries:
    """Assemble the full force series from both pairs' components."""
    fx1, fy1, fx2, fy2 = components_to_forces(comps_pair1, comps_pair2, calib)
    fz = estimate_fz(fy1, fy2, calib)
    if float(np.abs(fz).max(initial=0.0)) > calib.capacity_n:
        warnings.warn(
            "reconstructed |F_z| exceeds the calibration capacity", stacklevel=2
        )
    instabilities = [
        c.instability_pm for c in (comps_pair1, comps_pair2)
        if c.instability_pm is not None
    ]
    n_ins = None
    if instabilities:
        n_ins = instabilities[0] if len(instabilities) == 1 else (
            (instabilities[0] + instabilities[1]) / 2.0
        )
    return ForceSeries(fx1=fx1, fy1=fy1, fx2=fx2, fy2=fy2, fz=fz, n_ins_pm=n_ins)


@dataclass(frozen=True)
class ConsistencyReport:
    """Agreement between the two x readings; disagreement marks overload."""

    tolerance_n: float
    max_abs_diff_n: float
    rms_diff_n: float
    fraction_within: float
    flagged: bool


def consistency_check(fx1, fx2, tolerance_n: float) -> ConsistencyReport:
    """Per-sample |F_x1 - F_x2| against a tolerance; flags the overload
    regime where the protective bulge stopped limiting hand pressure."""
    fx1 = np.asarray(fx1, dtype=np.float64)
    fx2 = np.asarray(fx2, dtype=np.float64)
    if fx1.shape != fx2.shape:
        raise ValidationError("fx1 and fx2 must align")
    if tolerance_n <= 0:
        raise ValidationError("tolerance_n must be positive")
    diff = np.abs(fx1 - fx2)
    fraction = float(np.mean(diff <= tolerance_n))
    return ConsistencyReport(
        tolerance_n=tolerance_n,
        max_abs_diff_n=float(diff.max()),
        rms_diff_n=float(np.sqrt(np.mean(diff ** 2))),
        fraction_within=fraction,
        flagged=fraction < 0.95,
    )
