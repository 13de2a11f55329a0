"""Forward simulator: ground-truth forces to synthetic sensor frames.

Serves as the oracle for every decoupling test: alongside the observed
frame it retains the exact per-channel contribution of each force axis
and the injected instability, so recovered components can be compared
against what was actually mixed in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calibration import CalibrationModel
from .errors import CapacityError
from .frames import ForceTrajectory, NoiseSpec, WavelengthFrame
from .mechanics import planar_forces


def _instability_series(rng: np.random.Generator, n: int, spec: NoiseSpec) -> np.ndarray:
    if spec.instability_bound_pm == 0.0:
        return np.zeros(n)
    bound = spec.instability_bound_pm
    if spec.instability_kind == "iid-uniform":
        return rng.uniform(-bound, bound, size=n)
    steps = rng.uniform(-spec.walk_step_pm, spec.walk_step_pm, size=n)
    out = np.empty(n)
    level = 0.0
    for i in range(n):
        level = spec.walk_damping * level + steps[i]
        if level > bound:
            level = bound
        elif level < -bound:
            level = -bound
        out[i] = level
    return out


def instability_channels(n: int, spec: NoiseSpec) -> np.ndarray:
    """Instability for all four channels, shape (4, n), deterministic in the seed."""
    rng = np.random.default_rng(spec.rng_seed)
    if spec.sharing == "global":
        shared = _instability_series(rng, n, spec)
        return np.tile(shared, (4, 1))
    if spec.sharing == "per-pair":
        a = _instability_series(rng, n, spec)
        b = _instability_series(rng, n, spec)
        return np.vstack([a, a, b, b])
    return np.vstack([_instability_series(rng, n, spec) for _ in range(4)])


@dataclass(frozen=True)
class SimulationResult:
    """Synthetic frame plus the ground truth that produced it."""

    frame: WavelengthFrame
    trajectory: ForceTrajectory
    fx1: np.ndarray
    fy1: np.ndarray
    fx2: np.ndarray
    fy2: np.ndarray
    contrib_x_pm: np.ndarray  # (4, n): each channel's x-axis wavelength component
    contrib_y_pm: np.ndarray  # (4, n): each channel's y-axis wavelength component
    instability_pm: np.ndarray  # (4, n)

    # Diagonal-referenced truth components: the series the decoupler is
    # expected to recover (each axis as seen by its dominant sensor).
    @property
    def truth_wfx1_pm(self) -> np.ndarray:
        return self.contrib_x_pm[0]

    @property
    def truth_wfy1_pm(self) -> np.ndarray:
        return self.contrib_y_pm[1]

    @property
    def truth_wfx2_pm(self) -> np.ndarray:
        return self.contrib_x_pm[2]

    @property
    def truth_wfy2_pm(self) -> np.ndarray:
        return self.contrib_y_pm[3]

    def superposition_residual(self, offsets_pm: np.ndarray) -> np.ndarray:
        """channels - (x + y + instability + offset), zero by construction."""
        expected = (self.contrib_x_pm + self.contrib_y_pm) + self.instability_pm
        expected = expected + offsets_pm[:, None]
        return self.frame.channels - expected


def simulate_frame(
    traj: ForceTrajectory,
    calib: CalibrationModel,
    noise: NoiseSpec,
    sample_rate_hz: float = 100.0,
) -> SimulationResult:
    """Simulate the four-channel wavelength response to a force trajectory."""
    norm = np.sqrt(traj.fx ** 2 + traj.fy ** 2 + traj.fz ** 2)
    if float(norm.max()) > calib.capacity_n * (1 + 1e-12):
        raise CapacityError(
            f"trajectory reaches {norm.max():.6f} N, above calibration capacity "
            f"{calib.capacity_n} N"
        )
    fx1, fy1, fx2, fy2 = planar_forces(
        traj.fx, traj.fy, traj.fz, calib.k_n, calib.alpha_rad
    )
    k = calib.k_pm_per_n
    c = calib.c_pm_per_n
    contrib_x = np.vstack([k[0, 0] * fx1, k[1, 0] * fx1, c[0, 0] * fx2, c[1, 0] * fx2])
    contrib_y = np.vstack([k[0, 1] * fy1, k[1, 1] * fy1, c[0, 1] * fy2, c[1, 1] * fy2])
    inst = instability_channels(traj.n_samples, noise)
    channels = (contrib_x + contrib_y) + inst + calib.offsets_pm[:, None]
    frame = WavelengthFrame(sample_rate_hz, channels)
    return SimulationResult(
        frame=frame,
        trajectory=traj,
        fx1=fx1,
        fy1=fy1,
        fx2=fx2,
        fy2=fy2,
        contrib_x_pm=contrib_x,
        contrib_y_pm=contrib_y,
        instability_pm=inst,
    )
