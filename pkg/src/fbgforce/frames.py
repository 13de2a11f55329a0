"""Core time-series containers: sensor frames, force trajectories, noise spec.

All wavelength shifts are carried in picometres, forces in newtons, and
time in seconds. A frame always holds the four sensor channels in order
(sensor 1, sensor 2, sensor 3, sensor 4); sensors 1-2 form the first
planar pair, sensors 3-4 the second.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, ValidationError

N_CHANNELS = 4


def _as_readonly_f64(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class WavelengthFrame:
    """Time-aligned wavelength-shift series from the four sensors, in pm."""

    sample_rate_hz: float
    channels: np.ndarray  # shape (4, n)

    def __post_init__(self):
        arr = _as_readonly_f64(self.channels, "channels")
        if arr.ndim != 2 or arr.shape[0] != N_CHANNELS:
            raise ValidationError(
                f"channels must have shape (4, n), got {arr.shape}"
            )
        if arr.shape[1] < 1:
            raise ValidationError("frame must contain at least one sample")
        if not (np.isfinite(self.sample_rate_hz) and self.sample_rate_hz > 0):
            raise ValidationError("sample_rate_hz must be positive")
        object.__setattr__(self, "channels", arr)

    @property
    def n_samples(self) -> int:
        return self.channels.shape[1]

    @property
    def times_s(self) -> np.ndarray:
        return np.arange(self.n_samples) / self.sample_rate_hz

    def channel(self, sensor: int) -> np.ndarray:
        """Return one channel by 1-based sensor id."""
        if sensor not in (1, 2, 3, 4):
            raise ValidationError(f"sensor id must be 1..4, got {sensor}")
        return self.channels[sensor - 1]

    def pair(self, pair_id: int) -> np.ndarray:
        """Return the 2xn block for pair 1 (sensors 1-2) or pair 2 (sensors 3-4)."""
        if pair_id not in (1, 2):
            raise ValidationError(f"pair_id must be 1 or 2, got {pair_id}")
        lo = 0 if pair_id == 1 else 2
        return self.channels[lo:lo + 2]

    def with_channels(self, channels: np.ndarray) -> "WavelengthFrame":
        return WavelengthFrame(self.sample_rate_hz, channels)


@dataclass(frozen=True)
class ForceTrajectory:
    """Ground-truth tip forces in the instrument frame, newtons."""

    fx: np.ndarray
    fy: np.ndarray
    fz: np.ndarray
    capacity_n: float = 1.0

    def __post_init__(self):
        fx = _as_readonly_f64(self.fx, "fx")
        fy = _as_readonly_f64(self.fy, "fy")
        fz = _as_readonly_f64(self.fz, "fz")
        if not (fx.shape == fy.shape == fz.shape) or fx.ndim != 1:
            raise ValidationError("fx, fy, fz must be 1-d arrays of equal length")
        if fx.size < 1:
            raise ValidationError("trajectory must contain at least one sample")
        if self.capacity_n <= 0:
            raise ValidationError("capacity_n must be positive")
        norm = np.sqrt(fx ** 2 + fy ** 2 + fz ** 2)
        worst = float(norm.max())
        if worst > self.capacity_n * (1 + 1e-12):
            raise CapacityError(
                f"|F| reaches {worst:.6f} N, above capacity {self.capacity_n} N"
            )
        object.__setattr__(self, "fx", fx)
        object.__setattr__(self, "fy", fy)
        object.__setattr__(self, "fz", fz)

    @property
    def n_samples(self) -> int:
        return self.fx.size


VALID_INSTABILITY_KINDS = ("bounded-random-walk", "iid-uniform")
VALID_SHARING = ("global", "per-pair", "per-channel")


@dataclass(frozen=True)
class NoiseSpec:
    """Interrogation-system instability model for the simulator.

    The bounded random walk takes uniform steps of +-walk_step_pm, relaxes
    toward zero with the given damping factor per sample, and is clipped at
    +-instability_bound_pm (damping=1.0 gives an undamped clipped walk).
    ``sharing`` controls whether one instability series is common to all
    four channels, one per sensor pair, or one per channel.
    """

    instability_bound_pm: float = 5.0
    instability_kind: str = "bounded-random-walk"
    rng_seed: int = 0
    sharing: str = "global"
    walk_step_pm: float = 0.5
    walk_damping: float = 0.98

    def __post_init__(self):
        if self.instability_bound_pm < 0:
            raise ValidationError("instability_bound_pm must be >= 0")
        if self.instability_kind not in VALID_INSTABILITY_KINDS:
            raise ValidationError(
                f"instability_kind must be one of {VALID_INSTABILITY_KINDS}"
            )
        if self.sharing not in VALID_SHARING:
            raise ValidationError(f"sharing must be one of {VALID_SHARING}")
        if self.walk_step_pm < 0:
            raise ValidationError("walk_step_pm must be >= 0")
        if not 0 < self.walk_damping <= 1.0:
            raise ValidationError("walk_damping must be in (0, 1]")
