"""Partial removal of system-instability jitter (thresholded zeroing +
pairwise flattening).

A single left-to-right pass per channel: samples at or below the epsilon
threshold are zeroed; a sample whose magnitude is within epsilon of the
already-filtered left neighbour's magnitude (both above threshold) takes
that neighbour's magnitude, keeping its own sign. Reading the filtered
neighbour makes the pass deterministic and idempotent; keeping the sign
bounds the per-sample distortion by epsilon.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .frames import WavelengthFrame


@dataclass(frozen=True)
class FilterConfig:
    epsilon_pm: float = 2.0
    enabled_channels: tuple = (1, 2, 3, 4)

    def __post_init__(self):
        if self.epsilon_pm < 0:
            raise ValidationError("epsilon_pm must be >= 0")
        if not set(self.enabled_channels) <= {1, 2, 3, 4}:
            raise ValidationError("enabled_channels must be a subset of {1,2,3,4}")


def _filter_channel(x: np.ndarray, eps: float) -> np.ndarray:
    out = np.empty_like(x)
    prev = 0.0 if abs(x[0]) <= eps else x[0]
    out[0] = prev
    for i in range(1, x.size):
        cur = x[i]
        mag = abs(cur)
        if mag <= eps:
            cur = 0.0
        elif abs(prev) > eps and abs(abs(prev) - mag) <= eps:
            cur = abs(prev) if cur > 0 else -abs(prev)
        out[i] = cur
        prev = cur
    return out


def filter_instability(frame: WavelengthFrame, cfg: FilterConfig) -> WavelengthFrame:
    """Return a new frame with instability jitter partially removed."""
    channels = frame.channels.copy()
    for sensor in cfg.enabled_channels:
        channels[sensor - 1] = _filter_channel(frame.channels[sensor - 1], cfg.epsilon_pm)
    return frame.with_channels(channels)


@dataclass(frozen=True)
class FilterReport:
    zeroed: int
    flattened: int
    passed: int
    max_suppressed_pm: float


def filter_report(before: WavelengthFrame, after: WavelengthFrame) -> FilterReport:
    """Summarize what the filter changed between two aligned frames."""
    if before.channels.shape != after.channels.shape:
        raise ValidationError("before/after frames must have identical shape")
    b = before.channels
    a = after.channels
    zeroed_mask = (a == 0.0) & (b != 0.0)
    flattened_mask = (a != b) & (a != 0.0)
    zeroed = int(zeroed_mask.sum())
    flattened = int(flattened_mask.sum())
    passed = int(b.size - zeroed - flattened)
    max_suppressed = float(np.abs(b[zeroed_mask]).max()) if zeroed else 0.0
    return FilterReport(
        zeroed=zeroed,
        flattened=flattened,
        passed=passed,
        max_suppressed_pm=max_suppressed,
    )
