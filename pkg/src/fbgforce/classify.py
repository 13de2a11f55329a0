"""Uniaxial-vs-multiaxial loading decision per sensor pair.

A single loaded axis makes the two channels of a pair proportional, so
their trimmed magnitude spectra regress onto each other with high R^2;
independent axial components break the proportionality. The few
largest bins (the shared manipulation trend) are removed before the
regression, and the DC bin is excluded so offsets cannot masquerade as
correlation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, ValidationError
from .frames import WavelengthFrame

UNIAXIAL = "uniaxial"
MULTIAXIAL = "multiaxial"

MIN_SAMPLES = 16


@dataclass(frozen=True)
class LoadingClass:
    kind: str
    r_squared: float
    pair: tuple  # (1, 2) or (3, 4)
    removed_bins: int
    degenerate: bool = False

    def __post_init__(self):
        if not 0.0 <= self.r_squared <= 1.0:
            raise ValidationError("r_squared must be in [0, 1]")


def _trimmed_magnitude_spectra(ch_a: np.ndarray, ch_b: np.ndarray, removed_bins: int):
    spec_a = np.abs(np.fft.rfft(ch_a))[1:]  # DC excluded
    spec_b = np.abs(np.fft.rfft(ch_b))[1:]
    k = min(removed_bins, spec_a.size - 2)
    if k > 0:
        top_a = np.argsort(spec_a)[-k:]
        top_b = np.argsort(spec_b)[-k:]
        drop = np.union1d(top_a, top_b)
    else:
        drop = np.array([], dtype=int)
    keep = np.setdiff1d(np.arange(spec_a.size), drop)
    return spec_a[keep], spec_b[keep], int(drop.size)


def classify_pair(
    ch_a: np.ndarray,
    ch_b: np.ndarray,
    pair: tuple = (1, 2),
    removed_bins: int = 3,
    threshold: float = 0.8,
) -> LoadingClass:
    """Classify one sensor pair's loading from its two filtered channels."""
    a = np.asarray(ch_a, dtype=np.float64)
    b = np.asarray(ch_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationError("channels must be 1-d arrays of equal length")
    if a.size < MIN_SAMPLES:
        raise InsufficientDataError(f"need at least {MIN_SAMPLES} samples, got {a.size}")
    sa, sb, dropped = _trimmed_magnitude_spectra(a, b, removed_bins)
    if np.all(sa == 0.0) and np.all(sb == 0.0):
        return LoadingClass(UNIAXIAL, 1.0, pair, dropped, degenerate=True)
    sst = np.sum((sb - sb.mean()) ** 2)
    if sst == 0.0 or np.all(sa == sa[0]):
        # constant regressor or constant response: no usable spectrum shape
        degenerate_r2 = 1.0 if sst == 0.0 else 0.0
        kind = UNIAXIAL if degenerate_r2 > threshold else MULTIAXIAL
        return LoadingClass(kind, degenerate_r2, pair, dropped, degenerate=True)
    design = np.column_stack([sa, np.ones_like(sa)])
    coef, *_ = np.linalg.lstsq(design, sb, rcond=None)
    sse = np.sum((sb - design @ coef) ** 2)
    r2 = float(np.clip(1.0 - sse / sst, 0.0, 1.0))
    kind = UNIAXIAL if r2 > threshold else MULTIAXIAL
    return LoadingClass(kind, r2, pair, dropped)


def classify_frame(
    frame: WavelengthFrame,
    removed_bins: int = 3,
    threshold: float = 0.8,
):
    """LoadingClass for pair (1,2) and pair (3,4)."""
    first = classify_pair(
        frame.channel(1), frame.channel(2), (1, 2), removed_bins, threshold
    )
    second = classify_pair(
        frame.channel(3), frame.channel(4), (3, 4), removed_bins, threshold
    )
    return first, second
