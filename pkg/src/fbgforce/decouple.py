"""Per-pair blind source separation with physical ambiguity resolution.

Each sensor pair is whitened and separated by a fixed-point negentropy
iteration (Gaussian-family nonlinearity). The three inherent ICA
ambiguities are then resolved with physical knowledge:

* order  - each component is assigned to the sensor channel where its
  estimated mixing coefficient is largest (near-ties fall back to the
  calibration's dominant-axis prior);
* amplitude - the mixing column is divided by the assigned coefficient,
  so the rescaled mixing matrix has a unit diagonal and each recovered
  source is expressed in picometres as seen at its own sensor;
* sign - dividing by the signed coefficient fixes the component's sign
  so that converting to force through the signed calibration slope
  reproduces the shift-direction/force-direction convention.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .calibration import CalibrationModel
from .classify import MULTIAXIAL, UNIAXIAL, LoadingClass
from .errors import (
    AssignmentError,
    DegenerateDataError,
    InsufficientDataError,
    ValidationError,
)
from .frames import WavelengthFrame

MIN_WHITEN_SAMPLES = 32


@dataclass(frozen=True)
class IcaConfig:
    a2: float = 1.0
    max_iterations: int = 200
    convergence_tol: float = 1e-8
    rng_seed: int = 0
    deflation_order: str = "parallel"  # "parallel" (symmetric) or "sequential"

    def __post_init__(self):
        if not 1.0 <= self.a2 <= 2.0:
            raise ValidationError("a2 must be in [1, 2]")
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")
        if self.convergence_tol <= 0:
            raise ValidationError("convergence_tol must be positive")
        if self.deflation_order not in ("parallel", "sequential"):
            raise ValidationError("deflation_order must be 'parallel' or 'sequential'")


def center_whiten(pair: np.ndarray):
    """Center and whiten a 2xn block; returns (whitened, whitening, means).

    The whitening matrix comes from the eigendecomposition of the sample
    covariance; output has zero mean and identity covariance.
    """
    x = np.asarray(pair, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != 2:
        raise ValidationError(f"expected a 2xn block, got shape {x.shape}")
    n = x.shape[1]
    if n < MIN_WHITEN_SAMPLES:
        raise InsufficientDataError(f"need at least {MIN_WHITEN_SAMPLES} samples, got {n}")
    means = x.mean(axis=1)
    xc = x - means[:, None]
    var = xc.var(axis=1)
    if np.any(var == 0.0):
        raise DegenerateDataError("zero-variance channel cannot be whitened")
    cov = xc @ xc.T / n
    eigvals, eigvecs = np.linalg.eigh(cov)
    if eigvals[0] <= 1e-12 * eigvals[-1]:
        raise DegenerateDataError("channels are (nearly) perfectly correlated")
    whitening = (eigvecs / np.sqrt(eigvals)).T  # rows: eigvecs^T scaled
    return whitening @ xc, whitening, means


def _contrast_g(u: np.ndarray, a2: float):
    e = np.exp(-a2 * u * u / 2.0)
    return u * e, (1.0 - a2 * u * u) * e


def _symmetric_decorrelate(w: np.ndarray) -> np.ndarray:
    s = w @ w.T
    vals, vecs = np.linalg.eigh(s)
    inv_sqrt = (vecs / np.sqrt(vals)) @ vecs.T
    return inv_sqrt @ w


def fastica_pair(whitened: np.ndarray, cfg: IcaConfig, rng=None):
    """Two unit-norm unmixing rows from the fixed-point iteration.

    Returns (w_raw, converged, iterations); rows are mutually orthogonal
    and unit norm. Non-convergence returns the best estimate with
    converged=False.
    """
    z = np.asarray(whitened, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] != 2:
        raise ValidationError(f"expected whitened 2xn data, got shape {z.shape}")
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)

    def update(w_row):
        u = w_row @ z
        g, g_prime = _contrast_g(u, cfg.a2)
        return (z * g).mean(axis=1) - g_prime.mean() * w_row

    if cfg.deflation_order == "parallel":
        w = rng.standard_normal((2, 2))
        w = _symmetric_decorrelate(w)
        converged = False
        iterations = 0
        for iterations in range(1, cfg.max_iterations + 1):
            w_new = np.vstack([update(w[0]), update(w[1])])
            w_new = _symmetric_decorrelate(w_new)
            agreement = np.abs(np.sum(w_new * w, axis=1))
            w = w_new
            if np.all(agreement > 1.0 - cfg.convergence_tol):
                converged = True
                break
        rows = w
    else:
        rows = np.zeros((2, 2))
        converged = True
        iterations = 0
        for i in range(2):
            w_row = rng.standard_normal(2)
            w_row /= np.linalg.norm(w_row)
            row_converged = False
            for it in range(1, cfg.max_iterations + 1):
                w_next = update(w_row)
                for j in range(i):  # deflate against found rows
                    w_next = w_next - (w_next @ rows[j]) * rows[j]
                norm = np.linalg.norm(w_next)
                if norm == 0.0:
                    w_next = rng.standard_normal(2)
                    for j in range(i):
                        w_next = w_next - (w_next @ rows[j]) * rows[j]
                    norm = np.linalg.norm(w_next)
                w_next /= norm
                agreement = abs(w_next @ w_row)
                w_row = w_next
                if agreement > 1.0 - cfg.convergence_tol:
                    row_converged = True
                    break
            rows[i] = w_row
            iterations = max(iterations, it)
            converged = converged and row_converged

    rows = rows / np.linalg.norm(rows, axis=1, keepdims=True)
    return rows, converged, iterations


@dataclass(frozen=True)
class UnmixingEstimate:
    """Separation result for one sensor pair, with ambiguities resolved.

    ``sources_pm`` are centered (the separation works on mean-free data);
    ``mean_allocation_pm``, when set, is the constant level per slot that
    the decoupler added back to form the final components.
    """

    pair_id: int
    w_raw: np.ndarray  # 2x2 whitened-space unmixing, unit-norm rows
    whitening: np.ndarray  # 2x2
    means_pm: np.ndarray  # 2, sample means (removed before separation)
    a_hat: np.ndarray  # 2x2 estimated mixing, original component order
    w_re: np.ndarray  # 2x2 rescaled mixing, unit diagonal, channel order
    order: tuple  # order[slot] = original component index at that channel slot
    signs: tuple  # +-1 per slot (sign of the applied scale factor)
    scales: tuple  # full scale factor per slot
    converged: bool
    iterations: int
    sources_pm: np.ndarray | None = None  # 2xn, channel-slot order, rescaled
    recon_rel_error: float | None = None
    mean_allocation_pm: np.ndarray | None = None  # 2, per slot


def _cosine(u, v) -> float:
    norm = np.linalg.norm(u) * np.linalg.norm(v)
    return 0.0 if norm == 0.0 else abs(float(u @ v)) / norm


def _assign_components(a_hat: np.ndarray, pair_matrix_pm, tie_rtol: float):
    """Map each component (column) to a distinct channel (row).

    The assignment is the permutation maximizing the product of the
    assigned |coefficients| (which reduces to per-column argmax whenever
    that is unambiguous). A weak component's column direction is noisy,
    so near-ties fall back to cosine similarity against the physically
    expected columns: the calibration column of the channel's axis or the
    equal-entry column of the shared instability. Genuinely ambiguous
    cases (both components aligned with the same channel) raise.
    """
    mags = np.abs(a_hat)
    # perm maps component j -> channel perm[j]
    perm_scores = {
        (0, 1): mags[0, 0] * mags[1, 1],
        (1, 0): mags[1, 0] * mags[0, 1],
    }
    ranked = sorted(perm_scores, key=perm_scores.get, reverse=True)
    best, other = ranked
    if perm_scores[best] > perm_scores[other] * (1.0 + tie_rtol):
        assignment = best
    else:
        if pair_matrix_pm is None:
            raise AssignmentError(
                "component-to-channel assignment is ambiguous and no "
                f"calibration prior is available; |a_hat| = {mags.tolist()}"
            )
        priors = [pair_matrix_pm[:, 0], pair_matrix_pm[:, 1], np.ones(2)]

        def prior_score(perm):
            total = 0.0
            for j, channel in enumerate(perm):
                col = a_hat[:, j]
                total += max(_cosine(col, priors[channel]), _cosine(col, priors[2]))
            return total

        s_best, s_other = prior_score(best), prior_score(other)
        if abs(s_best - s_other) < 1e-6:
            raise AssignmentError(
                "both components are dominated by the same channel; "
                f"|a_hat| = {mags.tolist()}"
            )
        assignment = best if s_best > s_other else other
    # order[slot] = component index at that channel slot
    order = [0, 0]
    for j, channel in enumerate(assignment):
        order[channel] = j
    return tuple(order)


def resolve_ambiguities(
    w_raw: np.ndarray,
    whitening: np.ndarray,
    means: np.ndarray,
    pair_id: int = 1,
    loading: LoadingClass | None = None,
    calib: CalibrationModel | None = None,
    observations: np.ndarray | None = None,
    converged: bool = True,
    iterations: int = 0,
    tie_rtol: float = 0.1,
) -> UnmixingEstimate:
    """Fix order, amplitude and sign of a raw separation result.

    When the observed 2xn block is supplied, the rescaled sources and the
    reconstruction residual are computed as well.
    """
    unmix_obs = np.asarray(w_raw) @ np.asarray(whitening)
    a_hat = np.linalg.inv(unmix_obs)
    pair_matrix = calib.pair_matrix_pm(pair_id) if calib is not None else None
    order = _assign_components(a_hat, pair_matrix, tie_rtol)
    a_ord = a_hat[:, list(order)]
    scales = np.array([a_ord[0, 0], a_ord[1, 1]])
    if np.any(np.abs(scales) < 1e-300):
        raise AssignmentError("an assigned mixing coefficient is zero; cannot unitize")
    w_re = a_ord / scales[None, :]
    signs = tuple(1 if s > 0 else -1 for s in scales)

    sources = None
    recon = None
    if observations is not None:
        x = np.asarray(observations, dtype=np.float64)
        xc = x - np.asarray(means)[:, None]
        raw_sources = unmix_obs @ xc
        denom = np.linalg.norm(xc)
        recon_err = np.linalg.norm(a_hat @ raw_sources - xc)
        recon = float(recon_err / denom) if denom > 0 else 0.0
        sources = raw_sources[list(order)] * scales[:, None]

    return UnmixingEstimate(
        pair_id=pair_id,
        w_raw=np.asarray(w_raw),
        whitening=np.asarray(whitening),
        means_pm=np.asarray(means),
        a_hat=a_hat,
        w_re=w_re,
        order=order,
        signs=signs,
        scales=tuple(float(s) for s in scales),
        converged=converged,
        iterations=iterations,
        sources_pm=sources,
        recon_rel_error=recon,
    )


@dataclass(frozen=True)
class RecoveredComponents:
    """Separated wavelength components of one sensor pair, in pm.

    Multiaxial loading fills both force slots; uniaxial loading fills the
    loaded axis plus the instability series (the unloaded axis is None).
    """

    pair: tuple  # (1, 2) or (3, 4)
    x_pm: np.ndarray | None
    y_pm: np.ndarray | None
    instability_pm: np.ndarray | None
    loading: LoadingClass
    estimate: UnmixingEstimate


def _noise_slot(a_ord_unit: np.ndarray) -> int:
    """Slot whose mixing column lies closest to the shared-instability
    direction (equal entry on both channels)."""
    ones = np.ones(2) / np.sqrt(2.0)
    sims = []
    for s in range(2):
        col = a_ord_unit[:, s]
        norm = np.linalg.norm(col)
        sims.append(abs(float(col @ ones)) / norm if norm > 0 else 0.0)
    return int(np.argmax(sims))


def _allocate_means(
    means: np.ndarray,
    offsets: np.ndarray,
    pair_matrix: np.ndarray,
    force_slots: tuple,
) -> np.ndarray:
    """Split the pair's mean level (above the calibration offsets) between
    the two component slots.

    The separation itself is mean-free, so a constant force level is
    invisible to it; the calibration model is the only thing that can say
    how much of the DC belongs to each component. Each slot's model column
    is its calibration column normalized at its own sensor, or the unit
    column for the shared-instability slot.
    """
    diag = np.array([pair_matrix[0, 0], pair_matrix[1, 1]])
    if np.any(diag == 0.0):
        raise AssignmentError("calibration diagonal has a zero entry; "
                              "cannot allocate the mean level")
    columns = []
    for slot in range(2):
        if force_slots[slot]:
            columns.append(pair_matrix[:, slot] / diag[slot])
        else:
            columns.append(np.ones(2))
    model = np.column_stack(columns)
    if abs(np.linalg.det(model)) < 1e-12:
        raise AssignmentError("mean-allocation model is singular for this pair")
    return np.linalg.solve(model, means - offsets)


def decouple_pair(
    pair_block: np.ndarray,
    pair_id: int,
    loading: LoadingClass,
    calib: CalibrationModel,
    cfg: IcaConfig,
    rng=None,
) -> RecoveredComponents:
    """Separate one 2xn sensor-pair block according to its loading class."""
    z, whitening, means = center_whiten(pair_block)
    w_raw, converged, iterations = fastica_pair(z, cfg, rng=rng)
    est = resolve_ambiguities(
        w_raw, whitening, means,
        pair_id=pair_id, loading=loading, calib=calib,
        observations=pair_block, converged=converged, iterations=iterations,
    )
    pair_label = (1, 2) if pair_id == 1 else (3, 4)
    if loading.kind == MULTIAXIAL:
        force_slots = (True, True)
        noise = None
    else:
        noise = _noise_slot(est.w_re)
        force_slots = tuple(slot != noise for slot in range(2))
    allocation = _allocate_means(
        means, calib.pair_offsets_pm(pair_id), calib.pair_matrix_pm(pair_id),
        force_slots,
    )
    est = dataclasses.replace(est, mean_allocation_pm=allocation)
    final = est.sources_pm + allocation[:, None]
    if loading.kind == MULTIAXIAL:
        return RecoveredComponents(
            pair=pair_label, x_pm=final[0], y_pm=final[1],
            instability_pm=None, loading=loading, estimate=est,
        )
    force = 1 - noise
    x = final[0] if force == 0 else None
    y = final[1] if force == 1 else None
    return RecoveredComponents(
        pair=pair_label, x_pm=x, y_pm=y,
        instability_pm=final[noise], loading=loading, estimate=est,
    )


def decouple_frame(
    frame: WavelengthFrame,
    verdicts,
    calib: CalibrationModel,
    cfg: IcaConfig,
):
    """Separate both sensor pairs of a (filtered) frame.

    ``verdicts`` is the (pair12, pair34) LoadingClass tuple from the
    classifier. Each pair draws from an independent seeded stream.
    """
    results = []
    for pair_id, loading in ((1, verdicts[0]), (2, verdicts[1])):
        rng = np.random.default_rng([cfg.rng_seed, pair_id])
        results.append(
            decouple_pair(frame.pair(pair_id), pair_id, loading, calib, cfg, rng=rng)
        )
    return tuple(results)
