"""Tearing-phase force statistics: spread, direction, whiteness and
stationarity tests.

Implements the summary (mean +- SD, coefficient of variation), the force
direction angle arccot(F_x/F_y), a portmanteau whiteness test, a KPSS
stationarity test with interpolated table p-values, and an augmented
Dickey-Fuller unit-root test with first-order differencing and a
three-way verdict (stationary / first-difference-stationary /
non-stationary).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaincc
from statsmodels.tsa.stattools import adfuller

from .errors import DegenerateDataError, InsufficientDataError, ValidationError
from .forces import ForceSeries

STATIONARY = "stationary"
DIFF_STATIONARY = "first-difference-stationary"
NON_STATIONARY = "non-stationary"

# Upper-tail critical values at p = 10%, 5%, 2.5%, 1%.
_KPSS_TABLE = {
    "level": np.array([0.347, 0.463, 0.574, 0.739]),
    "trend": np.array([0.119, 0.146, 0.176, 0.216]),
}
_KPSS_PVALUES = np.array([0.10, 0.05, 0.025, 0.01])

_ADF_REGRESSIONS = {"constant": "c", "constant+trend": "ct"}


@dataclass(frozen=True)
class TestConfig:
    lb_lags: int | None = None  # default min(10, n//5)
    kpss_regression: str = "trend"
    adf_regression: str = "constant+trend"
    adf_max_lag: int | None = None  # default floor(12*(n/100)**0.25)
    alpha: float = 0.05

    def __post_init__(self):
        if self.lb_lags is not None and self.lb_lags < 1:
            raise ValidationError("lb_lags must be >= 1")
        if self.kpss_regression not in _KPSS_TABLE:
            raise ValidationError("kpss_regression must be 'level' or 'trend'")
        if self.adf_regression not in _ADF_REGRESSIONS:
            raise ValidationError(
                "adf_regression must be 'constant' or 'constant+trend'"
            )
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError("alpha must be in (0, 1)")


def summary_stats(series):
    """(mean, sample SD, coefficient of variation). CoV is None when the
    mean is exactly zero."""
    x = np.asarray(series, dtype=np.float64)
    if x.size < 2:
        raise InsufficientDataError("need at least 2 samples")
    mean = float(x.mean())
    sd = float(x.std(ddof=1))
    cov = None if mean == 0.0 else sd / abs(mean)
    return mean, sd, cov


@dataclass(frozen=True)
class ForceAngle:
    angles_deg: np.ndarray
    mean_deg: float
    sd_deg: float
    n_zero_fx: int  # samples flagged because F_x was exactly zero


def force_angle(fx, fy) -> ForceAngle:
    """Per-sample arccot(F_x/F_y) in degrees, folded into [0, 180)."""
    fx = np.asarray(fx, dtype=np.float64)
    fy = np.asarray(fy, dtype=np.float64)
    if fx.shape != fy.shape or fx.ndim != 1:
        raise ValidationError("fx and fy must be aligned 1-d arrays")
    angles = np.empty(fx.size)
    zero_fx = 0
    for i in range(fx.size):
        if fy[i] == 0.0:
            if fx[i] == 0.0:
                zero_fx += 1
                angles[i] = 90.0
            else:
                angles[i] = 0.0  # ratio is +-infinity; arccot folds to 0
            continue
        if fx[i] == 0.0:
            zero_fx += 1
        angles[i] = np.degrees(np.arctan2(1.0, fx[i] / fy[i])) % 180.0
    sd = float(angles.std(ddof=1)) if angles.size > 1 else 0.0
    return ForceAngle(angles, float(angles.mean()), sd, zero_fx)


@dataclass(frozen=True)
class LjungBoxResult:
    q_statistic: float
    p_value: float
    lags: int


def ljung_box(series, lags: int | None = None) -> LjungBoxResult:
    """Portmanteau whiteness test on the first ``lags`` autocorrelations."""
    x = np.asarray(series, dtype=np.float64)
    n = x.size
    if lags is None:
        lags = max(1, min(10, n // 5))
    if lags < 1:
        raise ValidationError("lags must be >= 1")
    if n <= lags + 1:
        raise InsufficientDataError(f"need more than lags+1={lags + 1} samples")
    xc = x - x.mean()
    denom = float(xc @ xc)
    if denom == 0.0:
        raise DegenerateDataError("constant series has undefined autocorrelations")
    q = 0.0
    for k in range(1, lags + 1):
        rho = float(xc[k:] @ xc[:-k]) / denom
        q += rho * rho / (n - k)
    q *= n * (n + 2.0)
    p = float(gammaincc(lags / 2.0, q / 2.0))
    return LjungBoxResult(q_statistic=float(q), p_value=p, lags=lags)


@dataclass(frozen=True)
class KpssResult:
    statistic: float
    p_value: float  # interpolated, clamped to [0.01, 0.10]
    bandwidth: int
    regression: str
    out_of_table: bool


def kpss_test(series, cfg: TestConfig = TestConfig()) -> KpssResult:
    """KPSS stationarity test with Bartlett-kernel long-run variance."""
    x = np.asarray(series, dtype=np.float64)
    n = x.size
    if n < 30:
        raise InsufficientDataError("KPSS needs at least 30 samples")
    if cfg.kpss_regression == "level":
        resid = x - x.mean()
    else:
        t = np.arange(n, dtype=np.float64)
        design = np.column_stack([np.ones(n), t])
        coef, *_ = np.linalg.lstsq(design, x, rcond=None)
        resid = x - design @ coef
    bandwidth = int(np.floor(4.0 * (n / 100.0) ** 0.25))
    partial = np.cumsum(resid)
    eta = float(partial @ partial) / (n * n)
    lrv = float(resid @ resid) / n
    for k in range(1, bandwidth + 1):
        gamma = float(resid[k:] @ resid[:-k]) / n
        lrv += 2.0 * (1.0 - k / (bandwidth + 1.0)) * gamma
    if lrv <= 0.0:
        statistic = 0.0
    else:
        statistic = eta / lrv
    table = _KPSS_TABLE[cfg.kpss_regression]
    out_of_table = statistic < table[0] or statistic > table[-1]
    p = float(np.interp(statistic, table, _KPSS_PVALUES))
    p = float(np.clip(p, 0.01, 0.10))
    return KpssResult(
        statistic=statistic, p_value=p, bandwidth=bandwidth,
        regression=cfg.kpss_regression, out_of_table=bool(out_of_table),
    )


@dataclass(frozen=True)
class AdfResult:
    statistics: dict  # differencing order -> ADF statistic
    p_values: dict  # differencing order -> MacKinnon p-value
    used_lags: dict  # differencing order -> AIC-selected lag order
    verdict: str
    alpha: float


def adf_test(series, cfg: TestConfig = TestConfig()) -> AdfResult:
    """Unit-root test at d=0 and, if not rejected, at d=1."""
    x = np.asarray(series, dtype=np.float64)
    if x.size < 30:
        raise InsufficientDataError("ADF needs at least 30 samples")
    regression = _ADF_REGRESSIONS[cfg.adf_regression]
    max_lag = cfg.adf_max_lag
    if max_lag is None:
        max_lag = int(np.floor(12.0 * (x.size / 100.0) ** 0.25))

    def run(y):
        try:
            stat, pvalue, usedlag, *_ = adfuller(
                y, maxlag=max_lag, regression=regression, autolag="AIC"
            )
        except ValueError as exc:
            msg = str(exc)
            if "constant" in msg.lower() or "invalid input" in msg.lower():
                raise DegenerateDataError(f"ADF cannot run: {msg}") from exc
            raise InsufficientDataError(f"ADF cannot run: {msg}") from exc
        return float(stat), float(pvalue), int(usedlag)

    stats = {}
    pvals = {}
    lags = {}
    stats[0], pvals[0], lags[0] = run(x)
    if pvals[0] < cfg.alpha:
        verdict = STATIONARY
    else:
        stats[1], pvals[1], lags[1] = run(np.diff(x))
        verdict = DIFF_STATIONARY if pvals[1] < cfg.alpha else NON_STATIONARY
    return AdfResult(
        statistics=stats, p_values=pvals, used_lags=lags,
        verdict=verdict, alpha=cfg.alpha,
    )


@dataclass(frozen=True)
class StationarityReport:
    """All tearing-phase statistics for one force column (mN scale)."""

    column: str
    n_samples: int
    mean_mn: float
    sd_mn: float
    cov: float | None
    angle_mean_deg: float | None
    angle_sd_deg: float | None
    lb_q: float | None
    lb_pvalue: float | None
    kpss_statistic: float | None
    kpss_pvalue: float | None
    kpss_out_of_table: bool | None
    adf_pvalues: dict | None
    verdict: str | None
    notes: tuple = ()


_ANGLE_PARTNER = {"fx1": "fy1", "fx2": "fy2"}


def analyze_session(
    forces: ForceSeries,
    window: tuple,
    cfg: TestConfig = TestConfig(),
) -> dict:
    """StationarityReport per force column over the tearing-phase window.

    ``window`` is a half-open (start, stop) sample range. Degenerate
    columns (e.g. constant force) get None for the affected tests with an
    explanatory note; a window too short for the configured tests raises.
    """
    start, stop = window
    n = forces.n_samples
    if not (0 <= start < stop <= n):
        raise ValidationError(f"window {window} is not inside 0..{n}")
    columns = {
        "fx1": forces.fx1, "fy1": forces.fy1,
        "fx2": forces.fx2, "fy2": forces.fy2, "fz": forces.fz,
    }
    reports = {}
    for name, col in columns.items():
        segment_mn = col[start:stop] * 1000.0
        mean, sd, cov = summary_stats(segment_mn)
        notes = []
        angle_mean = angle_sd = None
        partner = _ANGLE_PARTNER.get(name)
        if partner is not None:
            angle = force_angle(col[start:stop], columns[partner][start:stop])
            angle_mean, angle_sd = angle.mean_deg, angle.sd_deg
            if angle.n_zero_fx:
                notes.append(f"{angle.n_zero_fx} samples with zero F_x in angle")
        lb_q = lb_p = None
        try:
            lb = ljung_box(segment_mn, cfg.lb_lags)
            lb_q, lb_p = lb.q_statistic, lb.p_value
        except DegenerateDataError as exc:
            notes.append(f"ljung-box skipped: {exc}")
        kpss_stat = kpss_p = kpss_flag = None
        kpss = kpss_test(segment_mn, cfg)
        kpss_stat, kpss_p, kpss_flag = kpss.statistic, kpss.p_value, kpss.out_of_table
        adf_p = verdict = None
        try:
            adf = adf_test(segment_mn, cfg)
            adf_p, verdict = adf.p_values, adf.verdict
        except DegenerateDataError as exc:
            notes.append(f"adf skipped: {exc}")
        reports[name] = StationarityReport(
            column=name,
            n_samples=stop - start,
            mean_mn=mean,
            sd_mn=sd,
            cov=cov,
            angle_mean_deg=angle_mean,
            angle_sd_deg=angle_sd,
            lb_q=lb_q,
            lb_pvalue=lb_p,
            kpss_statistic=kpss_stat,
            kpss_pvalue=kpss_p,
            kpss_out_of_table=kpss_flag,
            adf_pvalues=adf_p,
            verdict=verdict,
            notes=tuple(notes),
        )
    return reports
