"""Unit-root (ADF, Phillips-Perron) and level-stationarity (KPSS) tests.

All three use constant-only deterministic terms.  Lag and bandwidth
choices are fixed rules and are echoed in every result:

* ADF lag order: ``floor(12 * (n/100) ** (1/4))`` (Schwert)
* PP / KPSS Newey-West bandwidth: ``floor(4 * (n/100) ** (2/9))``, Bartlett kernel

ADF and PP p-values use MacKinnon's (1994) response surface for the
constant case, clamped to [0.001, 0.99]; KPSS p-values interpolate the
standard level-case table and are clamped to [0.01, 0.10].
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from trafficvol.errors import InsufficientDataError, TrafficVolError

MIN_LENGTH = 20
DEFAULT_ALPHA = 0.05

# MacKinnon (1994), tau statistic, one unit root, constant-only regression.
_TAU_MAX = 2.74
_TAU_MIN = -18.83
_TAU_STAR = -1.61
_TAU_SMALLP = (2.1659, 1.4412, 0.038269)
_TAU_LARGEP = (1.7339, 0.93202, -0.12745, -0.010368)
_UR_P_RANGE = (0.001, 0.99)

# KPSS level-stationarity critical values: statistic -> upper-tail probability
_KPSS_CRIT = (0.347, 0.463, 0.574, 0.739)
_KPSS_PVALS = (0.10, 0.05, 0.025, 0.01)


class TestKind(str, enum.Enum):
    ADF = "ADF"
    PP = "PP"
    KPSS = "KPSS"


class TestVerdict(str, enum.Enum):
    STATIONARY = "stationary"
    NON_STATIONARY = "non_stationary"
    INCONCLUSIVE = "inconclusive"


class Classification(str, enum.Enum):
    STATIONARY = "stationary"
    DIFFERENCE_STATIONARY = "difference_stationary"
    NON_STATIONARY = "non_stationary"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class UnitRootTestResult:
    test: TestKind
    statistic: float
    p_value: float
    lags_or_bandwidth: int
    verdict: TestVerdict
    nobs: int
    p_clamped: bool = False

    def to_dict(self) -> dict:
        return {
            "stat": self.statistic,
            "p": self.p_value,
            "lags": self.lags_or_bandwidth,
            "verdict": self.verdict.value,
            "nobs": self.nobs,
            "p_clamped": self.p_clamped,
        }


@dataclass(frozen=True)
class StationarityReport:
    adf: UnitRootTestResult
    pp: UnitRootTestResult
    kpss: UnitRootTestResult
    kpss_diff: UnitRootTestResult
    classification: Classification

    def to_dict(self) -> dict:
        return {
            "adf": self.adf.to_dict(),
            "pp": self.pp.to_dict(),
            "kpss": self.kpss.to_dict(),
            "kpss_diff": self.kpss_diff.to_dict(),
            "classification": self.classification.value,
        }


def schwert_lags(n: int) -> int:
    return int(math.floor(12.0 * (n / 100.0) ** 0.25))


def nw_bandwidth(n: int) -> int:
    return int(math.floor(4.0 * (n / 100.0) ** (2.0 / 9.0)))


def difference(series) -> np.ndarray:
    y = np.asarray(series, dtype=float).ravel()
    if y.size < 2:
        raise InsufficientDataError("differencing needs at least 2 observations")
    return np.diff(y)


def _as_series(series, min_length: int = MIN_LENGTH) -> np.ndarray:
    y = np.asarray(series, dtype=float).ravel()
    if y.size < min_length:
        raise InsufficientDataError(f"need at least {min_length} observations, got {y.size}")
    if not np.all(np.isfinite(y)):
        raise TrafficVolError("series contains non-finite values")
    if np.all(y == y[0]):
        raise TrafficVolError("constant series: the test regression has zero variance")
    return y


def _ols(lhs: np.ndarray, rhs: np.ndarray):
    beta, *_ = np.linalg.lstsq(rhs, lhs, rcond=None)
    resid = lhs - rhs @ beta
    dof = rhs.shape[0] - rhs.shape[1]
    if dof < 1:
        raise InsufficientDataError("too few observations for the chosen lag order")
    s2 = float(resid @ resid) / dof
    if not s2 > 0:
        raise TrafficVolError("zero residual variance in the test regression")
    cov = s2 * np.linalg.inv(rhs.T @ rhs)
    return beta, resid, cov, s2


def _long_run_variance(u: np.ndarray, bandwidth: int) -> float:
    """Newey-West (Bartlett) long-run variance, 1/n normalisation, no demeaning."""
    n = u.size
    lrv = float(u @ u) / n
    for j in range(1, bandwidth + 1):
        lrv += 2.0 * (1.0 - j / (bandwidth + 1.0)) * float(u[j:] @ u[:-j]) / n
    return lrv


def mackinnon_p(stat: float) -> tuple[float, bool]:
    """Approximate p-value of a constant-case Dickey-Fuller tau statistic.

    Returns ``(p, clamped)``.
    """
    if stat > _TAU_MAX:
        p = 1.0
    elif stat < _TAU_MIN:
        p = 0.0
    else:
        coef = _TAU_SMALLP if stat <= _TAU_STAR else _TAU_LARGEP
        p = float(special.ndtr(np.polyval(coef[::-1], stat)))
    lo, hi = _UR_P_RANGE
    clamped = not (lo <= p <= hi)
    return min(max(p, lo), hi), clamped


def kpss_p(stat: float) -> tuple[float, bool]:
    p = float(np.interp(stat, _KPSS_CRIT, _KPSS_PVALS))
    return p, not (_KPSS_CRIT[0] <= stat <= _KPSS_CRIT[-1])


def _unit_root_verdict(p: float, alpha: float) -> TestVerdict:
    return TestVerdict.STATIONARY if p <= alpha else TestVerdict.INCONCLUSIVE


def adf_test(series, max_lag: int | None = None, alpha: float = DEFAULT_ALPHA) -> UnitRootTestResult:
    y = _as_series(series)
    n = y.size
    p = schwert_lags(n) if max_lag is None else int(max_lag)
    if p < 0:
        raise TrafficVolError("lag order must be non-negative")
    dy = np.diff(y)
    nobs = dy.size - p
    if nobs < p + 3:
        raise InsufficientDataError(f"series of length {n} is too short for {p} lags")
    cols = [np.ones(nobs), y[p:-1]]
    for j in range(1, p + 1):
        cols.append(dy[p - j:dy.size - j])
    rhs = np.column_stack(cols)
    beta, _, cov, _ = _ols(dy[p:], rhs)
    stat = float(beta[1] / math.sqrt(cov[1, 1]))
    pval, clamped = mackinnon_p(stat)
    return UnitRootTestResult(TestKind.ADF, stat, pval, p, _unit_root_verdict(pval, alpha), nobs, clamped)


def pp_test(series, bandwidth: int | None = None, alpha: float = DEFAULT_ALPHA) -> UnitRootTestResult:
    """Phillips-Perron Z-tau test."""
    y = _as_series(series)
    lags = nw_bandwidth(y.size) if bandwidth is None else int(bandwidth)
    rhs = np.column_stack([y[:-1], np.ones(y.size - 1)])
    beta, u, cov, s2 = _ols(y[1:], rhs)
    n = u.size
    k = rhs.shape[1]
    lam2 = _long_run_variance(u, lags)
    if not lam2 > 0:
        raise TrafficVolError("non-positive long-run variance estimate")
    lam = math.sqrt(lam2)
    s = math.sqrt(s2)
    gamma0 = s2 * (n - k) / n
    sigma = math.sqrt(cov[0, 0])
    rho = float(beta[0])
    stat = math.sqrt(gamma0 / lam2) * ((rho - 1.0) / sigma) - 0.5 * ((lam2 - gamma0) / lam) * (n * sigma / s)
    pval, clamped = mackinnon_p(stat)
    return UnitRootTestResult(TestKind.PP, stat, pval, lags, _unit_root_verdict(pval, alpha), n, clamped)


def kpss_test(series, bandwidth: int | None = None, alpha: float = DEFAULT_ALPHA) -> UnitRootTestResult:
    """KPSS test of the level-stationarity null."""
    y = _as_series(series)
    n = y.size
    lags = nw_bandwidth(n) if bandwidth is None else int(bandwidth)
    u = y - y.mean()
    lam = _long_run_variance(u, lags)
    if not lam > 0:
        raise TrafficVolError("non-positive long-run variance estimate")
    partial = np.cumsum(u)
    stat = float(partial @ partial) / (n * n * lam)
    pval, clamped = kpss_p(stat)
    verdict = TestVerdict.NON_STATIONARY if pval <= alpha else TestVerdict.INCONCLUSIVE
    return UnitRootTestResult(TestKind.KPSS, stat, pval, lags, verdict, n, clamped)


def classify(series, alpha: float = DEFAULT_ALPHA) -> StationarityReport:
    """Run ADF, PP, KPSS and KPSS-on-differences and combine them.

    ADF drives the unit-root side of the decision; PP is reported alongside.
    """
    y = _as_series(series, MIN_LENGTH + 1)
    adf = adf_test(y, alpha=alpha)
    pp = pp_test(y, alpha=alpha)
    kpss = kpss_test(y, alpha=alpha)
    kpss_diff = kpss_test(difference(y), alpha=alpha)

    adf_stat = adf.verdict is TestVerdict.STATIONARY
    kpss_non = kpss.verdict is TestVerdict.NON_STATIONARY
    if adf_stat and not kpss_non:
        cls = Classification.STATIONARY
    elif adf_stat and kpss_non and kpss_diff.verdict is TestVerdict.INCONCLUSIVE:
        cls = Classification.DIFFERENCE_STATIONARY
    elif not adf_stat and kpss_non:
        cls = Classification.NON_STATIONARY
    else:
        cls = Classification.INCONCLUSIVE
    return StationarityReport(adf, pp, kpss, kpss_diff, cls)
