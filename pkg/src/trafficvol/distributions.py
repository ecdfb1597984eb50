"""Maximum-likelihood fitting and evaluation of the candidate volume models.

Five continuous families are supported: log-normal, Gaussian, Weibull,
exponential and (continuous, lower-truncated) power-law.  Everything here is
a pure function of its inputs; :class:`DistFit` is frozen.

Densities, CDFs and quantiles accept scalars or array-likes and return the
same shape (a plain ``float`` for scalar input).
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass
from typing import Any, Union

import numpy as np
from numba import njit
from scipy import special

from trafficvol.errors import ConvergenceError, DegenerateFitError, DomainError

ArrayLike = Union[float, np.ndarray, list]

WEIBULL_TOL = 1e-10
WEIBULL_MAX_ITER = 200
POWER_LAW_XMIN_QUANTILE = 0.9


class Family(str, enum.Enum):
    LOGNORMAL = "lognormal"
    GAUSSIAN = "gaussian"
    WEIBULL = "weibull"
    EXPONENTIAL = "exponential"
    POWER_LAW = "power_law"

    @classmethod
    def parse(cls, value: "str | Family") -> "Family":
        if isinstance(value, Family):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"normal": "gaussian", "powerlaw": "power_law", "log_normal": "lognormal"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise DomainError(f"unknown distribution family {value!r}") from None


@dataclass(frozen=True)
class LogNormalParams:
    mu: float
    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma) and math.isfinite(self.mu)):
            raise DomainError(f"log-normal needs finite mu and sigma > 0, got {self}")


@dataclass(frozen=True)
class GaussianParams:
    mu: float
    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma) and math.isfinite(self.mu)):
            raise DomainError(f"Gaussian needs finite mu and sigma > 0, got {self}")


@dataclass(frozen=True)
class WeibullParams:
    k: float
    lambda_: float

    def __post_init__(self):
        if not (self.k > 0 and self.lambda_ > 0):
            raise DomainError(f"Weibull needs k > 0 and lambda > 0, got {self}")

    def to_dict(self) -> dict:
        return {"k": self.k, "lambda": self.lambda_}


@dataclass(frozen=True)
class ExponentialParams:
    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise DomainError(f"exponential needs rate > 0, got {self.rate}")


@dataclass(frozen=True)
class PowerLawParams:
    alpha: float
    xmin: float

    def __post_init__(self):
        if not (self.alpha > 1 and self.xmin > 0):
            raise DomainError(f"power-law needs alpha > 1 and xmin > 0, got {self}")


Params = Union[LogNormalParams, GaussianParams, WeibullParams, ExponentialParams, PowerLawParams]

_PARAM_TYPES = {
    Family.LOGNORMAL: LogNormalParams,
    Family.GAUSSIAN: GaussianParams,
    Family.WEIBULL: WeibullParams,
    Family.EXPONENTIAL: ExponentialParams,
    Family.POWER_LAW: PowerLawParams,
}


def _params_to_dict(params: Params) -> dict:
    if isinstance(params, WeibullParams):
        return params.to_dict()
    return {k: float(v) for k, v in asdict(params).items()}


def _params_from_dict(family: Family, d: dict) -> Params:
    if family is Family.WEIBULL:
        return WeibullParams(k=float(d["k"]), lambda_=float(d["lambda"]))
    return _PARAM_TYPES[family](**{k: float(v) for k, v in d.items()})


@dataclass(frozen=True)
class DistFit:
    """A fitted (or explicitly parameterised) member of one family.

    ``loglik`` is the total log-likelihood of the sample the parameters were
    fitted to and ``n`` the number of samples that entered the likelihood
    (for a power-law, only the tail ``x >= xmin``).  Models built with
    :func:`model` rather than :func:`fit` carry ``n == 0`` and a NaN
    ``loglik``.
    """

    family: Family
    params: Params
    loglik: float
    n: int
    xmin: float | None = None

    # -- evaluation -------------------------------------------------------

    def logpdf(self, x: ArrayLike) -> Any:
        arr = np.asarray(x, dtype=float)
        _check_support(self, arr)
        return _scalar_or_array(x, _logpdf(self, arr))

    def pdf(self, x: ArrayLike) -> Any:
        arr = np.asarray(x, dtype=float)
        _check_support(self, arr)
        return _scalar_or_array(x, np.exp(_logpdf(self, arr)))

    def cdf(self, x: ArrayLike) -> Any:
        return _scalar_or_array(x, _cdf(self, np.asarray(x, dtype=float)))

    def sf(self, x: ArrayLike) -> Any:
        return _scalar_or_array(x, _sf(self, np.asarray(x, dtype=float)))

    def quantile(self, p: ArrayLike) -> Any:
        arr = np.asarray(p, dtype=float)
        if np.any(~((arr > 0) & (arr < 1))):
            raise DomainError("quantile probability must lie strictly inside (0, 1)")
        return _scalar_or_array(p, _quantile(self, arr))

    def sample(self, n: int, seed: int | np.random.Generator | np.random.SeedSequence) -> np.ndarray:
        return sample(self, n, seed)

    # -- serialisation ----------------------------------------------------

    def to_dict(self) -> dict:
        out = {
            "family": self.family.value,
            "params": _params_to_dict(self.params),
            "loglik": float(self.loglik),
            "n": int(self.n),
        }
        if self.xmin is not None:
            out["xmin"] = float(self.xmin)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "DistFit":
        family = Family.parse(d["family"])
        return cls(
            family=family,
            params=_params_from_dict(family, d["params"]),
            loglik=float(d["loglik"]),
            n=int(d["n"]),
            xmin=None if d.get("xmin") is None else float(d["xmin"]),
        )


def model(family: "Family | str", **params: float) -> DistFit:
    """Build a DistFit from known parameters, e.g. ``model("weibull", k=1, lambda_=2)``."""
    family = Family.parse(family)
    if family is Family.WEIBULL and "lambda" in params:
        params["lambda_"] = params.pop("lambda")
    p = _PARAM_TYPES[family](**params)
    xmin = p.xmin if isinstance(p, PowerLawParams) else None
    return DistFit(family=family, params=p, loglik=float("nan"), n=0, xmin=xmin)


def _scalar_or_array(template, arr):
    if np.ndim(template) == 0:
        return float(arr)
    return arr


def _check_support(d: DistFit, x: np.ndarray) -> None:
    f = d.family
    if np.any(np.isnan(x)):
        raise DomainError("NaN is outside every support")
    if f is Family.LOGNORMAL and np.any(x <= 0):
        raise DomainError("log-normal density is defined for x > 0")
    if f in (Family.WEIBULL, Family.EXPONENTIAL) and np.any(x < 0):
        raise DomainError(f"{f.value} density is defined for x >= 0")
    if f is Family.POWER_LAW and np.any(x < d.params.xmin):
        raise DomainError(f"power-law density is defined for x >= xmin={d.params.xmin}")


_LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)


def _logpdf(d: DistFit, x: np.ndarray) -> np.ndarray:
    p = d.params
    f = d.family
    with np.errstate(divide="ignore"):
        if f is Family.LOGNORMAL:
            lx = np.log(x)
            z = (lx - p.mu) / p.sigma
            return -0.5 * z * z - lx - math.log(p.sigma) - _LOG_SQRT_2PI
        if f is Family.GAUSSIAN:
            z = (x - p.mu) / p.sigma
            return -0.5 * z * z - math.log(p.sigma) - _LOG_SQRT_2PI
        if f is Family.WEIBULL:
            r = x / p.lambda_
            return math.log(p.k / p.lambda_) + special.xlogy(p.k - 1, r) - r**p.k
        if f is Family.EXPONENTIAL:
            return math.log(p.rate) - p.rate * x
        if f is Family.POWER_LAW:
            return math.log((p.alpha - 1) / p.xmin) - p.alpha * np.log(x / p.xmin)
    raise AssertionError(f)


def _cdf(d: DistFit, x: np.ndarray) -> np.ndarray:
    p = d.params
    f = d.family
    if f is Family.GAUSSIAN:
        return special.ndtr((x - p.mu) / p.sigma)
    with np.errstate(divide="ignore", invalid="ignore"):
        if f is Family.LOGNORMAL:
            out = special.ndtr((np.log(np.where(x > 0, x, 1.0)) - p.mu) / p.sigma)
            return np.where(x > 0, out, 0.0)
        if f is Family.WEIBULL:
            xp = np.where(x > 0, x, 0.0)
            return -np.expm1(-((xp / p.lambda_) ** p.k))
        if f is Family.EXPONENTIAL:
            xp = np.where(x > 0, x, 0.0)
            return -np.expm1(-p.rate * xp)
        if f is Family.POWER_LAW:
            xp = np.where(x > p.xmin, x, p.xmin)
            return -np.expm1((1 - p.alpha) * np.log(xp / p.xmin))
    raise AssertionError(f)


def _sf(d: DistFit, x: np.ndarray) -> np.ndarray:
    p = d.params
    f = d.family
    if f is Family.GAUSSIAN:
        return special.ndtr(-(x - p.mu) / p.sigma)
    with np.errstate(divide="ignore", invalid="ignore"):
        if f is Family.LOGNORMAL:
            out = special.ndtr(-(np.log(np.where(x > 0, x, 1.0)) - p.mu) / p.sigma)
            return np.where(x > 0, out, 1.0)
        if f is Family.WEIBULL:
            xp = np.where(x > 0, x, 0.0)
            return np.exp(-((xp / p.lambda_) ** p.k))
        if f is Family.EXPONENTIAL:
            return np.exp(-p.rate * np.where(x > 0, x, 0.0))
        if f is Family.POWER_LAW:
            xp = np.where(x > p.xmin, x, p.xmin)
            return (xp / p.xmin) ** (1 - p.alpha)
    raise AssertionError(f)


def _quantile(d: DistFit, q: np.ndarray) -> np.ndarray:
    p = d.params
    f = d.family
    if f is Family.LOGNORMAL:
        return np.exp(p.mu + p.sigma * special.ndtri(q))
    if f is Family.GAUSSIAN:
        return p.mu + p.sigma * special.ndtri(q)
    if f is Family.WEIBULL:
        return p.lambda_ * (-np.log1p(-q)) ** (1.0 / p.k)
    if f is Family.EXPONENTIAL:
        return -np.log1p(-q) / p.rate
    if f is Family.POWER_LAW:
        return p.xmin * np.exp(-np.log1p(-q) / (p.alpha - 1))
    raise AssertionError(f)


# ---------------------------------------------------------------------------
# fitting


def _as_sample(samples, positive: bool) -> np.ndarray:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise DegenerateFitError(f"need at least 2 samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DomainError("samples must be finite")
    if positive and np.any(x <= 0):
        raise DomainError(
            f"{int(np.sum(x <= 0))} non-positive sample(s); this family needs x > 0 "
            "(zero-volume bins usually mean an anomalous trace, see anomaly_screen)"
        )
    if np.all(x == x[0]):
        raise DegenerateFitError("all samples are equal; the fit is degenerate")
    return x


def fit(family: "Family | str", samples, xmin: float | None = None) -> DistFit:
    """Maximum-likelihood fit of ``family`` to ``samples``.

    For the power-law, ``xmin`` may be fixed; otherwise it is chosen by
    minimising the KS distance over the distinct sample values (up to the
    90th percentile of those values).
    """
    family = Family.parse(family)
    x = _as_sample(samples, positive=family is not Family.GAUSSIAN)
    n = x.size

    if family is Family.LOGNORMAL:
        lx = np.log(x)
        mu = float(lx.mean())
        sigma = float(np.sqrt(np.mean((lx - mu) ** 2)))
        if not sigma > 0:
            raise DegenerateFitError("log-values have zero spread")
        params: Params = LogNormalParams(mu, sigma)
    elif family is Family.GAUSSIAN:
        mu = float(x.mean())
        sigma = float(np.sqrt(np.mean((x - mu) ** 2)))
        if not sigma > 0:
            raise DegenerateFitError("samples have zero spread")
        params = GaussianParams(mu, sigma)
    elif family is Family.EXPONENTIAL:
        params = ExponentialParams(1.0 / float(x.mean()))
    elif family is Family.WEIBULL:
        k, lam = _weibull_mle(x)
        params = WeibullParams(k, lam)
    else:
        return _fit_power_law(x, xmin)

    d = DistFit(family, params, loglik=0.0, n=n)
    loglik = float(np.sum(_logpdf(d, x)))
    if not math.isfinite(loglik):
        raise DegenerateFitError(f"non-finite log-likelihood for {family.value} fit")
    return DistFit(family, params, loglik=loglik, n=n)


def _weibull_mle(x: np.ndarray) -> tuple[float, float]:
    """Solve the Weibull shape score equation with a bracketed Newton iteration.

    The profile score ``sum(w ln x)/sum(w) - 1/k - mean(ln x)`` with
    ``w = x**k`` is strictly increasing in ``k``; weights are computed
    relative to ``max(ln x)`` so large volumes do not overflow.
    """
    lx = np.log(x)
    d = lx - lx.mean()
    dmax = float(d.max())
    sd = float(np.sqrt(np.mean(d * d)))

    def score(k: float) -> tuple[float, float]:
        w = np.exp(k * (d - dmax))
        sw = w.sum()
        a = float(w @ d) / sw
        var = float(w @ (d * d)) / sw - a * a
        return a - 1.0 / k, max(var, 0.0) + 1.0 / (k * k)

    k = math.pi / (math.sqrt(6.0) * sd)
    lo, hi = k, k
    for _ in range(WEIBULL_MAX_ITER):
        if score(lo)[0] < 0:
            break
        lo *= 0.5
    for _ in range(WEIBULL_MAX_ITER):
        if score(hi)[0] > 0:
            break
        hi *= 2.0
    else:
        raise ConvergenceError("could not bracket the Weibull shape parameter")

    for _ in range(WEIBULL_MAX_ITER):
        g, dg = score(k)
        if abs(g) < WEIBULL_TOL:
            break
        if g < 0:
            lo = k
        else:
            hi = k
        step = k - g / dg
        k = step if lo < step < hi else 0.5 * (lo + hi)
    else:
        raise ConvergenceError(
            f"Weibull shape did not converge in {WEIBULL_MAX_ITER} iterations (last k={k})"
        )

    log_lam = lx.mean() + dmax + (math.log(np.exp(k * (d - dmax)).sum()) - math.log(x.size)) / k
    return float(k), float(math.exp(log_lam))


@njit(cache=True)
def _xmin_scan(xs, lxs, starts):
    """KS distance and alpha for each candidate tail ``xs[j:]``, ``j`` in ``starts``.

    A candidate's KS loop stops as soon as it reaches the best distance seen
    so far; pruned candidates report ``inf``.
    """
    n = xs.size
    suffix = np.zeros(n + 1)
    for i in range(n - 1, -1, -1):
        suffix[i] = suffix[i + 1] + lxs[i]
    ks = np.full(starts.size, np.inf)
    alphas = np.full(starts.size, np.nan)
    best = np.inf
    # short tails first: cheap, and they set a tight bound early
    for c in range(starts.size - 1, -1, -1):
        j = starts[c]
        m = n - j
        s = suffix[j] - m * lxs[j]
        if m < 2 or not s > 0:
            continue
        alpha = 1.0 + m / s
        d = 0.0
        for i in range(j, n):
            f = -np.expm1((1.0 - alpha) * (lxs[i] - lxs[j]))
            r = i - j + 1
            d = max(d, r / m - f, f - (r - 1) / m)
            if d >= best:
                d = np.inf
                break
        alphas[c] = alpha
        ks[c] = d
        if d < best:
            best = d
    return ks, alphas


def _fit_power_law(x: np.ndarray, xmin: float | None) -> DistFit:
    xs = np.sort(x)
    lxs = np.log(xs)
    n = xs.size

    if xmin is None:
        distinct, first = np.unique(xs, return_index=True)
        cap = np.quantile(distinct, POWER_LAW_XMIN_QUANTILE, method="lower")
        starts = first[distinct <= cap].astype(np.int64)
        ks, alphas = _xmin_scan(xs, lxs, starts)
        if not np.any(np.isfinite(ks)):
            raise DegenerateFitError("no admissible xmin candidate for the power-law tail")
        best = int(np.argmin(ks))
        j, alpha = int(starts[best]), float(alphas[best])
    else:
        if not xmin > 0:
            raise DomainError("power-law xmin must be positive")
        j = int(np.searchsorted(xs, xmin, side="left"))
        m = n - j
        s = float(np.sum(lxs[j:] - math.log(xmin)))
        if m < 2 or not s > 0:
            raise DegenerateFitError(f"tail at xmin={xmin} is too small or degenerate")
        alpha = 1.0 + m / s

    xm = float(xs[j]) if xmin is None else float(xmin)
    tail = xs[j:]
    params = PowerLawParams(alpha=float(alpha), xmin=xm)
    d = DistFit(Family.POWER_LAW, params, loglik=0.0, n=tail.size, xmin=xm)
    loglik = float(np.sum(_logpdf(d, tail)))
    return DistFit(Family.POWER_LAW, params, loglik=loglik, n=tail.size, xmin=xm)


# ---------------------------------------------------------------------------
# functional surface


def pdf(d: DistFit, x: ArrayLike):
    return d.pdf(x)


def logpdf(d: DistFit, x: ArrayLike):
    return d.logpdf(x)


def cdf(d: DistFit, x: ArrayLike):
    return d.cdf(x)


def quantile(d: DistFit, p: ArrayLike):
    return d.quantile(p)


def sample(d: DistFit, n: int, seed: int | np.random.Generator | np.random.SeedSequence) -> np.ndarray:
    """Draw ``n`` values from ``d``; identical seeds give identical draws."""
    if n < 1:
        raise DomainError("sample size must be at least 1")
    rng = np.random.default_rng(seed)
    p = d.params
    f = d.family
    if f is Family.LOGNORMAL:
        return rng.lognormal(p.mu, p.sigma, n)
    if f is Family.GAUSSIAN:
        return rng.normal(p.mu, p.sigma, n)
    if f is Family.WEIBULL:
        return p.lambda_ * rng.weibull(p.k, n)
    if f is Family.EXPONENTIAL:
        return rng.exponential(1.0 / p.rate, n)
    if f is Family.POWER_LAW:
        u = rng.random(n)
        return p.xmin * np.exp(-np.log1p(-u) / (p.alpha - 1))
    raise AssertionError(f)


def tail(d: DistFit, samples) -> np.ndarray:
    """The samples a fit's likelihood is defined on (``x >= xmin`` for power-laws)."""
    x = np.asarray(samples, dtype=float).ravel()
    if d.family is Family.POWER_LAW:
        return x[x >= d.params.xmin]
    return x
