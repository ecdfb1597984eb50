"""Goodness-of-fit and model comparison against a log-normal reference.

The procedure is the usual three-step one for heavy-ish tailed data: fit
the reference by maximum likelihood, test its plausibility with a KS
statistic whose p-value comes from a semiparametric bootstrap, then compare
each alternative family against it with a normalised log-likelihood ratio
(Vuong's normal approximation for the p-value).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from trafficvol import distributions as dist
from trafficvol.distributions import DistFit, Family
from trafficvol.errors import InsufficientDataError, TrafficVolError

GOF_THRESHOLD = 0.1
LLR_THRESHOLD = 0.1
DEFAULT_N_BOOT = 1000
MIN_N_BOOT = 100
MAX_RETRIES = 10
DEFAULT_ALTERNATIVES = (Family.EXPONENTIAL, Family.WEIBULL, Family.POWER_LAW)


class Verdict(str, enum.Enum):
    REFERENCE_BETTER = "reference_better"
    ALTERNATIVE_BETTER = "alternative_better"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class GofResult:
    ks_stat: float
    p_value: float
    n_boot: int
    accepted: bool
    family: Family = Family.LOGNORMAL

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "ks_stat": self.ks_stat,
            "p_value": self.p_value,
            "n_boot": self.n_boot,
            "accepted": self.accepted,
        }


@dataclass(frozen=True)
class ComparisonResult:
    """Normalised LLR of ``alternative`` over ``reference``.

    ``r_norm > 0`` favours the alternative.  ``sigma_llr`` is zero only when
    the two models assign identical per-sample likelihoods, in which case
    the verdict is inconclusive with ``p_value == 1``.
    """

    r_norm: float
    p_value: float
    verdict: Verdict
    raw_llr: float
    sigma_llr: float
    n: int
    alternative: Family
    reference: Family = Family.LOGNORMAL
    xmin: float | None = None

    def to_dict(self) -> dict:
        out = {
            "alternative": self.alternative.value,
            "reference": self.reference.value,
            "r_norm": self.r_norm,
            "p_value": self.p_value,
            "verdict": self.verdict.value,
            "raw_llr": self.raw_llr,
            "sigma_llr": self.sigma_llr,
            "n": self.n,
        }
        if self.xmin is not None:
            out["xmin"] = self.xmin
        return out


@dataclass(frozen=True)
class Adjudication:
    gof: GofResult
    comparisons: dict[Family, ComparisonResult] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "gof": self.gof.to_dict(),
            "comparisons": {f.value: c.to_dict() for f, c in self.comparisons.items()},
        }


# ---------------------------------------------------------------------------
# KS distance and bootstrap


def _ks_sorted(xs: np.ndarray, fitted: DistFit) -> float:
    m = xs.size
    cdf = np.asarray(fitted.cdf(xs), dtype=float)
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - cdf), np.max(cdf - (i - 1) / m)))


def ks_statistic(samples, fitted: DistFit) -> float:
    """Two-sided KS distance between the empirical CDF and ``fitted``.

    Power-law fits are scored on their tail only.
    """
    x = dist.tail(fitted, samples)
    if x.size < 2:
        raise InsufficientDataError(f"KS statistic needs at least 2 samples, got {x.size}")
    return _ks_sorted(np.sort(x), fitted)


def _replicate(fitted: DistFit, x_sorted: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = x_sorted.size
    if fitted.family is not Family.POWER_LAW:
        return dist.sample(fitted, n, rng)
    # tail from the model, body resampled from the empirical values below xmin
    body = x_sorted[x_sorted < fitted.xmin]
    n_tail = int(rng.binomial(n, fitted.n / n))
    parts = [dist.sample(fitted, n_tail, rng)] if n_tail else []
    if n - n_tail:
        parts.append(rng.choice(body, n - n_tail, replace=True))
    return np.concatenate(parts)


def _replicate_ks(fitted: DistFit, x_sorted: np.ndarray, rng: np.random.Generator) -> float:
    for attempt in range(MAX_RETRIES + 1):
        synthetic = _replicate(fitted, x_sorted, rng)
        try:
            return ks_statistic(synthetic, dist.fit(fitted.family, synthetic))
        except TrafficVolError:
            if attempt == MAX_RETRIES:
                raise
    raise AssertionError("unreachable")


# Families whose refit is closed-form; their replicates are scored in blocks.
_BATCHED = (Family.LOGNORMAL, Family.GAUSSIAN, Family.EXPONENTIAL)
_BLOCK = 64


def _batched_exceedances(fitted: DistFit, n: int, children, observed: float) -> int:
    i = np.arange(1, n + 1)
    hi, lo = i / n, (i - 1) / n
    exceed = 0
    for start in range(0, len(children), _BLOCK):
        block = children[start:start + _BLOCK]
        draws = np.stack([dist.sample(fitted, n, np.random.default_rng(c)) for c in block])
        if fitted.family is Family.LOGNORMAL:
            v = np.sort(np.log(draws), axis=1)
        else:
            v = np.sort(draws, axis=1)
        if fitted.family is Family.EXPONENTIAL:
            cdf = -np.expm1(-v / v.mean(axis=1, keepdims=True))
        else:
            mu = v.mean(axis=1, keepdims=True)
            sigma = np.sqrt(np.mean((v - mu) ** 2, axis=1, keepdims=True))
            cdf = special.ndtr((v - mu) / sigma)
        ks = np.maximum(np.max(hi - cdf, axis=1), np.max(cdf - lo, axis=1))
        exceed += int(np.sum(ks >= observed))
    return exceed


def gof_pvalue(samples, family: Family | str = Family.LOGNORMAL, n_boot: int = DEFAULT_N_BOOT,
               seed: int = 0) -> GofResult:
    """Bootstrap KS goodness-of-fit test of ``family`` on ``samples``.

    Each replicate draws a synthetic sample of the same size from the fitted
    model, refits the family to it and records the refitted KS distance.
    Replicate ``r`` uses its own child of ``SeedSequence(seed)``, so results
    do not depend on evaluation order.
    """
    if n_boot < MIN_N_BOOT:
        raise TrafficVolError(f"n_boot must be at least {MIN_N_BOOT}, got {n_boot}")
    family = Family.parse(family)
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    fitted = dist.fit(family, x)
    observed = ks_statistic(x, fitted)

    children = np.random.SeedSequence(seed).spawn(n_boot)
    if family in _BATCHED:
        exceed = _batched_exceedances(fitted, x.size, children, observed)
    else:
        exceed = 0
        for child in children:
            if _replicate_ks(fitted, x, np.random.default_rng(child)) >= observed:
                exceed += 1
    p = exceed / n_boot
    return GofResult(ks_stat=observed, p_value=p, n_boot=n_boot, accepted=p > GOF_THRESHOLD,
                     family=family)


# ---------------------------------------------------------------------------
# likelihood ratio


def _unpack(family: Family, theta: np.ndarray) -> dict:
    if family in (Family.LOGNORMAL, Family.GAUSSIAN):
        return {"mu": float(theta[0]), "sigma": float(math.exp(theta[1]))}
    if family is Family.WEIBULL:
        return {"k": float(math.exp(theta[0])), "lambda_": float(math.exp(theta[1]))}
    raise AssertionError(family)


def _pack(d: DistFit) -> np.ndarray:
    p = d.params
    if d.family in (Family.LOGNORMAL, Family.GAUSSIAN):
        return np.array([p.mu, math.log(p.sigma)])
    return np.array([math.log(p.k), math.log(p.lambda_)])


def truncated_logpdf(family: Family, tail: np.ndarray, xmin: float) -> np.ndarray:
    """Per-sample log-density of ``family`` refitted by ML to ``tail`` conditioned on x >= xmin."""
    family = Family.parse(family)
    if family is Family.EXPONENTIAL:
        # memoryless: the conditional law is a shifted exponential
        rate = 1.0 / float(np.mean(tail - xmin))
        return math.log(rate) - rate * (tail - xmin)

    def nll(theta: np.ndarray) -> float:
        try:
            d = dist.model(family, **_unpack(family, theta))
        except TrafficVolError:
            return math.inf
        with np.errstate(divide="ignore"):
            lsf = float(np.log(d.sf(xmin)))
        val = -(float(np.sum(d.logpdf(tail))) - tail.size * lsf)
        return val if math.isfinite(val) else math.inf

    start = _pack(dist.fit(family, tail))
    res = optimize.minimize(nll, start, method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-10, "maxiter": 4000})
    d = dist.model(family, **_unpack(family, res.x))
    return d.logpdf(tail) - float(np.log(d.sf(xmin)))


def _vuong(ell: np.ndarray, alternative: Family, reference: Family,
           xmin: float | None) -> ComparisonResult:
    n = ell.size
    raw = float(np.sum(ell))
    sigma = float(np.sqrt(np.mean((ell - ell.mean()) ** 2)))
    if not sigma > 0:
        return ComparisonResult(r_norm=0.0, p_value=1.0, verdict=Verdict.INCONCLUSIVE, raw_llr=raw,
                                sigma_llr=0.0, n=n, alternative=alternative, reference=reference,
                                xmin=xmin)
    r_norm = raw / (sigma * math.sqrt(n))
    p = float(special.erfc(abs(r_norm) / math.sqrt(2.0)))
    if p > LLR_THRESHOLD:
        verdict = Verdict.INCONCLUSIVE
    elif r_norm < 0:
        verdict = Verdict.REFERENCE_BETTER
    else:
        verdict = Verdict.ALTERNATIVE_BETTER
    return ComparisonResult(r_norm=r_norm, p_value=p, verdict=verdict, raw_llr=raw,
                            sigma_llr=sigma, n=n, alternative=alternative, reference=reference,
                            xmin=xmin)


def llr_compare(samples, alternative: Family | str,
                reference: Family | str = Family.LOGNORMAL) -> ComparisonResult:
    """Vuong-style comparison of ``alternative`` against ``reference``.

    When either side is a power-law both likelihoods are evaluated on the
    power-law tail, and the other family is refitted there as a
    lower-truncated model.
    """
    alternative = Family.parse(alternative)
    reference = Family.parse(reference)
    x = np.asarray(samples, dtype=float).ravel()
    xmin = None

    if alternative is Family.POWER_LAW or reference is Family.POWER_LAW:
        if alternative is reference:
            pl = dist.fit(Family.POWER_LAW, x)
            t = dist.tail(pl, x)
            return _vuong(np.zeros(t.size), alternative, reference, pl.xmin)
        pl = dist.fit(Family.POWER_LAW, x)
        xmin = pl.xmin
        t = np.sort(dist.tail(pl, x))
        other = reference if alternative is Family.POWER_LAW else alternative
        l_pl = pl.logpdf(t)
        l_other = truncated_logpdf(other, t, xmin)
        if alternative is Family.POWER_LAW:
            l_alt, l_ref = l_pl, l_other
        else:
            l_alt, l_ref = l_other, l_pl
    else:
        l_ref = dist.fit(reference, x).logpdf(x)
        l_alt = l_ref if alternative is reference else dist.fit(alternative, x).logpdf(x)
    return _vuong(np.asarray(l_alt - l_ref, dtype=float), alternative, reference, xmin)


def adjudicate(samples, n_boot: int = DEFAULT_N_BOOT, seed: int = 0,
               alternatives=DEFAULT_ALTERNATIVES) -> Adjudication:
    """Log-normal GOF plus one comparison per alternative family."""
    gof = gof_pvalue(samples, Family.LOGNORMAL, n_boot=n_boot, seed=seed)
    comparisons = {Family.parse(a): llr_compare(samples, a) for a in alternatives}
    return Adjudication(gof=gof, comparisons=comparisons)
