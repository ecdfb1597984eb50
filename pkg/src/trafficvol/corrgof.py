"""Probability-plot correlation goodness-of-fit.

``gamma`` is the Pearson correlation between the sorted sample and the
fitted model's quantiles at plotting positions ``i/(n+1)``; values above
0.95 count as a strong fit.  ``gamma_variation`` measures how stable that
number is across the four standard aggregation timescales.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from trafficvol import distributions as dist
from trafficvol.distributions import Family
from trafficvol.errors import InsufficientDataError, TrafficVolError, UndefinedCorrelationError

STRONG_FIT = 0.95

# seconds -> label, coarsest first
STUDY_TIMESCALES = {5.0: "5s", 1.0: "1s", 0.1: "100ms", 0.005: "5ms"}


def timescale_label(t: float) -> str:
    for ts, label in STUDY_TIMESCALES.items():
        if math.isclose(t, ts, rel_tol=1e-9):
            return label
    if t >= 1 and float(t).is_integer():
        return f"{int(t)}s"
    return f"{t * 1000:g}ms"


@dataclass(frozen=True)
class GammaResult:
    gamma: float
    strong_fit: bool
    family: Family
    timescale_t: float | None = None

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "timescale_t": self.timescale_t,
            "gamma": self.gamma,
            "strong_fit": self.strong_fit,
        }


@dataclass(frozen=True)
class GammaVariation:
    upsilon: float
    gammas: dict[float, float]

    def to_dict(self) -> dict:
        return {
            "upsilon": self.upsilon,
            "gammas": {timescale_label(t): g for t, g in self.gammas.items()},
        }


def pearson(a: np.ndarray, b: np.ndarray) -> float:
    da = a - a.mean()
    db = b - b.mean()
    saa = float(da @ da)
    sbb = float(db @ db)
    if not (saa > 0 and sbb > 0):
        raise UndefinedCorrelationError("correlation is undefined for a zero-variance vector")
    return float(da @ db) / math.sqrt(saa * sbb)


def gamma(samples, family: Family | str = Family.LOGNORMAL,
          timescale_t: float | None = None) -> GammaResult:
    family = Family.parse(family)
    # sorted before fitting so the result does not depend on input order
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size < 3:
        raise InsufficientDataError(f"gamma needs at least 3 samples, got {x.size}")
    if np.all(x == x[0]):
        raise UndefinedCorrelationError("constant sample has zero variance")
    fitted = dist.fit(family, x)
    s = dist.tail(fitted, x)
    n = s.size
    ref = np.asarray(fitted.quantile(np.arange(1, n + 1) / (n + 1)), dtype=float)
    g = pearson(s, ref)
    return GammaResult(gamma=g, strong_fit=g > STRONG_FIT, family=family, timescale_t=timescale_t)


def gamma_variation(series_by_timescale: dict, family: Family | str = Family.LOGNORMAL) -> GammaVariation:
    """Gamma at each of 5 s, 1 s, 100 ms and 5 ms, and their population std-dev."""
    chosen: dict[float, float] = {}
    for ts in STUDY_TIMESCALES:
        match = [k for k in series_by_timescale if math.isclose(float(k), ts, rel_tol=1e-9)]
        if not match:
            raise TrafficVolError(f"missing timescale {STUDY_TIMESCALES[ts]} for gamma variation")
        chosen[ts] = gamma(series_by_timescale[match[0]], family, timescale_t=ts).gamma
    return GammaVariation(upsilon=upsilon(chosen.values()), gammas=chosen)


def upsilon(gammas) -> float:
    """Population (1/N) standard deviation of a set of gamma values."""
    vals = np.asarray(list(gammas), dtype=float)
    return float(np.sqrt(np.mean((vals - vals.mean()) ** 2)))
