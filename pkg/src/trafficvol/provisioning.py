"""Link capacity under the transparency requirement ``P(A(T) >= C*T) <= eps``.

Two estimators are provided: the Gaussian-moment rule of van den Meent et
al. and the inverse CDF of a fitted volume model.  Both return rates in
bytes per second; :func:`empirical_eps` scores either against the series.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from trafficvol import distributions as dist
from trafficvol.distributions import DistFit, Family
from trafficvol.errors import InsufficientDataError, TrafficVolError
from trafficvol.ingest import VolumeSeries


class Method(str, enum.Enum):
    MEENT = "Meent"
    MODEL_QUANTILE = "ModelQuantile"


@dataclass(frozen=True)
class GaussianMoments:
    mu: float  # bytes per bin
    upsilon_t: float  # variance per bin, bytes^2
    timescale_t: float

    def __post_init__(self):
        if not self.upsilon_t >= 0:
            raise TrafficVolError(f"variance must be non-negative, got {self.upsilon_t}")
        if not self.timescale_t > 0:
            raise TrafficVolError("timescale must be positive")

    @classmethod
    def from_series(cls, series: VolumeSeries) -> "GaussianMoments":
        v = np.asarray(series.volumes, dtype=float)
        if v.size < 2:
            raise InsufficientDataError("moments need at least 2 bins")
        return cls(float(v.mean()), float(v.var(ddof=1)), series.timescale_t)


@dataclass(frozen=True)
class ProvisioningResult:
    capacity: float  # bytes/s
    eps_hat: float
    target_eps: float
    method: Method
    family: Family | None = None

    def to_dict(self) -> dict:
        out = {
            "method": self.method.value,
            "target_eps": self.target_eps,
            "capacity_bytes_per_s": self.capacity,
            "eps_hat": self.eps_hat,
        }
        if self.family is not None:
            out["family"] = self.family.value
        return out


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not 0 < eps < 1:
        raise TrafficVolError(f"eps must lie in (0, 1), got {eps}")
    return eps


def meent_capacity(moments: GaussianMoments, eps: float) -> float:
    eps = _check_eps(eps)
    t = moments.timescale_t
    return moments.mu / t + math.sqrt(-2.0 * math.log(eps) * moments.upsilon_t) / t


def model_capacity(fit: DistFit, eps: float, timescale_t: float) -> float:
    eps = _check_eps(eps)
    if not timescale_t > 0:
        raise TrafficVolError("timescale must be positive")
    return float(fit.quantile(1.0 - eps)) / timescale_t


def empirical_eps(series: VolumeSeries, capacity: float) -> float:
    """Fraction of bins carrying at least ``capacity * T`` bytes."""
    if capacity < 0:
        raise TrafficVolError("capacity must be non-negative")
    v = series.volumes
    return int(np.count_nonzero(v >= capacity * series.timescale_t)) / v.size


@dataclass(frozen=True)
class MethodSpec:
    method: Method
    family: Family | None = None

    @classmethod
    def parse(cls, text: str) -> "MethodSpec":
        """``meent`` or ``model:<family>`` (bare family names also accepted)."""
        t = text.strip()
        if t.lower() == "meent":
            return cls(Method.MEENT)
        if ":" in t:
            head, fam = t.split(":", 1)
            if head.lower() not in ("model", "modelquantile", "quantile"):
                raise TrafficVolError(f"unknown provisioning method {text!r}")
            t = fam
        return cls(Method.MODEL_QUANTILE, Family.parse(t))

    @property
    def label(self) -> str:
        if self.method is Method.MEENT:
            return "Meent"
        return f"ModelQuantile({self.family.value})"


DEFAULT_METHODS = (MethodSpec(Method.MEENT), MethodSpec(Method.MODEL_QUANTILE, Family.LOGNORMAL))


def evaluate(series: VolumeSeries, eps: float, methods=DEFAULT_METHODS) -> list[ProvisioningResult]:
    """Capacity and its exceedance on the same series, once per method."""
    eps = _check_eps(eps)
    out = []
    fits: dict[Family, DistFit] = {}
    for m in methods:
        if m.method is Method.MEENT:
            cap = meent_capacity(GaussianMoments.from_series(series), eps)
        else:
            if m.family not in fits:
                fits[m.family] = dist.fit(m.family, series.volumes)
            cap = model_capacity(fits[m.family], eps, series.timescale_t)
        out.append(ProvisioningResult(cap, empirical_eps(series, cap), eps, m.method, m.family))
    return out


def to_mbps(bytes_per_s: float) -> float:
    return bytes_per_s * 8.0 / 1e6
