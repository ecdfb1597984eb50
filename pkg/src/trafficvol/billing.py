"""95th-percentile transit billing: observed versus model-predicted."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from trafficvol import distributions as dist
from trafficvol.distributions import DistFit, Family
from trafficvol.errors import InsufficientDataError, TrafficVolError
from trafficvol.ingest import VolumeSeries, rebin

MIN_WINDOWS = 20
PERCENTILE = 0.95
BILLING_FAMILIES = (Family.LOGNORMAL, Family.WEIBULL, Family.GAUSSIAN)


@dataclass(frozen=True)
class BillingWindows:
    window_volumes: np.ndarray
    window_seconds: float
    trace_id: str = ""

    def __post_init__(self):
        v = np.asarray(self.window_volumes, dtype=float).ravel()
        if v.size < MIN_WINDOWS:
            raise InsufficientDataError(
                f"95th-percentile billing needs at least {MIN_WINDOWS} windows, got {v.size}")
        if not self.window_seconds > 0:
            raise TrafficVolError("window length must be positive")
        object.__setattr__(self, "window_volumes", v)

    @classmethod
    def from_series(cls, series: VolumeSeries, window_seconds: float) -> "BillingWindows":
        w = rebin(series, window_seconds)
        return cls(w.volumes, window_seconds, series.trace_id)


@dataclass(frozen=True)
class BillingPrediction:
    trace_id: str
    actual_p95: float
    predicted_p95: dict[Family, float]

    def to_dict(self) -> dict:
        return {
            "trace_id": self.trace_id,
            "actual_p95": self.actual_p95,
            "predicted_p95": {f.value: v for f, v in self.predicted_p95.items()},
        }


@dataclass(frozen=True)
class BillingStudy:
    predictions: list[BillingPrediction]
    nrmse: dict[Family, float]
    failures: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "nrmse": {f.value: v for f, v in self.nrmse.items()},
            "n_traces": len(self.predictions),
            "failures": dict(self.failures),
        }

    def scatter_rows(self) -> list[list]:
        header = ["trace_id", "actual_p95"] + [f"{f.value}_p95" for f in BILLING_FAMILIES]
        rows = [header]
        for p in self.predictions:
            rows.append([p.trace_id, p.actual_p95] + [p.predicted_p95[f] for f in BILLING_FAMILIES])
        return rows


def empirical_p95(windows: BillingWindows) -> float:
    """Nearest-rank 95th percentile of window volumes, as a rate."""
    v = np.sort(windows.window_volumes)
    rank = math.ceil(PERCENTILE * v.size - 1e-9)
    return float(v[rank - 1]) / windows.window_seconds


def predicted_p95(fit: DistFit, window_seconds: float) -> float:
    if not window_seconds > 0:
        raise TrafficVolError("window length must be positive")
    return float(fit.quantile(PERCENTILE)) / window_seconds


def nrmse(actual, predicted) -> float:
    a = np.asarray(actual, dtype=float).ravel()
    p = np.asarray(predicted, dtype=float).ravel()
    if a.size != p.size:
        raise TrafficVolError(f"length mismatch: {a.size} actual vs {p.size} predicted")
    if a.size < 1:
        raise InsufficientDataError("nrmse needs at least one pair")
    m = float(a.mean())
    if not m > 0:
        raise TrafficVolError("mean of actual values must be positive")
    return math.sqrt(float(np.mean((p - a) ** 2))) / m


def predict_trace(series: VolumeSeries, window_seconds: float) -> BillingPrediction:
    w = BillingWindows.from_series(series, window_seconds)
    preds = {f: predicted_p95(dist.fit(f, w.window_volumes), window_seconds)
             for f in BILLING_FAMILIES}
    return BillingPrediction(series.trace_id, empirical_p95(w), preds)


def billing_study(traces, window_seconds: float) -> BillingStudy:
    """Per-trace predictions and the per-family NRMSE over the successful ones."""
    preds: list[BillingPrediction] = []
    failures: dict[str, str] = {}
    for i, s in enumerate(traces):
        key = s.trace_id or f"trace-{i}"
        try:
            preds.append(predict_trace(s, window_seconds))
        except TrafficVolError as exc:
            failures[key] = f"{type(exc).__name__}: {exc}"
    table: dict[Family, float] = {}
    if preds:
        actual = [p.actual_p95 for p in preds]
        for f in BILLING_FAMILIES:
            table[f] = nrmse(actual, [p.predicted_p95[f] for p in preds])
    return BillingStudy(preds, table, failures)
