"""Seeded synthetic volume series.

Every generator is a pure function of its :class:`SynthSpec`; the output is
an integer-byte :class:`~trafficvol.ingest.VolumeSeries` that can be written
and read back exactly like an aggregated capture.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from trafficvol.errors import TrafficVolError
from trafficvol.ingest import VolumeSeries, timescale_ns

LN_1E6 = math.log(1e6)


class SynthKind(str, enum.Enum):
    LOGNORMAL = "lognormal"
    GAUSSIAN = "gaussian"
    EXPONENTIAL = "exponential"
    BIMODAL = "bimodal"
    RANDOM_WALK = "random_walk"
    REGIME = "regime"


DEFAULTS: dict[SynthKind, dict[str, Any]] = {
    SynthKind.LOGNORMAL: {"mu": LN_1E6, "sigma": 0.8},
    SynthKind.GAUSSIAN: {"mu": 1e6, "sigma": 3e5},
    SynthKind.EXPONENTIAL: {"mean": 1e6},
    # capacity defaults to exp(mu + 2*sigma); idle bins sit three decades below the median
    SynthKind.BIMODAL: {"mu": LN_1E6, "sigma": 0.8, "p0": 0.3, "p1": 0.2, "capacity": None,
                        "idle_factor": 1e-3},
    SynthKind.RANDOM_WALK: {"step_sigma": 1e4, "floor": 0.0},
    SynthKind.REGIME: {"segments": [{"mu": LN_1E6, "sigma": 0.8, "n": None},
                                    {"mu": LN_1E6 + math.log(3.5), "sigma": 0.8, "n": None}]},
}


@dataclass(frozen=True)
class SynthSpec:
    kind: SynthKind
    n: int
    seed: int
    timescale_t: float = 0.1
    params: dict = field(default_factory=dict)

    def resolved_params(self) -> dict:
        out = dict(DEFAULTS[SynthKind(self.kind)])
        unknown = set(self.params) - set(out)
        if unknown:
            raise TrafficVolError(f"unknown parameter(s) for {self.kind}: {sorted(unknown)}")
        out.update(self.params)
        return out


def _positive(name: str, value: float) -> None:
    if not (value > 0 and math.isfinite(value)):
        raise TrafficVolError(f"{name} must be positive and finite, got {value}")


def _gaussian_nonneg(rng: np.random.Generator, mu: float, sigma: float, n: int) -> np.ndarray:
    x = rng.normal(mu, sigma, n)
    for _ in range(10_000):
        bad = x < 0
        if not bad.any():
            return x
        x[bad] = rng.normal(mu, sigma, int(bad.sum()))
    raise TrafficVolError("Gaussian truncation did not terminate; mean is too far below zero")


def _lognormal_segment(rng, mu, sigma, n):
    _positive("sigma", sigma)
    return rng.lognormal(mu, sigma, n)


def generate(spec: SynthSpec) -> VolumeSeries:
    kind = SynthKind(spec.kind)
    if spec.n < 1:
        raise TrafficVolError("n must be at least 1")
    if not 0 <= spec.seed < 2**64:
        raise TrafficVolError("seed must be an unsigned 64-bit integer")
    timescale_ns(spec.timescale_t)
    p = spec.resolved_params()
    rng = np.random.default_rng(spec.seed)
    n = spec.n

    if kind is SynthKind.LOGNORMAL:
        x = _lognormal_segment(rng, p["mu"], p["sigma"], n)
    elif kind is SynthKind.GAUSSIAN:
        _positive("sigma", p["sigma"])
        x = _gaussian_nonneg(rng, p["mu"], p["sigma"], n)
    elif kind is SynthKind.EXPONENTIAL:
        _positive("mean", p["mean"])
        x = rng.exponential(p["mean"], n)
    elif kind is SynthKind.BIMODAL:
        p0, p1 = p["p0"], p["p1"]
        if not (0 <= p0 and 0 <= p1 and p0 + p1 <= 1):
            raise TrafficVolError("bimodal needs p0, p1 >= 0 with p0 + p1 <= 1")
        capacity = p["capacity"] if p["capacity"] is not None else math.exp(p["mu"] + 2 * p["sigma"])
        _positive("capacity", capacity)
        # whole bytes, rounded up so saturated bins still reach the nominal capacity
        capacity = float(math.ceil(capacity))
        state = rng.choice(3, size=n, p=[p0, p1, 1 - p0 - p1])
        busy = np.minimum(_lognormal_segment(rng, p["mu"], p["sigma"], n), capacity)
        idle = _lognormal_segment(rng, p["mu"] + math.log(p["idle_factor"]), p["sigma"] / 2, n)
        x = np.where(state == 0, idle, np.where(state == 1, capacity, busy))
        x = np.maximum(x, 1.0)
    elif kind is SynthKind.RANDOM_WALK:
        _positive("step_sigma", p["step_sigma"])
        walk = np.cumsum(rng.normal(0.0, p["step_sigma"], n))
        x = walk - walk.min() + p["floor"]
    else:
        segs = p["segments"]
        if not segs:
            raise TrafficVolError("regime schedule needs at least one segment")
        sizes = [s.get("n") for s in segs]
        if any(s is None for s in sizes):
            base, extra = divmod(n, len(segs))
            sizes = [base + (i < extra) for i in range(len(segs))]
        if sum(sizes) != n:
            raise TrafficVolError(f"segment lengths sum to {sum(sizes)}, expected n={n}")
        x = np.concatenate([_lognormal_segment(rng, s["mu"], s["sigma"], m)
                            for s, m in zip(segs, sizes)])

    volumes = np.rint(x).astype(np.int64)
    return VolumeSeries(spec.timescale_t, 0, volumes, trace_id=f"{kind.value}-{spec.seed}")
