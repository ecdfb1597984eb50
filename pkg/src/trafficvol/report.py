"""Per-trace pipeline behind ``trafficvol report``.

The JSON report is the single source of truth: the summary and plot-data
tables are derived from the report dictionaries, never recomputed.
"""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from trafficvol import __version__, billing, corrgof, fitcompare, ingest, provisioning, stationarity
from trafficvol.distributions import Family
from trafficvol.errors import InsufficientDataError, NoDataError, TrafficVolError
from trafficvol.ingest import VolumeSeries

DEFAULT_TIMESCALES = (0.005, 0.1, 0.5, 1.0, 5.0)
DEFAULT_EPS = (0.5, 0.1, 0.05, 0.01)
DEFAULT_WINDOW_SECONDS = 10.0
GAMMA_FAMILIES = (Family.LOGNORMAL, Family.WEIBULL, Family.EXPONENTIAL, Family.GAUSSIAN)
PROVISION_METHODS = (
    provisioning.MethodSpec(provisioning.Method.MEENT),
    provisioning.MethodSpec(provisioning.Method.MODEL_QUANTILE, Family.LOGNORMAL),
    provisioning.MethodSpec(provisioning.Method.MODEL_QUANTILE, Family.WEIBULL),
)


class NotApplicable(TrafficVolError):
    """A section cannot run for this input; reported as skipped, not as a failure."""


@dataclass(frozen=True)
class ReportConfig:
    timescales: tuple = DEFAULT_TIMESCALES
    eps: tuple = DEFAULT_EPS
    n_boot: int = fitcompare.DEFAULT_N_BOOT
    seed: int = 0
    capacity: float | None = None  # link rate, bytes/s
    window_seconds: float = DEFAULT_WINDOW_SECONDS

    def to_dict(self) -> dict:
        d = asdict(self)
        d["timescales"] = list(self.timescales)
        d["eps"] = list(self.eps)
        return d


@dataclass
class TraceSource:
    """One input trace: raw packets, or a pre-binned volume series."""

    trace_id: str
    path: str
    packets: tuple[np.ndarray, np.ndarray] | None = None
    series: VolumeSeries | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def load(cls, path: str) -> "TraceSource":
        trace_id = os.path.splitext(os.path.basename(path))[0]
        if ingest.is_series_csv(path):
            return cls(trace_id, path, series=ingest.read_series(path, trace_id))
        recs = ingest.read_packet_csv(path)
        if not recs:
            raise NoDataError(f"{path}: no data")
        ts = np.fromiter((r.timestamp for r in recs), dtype=np.uint64, count=len(recs))
        sizes = np.fromiter((r.size for r in recs), dtype=np.int64, count=len(recs))
        return cls(trace_id, path, packets=(ts, sizes))

    @property
    def native_timescale(self) -> float | None:
        return None if self.series is None else self.series.timescale_t

    def at(self, timescale_t: float) -> VolumeSeries:
        """Volume series at ``timescale_t``, always built from the finest input."""
        key = ingest.timescale_ns(timescale_t)
        if key not in self._cache:
            if self.packets is not None:
                s = ingest.aggregate(self.packets, timescale_t, trace_id=self.trace_id)
            else:
                if not ingest.is_whole_multiple(timescale_t, self.series.timescale_t):
                    raise NotApplicable(
                        f"T={timescale_t}s cannot be derived from a series binned at "
                        f"{self.series.timescale_t}s")
                s = ingest.rebin(self.series, timescale_t)
            self._cache[key] = s
        return self._cache[key]


def skipped(reason: str) -> dict:
    return {"skipped": reason}


class _Sections:
    """Runs report sections, turning errors into skip markers and failure records."""

    def __init__(self, trace_id: str):
        self.trace_id = trace_id
        self.failures: list[dict] = []

    def run(self, where: str, fn):
        try:
            return fn()
        except (NotApplicable, InsufficientDataError) as exc:
            return skipped(str(exc))
        except TrafficVolError as exc:
            msg = f"{type(exc).__name__}: {exc}"
            self.failures.append({"section": where, "error": msg})
            return skipped(f"failed: {msg}")


def _provision_entries(series: VolumeSeries, eps_list) -> list[dict]:
    out = []
    for eps in eps_list:
        for spec, res in zip(PROVISION_METHODS, provisioning.evaluate(series, eps, PROVISION_METHODS)):
            d = res.to_dict()
            d["label"] = spec.label
            d["capacity_mbps"] = provisioning.to_mbps(res.capacity)
            out.append(d)
    return out


def _gamma_entries(series: VolumeSeries) -> dict:
    return {f.value: corrgof.gamma(series.volumes, f, series.timescale_t).to_dict()
            for f in GAMMA_FAMILIES}


def _timescale_entry(src: TraceSource, t: float, cfg: ReportConfig, sec: _Sections) -> dict:
    head = {"timescale_t": t, "label": corrgof.timescale_label(t)}
    try:
        s = src.at(t)
    except (NotApplicable, NoDataError) as exc:
        return {**head, **skipped(str(exc))}
    where = head["label"]
    return {
        **head,
        "n_bins": s.n,
        "adjudication": sec.run(f"{where}/adjudication", lambda: fitcompare.adjudicate(
            s.volumes, n_boot=cfg.n_boot, seed=cfg.seed).to_dict()),
        "gamma": sec.run(f"{where}/gamma", lambda: _gamma_entries(s)),
        "stationarity": sec.run(f"{where}/stationarity",
                                lambda: stationarity.classify(s.volumes).to_dict()),
        "provisioning": sec.run(f"{where}/provisioning", lambda: _provision_entries(s, cfg.eps)),
    }


def _anomaly(src: TraceSource, cfg: ReportConfig) -> dict:
    if cfg.capacity is None:
        raise NotApplicable("no link capacity given (--capacity)")
    for t in sorted(cfg.timescales):
        try:
            s = src.at(t)
        except (NotApplicable, NoDataError):
            continue
        d = ingest.anomaly_screen(s, cfg.capacity * t).to_dict()
        d["timescale_t"] = t
        return d
    raise NotApplicable("no requested timescale is available for this input")


def _gamma_variation(src: TraceSource) -> dict:
    series = {t: src.at(t).volumes for t in corrgof.STUDY_TIMESCALES}
    return corrgof.gamma_variation(series, Family.LOGNORMAL).to_dict()


def _billing(src: TraceSource, cfg: ReportConfig) -> dict:
    w = src.at(cfg.window_seconds)
    d = billing.predict_trace(w, cfg.window_seconds).to_dict()
    d["window_seconds"] = cfg.window_seconds
    d["n_windows"] = w.n
    return d


def build_report(src: TraceSource, cfg: ReportConfig) -> dict:
    sec = _Sections(src.trace_id)
    timescales = [_timescale_entry(src, t, cfg, sec) for t in cfg.timescales]
    anomaly = sec.run("anomaly", lambda: _anomaly(src, cfg))
    return {
        "trace_id": src.trace_id,
        "toolkit_version": __version__,
        "config": cfg.to_dict(),
        "input": {"path": src.path,
                  "kind": "packets" if src.packets is not None else "series",
                  "native_timescale_t": src.native_timescale},
        "anomaly": anomaly,
        "anomaly_flagged": bool(anomaly.get("flagged", False)),
        "timescales": timescales,
        "gamma_variation": sec.run("gamma_variation", lambda: _gamma_variation(src)),
        "billing": sec.run("billing", lambda: _billing(src, cfg)),
        "failures": sec.failures,
    }


# ---------------------------------------------------------------------------
# tables derived from finished reports

SUMMARY_HEADER = [
    "trace_id", "timescale_t", "n_bins", "anomaly_flagged", "gof_p", "gof_accepted",
    "vs_exponential", "vs_weibull", "vs_power_law", "gamma_lognormal", "classification",
    "n_failures",
]

PLOTDATA_HEADER = ["panel", "timescale_t", "series", "x", "y"]


def _get(d, *keys):
    for k in keys:
        if not isinstance(d, dict) or k not in d:
            return ""
        d = d[k]
    return d


def summary_rows(report: dict) -> list[list]:
    rows = []
    for e in report["timescales"]:
        comps = _get(e, "adjudication", "comparisons")
        rows.append([
            report["trace_id"], e["timescale_t"], _get(e, "n_bins"), report["anomaly_flagged"],
            _get(e, "adjudication", "gof", "p_value"), _get(e, "adjudication", "gof", "accepted"),
            _get(comps, "exponential", "verdict"), _get(comps, "weibull", "verdict"),
            _get(comps, "power_law", "verdict"), _get(e, "gamma", "lognormal", "gamma"),
            _get(e, "stationarity", "classification"), len(report["failures"]),
        ])
    return rows


def plotdata_rows(report: dict) -> list[list]:
    """Long-format rows: (panel, timescale, series, x, y)."""
    rows = []
    for e in report["timescales"]:
        t = e["timescale_t"]
        if isinstance(e.get("provisioning"), list):
            for p in e["provisioning"]:
                rows.append(["eps_hat_vs_target", t, p["label"], p["target_eps"], p["eps_hat"]])
        if isinstance(e.get("gamma"), dict) and "skipped" not in e["gamma"]:
            for fam, g in e["gamma"].items():
                rows.append(["gamma_by_timescale", t, fam, t, g["gamma"]])
    b = report["billing"]
    if "skipped" not in b:
        for fam, v in b["predicted_p95"].items():
            rows.append(["p95_predicted_vs_actual", b["window_seconds"], fam, b["actual_p95"], v])
    return rows
