"""``trafficvol`` command-line front end.

Exit status: 0 on success, 1 when some trace or section failed (failures
are listed in the output), 2 on configuration or input errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from trafficvol import __version__, billing, corrgof, distributions as dist, fitcompare, ingest
from trafficvol import provisioning, report, stationarity, synth
from trafficvol.distributions import Family
from trafficvol.errors import TrafficVolError

COMMANDS = ("aggregate", "fit", "compare", "gamma", "stationarity", "provision", "bill", "synth",
            "report")
MIN_TIMESCALE, MAX_TIMESCALE = 0.001, 60.0
DEFAULT_TIMESCALE = 0.1


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    inputs: tuple[str, ...] = ()
    timescales: tuple[float, ...] = ()
    eps: tuple[float, ...] = ()
    n_boot: int = fitcompare.DEFAULT_N_BOOT
    seed: int = 0
    capacity: float | None = None
    window_seconds: float = report.DEFAULT_WINDOW_SECONDS
    out: str | None = None
    format: str = "json"
    workers: int = 1
    families: tuple[str, ...] = ()
    methods: tuple[str, ...] = ()
    kind: str = "lognormal"
    n: int = 9000
    params: dict = field(default_factory=dict)

    def echo(self) -> dict:
        keep = {"inputs": list(self.inputs), "timescales": list(self.timescales),
                "seed": self.seed}
        extra = {
            "compare": {"n_boot": self.n_boot},
            "provision": {"eps": list(self.eps), "methods": list(self.methods)},
            "bill": {"window_seconds": self.window_seconds},
            "fit": {"families": list(self.families)},
            "gamma": {"families": list(self.families)},
        }
        keep.update(extra.get(self.command, {}))
        return keep


# ---------------------------------------------------------------------------
# argument parsing


def _timescale(text: str) -> float:
    try:
        t = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not MIN_TIMESCALE <= t <= MAX_TIMESCALE:
        raise argparse.ArgumentTypeError(
            f"timescale must lie in [{MIN_TIMESCALE}, {MAX_TIMESCALE}] seconds, got {t}")
    try:
        ingest.timescale_ns(t)
    except TrafficVolError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return t


def _param(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    try:
        return k.strip(), json.loads(v)
    except json.JSONDecodeError:
        raise argparse.ArgumentTypeError(f"value for {k!r} is not a number or JSON") from None


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", action="append", default=[], metavar="PATH",
                        help="packet CSV (timestamp_ns,bytes) or volume-series CSV; repeatable")
    common.add_argument("--timescale", action="append", type=_timescale, default=[],
                        metavar="SECONDS", help="aggregation timescale T; repeatable where noted")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", metavar="PATH")
    common.add_argument("--format", choices=("json", "csv"))
    common.add_argument("--workers", type=int, default=1)

    p = argparse.ArgumentParser(prog="trafficvol", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"trafficvol {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("aggregate", parents=[common], help="bin packet records into a volume series")

    sp = sub.add_parser("fit", parents=[common], help="maximum-likelihood fits")
    sp.add_argument("--family", action="append", default=[], dest="families")

    sp = sub.add_parser("compare", parents=[common], help="log-normal GOF and LLR comparisons")
    sp.add_argument("--n-boot", type=int, default=fitcompare.DEFAULT_N_BOOT)

    sp = sub.add_parser("gamma", parents=[common], help="correlation GOF across timescales")
    sp.add_argument("--family", action="append", default=[], dest="families")

    sub.add_parser("stationarity", parents=[common], help="ADF, PP and KPSS tests")

    sp = sub.add_parser("provision", parents=[common], help="link capacity and exceedance")
    sp.add_argument("--eps", action="append", type=float, default=[])
    sp.add_argument("--method", action="append", default=[], dest="methods",
                    help="'meent' or 'model:<family>'; repeatable")

    sp = sub.add_parser("bill", parents=[common], help="95th-percentile billing study")
    sp.add_argument("--window-seconds", type=float, default=report.DEFAULT_WINDOW_SECONDS)

    sp = sub.add_parser("synth", parents=[common], help="generate a synthetic volume series")
    sp.add_argument("--kind", default="lognormal", choices=[k.value for k in synth.SynthKind])
    sp.add_argument("--n", type=int, default=9000)
    sp.add_argument("--param", action="append", type=_param, default=[], dest="params",
                    metavar="KEY=VALUE")

    sp = sub.add_parser("report", parents=[common], help="full per-trace pipeline")
    sp.add_argument("--eps", action="append", type=float, default=[])
    sp.add_argument("--n-boot", type=int, default=fitcompare.DEFAULT_N_BOOT)
    sp.add_argument("--capacity", type=float, metavar="BYTES_PER_S",
                    help="link rate used by the anomaly screen")
    sp.add_argument("--window-seconds", type=float, default=report.DEFAULT_WINDOW_SECONDS)
    return p


def parse_config(argv) -> RunConfig:
    ns = _parser().parse_args(argv)
    cfg = RunConfig(
        command=ns.command,
        inputs=tuple(ns.input),
        timescales=tuple(ns.timescale),
        eps=tuple(getattr(ns, "eps", ()) or ()),
        n_boot=getattr(ns, "n_boot", fitcompare.DEFAULT_N_BOOT),
        seed=ns.seed,
        capacity=getattr(ns, "capacity", None),
        window_seconds=getattr(ns, "window_seconds", report.DEFAULT_WINDOW_SECONDS),
        out=ns.out,
        format=ns.format or ("csv" if ns.command in ("aggregate", "synth") else "json"),
        workers=ns.workers,
        families=tuple(getattr(ns, "families", ()) or ()),
        methods=tuple(getattr(ns, "methods", ()) or ()),
        kind=getattr(ns, "kind", "lognormal"),
        n=getattr(ns, "n", 9000),
        params=dict(getattr(ns, "params", ()) or ()),
    )
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    if cfg.command != "synth" and not cfg.inputs:
        raise ConfigError(f"{cfg.command} needs at least one --input")
    if cfg.command == "synth" and cfg.inputs:
        raise ConfigError("synth takes no --input")
    for path in cfg.inputs:
        if not os.path.isfile(path):
            raise ConfigError(f"cannot read input {path!r}")
    for e in cfg.eps:
        if not 0 < e < 1:
            raise ConfigError(f"--eps must lie in (0, 1), got {e}")
    if cfg.n_boot < fitcompare.MIN_N_BOOT:
        raise ConfigError(f"--n-boot must be at least {fitcompare.MIN_N_BOOT}")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("--seed must be an unsigned 64-bit integer")
    if cfg.workers < 1:
        raise ConfigError("--workers must be at least 1")
    if cfg.capacity is not None and not cfg.capacity > 0:
        raise ConfigError("--capacity must be positive")
    if not cfg.window_seconds > 0:
        raise ConfigError("--window-seconds must be positive")
    if cfg.command not in ("report",) and len(cfg.timescales) > 1:
        raise ConfigError(f"{cfg.command} takes a single --timescale")
    if cfg.command in ("aggregate", "synth") and cfg.format != "csv":
        raise ConfigError(f"{cfg.command} writes volume-series CSV only")
    if cfg.command == "report" and not cfg.out:
        raise ConfigError("report needs --out DIRECTORY")
    if cfg.command == "aggregate" and len(cfg.inputs) > 1 and not cfg.out:
        raise ConfigError("aggregate with several inputs needs --out DIRECTORY")
    for f in cfg.families:
        try:
            Family.parse(f)
        except TrafficVolError as exc:
            raise ConfigError(str(exc)) from None
    for m in cfg.methods:
        try:
            provisioning.MethodSpec.parse(m)
        except TrafficVolError as exc:
            raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# output helpers


def _clean(obj):
    """JSON-safe copy: non-finite floats become null, enums their values."""
    if isinstance(obj, dict):
        return {str(getattr(k, "value", k)): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if hasattr(obj, "item"):  # numpy scalar
        return _clean(obj.item())
    return getattr(obj, "value", obj)


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def csv_text(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for r in rows:
        w.writerow(["" if v is None else _cell(v) for v in r])
    return buf.getvalue()


def _cell(v):
    v = _clean(v)
    return "" if v is None else v


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _load(path: str) -> report.TraceSource:
    try:
        return report.TraceSource.load(path)
    except (OSError, TrafficVolError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _series(src: report.TraceSource, cfg: RunConfig):
    if cfg.timescales:
        t = cfg.timescales[0]
    else:
        t = src.native_timescale or DEFAULT_TIMESCALE
    try:
        return src.at(t)
    except report.NotApplicable as exc:
        raise ConfigError(f"{src.path}: {exc}") from None


def _map(fn, items, workers: int):
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


# ---------------------------------------------------------------------------
# per-trace work units (top level so they can be shipped to worker processes)


def _fit_unit(args):
    series, families = args
    rows, failures = [], []
    for f in families:
        try:
            d = dist.fit(f, series.volumes)
            rows.append({"trace_id": series.trace_id, "timescale_t": series.timescale_t,
                         "fit": d.to_dict(), "ks_stat": fitcompare.ks_statistic(series.volumes, d)})
        except TrafficVolError as exc:
            failures.append({"trace_id": series.trace_id, "family": f.value, "error": str(exc)})
    return rows, failures


def _compare_unit(args):
    series, n_boot, seed = args
    try:
        adj = fitcompare.adjudicate(series.volumes, n_boot=n_boot, seed=seed)
    except TrafficVolError as exc:
        return [], [{"trace_id": series.trace_id, "error": str(exc)}]
    return [{"trace_id": series.trace_id, "timescale_t": series.timescale_t, **adj.to_dict()}], []


def _stationarity_unit(series):
    try:
        rep = stationarity.classify(series.volumes)
    except TrafficVolError as exc:
        return [], [{"trace_id": series.trace_id, "error": str(exc)}]
    return [{"trace_id": series.trace_id, "timescale_t": series.timescale_t, **rep.to_dict()}], []


def _gamma_unit(args):
    src, families = args
    out, failures = [], []
    for f in families:
        entry = {"trace_id": src.trace_id, "family": f.value, "gammas": {}}
        available = {}
        for t, label in corrgof.STUDY_TIMESCALES.items():
            try:
                available[t] = src.at(t).volumes
                entry["gammas"][label] = corrgof.gamma(available[t], f, t).to_dict()
            except report.NotApplicable as exc:
                entry["gammas"][label] = report.skipped(str(exc))
            except TrafficVolError as exc:
                entry["gammas"][label] = report.skipped(f"failed: {exc}")
                failures.append({"trace_id": src.trace_id, "family": f.value, "timescale": label,
                                 "error": str(exc)})
        ok = [g["gamma"] for g in entry["gammas"].values() if "gamma" in g]
        if len(ok) == len(corrgof.STUDY_TIMESCALES):
            entry["upsilon"] = corrgof.upsilon(ok)
        else:
            entry["upsilon"] = None
            entry["upsilon_skipped"] = "gamma is not available at all four study timescales"
        out.append(entry)
    return out, failures


def _provision_unit(args):
    series, eps_list, methods = args
    rows, failures = [], []
    for eps in eps_list:
        try:
            results = provisioning.evaluate(series, eps, methods)
        except TrafficVolError as exc:
            failures.append({"trace_id": series.trace_id, "eps": eps, "error": str(exc)})
            continue
        for m, r in zip(methods, results):
            rows.append({"trace_id": series.trace_id, "timescale_t": series.timescale_t,
                         "label": m.label, **r.to_dict(),
                         "capacity_mbps": provisioning.to_mbps(r.capacity)})
    return rows, failures


def _report_unit(args):
    path, rcfg = args
    return report.build_report(report.TraceSource.load(path), rcfg)


# ---------------------------------------------------------------------------
# commands


def _envelope(cfg: RunConfig, results, failures) -> dict:
    return {"command": cfg.command, "toolkit_version": __version__, "config": cfg.echo(),
            "results": results, "failures": failures}


def _gather(parts):
    results, failures = [], []
    for r, f in parts:
        results.extend(r)
        failures.extend(f)
    return results, failures


def _sorted_sources(cfg: RunConfig):
    srcs = [_load(p) for p in cfg.inputs]
    return sorted(srcs, key=lambda s: (s.trace_id, s.path))


def cmd_aggregate(cfg: RunConfig) -> int:
    srcs = _sorted_sources(cfg)
    if len(srcs) == 1 and not (cfg.out and os.path.isdir(cfg.out)):
        s = _series(srcs[0], cfg)
        if cfg.out:
            ingest.write_series(s, cfg.out)
        else:
            sys.stdout.write(ingest.series_csv_text(s))
        return 0
    os.makedirs(cfg.out, exist_ok=True)
    for src in srcs:
        s = _series(src, cfg)
        ingest.write_series(s, os.path.join(cfg.out, f"{src.trace_id}.csv"))
    return 0


def _families(cfg: RunConfig, default) -> list[Family]:
    return [Family.parse(f) for f in cfg.families] or list(default)


def cmd_fit(cfg: RunConfig) -> tuple[dict, list]:
    fams = _families(cfg, Family)
    res, fail = _gather(_map(_fit_unit, [(_series(s, cfg), fams) for s in _sorted_sources(cfg)],
                             cfg.workers))
    rows = [["trace_id", "timescale_t", "family", "params", "loglik", "n", "xmin", "ks_stat"]]
    for r in res:
        f = r["fit"]
        rows.append([r["trace_id"], r["timescale_t"], f["family"],
                     json.dumps(f["params"], sort_keys=True), f["loglik"], f["n"], f.get("xmin"),
                     r["ks_stat"]])
    return _envelope(cfg, res, fail), rows


def cmd_compare(cfg: RunConfig) -> tuple[dict, list]:
    units = [(_series(s, cfg), cfg.n_boot, cfg.seed) for s in _sorted_sources(cfg)]
    res, fail = _gather(_map(_compare_unit, units, cfg.workers))
    rows = [["trace_id", "timescale_t", "ks_stat", "gof_p", "accepted", "alternative", "r_norm",
             "p_value", "verdict"]]
    for r in res:
        g = r["gof"]
        for alt, c in r["comparisons"].items():
            rows.append([r["trace_id"], r["timescale_t"], g["ks_stat"], g["p_value"],
                         g["accepted"], alt, c["r_norm"], c["p_value"], c["verdict"]])
    return _envelope(cfg, res, fail), rows


def cmd_gamma(cfg: RunConfig) -> tuple[dict, list]:
    fams = _families(cfg, [Family.LOGNORMAL])
    res, fail = _gather(_map(_gamma_unit, [(s, fams) for s in _sorted_sources(cfg)], cfg.workers))
    rows = [["trace_id", "family", "timescale", "gamma", "strong_fit"]]
    for r in res:
        for label, g in r["gammas"].items():
            rows.append([r["trace_id"], r["family"], label, g.get("gamma"), g.get("strong_fit")])
        rows.append([r["trace_id"], r["family"], "upsilon", r["upsilon"], None])
    return _envelope(cfg, res, fail), rows


def cmd_stationarity(cfg: RunConfig) -> tuple[dict, list]:
    units = [_series(s, cfg) for s in _sorted_sources(cfg)]
    res, fail = _gather(_map(_stationarity_unit, units, cfg.workers))
    rows = [["trace_id", "timescale_t", "test", "stat", "p", "lags", "verdict", "classification"]]
    for r in res:
        for test in ("adf", "pp", "kpss", "kpss_diff"):
            t = r[test]
            rows.append([r["trace_id"], r["timescale_t"], test, t["stat"], t["p"], t["lags"],
                         t["verdict"], r["classification"]])
    return _envelope(cfg, res, fail), rows


def cmd_provision(cfg: RunConfig) -> tuple[dict, list]:
    eps = list(cfg.eps) or list(report.DEFAULT_EPS)
    methods = [provisioning.MethodSpec.parse(m) for m in cfg.methods] or list(
        provisioning.DEFAULT_METHODS)
    units = [(_series(s, cfg), eps, methods) for s in _sorted_sources(cfg)]
    res, fail = _gather(_map(_provision_unit, units, cfg.workers))
    rows = [["trace_id", "timescale_t", "target_eps", "method", "capacity_bytes_per_s",
             "capacity_mbps", "eps_hat"]]
    for r in res:
        rows.append([r["trace_id"], r["timescale_t"], r["target_eps"], r["label"],
                     r["capacity_bytes_per_s"], r["capacity_mbps"], r["eps_hat"]])
    return _envelope(cfg, res, fail), rows


def cmd_bill(cfg: RunConfig) -> tuple[dict, list]:
    series = []
    failures = []
    for src in _sorted_sources(cfg):
        try:
            series.append(src.at(cfg.window_seconds))
        except TrafficVolError as exc:
            failures.append({"trace_id": src.trace_id, "error": str(exc)})
    study = billing.billing_study(series, cfg.window_seconds)
    failures.extend({"trace_id": k, "error": v} for k, v in study.failures.items())
    doc = _envelope(cfg, [p.to_dict() for p in study.predictions], failures)
    doc["nrmse"] = {f.value: v for f, v in study.nrmse.items()}
    return doc, study.scatter_rows()


def cmd_synth(cfg: RunConfig) -> int:
    t = cfg.timescales[0] if cfg.timescales else DEFAULT_TIMESCALE
    try:
        s = synth.generate(synth.SynthSpec(synth.SynthKind(cfg.kind), cfg.n, cfg.seed, t,
                                           cfg.params))
    except TrafficVolError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.out:
        ingest.write_series(s, cfg.out)
    else:
        sys.stdout.write(ingest.series_csv_text(s))
    return 0


def cmd_report(cfg: RunConfig) -> int:
    rcfg = report.ReportConfig(
        timescales=tuple(cfg.timescales) or report.DEFAULT_TIMESCALES,
        eps=tuple(cfg.eps) or report.DEFAULT_EPS,
        n_boot=cfg.n_boot, seed=cfg.seed, capacity=cfg.capacity,
        window_seconds=cfg.window_seconds,
    )
    paths = [s.path for s in _sorted_sources(cfg)]
    reports = _map(_report_unit, [(p, rcfg) for p in paths], cfg.workers)
    os.makedirs(cfg.out, exist_ok=True)
    summary = [report.SUMMARY_HEADER]
    for rep in reports:
        base = os.path.join(cfg.out, rep["trace_id"])
        _emit(dumps(rep), base + ".report.json")
        _emit(csv_text([report.PLOTDATA_HEADER] + report.plotdata_rows(rep)), base + ".plotdata.csv")
        summary.extend(report.summary_rows(rep))
    _emit(csv_text(summary), os.path.join(cfg.out, "summary.csv"))
    return 1 if any(r["failures"] for r in reports) else 0


_TABLE_COMMANDS = {
    "fit": cmd_fit, "compare": cmd_compare, "gamma": cmd_gamma, "stationarity": cmd_stationarity,
    "provision": cmd_provision, "bill": cmd_bill,
}


def run(cfg: RunConfig) -> int:
    if cfg.command == "aggregate":
        return cmd_aggregate(cfg)
    if cfg.command == "synth":
        return cmd_synth(cfg)
    if cfg.command == "report":
        return cmd_report(cfg)
    doc, rows = _TABLE_COMMANDS[cfg.command](cfg)
    _emit(dumps(doc) if cfg.format == "json" else csv_text(rows), cfg.out)
    return 1 if doc["failures"] else 0


def main(argv=None) -> int:
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
        return run(cfg)
    except SystemExit as exc:  # argparse usage errors already exit with 2
        return int(exc.code or 0)
    except ConfigError as exc:
        print(f"trafficvol: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"trafficvol: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
