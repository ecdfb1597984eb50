"""Packet-record parsing, fixed-timescale binning and volume-series I/O."""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from trafficvol.errors import NoDataError, ParseError, TrafficVolError

NS_PER_S = 1_000_000_000
DEFAULT_ZERO_THRESHOLD = 0.05
DEFAULT_SATURATION_THRESHOLD = 0.05


class PacketRecord(NamedTuple):
    timestamp: int  # ns since epoch
    size: int  # bytes


def timescale_ns(timescale_t: float) -> int:
    """Bin width in integer nanoseconds; rejects widths that are not whole ns."""
    if not timescale_t > 0:
        raise TrafficVolError(f"timescale must be positive, got {timescale_t}")
    ns = float(timescale_t) * NS_PER_S
    whole = round(ns)
    # tolerate binary floating-point noise such as 0.1 * 3
    if whole < 1 or abs(ns - whole) > 1e-6:
        raise TrafficVolError(f"timescale {timescale_t}s is not a whole number of nanoseconds")
    return int(whole)


@dataclass(frozen=True)
class VolumeSeries:
    """Bytes per bin; bin ``i`` covers ``[start + i*T, start + (i+1)*T)`` in ns."""

    timescale_t: float
    start: int
    volumes: np.ndarray
    trace_id: str = ""

    def __post_init__(self):
        v = np.asarray(self.volumes)
        if v.ndim != 1 or v.size < 1:
            raise TrafficVolError("a volume series needs at least one bin")
        if np.any(v < 0):
            raise TrafficVolError("volumes must be non-negative")
        timescale_ns(self.timescale_t)
        object.__setattr__(self, "volumes", v)

    @property
    def n(self) -> int:
        return int(self.volumes.size)

    @property
    def bin_ns(self) -> int:
        return timescale_ns(self.timescale_t)

    @property
    def duration_s(self) -> float:
        return self.n * self.timescale_t

    def metadata(self) -> dict:
        return {"timescale_t_seconds": self.timescale_t, "start_ns": int(self.start), "n": self.n}


@dataclass(frozen=True)
class AnomalyScreen:
    frac_zero: float
    frac_saturated: float
    flagged: bool
    capacity: float
    theta_zero: float
    theta_saturated: float

    def to_dict(self) -> dict:
        return {
            "frac_zero": self.frac_zero,
            "frac_saturated": self.frac_saturated,
            "flagged": self.flagged,
            "capacity_bytes_per_bin": self.capacity,
            "theta_zero": self.theta_zero,
            "theta_saturated": self.theta_saturated,
        }


def _is_number(field: str) -> bool:
    try:
        float(field)
    except ValueError:
        return False
    return True


def _parse_uint(field: str, what: str, lineno: int) -> int:
    field = field.strip()
    if not field.isdigit():
        raise ParseError(f"{what} {field!r} is not an unsigned integer", lineno)
    return int(field)


def parse_packet_csv(data: bytes | str | io.IOBase) -> list[PacketRecord]:
    """Parse ``timestamp_ns,bytes`` lines (LF or CRLF, optional header)."""
    if hasattr(data, "read"):
        data = data.read()
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"input is not UTF-8: {exc}") from None
    records: list[PacketRecord] = []
    for lineno, raw in enumerate(data.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split(",")
        if lineno == 1 and not _is_number(fields[0].strip()):
            continue
        if len(fields) != 2:
            raise ParseError(f"expected 2 fields, found {len(fields)}", lineno)
        ts = _parse_uint(fields[0], "timestamp", lineno)
        size = _parse_uint(fields[1], "size", lineno)
        if size < 1:
            raise ParseError("packet size must be at least 1 byte", lineno)
        if ts >= 2**64:
            raise ParseError("timestamp does not fit in 64 bits", lineno)
        records.append(PacketRecord(ts, size))
    return records


def read_packet_csv(path: str | os.PathLike) -> list[PacketRecord]:
    with open(path, "rb") as fh:
        return parse_packet_csv(fh.read())


def _record_arrays(records) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(records, tuple) and len(records) == 2 and isinstance(records[0], np.ndarray):
        ts, sizes = records
    else:
        records = list(records)
        ts = np.fromiter((r[0] for r in records), dtype=np.uint64, count=len(records))
        sizes = np.fromiter((r[1] for r in records), dtype=np.int64, count=len(records))
    return np.asarray(ts, dtype=np.uint64), np.asarray(sizes, dtype=np.int64)


def aggregate(records, timescale_t: float, start: int | None = None, end: int | None = None,
              trace_id: str = "") -> VolumeSeries:
    """Bin packet records into a volume series at timescale ``timescale_t`` seconds.

    ``records`` is a sequence of :class:`PacketRecord` or a ``(timestamps,
    sizes)`` pair of arrays.  Without ``start`` the first bin begins at the
    earliest timestamp rounded down to a multiple of T.  Without ``end`` the
    series runs through the bin holding the last packet; with ``end`` only
    bins lying wholly before it are kept.
    """
    width = timescale_ns(timescale_t)
    ts, sizes = _record_arrays(records)
    if ts.size == 0:
        raise NoDataError("no data")
    if start is None:
        start = (int(ts.min()) // width) * width
    start = int(start)
    last = int(ts.max())
    if end is None:
        nbins = (last - start) // width + 1 if last >= start else 0
    else:
        nbins = (int(end) - start) // width
    if nbins < 1:
        raise NoDataError("no complete bin in the requested window")
    keep = ts >= np.uint64(start)
    idx = ((ts[keep] - np.uint64(start)) // np.uint64(width)).astype(np.int64)
    w = sizes[keep]
    inside = idx < nbins
    volumes = np.bincount(idx[inside], weights=w[inside], minlength=nbins)
    return VolumeSeries(timescale_t, start, np.rint(volumes).astype(np.int64), trace_id)


def reaggregate(series: VolumeSeries, k: int) -> VolumeSeries:
    """Sum ``k`` adjacent bins (timescale ``k*T``), dropping a trailing remainder."""
    if k < 1:
        raise TrafficVolError("re-aggregation factor must be >= 1")
    m = series.n // k
    if m < 1:
        raise NoDataError(f"series of {series.n} bins has no complete group of {k}")
    v = series.volumes[: m * k].reshape(m, k).sum(axis=1)
    t = series.bin_ns * k / NS_PER_S
    return VolumeSeries(t, series.start, v, series.trace_id)


def rebin(series: VolumeSeries, timescale_t: float) -> VolumeSeries:
    """Re-aggregate to a coarser timescale that is a whole multiple of the current one."""
    ratio = Fraction(timescale_ns(timescale_t), series.bin_ns)
    if ratio.denominator != 1:
        raise TrafficVolError(
            f"cannot derive T={timescale_t}s from a series binned at {series.timescale_t}s"
        )
    out = reaggregate(series, int(ratio))
    return VolumeSeries(timescale_t, out.start, out.volumes, out.trace_id)


def anomaly_screen(series: VolumeSeries, capacity: float,
                   theta_zero: float = DEFAULT_ZERO_THRESHOLD,
                   theta_saturated: float = DEFAULT_SATURATION_THRESHOLD) -> AnomalyScreen:
    """Fraction of empty bins and of bins at/above ``capacity`` bytes per bin."""
    if not capacity > 0:
        raise TrafficVolError("capacity must be positive")
    for name, th in (("theta_zero", theta_zero), ("theta_saturated", theta_saturated)):
        if not 0 < th < 1:
            raise TrafficVolError(f"{name} must lie in (0, 1)")
    v = series.volumes
    fz = float(np.count_nonzero(v == 0)) / v.size
    fs = float(np.count_nonzero(v >= capacity)) / v.size
    return AnomalyScreen(fz, fs, fz >= theta_zero or fs >= theta_saturated,
                         float(capacity), theta_zero, theta_saturated)


# ---------------------------------------------------------------------------
# volume-series CSV + JSON sidecar


def sidecar_path(csv_path: str | os.PathLike) -> str:
    root, _ = os.path.splitext(os.fspath(csv_path))
    return root + ".json"


def series_csv_text(series: VolumeSeries) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bin_index", "bytes"])
    for i, v in enumerate(series.volumes.tolist()):
        w.writerow([i, v])
    return buf.getvalue()


def write_series(series: VolumeSeries, csv_path: str | os.PathLike) -> tuple[str, str]:
    csv_path = os.fspath(csv_path)
    with open(csv_path, "w", newline="") as fh:
        fh.write(series_csv_text(series))
    meta = sidecar_path(csv_path)
    with open(meta, "w") as fh:
        json.dump(series.metadata(), fh, indent=2)
        fh.write("\n")
    return csv_path, meta


def parse_series_csv(text: str, metadata: dict, trace_id: str = "") -> VolumeSeries:
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if not rows:
        raise NoDataError("no data")
    if [c.strip() for c in rows[0]] != ["bin_index", "bytes"]:
        raise ParseError("volume-series CSV must start with header 'bin_index,bytes'", 1)
    volumes = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise ParseError(f"expected 2 fields, found {len(row)}", lineno)
        idx = _parse_uint(row[0], "bin_index", lineno)
        if idx != len(volumes):
            raise ParseError(f"bin_index {idx} out of sequence", lineno)
        volumes.append(_parse_uint(row[1], "bytes", lineno))
    if not volumes:
        raise NoDataError("no data")
    try:
        t = float(metadata["timescale_t_seconds"])
        start = int(metadata["start_ns"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad series metadata: {exc}") from None
    n = metadata.get("n")
    if n is not None and int(n) != len(volumes):
        raise ParseError(f"metadata says n={n} but the CSV has {len(volumes)} rows")
    return VolumeSeries(t, start, np.asarray(volumes, dtype=np.int64), trace_id)


def read_series(csv_path: str | os.PathLike, trace_id: str | None = None) -> VolumeSeries:
    csv_path = os.fspath(csv_path)
    meta_path = sidecar_path(csv_path)
    if not os.path.exists(meta_path):
        raise ParseError(f"missing metadata sidecar {meta_path}")
    with open(meta_path) as fh:
        meta = json.load(fh)
    with open(csv_path, newline="") as fh:
        text = fh.read()
    if trace_id is None:
        trace_id = os.path.splitext(os.path.basename(csv_path))[0]
    return parse_series_csv(text, meta, trace_id)


def is_series_csv(path: str | os.PathLike) -> bool:
    with open(path, newline="") as fh:
        first = fh.readline().strip()
    return first.replace(" ", "") == "bin_index,bytes"


def is_whole_multiple(coarse: float, fine: float) -> bool:
    r = Fraction(timescale_ns(coarse), timescale_ns(fine))
    return r.denominator == 1
