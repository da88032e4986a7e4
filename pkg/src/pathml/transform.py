"""JSON records to ML-ready CSV, and windowed datasets for the benchmark tasks."""
from __future__ import annotations

import csv
import io
import math
import os
from collections import defaultdict
from dataclasses import astuple, dataclass, fields
from datetime import datetime
from functools import lru_cache
from pathlib import Path

from .errors import IoError, PathMLError
from .fingerprint import path_fingerprint
from .utc import parse_utc

__all__ = [
    "path_fingerprint",
    "MeasurementRow",
    "HopRow",
    "WindowSpec",
    "FeatureSample",
    "ExportSummary",
    "rows_from_envelopes",
    "export_csv",
    "read_measurements_csv",
    "read_hops_csv",
    "window_samples",
    "build_forecast_samples",
    "build_failure_samples",
    "build_hop_samples",
]


@dataclass(frozen=True)
class MeasurementRow:
    timestamp_utc: str
    cycle_index: int
    src: str
    dst: str
    fingerprint: str | None
    category: str
    rtt_min_ms: float | None = None
    rtt_avg_ms: float | None = None
    rtt_max_ms: float | None = None
    jitter_ms: float | None = None
    loss_pct: float | None = None
    bw_target_mbps: float | None = None
    bw_achieved_cs_mbps: float | None = None
    bw_achieved_sc_mbps: float | None = None
    hop_count: int | None = None
    concurrent: int = 0
    available: int = 1


@dataclass(frozen=True)
class HopRow:
    timestamp_utc: str
    fingerprint: str
    hop_index: int
    isd_as: str
    rtt1_ms: float | None = None
    rtt2_ms: float | None = None
    rtt3_ms: float | None = None


MEASUREMENT_HEADER = tuple(f.name for f in fields(MeasurementRow))
HOP_HEADER = tuple(f.name for f in fields(HopRow))


@dataclass(frozen=True)
class WindowSpec:
    n: int = 12
    horizon: int = 1
    stride: int = 1

    def __post_init__(self):
        if self.n < 1 or self.horizon < 1 or self.stride != 1:
            raise ValueError("window needs n >= 1, horizon >= 1 and stride 1")


@dataclass(frozen=True)
class FeatureSample:
    features: tuple
    label: float | int | None
    fingerprint: str
    t_index: int
    group: str = ""
    feature_cycles: tuple = ()


@lru_cache(maxsize=4096)
def _unix(timestamp: str) -> int:
    return int(parse_utc(timestamp).timestamp())


def cycle_index(timestamp: str | datetime, interval_minutes: int = 30) -> int:
    ts = _unix(timestamp) if isinstance(timestamp, str) else int(timestamp.timestamp())
    return ts // (interval_minutes * 60)


# --- records → rows -----------------------------------------------------------

def _ping_row(ts, ci, src, dst, fp, r, concurrent) -> MeasurementRow:
    ok = r.received > 0
    return MeasurementRow(
        ts, ci, src, dst, fp, "mp_prober" if concurrent else "ping",
        rtt_min_ms=r.rtt_min_ms if ok else None,
        rtt_avg_ms=r.rtt_avg_ms if ok else None,
        rtt_max_ms=r.rtt_max_ms if ok else None,
        jitter_ms=r.jitter_ms if ok else None,
        loss_pct=r.loss_pct,
        concurrent=int(concurrent),
        available=int(ok),
    )


def _bw_row(ts, ci, src, dst, fp, r, concurrent) -> MeasurementRow:
    return MeasurementRow(
        ts, ci, src, dst, fp, "mp_bandwidth" if concurrent else "bandwidth",
        loss_pct=r.loss_pct,
        bw_target_mbps=r.target_mbps,
        bw_achieved_cs_mbps=r.achieved_cs_mbps,
        bw_achieved_sc_mbps=r.achieved_sc_mbps,
        concurrent=int(concurrent),
    )


def rows_from_envelope(env, interval_minutes: int = 30) -> tuple:
    """MeasurementRows and HopRows derived from one record."""
    ts, src, dst = env.timestamp_utc, str(env.src), str(env.dst)
    ci = cycle_index(ts, interval_minutes)
    p = env.payload
    rows, hops = [], []
    if env.category == "ping":
        rows.append(_ping_row(ts, ci, src, dst, p.fingerprint or env.fingerprint, p, False))
    elif env.category == "mp_prober":
        for fp, r in zip(p.paths, p.results):
            if r is not None:
                rows.append(_ping_row(ts, ci, src, dst, fp, r, True))
    elif env.category == "bandwidth":
        rows.append(_bw_row(ts, ci, src, dst, p.fingerprint or env.fingerprint, p, False))
    elif env.category == "mp_bandwidth":
        for run in p.runs:
            for fp, r in zip(p.paths, run.results):
                if r is not None:
                    rows.append(_bw_row(ts, ci, src, dst, fp, r, True))
    elif env.category == "showpaths":
        for path in p.paths:
            rows.append(MeasurementRow(ts, ci, src, dst, path.fingerprint, "showpaths", hop_count=len(path.hops)))
    elif env.category == "comparer":
        # a path that vanished from the listing is unavailable at this cycle
        for fp in sorted(p.removed):
            rows.append(MeasurementRow(ts, ci, src, dst, fp, "comparer", available=0))
    elif env.category == "traceroute":
        alive = any(h.rtts_ms for h in p.hops)
        rows.append(MeasurementRow(ts, ci, src, dst, p.fingerprint, "traceroute",
                                   hop_count=len(p.hops), available=int(alive)))
        for h in p.hops:
            r = tuple(h.rtts_ms) if h.rtts_ms else (None, None, None)
            hops.append(HopRow(ts, p.fingerprint, h.index, str(h.hop.isd_as), *r))
    return rows, hops


def rows_from_envelopes(envelopes, interval_minutes: int = 30) -> tuple:
    rows, hops = [], []
    for env in envelopes:
        r, h = rows_from_envelope(env, interval_minutes)
        rows.extend(r)
        hops.extend(h)
    return sort_rows(rows), sort_hops(hops)


def _k(v) -> tuple:
    # None sorts first; mixed types never compared directly
    return (0, "") if v is None else (1, v)


_ROW_FIELDS = tuple(f.name for f in fields(MeasurementRow))
_HOP_FIELDS = tuple(f.name for f in fields(HopRow))
_ROW_KEY = ("timestamp_utc", "src", "dst", "fingerprint", "category", "concurrent", "bw_target_mbps") + _ROW_FIELDS


def sort_rows(rows) -> list:
    return sorted(rows, key=lambda r: tuple(_k(getattr(r, f)) for f in _ROW_KEY))


def sort_hops(hops) -> list:
    return sorted(hops, key=lambda h: tuple(_k(getattr(h, f)) for f in _HOP_FIELDS))


# --- CSV ---------------------------------------------------------------------------

def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in astuple(r)])
    return buf.getvalue()


@dataclass(frozen=True)
class ExportSummary:
    measurements_path: str
    hops_path: str
    measurement_rows: int
    hop_rows: int
    records: int
    skipped: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def export_csv(store, time_from: datetime | None, time_to: datetime | None, out_dir,
               interval_minutes: int = 30) -> ExportSummary:
    """Write measurements.csv and hops.csv for records in [time_from, time_to]."""
    from .datastore import SearchCriteria

    files = store.search(SearchCriteria(time_from=time_from, time_to=time_to))
    envelopes, skipped = [], 0
    for f in files:
        try:
            envelopes.append(store.load(f))
        except PathMLError:
            skipped += 1
    rows, hops = rows_from_envelopes(envelopes, interval_minutes)
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        mp, hp = out / "measurements.csv", out / "hops.csv"
        for path, text in ((mp, _csv_text(MEASUREMENT_HEADER, rows)), (hp, _csv_text(HOP_HEADER, hops))):
            tmp = path.with_name(f".{path.name}.tmp")
            tmp.write_text(text)
            os.replace(tmp, path)
    except OSError as exc:
        raise IoError(f"cannot write CSV under {out}: {exc.strerror}") from None
    return ExportSummary(str(mp), str(hp), len(rows), len(hops), len(envelopes), skipped)


def _parse(value: str, typ):
    if value == "":
        return None
    if "int" in str(typ):
        return int(value)
    if "float" in str(typ):
        return float(value)
    return value


def _read(path, cls, header):
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            got = tuple(next(reader, ()))
            if got != header:
                raise IoError(f"{path}: unexpected header {got}")
            types = [f.type for f in fields(cls)]
            return [cls(*(_parse(v, t) for v, t in zip(line, types))) for line in reader]
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror}") from None


def read_measurements_csv(path) -> list:
    return _read(path, MeasurementRow, MEASUREMENT_HEADER)


def read_hops_csv(path) -> list:
    return _read(path, HopRow, HOP_HEADER)


# --- windows -----------------------------------------------------------------------

def window_samples(cycles, values, spec: WindowSpec) -> list:
    """(feature cycles, features, target cycle, label) over gap-free runs.

    ``cycles`` must be strictly increasing. A run of length L yields
    max(0, L - n - horizon + 1) windows; no window straddles a gap.
    """
    out = []
    run_start = 0
    need = spec.n + spec.horizon
    for i in range(1, len(cycles) + 1):
        if i < len(cycles) and cycles[i] == cycles[i - 1] + 1:
            continue
        run_c, run_v = cycles[run_start:i], values[run_start:i]
        for s in range(0, len(run_c) - need + 1):
            label_at = s + spec.n - 1 + spec.horizon
            out.append((tuple(run_c[s:s + spec.n]), tuple(run_v[s:s + spec.n]), run_c[label_at], run_v[label_at]))
        run_start = i
    return out


def _series(rows, metric: str) -> dict:
    """{group key: {cycle: value}} for a forecasting metric."""
    acc = defaultdict(lambda: defaultdict(list))
    for r in rows:
        if r.fingerprint is None or r.concurrent:
            continue
        if metric == "rtt_avg":
            if r.category != "ping" or r.rtt_avg_ms is None:
                continue
            acc[(r.fingerprint, "")][r.cycle_index].append(r.rtt_avg_ms)
        elif metric == "bw_achieved":
            if r.category != "bandwidth" or r.bw_achieved_cs_mbps is None:
                continue
            val = (r.bw_achieved_cs_mbps + r.bw_achieved_sc_mbps) / 2.0
            acc[(r.fingerprint, _cell(r.bw_target_mbps))][r.cycle_index].append(val)
        else:
            raise ValueError(f"unknown metric {metric!r}")
    return {k: {c: sum(v) / len(v) for c, v in by_c.items()} for k, by_c in acc.items()}


def build_forecast_samples(rows, metric: str = "rtt_avg", spec: WindowSpec = WindowSpec(12)) -> list:
    """Sliding-window samples per path (bandwidth: per path and tier), ordered by group then time."""
    out = []
    for (fp, group), by_cycle in sorted(_series(rows, metric).items()):
        cycles = sorted(by_cycle)
        values = [by_cycle[c] for c in cycles]
        for fc, feats, t, label in window_samples(cycles, values, spec):
            out.append(FeatureSample(feats, label, fp, t, group, fc))
    return out


FAILURE_FEATURES = (
    *(f"rtt_t-{5 - i}" for i in range(6)),
    *(f"drtt_{i}" for i in range(5)),
    "jitter", "loss", "bandwidth",
)


def build_failure_samples(rows, k: int = 6) -> list:
    """Windows of k available steps labelled by availability at the next cycle.

    Bandwidth is the largest achieved rate (either direction, any tier) from
    the latest cycle at or before the window end with a bandwidth test on the
    same path, or -1 when the path was never tested.
    """
    state = defaultdict(dict)  # fp -> cycle -> (available, rtt, jitter, loss)
    bw = defaultdict(dict)  # fp -> cycle -> max achieved
    for r in rows:
        if r.fingerprint is None:
            continue
        if r.category in ("bandwidth", "mp_bandwidth"):
            v = max(r.bw_achieved_cs_mbps, r.bw_achieved_sc_mbps)
            bw[r.fingerprint][r.cycle_index] = max(v, bw[r.fingerprint].get(r.cycle_index, -1.0))
        elif r.category == "ping" and not r.concurrent:
            prev = state[r.fingerprint].get(r.cycle_index)
            cur = (r.available, r.rtt_avg_ms, r.jitter_ms, r.loss_pct)
            state[r.fingerprint][r.cycle_index] = cur if prev is None or prev[0] else prev
        elif r.category == "comparer" and r.available == 0:
            state[r.fingerprint][r.cycle_index] = (0, None, None, None)
    out = []
    for fp in sorted(state):
        timeline = state[fp]
        bw_cycles = sorted(bw.get(fp, {}))
        for t in sorted(timeline):
            target = t + 1
            if target not in timeline:
                continue
            span = range(t - k + 1, t + 1)
            steps = [timeline.get(c) for c in span]
            if any(s is None or not s[0] for s in steps):
                continue
            rtts = [s[1] for s in steps]
            deltas = [rtts[i + 1] - rtts[i] for i in range(k - 1)]
            last_bw = -1.0
            for c in reversed(bw_cycles):
                if c <= t:
                    last_bw = bw[fp][c]
                    break
            feats = (*rtts, *deltas, steps[-1][2], steps[-1][3], last_bw)
            label = 0 if timeline[target][0] else 1
            out.append(FeatureSample(tuple(float(x) for x in feats), label, fp, target, "", tuple(span)))
    return out


def build_hop_samples(hop_rows, interval_minutes: int = 30, pad_to: int | None = None) -> list:
    """One mean-per-hop cumulative RTT vector per traceroute, padded with -1.

    A timed-out hop takes the preceding hop's value; a record whose first hop
    timed out is dropped.
    """
    groups = defaultdict(list)
    for h in hop_rows:
        groups[(h.timestamp_utc, h.fingerprint)].append(h)
    vecs = []
    for (ts, fp), hs in sorted(groups.items()):
        hs.sort(key=lambda h: h.hop_index)
        vals = []
        for h in hs:
            rtts = [x for x in (h.rtt1_ms, h.rtt2_ms, h.rtt3_ms) if x is not None]
            if rtts:
                vals.append(sum(rtts) / len(rtts))
            elif vals:
                vals.append(vals[-1])
            else:
                break
        if len(vals) != len(hs):
            continue
        vecs.append((ts, fp, vals))
    width = pad_to if pad_to is not None else max((len(v) for _, _, v in vecs), default=0)
    out = []
    for ts, fp, vals in vecs:
        if len(vals) > width:
            continue
        feats = tuple(vals) + (-1.0,) * (width - len(vals))
        out.append(FeatureSample(feats, None, fp, cycle_index(ts, interval_minutes)))
    return out


def is_finite_vector(xs) -> bool:
    return all(isinstance(x, (int, float)) and math.isfinite(x) for x in xs)
