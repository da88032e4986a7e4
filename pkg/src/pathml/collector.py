"""One measurement cycle across all configured AS pairs, plus cron scheduling."""
from __future__ import annotations

import hashlib
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .config import CATEGORIES, CampaignConfig, IsdAs
from .errors import BackendError, IoError, PathMLError, StoreUnavailable, UnsupportedInterval
from .records import (
    ComparerResult,
    MpBandwidthResult,
    MpBandwidthRun,
    MpPingResult,
    RecordEnvelope,
    ShowpathsResult,
)
from .scionproto import DEFAULT_TIMEOUT_S, ProbeRequest, run_probe
from .utc import format_utc

MP_SKIP_REASON = "needs ≥ 2 paths"


def compare_paths(previous, current, src: IsdAs | None = None, dst: IsdAs | None = None) -> ComparerResult:
    prev, cur = frozenset(previous), frozenset(current)
    return ComparerResult(
        src=src, dst=dst,
        added=cur - prev, removed=prev - cur, persisted=prev & cur,
        prev_total=len(prev), cur_total=len(cur),
    )


def cron_line(config: CampaignConfig, binary: str = "pathml", config_path: str = "campaign.json") -> str:
    m = config.pipeline.interval_minutes
    if m < 60 and 60 % m == 0:
        when = "* * * * *" if m == 1 else f"*/{m} * * * *"
    elif m % 60 == 0 and (m // 60 == 1 or (m // 60 < 24 and 24 % (m // 60) == 0)):
        h = m // 60
        when = "0 * * * *" if h == 1 else f"0 */{h} * * *"
    elif m == 1440:
        when = "0 0 * * *"
    else:
        raise UnsupportedInterval(
            f"interval {m} min cannot be expressed in cron; choose a divisor of 60 or a multiple of 60 dividing 24 h"
        )
    return f"{when} {binary} run-cycle --config {config_path}"


class WallClock:
    """Real time, with the cycle number derived from the cadence."""

    def __init__(self, interval_minutes: int = 30):
        self.interval_minutes = interval_minutes
        self._start = datetime.now(timezone.utc).replace(microsecond=0)

    def now(self) -> datetime:
        return self._start

    @property
    def cycle(self) -> int:
        return int(self._start.timestamp()) // (self.interval_minutes * 60)


@dataclass
class CategoryCount:
    attempted: int = 0
    succeeded: int = 0
    failed: int = 0

    def to_dict(self) -> dict:
        return {"attempted": self.attempted, "succeeded": self.succeeded, "failed": self.failed}


@dataclass
class CycleReport:
    cycle_start: datetime
    counts: dict = field(default_factory=lambda: {c: CategoryCount() for c in CATEGORIES})
    duration_ms: float = 0.0
    errors: list = field(default_factory=list)  # (category, pair, kind)
    skipped: list = field(default_factory=list)  # (category, pair, reason)
    warnings: list = field(default_factory=list)
    log_lines: list = field(default_factory=list)
    lock_skipped: bool = False
    stored: int = 0

    def to_dict(self) -> dict:
        return {
            "cycle_start": format_utc(self.cycle_start),
            "counts": {c: v.to_dict() for c, v in self.counts.items()},
            "duration_ms": round(self.duration_ms, 3),
            "errors": [list(e) for e in self.errors],
            "skipped": [list(s) for s in self.skipped],
            "warnings": list(self.warnings),
            "lock_skipped": self.lock_skipped,
            "stored": self.stored,
        }


def _pair_key(src: IsdAs, dst: IsdAs) -> int:
    return int(hashlib.sha256(f"{src}>{dst}".encode()).hexdigest()[:15], 16)


def mp_pick(seed: int, cycle: int, src: IsdAs, dst: IsdAs, category: str, n_paths: int) -> tuple:
    """Two distinct listing indices, a pure function of (seed, cycle, pair, category)."""
    ss = np.random.SeedSequence([seed, cycle, _pair_key(src, dst), CATEGORIES.index(category)])
    a, b = np.random.default_rng(ss).choice(n_paths, size=2, replace=False)
    return int(a), int(b)


class _Cycle:
    def __init__(self, config, backend, store, clock, timeout, retries):
        self.config = config
        self.p = config.pipeline
        self.backend = backend
        self.store = store
        self.timeout = timeout
        self.retries = retries
        self.start = clock.now()
        self.ts = format_utc(self.start)
        self.cycle = clock.cycle
        self.report = CycleReport(cycle_start=self.start)

    def log(self, category, src, dst, fp, err=None):
        status = "ok" if err is None else f"err({err})"
        self.report.log_lines.append(f"{self.ts} | {category} | {src}>{dst} | {fp or '-'} | {status}")

    def probe(self, request):
        return run_probe(self.backend, request, timeout=self.timeout, retries=self.retries)

    def fail(self, category, src, dst, fp, exc):
        kind = exc.kind if isinstance(exc, PathMLError) else type(exc).__name__
        self.report.counts[category].failed += 1
        self.report.errors.append((category, f"{src}>{dst}", kind))
        self.log(category, src, dst, fp, kind)

    def save(self, category, src, dst, payload, fp=None, seq=0, ok=True, err_kind=None):
        env = RecordEnvelope(self.ts, category, src, dst, payload, fp)
        try:
            self.store.store(env, seq)
        except StoreUnavailable:
            raise
        except IoError as exc:
            self.fail(category, src, dst, fp, exc)
            return False
        self.report.stored += 1
        if ok:
            self.report.counts[category].succeeded += 1
            self.log(category, src, dst, fp)
        else:
            self.report.counts[category].failed += 1
            self.report.errors.append((category, f"{src}>{dst}", err_kind))
            self.log(category, src, dst, fp, err_kind)
        return True

    # categories -----------------------------------------------------------------

    def run_pair(self, pool, src, dst):
        on = self.p.enabled
        paths = None
        if on["showpaths"]:
            self.report.counts["showpaths"].attempted += 1
            try:
                paths = self.probe(ProbeRequest("showpaths", dst=dst))
            except BackendError as exc:
                self.fail("showpaths", src, dst, None, exc)
                if on["comparer"]:
                    self.report.counts["comparer"].attempted += 1
                    self.fail("comparer", src, dst, None, exc)
            else:
                env = RecordEnvelope(self.ts, "showpaths", src, dst, ShowpathsResult(dst, tuple(paths)))
                self.store.rotate_showpaths(env)
                self.save("showpaths", src, dst, env.payload)
                if on["comparer"]:
                    self.report.counts["comparer"].attempted += 1
                    hist = self.store.history_showpaths(src, dst)
                    prev = hist.payload.fingerprints if hist is not None else ()
                    cmp = compare_paths(prev, [q.fingerprint for q in paths], src, dst)
                    self.save("comparer", src, dst, cmp)
        if paths is None:
            # without a listing, probe the default path only
            listing = [None]
        else:
            listing = list(paths)
        targets = listing[: self.p.paths_per_pair]

        for category, action in (("ping", "ping"), ("traceroute", "traceroute")):
            if not on[category]:
                continue
            for path in targets:
                fp = path.fingerprint if path is not None else None
                self.report.counts[category].attempted += 1
                try:
                    res = self.probe(ProbeRequest(action, dst=dst, path=path, count=self.p.ping_count))
                except BackendError as exc:
                    self.fail(category, src, dst, fp, exc)
                    continue
                self.save(category, src, dst, res, fp=res.fingerprint or fp)

        servers = self.config.servers_at(dst)
        if on["bandwidth"]:
            if not servers:
                self.report.warnings.append(f"bandwidth: no server registered at {dst}")
            pinned = listing[0] if listing else None
            for si, server in enumerate(servers):
                for ti, tier in enumerate(self.p.bandwidth_tiers_mbps):
                    fp = pinned.fingerprint if pinned is not None else None
                    self.report.counts["bandwidth"].attempted += 1
                    try:
                        res = self.probe(ProbeRequest("bwtest", path=pinned, server=server, target_mbps=tier))
                    except BackendError as exc:
                        self.fail("bandwidth", src, dst, fp, exc)
                        continue
                    self.save("bandwidth", src, dst, res, fp=res.fingerprint or fp,
                              seq=si * len(self.p.bandwidth_tiers_mbps) + ti)

        for category in ("mp_bandwidth", "mp_prober"):
            if not on[category]:
                continue
            if category == "mp_bandwidth" and not servers:
                self.report.skipped.append((category, f"{src}>{dst}", "no bandwidth server at destination"))
                continue
            if paths is None or len(paths) < 2:
                self.report.skipped.append((category, f"{src}>{dst}", MP_SKIP_REASON))
                self.log(category, src, dst, None, "skipped")
                continue
            i, j = mp_pick(self.config.seed, self.cycle, src, dst, category, len(paths))
            pair_paths = (paths[i], paths[j])
            self.report.counts[category].attempted += 1
            if category == "mp_prober":
                self.mp_prober(pool, src, dst, pair_paths)
            else:
                self.mp_bandwidth(pool, src, dst, pair_paths, servers[0])

    def _both(self, pool, requests):
        futures = [pool.submit(self.probe, r) for r in requests]
        out, errs = [], []
        for f in futures:
            try:
                out.append(f.result())
            except BackendError as exc:
                out.append(None)
                errs.append(exc.kind)
        return out, errs

    def mp_prober(self, pool, src, dst, pair_paths):
        reqs = [ProbeRequest("ping", dst=dst, path=q, count=self.p.ping_count) for q in pair_paths]
        results, errs = self._both(pool, reqs)
        payload = MpPingResult(dst, tuple(q.fingerprint for q in pair_paths), tuple(results), tuple(errs))
        self.save("mp_prober", src, dst, payload, ok=not errs, err_kind=errs[0] if errs else None)

    def mp_bandwidth(self, pool, src, dst, pair_paths, server):
        runs, all_errs = [], []
        for tier in self.p.bandwidth_tiers_mbps:
            reqs = [ProbeRequest("bwtest", path=q, server=server, target_mbps=tier) for q in pair_paths]
            results, errs = self._both(pool, reqs)
            runs.append(MpBandwidthRun(float(tier), tuple(results)))
            all_errs.extend(errs)
        payload = MpBandwidthResult(dst, tuple(q.fingerprint for q in pair_paths), tuple(runs), tuple(all_errs))
        self.save("mp_bandwidth", src, dst, payload, ok=not all_errs, err_kind=all_errs[0] if all_errs else None)


def run_cycle(config: CampaignConfig, backend, store, clock, timeout: float = DEFAULT_TIMEOUT_S,
              retries: int = 1) -> CycleReport:
    """Run every enabled category for each local→remote pair and store the records.

    Probe failures become log and report entries; only an unavailable store
    aborts the cycle.
    """
    t0 = time.perf_counter()
    cyc = _Cycle(config, backend, store, clock, timeout, retries)
    with store.cycle_lock() as acquired:
        if not acquired:
            cyc.report.lock_skipped = True
            cyc.report.warnings.append("another cycle holds the lock; tick skipped")
            cyc.report.log_lines.append(f"{cyc.ts} | - | - | - | err(LockHeld)")
        else:
            with ThreadPoolExecutor(max_workers=config.pipeline.mp_concurrency) as pool:
                for a in config.ases:
                    cyc.run_pair(pool, config.local_as, a.isd_as)
    cyc.report.duration_ms = (time.perf_counter() - t0) * 1000.0
    _write_log(store, cyc.report)
    return cyc.report


def _write_log(store, report: CycleReport) -> None:
    path = store.log_path(report.cycle_start)
    if path is None:
        return
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "a") as fh:
            for line in report.log_lines:
                fh.write(line + "\n")
            for w in report.warnings:
                fh.write(f"{format_utc(report.cycle_start)} | warning | - | - | {w}\n")
    except OSError as exc:
        raise StoreUnavailable(f"cannot write cycle log {path}: {exc.strerror}") from None
