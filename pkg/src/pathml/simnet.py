"""Deterministic multi-AS SCION network simulator.

The simulator implements the probe-backend contract so a whole campaign can
run without a SCION deployment. Path state follows a diurnal-plus-noise
latent model; scheduled ground-truth events (failures with optional
precursor ramps, anomalies, bottlenecks) perturb it in known ways.

Every random draw is keyed by (seed, path, cycle, stream), so results never
depend on call order and adding an event never changes the noise of any
other quantity.
"""
from __future__ import annotations

import json
import math
import threading
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .config import IsdAs, ServerDescriptor
from .errors import (
    BackendError,
    EventInvariantError,
    InvalidSpec,
    IoError,
    OverlappingEvents,
    SchemaError,
    ServerUnreachable,
    UnknownFingerprint,
)
from .utc import format_utc, parse_utc
from .scionproto import BandwidthResult, HopRef, PathRecord, PingResult, TracerouteHop, TracerouteResult

EVENT_KINDS = ("failure", "anomaly", "bottleneck")
DEFAULT_EPOCH = "2025-01-01T00:00:00Z"

# RNG stream tags
_S_BUILD, _S_NOISE, _S_PING, _S_BW, _S_TRACE, _S_PLAN = range(6)


@dataclass(frozen=True)
class SimSpec:
    as_count: int = 4
    paths_per_pair: int = 4
    hops_range: tuple = (3, 7)
    base_rtt_ms_range: tuple = (1.0, 30.0)
    diurnal_amplitude_pct: float = 10.0
    noise_sigma_ms: float = 1.5
    link_capacity_mbps_range: tuple = (20.0, 200.0)
    cross_traffic_amplitude_pct: float = 30.0
    cycle_minutes: int = 30
    seed: int = 0
    epoch: str = DEFAULT_EPOCH

    def validate(self) -> "SimSpec":
        if self.as_count < 2:
            raise InvalidSpec("as_count must be at least 2")
        if self.paths_per_pair < 1:
            raise InvalidSpec("paths_per_pair must be at least 1")
        for name in ("hops_range", "base_rtt_ms_range", "link_capacity_mbps_range"):
            lo, hi = getattr(self, name)
            if lo > hi or lo <= 0:
                raise InvalidSpec(f"{name} must satisfy 0 < min <= max, got {[lo, hi]}")
        if self.hops_range[0] < 2:
            raise InvalidSpec("paths need at least 2 hops (source and destination)")
        for name in ("diurnal_amplitude_pct", "noise_sigma_ms", "cross_traffic_amplitude_pct"):
            if getattr(self, name) < 0:
                raise InvalidSpec(f"{name} must be non-negative")
        if self.diurnal_amplitude_pct >= 100 or self.cross_traffic_amplitude_pct >= 100:
            raise InvalidSpec("amplitudes must stay below 100%")
        if self.cycle_minutes < 1:
            raise InvalidSpec("cycle_minutes must be positive")
        if not 0 <= self.seed < 2**64:
            raise InvalidSpec("seed must be a 64-bit unsigned integer")
        try:
            parse_utc(self.epoch)
        except ValueError:
            raise InvalidSpec(f"epoch {self.epoch!r} is not YYYY-MM-DDTHH:MM:SSZ") from None
        return self

    @property
    def cycles_per_day(self) -> float:
        return 24 * 60 / self.cycle_minutes

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hops_range"] = list(self.hops_range)
        d["base_rtt_ms_range"] = list(self.base_rtt_ms_range)
        d["link_capacity_mbps_range"] = list(self.link_capacity_mbps_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimSpec":
        known = set(cls.__dataclass_fields__)
        extra = sorted(set(d) - known)
        if extra:
            raise SchemaError(f"simspec: unknown field {extra[0]!r}")
        kw = dict(d)
        for name in ("hops_range", "base_rtt_ms_range", "link_capacity_mbps_range"):
            if name in kw:
                kw[name] = tuple(kw[name])
        return cls(**kw).validate()


@dataclass(frozen=True)
class GroundTruthEvent:
    kind: str
    fingerprint: str
    start_cycle: int
    duration_cycles: int = 1
    params: dict = field(default_factory=dict)

    @property
    def precursor(self) -> int:
        return int(self.params.get("precursor_cycles", 0)) if self.kind == "failure" else 0

    @property
    def span(self) -> tuple:
        """Cycles the event touches, precursor included: [first, last)."""
        return self.start_cycle - self.precursor, self.start_cycle + self.duration_cycles

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "fingerprint": self.fingerprint,
            "start_cycle": self.start_cycle,
            "duration_cycles": self.duration_cycles,
            "params": dict(self.params),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruthEvent":
        extra = sorted(set(d) - {"kind", "fingerprint", "start_cycle", "duration_cycles", "params"})
        if extra:
            raise SchemaError(f"event: unknown field {extra[0]!r}")
        return cls(d["kind"], d["fingerprint"], int(d["start_cycle"]), int(d.get("duration_cycles", 1)),
                   dict(d.get("params", {})))


@dataclass(frozen=True)
class LatentState:
    rtt_ms: float
    jitter_ms: float
    loss_pct: float
    capacity_mbps: float
    per_hop_rtt_ms: tuple
    available: bool = True


@dataclass
class SimClock:
    cycle: int = 0
    epoch: str = DEFAULT_EPOCH
    cycle_minutes: int = 30

    def now(self) -> datetime:
        return parse_utc(self.epoch) + timedelta(minutes=self.cycle * self.cycle_minutes)

    def advance(self, n: int = 1) -> None:
        if n < 0:
            raise ValueError("the simulation clock never moves backwards")
        self.cycle += n


@dataclass
class _SimPath:
    record: PathRecord
    src: IsdAs
    dst: IsdAs
    base_hop_ms: np.ndarray
    phase: float
    capacity_mbps: float
    capacity_phase: float
    base_loss_pct: float
    jitter_scale: float
    key: int


def _rng(*key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in key]))


class SimNet:
    """A built topology plus its scheduled events."""

    def __init__(self, spec: SimSpec):
        self.spec = spec.validate()
        self.ases = tuple(IsdAs(19, f"ffaa:0:{0x1301 + i:x}") for i in range(spec.as_count))
        pool_size = max(8, 2 * spec.as_count, spec.hops_range[1])
        self.transit = tuple(IsdAs(19, f"ffaa:1:{k + 1:x}") for k in range(pool_size))
        self.paths: dict = {}
        self.pairs: dict = {}
        self.events: dict = {}
        self._build()

    # topology -------------------------------------------------------------

    def _build(self) -> None:
        s = self.spec
        rng = _rng(s.seed, _S_BUILD)
        for a in self.ases:
            for b in self.ases:
                if a == b:
                    continue
                fps = []
                tries = 0
                while len(fps) < s.paths_per_pair:
                    tries += 1
                    if tries > 1000 * s.paths_per_pair:
                        raise InvalidSpec("cannot draw enough distinct paths; widen hops_range")
                    n_hops = int(rng.integers(s.hops_range[0], s.hops_range[1] + 1))
                    mids = [self.transit[i] for i in rng.choice(len(self.transit), n_hops - 2, replace=False)]
                    chain = [a, *mids, b]
                    links = rng.integers(1, 65, size=(n_hops - 1, 2))
                    hops = tuple(
                        HopRef(ia, int(links[i - 1, 1]) if i > 0 else 0, int(links[i, 0]) if i < n_hops - 1 else 0)
                        for i, ia in enumerate(chain)
                    )
                    record = PathRecord(hops=hops, mtu=int(rng.choice([1280, 1400, 1472])))
                    if record.fingerprint in self.paths:
                        continue
                    self.paths[record.fingerprint] = _SimPath(
                        record=record,
                        src=a,
                        dst=b,
                        base_hop_ms=rng.uniform(*s.base_rtt_ms_range, size=n_hops),
                        phase=float(rng.uniform(0, 2 * math.pi)),
                        capacity_mbps=float(rng.uniform(*s.link_capacity_mbps_range)),
                        capacity_phase=float(rng.uniform(0, 2 * math.pi)),
                        base_loss_pct=float(rng.uniform(0.0, 0.5)),
                        jitter_scale=float(rng.uniform(0.5, 1.5)),
                        key=int(record.fingerprint, 16),
                    )
                    fps.append(record.fingerprint)
                self.pairs[(a, b)] = fps

    def path_records(self, src: IsdAs | None = None, dst: IsdAs | None = None) -> list:
        out = []
        for (a, b), fps in self.pairs.items():
            if (src is None or a == src) and (dst is None or b == dst):
                out.extend(self.paths[fp].record for fp in fps)
        return out

    def _path(self, fingerprint: str) -> _SimPath:
        try:
            return self.paths[fingerprint]
        except KeyError:
            raise UnknownFingerprint(f"no simulated path {fingerprint}") from None

    # events ---------------------------------------------------------------

    def schedule_events(self, plan) -> "SimNet":
        """Validate and add ground-truth events; all-or-nothing."""
        staged = {fp: list(evs) for fp, evs in self.events.items()}
        for ev in plan:
            p = self._path(ev.fingerprint)
            _check_event(ev, len(p.record.hops))
            lo, hi = ev.span
            for other in staged.get(ev.fingerprint, []):
                olo, ohi = other.span
                if lo < ohi and olo < hi:
                    raise OverlappingEvents(
                        f"{ev.kind}@{ev.start_cycle} overlaps {other.kind}@{other.start_cycle} on {ev.fingerprint}"
                    )
            staged.setdefault(ev.fingerprint, []).append(ev)
        self.events = {fp: sorted(evs, key=lambda e: e.start_cycle) for fp, evs in staged.items()}
        return self

    def event_list(self) -> list:
        return sorted((e for evs in self.events.values() for e in evs), key=lambda e: (e.start_cycle, e.fingerprint))

    def is_failed(self, fingerprint: str, cycle: int) -> bool:
        for ev in self.events.get(fingerprint, ()):
            if ev.kind == "failure" and ev.start_cycle <= cycle < ev.start_cycle + ev.duration_cycles:
                return True
        return False

    # latent model -----------------------------------------------------------

    def metrics_at(self, fingerprint: str, cycle: int) -> LatentState:
        s = self.spec
        p = self._path(fingerprint)
        omega = 2 * math.pi / s.cycles_per_day
        diurnal = 1.0 + s.diurnal_amplitude_pct / 100.0 * math.sin(omega * cycle + p.phase)
        cum = np.cumsum(p.base_hop_ms * diurnal)
        jitter = s.noise_sigma_ms * p.jitter_scale
        loss = p.base_loss_pct
        cross = s.cross_traffic_amplitude_pct / 100.0 * 0.5 * (1.0 + math.sin(omega * cycle + p.capacity_phase))
        capacity = p.capacity_mbps * (1.0 - cross)
        available = True
        for ev in self.events.get(fingerprint, ()):
            lo, hi = ev.span
            if not lo <= cycle < hi:
                continue
            if ev.kind == "failure":
                if cycle >= ev.start_cycle:
                    available = False
                else:
                    step = cycle - lo + 1
                    cum = cum * (1.0 + 0.1 * step)
                    jitter *= 2.0
            elif ev.kind == "anomaly":
                cum = cum * float(ev.params["rtt_factor"])
                loss += float(ev.params.get("extra_loss_pct", 0.0))
            elif ev.kind == "bottleneck":
                cum = cum.copy()
                cum[int(ev.params["hop_index"]):] += float(ev.params["added_delay_ms"])
        n = len(cum)
        noise = _rng(s.seed, _S_NOISE, p.key, cycle).normal(0.0, 1.0) * s.noise_sigma_ms
        per_hop = np.maximum(cum + noise * np.arange(1, n + 1) / n, 0.0)
        if not available:
            loss = 100.0
        return LatentState(
            rtt_ms=float(per_hop[-1]),
            jitter_ms=float(jitter),
            loss_pct=float(min(loss, 100.0)),
            capacity_mbps=float(capacity),
            per_hop_rtt_ms=tuple(float(x) for x in per_hop),
            available=available,
        )


def _check_event(ev: GroundTruthEvent, hop_count: int) -> None:
    if ev.kind not in EVENT_KINDS:
        raise EventInvariantError(f"unknown event kind {ev.kind!r}")
    if ev.duration_cycles < 1 or ev.start_cycle < 0:
        raise EventInvariantError("events need start_cycle >= 0 and duration_cycles >= 1")
    if ev.kind == "failure":
        if ev.precursor < 0:
            raise EventInvariantError("precursor_cycles must be >= 0")
    elif ev.kind == "anomaly":
        if float(ev.params.get("rtt_factor", 0)) <= 1:
            raise EventInvariantError("anomaly rtt_factor must exceed 1")
        if float(ev.params.get("extra_loss_pct", 0)) < 0:
            raise EventInvariantError("anomaly extra_loss_pct must be >= 0")
    else:
        h = ev.params.get("hop_index")
        if h is None or not 0 <= int(h) < hop_count:
            raise EventInvariantError(f"bottleneck hop_index {h} outside path of {hop_count} hops")
        if float(ev.params.get("added_delay_ms", -1)) < 0:
            raise EventInvariantError("bottleneck added_delay_ms must be >= 0")


def build(spec: SimSpec) -> SimNet:
    return SimNet(spec)


# --- plans ---------------------------------------------------------------------

def generate_plan(
    sim: SimNet,
    fingerprints,
    cycles: int,
    *,
    failures: int = 0,
    precursor_share: float = 0.8,
    precursor_choices=(2, 3, 4),
    failure_duration=(1, 3),
    anomalies: int = 0,
    anomaly_factor=(1.5, 3.0),
    anomaly_loss_pct=(2.0, 10.0),
    anomaly_duration=(1, 3),
    bottlenecks: int = 0,
    bottleneck_delay_ms=(30.0, 100.0),
    bottleneck_duration=(1, 3),
    min_gap: int = 8,
    lead_in: int = 8,
    seed: int | None = None,
) -> list:
    """Randomly place events on ``fingerprints`` without overlap.

    Exactly ``round(precursor_share * failures)`` failures get a precursor
    ramp (length drawn from ``precursor_choices``); the rest are abrupt.
    Events on one path keep ``min_gap`` clean cycles between them.
    """
    fingerprints = list(fingerprints)
    if not fingerprints and (failures or anomalies or bottlenecks):
        raise InvalidSpec("no paths to place events on")
    rng = _rng(sim.spec.seed if seed is None else seed, _S_PLAN)
    n_prec = int(round(precursor_share * failures))
    kinds = ["failure"] * failures + ["anomaly"] * anomalies + ["bottleneck"] * bottlenecks
    prec_flags = [True] * n_prec + [False] * (failures - n_prec)
    prec_flags = [prec_flags[i] for i in rng.permutation(failures)] if failures else []
    occupied: dict = {fp: [] for fp in fingerprints}
    plan = []
    fi = 0
    for kind in kinds:
        if kind == "failure":
            k = int(rng.choice(precursor_choices)) if prec_flags[fi] else 0
            fi += 1
            dur = int(rng.integers(failure_duration[0], failure_duration[1] + 1))
            params = {"precursor_cycles": k}
        elif kind == "anomaly":
            k = 0
            dur = int(rng.integers(anomaly_duration[0], anomaly_duration[1] + 1))
            params = {
                "rtt_factor": round(float(rng.uniform(*anomaly_factor)), 4),
                "extra_loss_pct": round(float(rng.uniform(*anomaly_loss_pct)), 4),
            }
        else:
            k = 0
            dur = int(rng.integers(bottleneck_duration[0], bottleneck_duration[1] + 1))
            params = {"added_delay_ms": round(float(rng.uniform(*bottleneck_delay_ms)), 3)}
        for _ in range(2000):
            fp = fingerprints[int(rng.integers(len(fingerprints)))]
            lo_start = lead_in + k
            hi_start = cycles - dur
            if hi_start <= lo_start:
                raise InvalidSpec(f"campaign of {cycles} cycles too short for events")
            start = int(rng.integers(lo_start, hi_start))
            lo, hi = start - k, start + dur
            if all(hi + min_gap <= olo or ohi + min_gap <= lo for olo, ohi in occupied[fp]):
                break
        else:
            raise InvalidSpec(f"could not place {len(kinds)} events without overlap; lower the rates")
        if kind == "bottleneck":
            params = {"hop_index": int(rng.integers(len(sim.paths[fp].record.hops))), **params}
        occupied[fp].append((lo, hi))
        plan.append(GroundTruthEvent(kind, fp, start, dur, params))
    return sorted(plan, key=lambda e: (e.start_cycle, e.fingerprint))


def plan_from_rates(
    sim: SimNet,
    fingerprints,
    cycles: int,
    failures_per_week: float = 0.0,
    anomaly_contamination: float = 0.0,
    bottleneck_count: int = 0,
    seed: int | None = None,
) -> list:
    """Event plan from campaign-level rates.

    ``failures_per_week`` counts per path; ``anomaly_contamination`` is the
    fraction of path-cycles to cover with anomalies (mean duration 2).
    """
    fingerprints = list(fingerprints)
    weeks = cycles / (7 * sim.spec.cycles_per_day)
    failures = int(round(failures_per_week * weeks * len(fingerprints)))
    anomalies = int(round(anomaly_contamination * cycles * len(fingerprints) / 2))
    return generate_plan(sim, fingerprints, cycles, failures=failures, anomalies=anomalies,
                         bottlenecks=bottleneck_count, seed=seed)


def load_events(path) -> list:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc.msg})") from None
    items = doc["events"] if isinstance(doc, dict) and "events" in doc else doc
    if not isinstance(items, list):
        raise SchemaError(f"{path}: expected a list of events")
    return [GroundTruthEvent.from_dict(e) for e in items]


def dumps_events(events) -> str:
    return json.dumps({"events": [e.to_dict() for e in events]}, indent=2) + "\n"


def load_spec(path) -> SimSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc.msg})") from None
    return SimSpec.from_dict(doc)


def dumps_spec(spec: SimSpec) -> str:
    return json.dumps(spec.to_dict(), indent=2) + "\n"


# --- probe backend ---------------------------------------------------------------

class SimNetBackend:
    """ProbeBackend over a SimNet, measuring from ``local_as`` at ``clock.cycle``."""

    def __init__(self, sim: SimNet, local_as: IsdAs, clock: SimClock):
        if local_as not in sim.ases:
            raise InvalidSpec(f"{local_as} is not a simulated AS")
        self.sim = sim
        self.local_as = local_as
        self.clock = clock
        self._lock = threading.Lock()
        self._calls: dict = {}
        self._calls_cycle = None

    def _draw(self, stream: int, p: _SimPath, extra: int = 0) -> np.random.Generator:
        cycle = self.clock.cycle
        with self._lock:
            if self._calls_cycle != cycle:
                self._calls = {}
                self._calls_cycle = cycle
            key = (stream, p.key, extra)
            n = self._calls.get(key, 0)
            self._calls[key] = n + 1
        return _rng(self.sim.spec.seed, stream, p.key, cycle, extra, n)

    def _pair_paths(self, dst: IsdAs) -> list:
        if dst not in self.sim.ases or dst == self.local_as:
            raise BackendError(f"{dst} is not a reachable simulated AS", "UnknownDestination")
        return [self.sim.paths[fp] for fp in self.sim.pairs[(self.local_as, dst)]]

    def _resolve(self, dst: IsdAs, path: PathRecord | None) -> _SimPath | None:
        """Pinned path, or the first live one; None when every path is down."""
        candidates = self._pair_paths(dst)
        if path is not None:
            p = self.sim.paths.get(path.fingerprint)
            if p is None or p.dst != dst or p.src != self.local_as:
                raise BackendError(f"path {path.fingerprint} does not lead to {dst}", "UnknownPath")
            return p
        cycle = self.clock.cycle
        return next((p for p in candidates if not self.sim.is_failed(p.record.fingerprint, cycle)), None)

    def showpaths(self, dst, timeout=None):
        cycle = self.clock.cycle
        expiry = format_utc(self.clock.now() + timedelta(hours=6))
        out = []
        for p in self._pair_paths(dst):
            if self.sim.is_failed(p.record.fingerprint, cycle):
                continue
            r = p.record
            out.append(PathRecord(hops=r.hops, mtu=r.mtu, status="alive", expiry=expiry, fingerprint=r.fingerprint))
        return out

    def ping(self, dst, count, path=None, timeout=None):
        p = self._resolve(dst, path)
        if p is None:
            return PingResult(dst, None, count, 0, 100.0)
        fp = p.record.fingerprint
        state = self.sim.metrics_at(fp, self.clock.cycle)
        rng = self._draw(_S_PING, p, count)
        drops = rng.random(count) < state.loss_pct / 100.0
        samples = np.maximum(state.rtt_ms + state.jitter_ms * rng.normal(size=count), 0.05)
        got = samples[~drops] if state.available else samples[:0]
        received = int(got.size)
        loss = round(100.0 * (count - received) / count, 4)
        if received == 0:
            return PingResult(dst, fp, count, 0, loss)
        mean = float(got.mean())
        return PingResult(
            dst, fp, count, received, loss,
            rtt_min_ms=round(float(got.min()), 3),
            rtt_avg_ms=round(mean, 3),
            rtt_max_ms=round(float(got.max()), 3),
            jitter_ms=round(float(np.abs(got - mean).mean()), 3),
        ).validate()

    def bwtest(self, server: ServerDescriptor, target_mbps, path=None, timeout=None):
        p = self._resolve(server.isd_as, path)
        if p is None or self.sim.is_failed(p.record.fingerprint, self.clock.cycle):
            raise ServerUnreachable(f"no live path to bandwidth server {server.address}")
        state = self.sim.metrics_at(p.record.fingerprint, self.clock.cycle)
        rng = self._draw(_S_BW, p, int(round(target_mbps * 1000)))
        ceiling = min(float(target_mbps), state.capacity_mbps)
        shave = np.clip(np.abs(rng.normal(0.0, 0.01, size=2)), 0.0, 0.05)
        excess = max(0.0, 1.0 - state.capacity_mbps / float(target_mbps)) * 100.0
        return BandwidthResult(
            server=server,
            fingerprint=p.record.fingerprint,
            target_mbps=float(target_mbps),
            achieved_cs_mbps=round(ceiling * (1.0 - float(shave[0])), 2),
            achieved_sc_mbps=round(ceiling * (1.0 - float(shave[1])), 2),
            loss_pct=round(min(100.0, state.loss_pct + excess), 1),
        ).validate()

    def traceroute(self, dst, path=None, timeout=None):
        p = self._resolve(dst, path)
        if p is None:
            p = self._pair_paths(dst)[0]
        state = self.sim.metrics_at(p.record.fingerprint, self.clock.cycle)
        rng = self._draw(_S_TRACE, p)
        hops = []
        for i, (hop, mean) in enumerate(zip(p.record.hops, state.per_hop_rtt_ms)):
            if not state.available:
                rtts = ()
            else:
                draws = np.maximum(mean + 0.5 * state.jitter_ms * rng.normal(size=3), 0.01)
                rtts = tuple(round(float(x), 3) for x in draws)
            hops.append(TracerouteHop(i, hop, rtts))
        return TracerouteResult(dst, p.record.fingerprint, tuple(hops)).validate()
