"""Simulated measurement campaigns feeding the benchmark tasks.

Every AS of the simulated topology runs the collector (local→remote pairs),
so the campaign covers the full mesh, as when the toolkit is deployed on
every node. Records stay in memory and go through the same row transform as
exported CSV.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..collector import run_cycle
from ..config import AsDescriptor, CampaignConfig, PipelineConfig, ServerDescriptor
from ..datastore import MemoryStore
from ..simnet import SimClock, SimNetBackend, SimSpec, build
from ..transform import rows_from_envelopes


@dataclass
class CampaignData:
    source: str
    seed: int
    cycles: int
    rows: list
    hop_rows: list
    events: list = field(default_factory=list)
    spec: SimSpec | None = None
    interval_minutes: int = 30

    def provenance(self) -> dict:
        return {"source": self.source, "seed": self.seed, "cycles": self.cycles}


def _ip(i: int) -> str:
    return f"10.{(i >> 8) & 255}.{i & 255}.2"


def mesh_configs(sim, pipeline: PipelineConfig, seed: int) -> list:
    servers = tuple(ServerDescriptor(a, _ip(i), 30100, f"bw-{a.slug}") for i, a in enumerate(sim.ases))
    out = []
    for local in sim.ases:
        ases = tuple(AsDescriptor(a, _ip(i), f"as-{a.slug}") for i, a in enumerate(sim.ases) if a != local)
        out.append(CampaignConfig(local, ases, tuple(s for s in servers if s.isd_as != local), pipeline,
                                  "memory", seed))
    return out


def bench_pipeline(spec: SimSpec, enabled=None) -> PipelineConfig:
    on = {c: True for c in PipelineConfig().enabled}
    if enabled is not None:
        on = {c: c in enabled for c in on}
    return PipelineConfig(enabled=on, interval_minutes=spec.cycle_minutes, paths_per_pair=spec.paths_per_pair)


def run_campaign(spec: SimSpec, cycles: int, events=(), enabled=None, store=None):
    """Run ``cycles`` collector cycles from every AS; returns (store, sim)."""
    sim = build(spec)
    if events:
        sim.schedule_events(events)
    clock = SimClock(0, spec.epoch, spec.cycle_minutes)
    configs = mesh_configs(sim, bench_pipeline(spec, enabled), spec.seed)
    backends = [SimNetBackend(sim, cfg.local_as, clock) for cfg in configs]
    store = store if store is not None else MemoryStore()
    for _ in range(cycles):
        for cfg, be in zip(configs, backends):
            run_cycle(cfg, be, store, clock)
        clock.advance()
    return store, sim


def simulate(spec: SimSpec, cycles: int, events=(), enabled=None) -> CampaignData:
    store, sim = run_campaign(spec, cycles, events, enabled)
    rows, hops = rows_from_envelopes(store.envelopes, spec.cycle_minutes)
    return CampaignData("sim", spec.seed, cycles, rows, hops, list(sim.event_list()), spec, spec.cycle_minutes)
