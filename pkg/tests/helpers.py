"""Small builders shared by several test modules."""
from pathml.bench.campaign import mesh_configs, bench_pipeline
from pathml.collector import run_cycle
from pathml.datastore import MemoryStore
from pathml.simnet import SimClock, SimNetBackend, SimSpec, build


def sim_setup(seed=42, as_count=4, **spec_kw):
    spec = SimSpec(seed=seed, as_count=as_count, **spec_kw)
    sim = build(spec)
    config = mesh_configs(sim, bench_pipeline(spec), seed)[0]
    return spec, sim, config


def run_cycles(config, sim, store, cycles, start=0):
    clock = SimClock(start, sim.spec.epoch, sim.spec.cycle_minutes)
    backend = SimNetBackend(sim, config.local_as, clock)
    reports = []
    for _ in range(cycles):
        reports.append(run_cycle(config, backend, store, clock))
        clock.advance()
    return reports


def one_per_category(seed=42):
    """One envelope of each of the seven categories (second cycle, so comparer has history)."""
    spec, sim, config = sim_setup(seed, as_count=3)
    store = MemoryStore()
    run_cycles(config, sim, store, 2)
    out = {}
    for env in store.envelopes:
        out[env.category] = env
    return out
