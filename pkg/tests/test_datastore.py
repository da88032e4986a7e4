import json
from dataclasses import replace
from datetime import datetime, timezone

import pytest

from helpers import one_per_category, run_cycles, sim_setup
from pathml.config import CATEGORIES, validate_isd_as
from pathml.datastore import MemoryStore, SearchCriteria, Store, record_filename
from pathml.errors import InvalidCriteria, IoError, SchemaError, StoreUnavailable
from pathml.records import RecordEnvelope

ENVS = one_per_category()


def utc(*a):
    return datetime(*a, tzinfo=timezone.utc)


@pytest.fixture
def store(tmp_path):
    return Store(tmp_path / "store")


def test_layout_path(store):
    env = replace(ENVS["ping"], timestamp_utc="2025-01-01T00:00:00Z")
    p = store.store(env)
    rel = p.relative_to(store.root)
    assert rel.parts[:3] == ("measurements", "2025-01-01", "ping")
    assert p.name == record_filename(env)
    assert p.name.startswith("20250101T000000Z_19-ffaa-0-1301_")


def test_category_payload_mismatch(store):
    bad = replace(ENVS["ping"], payload=ENVS["bandwidth"].payload)
    with pytest.raises(SchemaError):
        store.store(bad)


def test_second_write_wins(store):
    env = ENVS["ping"]
    p1 = store.store(env)
    changed = replace(env, payload=replace(env.payload, rtt_max_ms=env.payload.rtt_max_ms + 1))
    p2 = store.store(changed)
    assert p1 == p2
    assert len(store.search()) == 1
    assert store.load(p1) == changed


@pytest.mark.parametrize("category", CATEGORIES)
def test_store_load_roundtrip(store, category):
    env = ENVS[category]
    assert store.load(store.store(env)) == env


def test_seq_bounds(store):
    with pytest.raises(SchemaError):
        store.store(ENVS["bandwidth"], seq=10000)


def test_rotation(store):
    env = ENVS["showpaths"]
    v = [replace(env, timestamp_utc=f"2025-01-01T0{i}:00:00Z") for i in range(1, 4)]
    store.rotate_showpaths(v[0])
    assert store.current_showpaths(env.src, env.dst) == v[0]
    assert store.history_showpaths(env.src, env.dst) is None
    store.rotate_showpaths(v[1])
    assert store.current_showpaths(env.src, env.dst) == v[1]
    assert store.history_showpaths(env.src, env.dst) == v[0]
    store.rotate_showpaths(v[2])
    kept = [store.history_showpaths(env.src, env.dst), store.current_showpaths(env.src, env.dst)]
    assert kept == [v[1], v[2]]
    assert len(list((store.root / "history").iterdir())) == 1


def test_rotation_rejects_other_categories(store):
    with pytest.raises(SchemaError):
        store.rotate_showpaths(ENVS["ping"])


def _campaign(store, cycles=2):
    spec, sim, config = sim_setup(42, as_count=4)
    config = replace(config, pipeline=replace(config.pipeline, paths_per_pair=3))
    run_cycles(config, sim, store, cycles)
    return config


def test_search_ping_count(store):
    config = _campaign(store)
    assert config.pipeline.paths_per_pair == 3 and len(config.ases) == 3
    assert len(store.search(SearchCriteria(category="ping"))) == 18


def test_search_filters(store):
    config = _campaign(store)
    dst = config.ases[0].isd_as
    hits = store.keys(SearchCriteria(src=config.local_as, dst=dst, category="traceroute"))
    assert len(hits) == 6 and all(k.dst == dst for k in hits)
    fp = hits[0].fingerprint
    assert all(k.fingerprint == fp for k in store.keys(SearchCriteria(fingerprint=fp)))
    assert store.search(SearchCriteria(src=dst, dst=dst)) == []
    first = store.keys(SearchCriteria(time_to=utc(2025, 1, 1, 0, 0)))
    assert first and all(k.timestamp == utc(2025, 1, 1) for k in first)


def test_inverted_range(store):
    with pytest.raises(InvalidCriteria):
        store.search(SearchCriteria(time_from=utc(2025, 1, 2), time_to=utc(2025, 1, 1)))
    with pytest.raises(InvalidCriteria):
        store.search(SearchCriteria(category="pingg"))


def test_archive_day(store):
    _campaign(store)
    total = store.status()["total_files"]
    n = store.archive(utc(2025, 1, 1), utc(2025, 1, 1, 23, 59, 59))
    assert n == total
    assert not (store.root / "measurements" / "2025-01-01").exists()
    assert len(list((store.root / "archives" / "2025-01-01").rglob("*.json"))) == n
    assert store.status()["total_files"] == total
    assert store.archive(utc(2025, 1, 1), utc(2025, 1, 2)) == 0


def test_archive_empty_range_and_categories(store):
    _campaign(store)
    assert store.archive(utc(2030, 1, 1), utc(2030, 1, 2)) == 0
    n = store.archive(None, None, ["ping"])
    assert n == 18
    assert store.status()["measurements"]["ping"]["files"] == 0
    assert store.status()["archives"]["ping"]["files"] == 18


def test_purge_and_status(store):
    _campaign(store)
    n = store.status()["measurements"]["traceroute"]["files"]
    assert store.purge(SearchCriteria(category="traceroute"), dry_run=True) == n
    assert store.status()["measurements"]["traceroute"]["files"] == n
    assert store.purge(SearchCriteria(category="traceroute")) == n
    assert store.status()["measurements"]["traceroute"]["files"] == 0


def test_status_empty(store):
    st = store.status()
    assert st["total_files"] == 0 and st["total_bytes"] == 0
    assert st["current"] == 0 and st["history"] == 0
    assert all(v == {"files": 0, "bytes": 0} for a in ("measurements", "archives") for v in st[a].values())


class Crash(Exception):
    pass


def test_crash_between_write_and_rename(store):
    store.store(ENVS["ping"])

    def boom(tmp, target):
        raise Crash

    store.fault_hook = boom
    with pytest.raises(Crash):
        store.store(ENVS["traceroute"])
    found = store.search()
    assert len(found) == 1
    for f in found:
        json.loads(f.read_text())
    leftovers = [p for p in store.root.rglob("*.tmp")]
    assert leftovers and all(p.name.startswith(".") for p in leftovers)


def test_write_failure_is_io_error(store):
    def deny(tmp, target):
        raise PermissionError(13, "Permission denied")

    store.fault_hook = deny
    with pytest.raises(IoError):
        store.store(ENVS["ping"])


def test_load_corrupt(store):
    p = store.store(ENVS["ping"])
    p.write_text("{not json")
    with pytest.raises(SchemaError):
        store.load(p)
    with pytest.raises(IoError):
        store.load(store.root / "missing.json")


def test_store_unavailable(tmp_path):
    with pytest.raises(StoreUnavailable):
        Store(tmp_path / "absent", create=False)
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(StoreUnavailable):
        Store(blocker / "sub")


def test_cycle_lock_exclusive(store):
    with store.cycle_lock() as first:
        assert first
        with Store(store.root).cycle_lock() as second:
            assert second is False
    with store.cycle_lock() as again:
        assert again


def test_memory_store_matches_file_store(store):
    mem = MemoryStore()
    spec, sim, config = sim_setup(7, as_count=3)
    run_cycles(config, sim, mem, 2)
    run_cycles(config, sim, store, 2)
    on_disk = [store.load(p) for p in store.search()]
    key = lambda e: (e.category, record_filename(e))
    assert sorted(on_disk, key=key) == sorted(mem.envelopes, key=key)


def test_envelope_dict_roundtrip():
    for env in ENVS.values():
        assert RecordEnvelope.from_dict(json.loads(json.dumps(env.to_dict()))) == env


def test_envelope_rejects_bad_fingerprint():
    env = replace(ENVS["ping"], fingerprint="XYZ")
    with pytest.raises(SchemaError):
        env.validate()


def test_unknown_src_slug_is_not_indexed(store):
    bogus = store.root / "measurements" / "2025-01-01" / "ping" / "notarecord.json"
    bogus.parent.mkdir(parents=True)
    bogus.write_text("{}")
    assert store.search() == []
    assert validate_isd_as("19-ffaa:0:1301").slug in record_filename(ENVS["ping"])
