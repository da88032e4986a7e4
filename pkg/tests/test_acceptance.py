"""Acceptance criteria 1-12, one test each.

Each test prints ``criterion N: PASS|FAIL (seconds) detail`` and the lines
are repeated in the terminal summary. Time budgets are part of the check.
"""
import random
import time
from contextlib import contextmanager
from itertools import permutations

import numpy as np
import pytest

import oracles
from conftest import fixture_manifest, read_fixture
from pathml.bench import PROFILES, Candidate, QoeProfile, QoeWeights, recommend, run_bench, satisfied
from pathml.bench.campaign import run_campaign, simulate
from pathml.bench.report import dumps_report
from pathml.bench.tasks import default_campaign, task1_run
from pathml.collector import compare_paths
from pathml.config import CATEGORIES, ServerDescriptor, validate_isd_as
from pathml.datastore import SearchCriteria, Store
from pathml.errors import ParseError
from pathml.mlcore.linreg import fit_linreg, predict_linreg
from pathml.mlcore.metrics import accuracy, auc_roc, f1, mae, precision, recall
from pathml.scionproto import parse_bwtest, parse_ping, parse_showpaths, parse_traceroute
from pathml.simnet import SimSpec
from pathml.transform import MeasurementRow, WindowSpec, build_forecast_samples, export_csv

SEED = 0
CAMPAIGN_SEED = 42


@contextmanager
def criterion(request, n, budget_s, detail=None):
    """Time the body, enforce the budget, and log one PASS/FAIL line."""
    info = {} if detail is None else detail
    t0 = time.perf_counter()
    ok = False
    try:
        yield info
        elapsed = time.perf_counter() - t0 + info.get("extra_s", 0.0)
        assert elapsed < budget_s, f"took {elapsed:.1f} s, budget {budget_s} s"
        ok = True
    finally:
        elapsed = time.perf_counter() - t0 + info.get("extra_s", 0.0)
        note = info.get("note", "")
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({elapsed:.1f} s, budget {budget_s} s) {note}".rstrip()
        print(line)
        lines = getattr(request.config, "_acceptance_lines", None)
        if lines is None:
            lines = request.config._acceptance_lines = []
        lines.append(line)


@pytest.fixture(scope="module")
def default_data():
    t0 = time.perf_counter()
    data = default_campaign(SEED)
    return data, time.perf_counter() - t0


# --- runners shared with the determinism criterion ----------------------------------------

def c5_campaign(tmp):
    spec = SimSpec(seed=CAMPAIGN_SEED, as_count=4)
    store = Store(tmp / "store")
    t0 = time.perf_counter()
    _, sim = run_campaign(spec, 48, store=store)
    elapsed = time.perf_counter() - t0
    export_csv(store, None, None, tmp / "csv1")
    export_csv(store, None, None, tmp / "csv2")
    return store, sim, elapsed


def csv_bytes(d):
    return (d / "measurements.csv").read_bytes() + b"\0" + (d / "hops.csv").read_bytes()


def bench_json(tasks, data, params=None, seed=SEED):
    report, _ = run_bench(tasks, data, seed, None, params)
    return report, dumps_report(report)


def c6_run(data):
    return bench_json(["task5"], data, {"samples": 2000, "delay_ms": (30.0, 100.0)})


def c7_run():
    return bench_json(["task2"], "sim")


def c8_run(data):
    normal = bench_json(["task3"], data, {"contamination": 0.05, "factor": (1.5, 3.0)})
    gross = bench_json(["task3"], data, {"contamination": 0.05, "factor": (5.0, 8.0)})
    return normal, gross


def c9_run(data):
    main = bench_json(["task1"], data)
    quiet = simulate(SimSpec(seed=SEED, noise_sigma_ms=0.0, diurnal_amplitude_pct=0.0,
                             cross_traffic_amplitude_pct=0.0), 48)
    control = task1_run(quiet, SEED)
    return main, control


def c10_run(seed=SEED, n_sets=10_000):
    rng = random.Random(seed)
    flags, mismatches, monotone_breaks = [], 0, 0
    for _ in range(n_sets):
        k = rng.randint(1, 6)
        raw = [(rng.choice([rng.uniform(1, 400), float(rng.randint(1, 8) * 25)]),
                rng.choice([0.0, rng.uniform(0, 6)]),
                rng.choice([rng.uniform(0.05, 120), float(rng.randint(1, 4) * 5)])) for _ in range(k)]
        w = (rng.uniform(0.05, 1), rng.uniform(0.05, 1), rng.uniform(0.05, 1))
        cands = [Candidate(*c) for c in raw]
        top = recommend(cands, None, QoeWeights(*w))[0][0]
        idx, _ = oracles.qoe_top(raw, w)
        for prof in PROFILES:
            got = satisfied(top, prof)
            want = oracles.meets(*raw[idx], prof.max_rtt_ms, prof.max_loss_pct, prof.min_bw_mbps)
            mismatches += got != want
            flags.append(got)
            looser = QoeProfile("relaxed", prof.max_rtt_ms + rng.uniform(0, 100),
                                prof.max_loss_pct + rng.uniform(0, 2), prof.min_bw_mbps * rng.uniform(0.1, 1))
            monotone_breaks += got and not satisfied(top, looser)
    return flags, mismatches, monotone_breaks


# --- 1 -------------------------------------------------------------------------------------

def test_criterion_01_metric_oracles(request):
    with criterion(request, 1, 10) as info:
        rng = np.random.default_rng(1)
        mismatch = 0
        for _ in range(1000):
            n = int(rng.integers(2, 201))
            y = rng.integers(0, 2, size=n)
            if y.min() == y.max():
                y[0] = 1 - y[0]
            s = rng.integers(0, 20, size=n) / 20 if rng.random() < 0.5 else rng.random(n)
            mismatch += auc_roc(y, s) != oracles.auc_pairs(y.tolist(), s.tolist())
        info["note"] = f"AUC mismatches {mismatch}/1000"
        assert mismatch == 0
        assert auc_roc([0, 0, 1, 1], [0.1, 0.4, 0.35, 0.8]) == 0.75
        assert mae([2, 4], [1, 2]) == 1.5
        y, yh = [1, 1, 1, 0, 0], [1, 1, 0, 1, 0]
        assert precision(y, yh) == recall(y, yh) == f1(y, yh) == pytest.approx(2 / 3, abs=1e-15)
        assert accuracy(y, yh) == 0.6


# --- 2 -------------------------------------------------------------------------------------

def _parse(meta, text):
    dst = validate_isd_as(meta["dst"])
    kind = meta["kind"]
    if kind == "showpaths":
        return parse_showpaths(text, dst)
    if kind == "ping":
        return parse_ping(text, dst)
    if kind == "bwtest":
        return parse_bwtest(text, meta["target_mbps"], ServerDescriptor(dst, "10.0.0.9", 30100, "bw"))
    return parse_traceroute(text, dst)


def test_criterion_02_parser_suite(request):
    with criterion(request, 2, 5) as info:
        corpus = fixture_manifest()
        for meta in corpus:
            oracles.CHECKS[meta["kind"]](_parse(meta, read_fixture(meta["file"])))
        rng = random.Random(2)
        rejected = 0
        for i in range(100):
            meta = corpus[i % len(corpus)]
            bad = oracles.corrupt(meta["kind"], read_fixture(meta["file"]), rng)
            try:
                value = _parse(meta, bad)
            except ParseError:
                rejected += 1
            else:
                oracles.CHECKS[meta["kind"]](value)
        info["note"] = f"{len(corpus)} fixtures valid, {rejected}/100 corruptions rejected"
        assert rejected == 100


# --- 3 -------------------------------------------------------------------------------------

def test_criterion_03_comparer_algebra(request):
    with criterion(request, 3, 5) as info:
        rng = random.Random(3)
        universe = [f"{i:016x}" for i in range(40)]
        for _ in range(10_000):
            prev = set(rng.sample(universe, rng.randint(0, 20)))
            cur = set(rng.sample(universe, rng.randint(0, 20)))
            r = compare_paths(prev, cur)
            assert r.added == cur - prev and r.removed == prev - cur and r.persisted == prev & cur
            assert r.added | r.persisted == cur and r.removed | r.persisted == prev
            assert not (r.added & r.removed) and not (r.added & r.persisted) and not (r.removed & r.persisted)
            assert (r.prev_total, r.cur_total) == (len(prev), len(cur))
        info["note"] = "10000 set pairs"


# --- 4 -------------------------------------------------------------------------------------

def test_criterion_04_window_law(request):
    with criterion(request, 4, 10) as info:
        rng = random.Random(4)
        total = 0
        for _ in range(1000):
            cycles = sorted(rng.sample(range(120), rng.randint(0, 80)))
            n = rng.randint(1, 14)
            rows = [MeasurementRow("2025-01-01T00:00:00Z", c, "19-ffaa:0:1301", "19-ffaa:0:1302", "a" * 16, "ping",
                                   rtt_avg_ms=float(c)) for c in cycles]
            samples = build_forecast_samples(rows, "rtt_avg", WindowSpec(n))
            want = oracles.windows(cycles, n)
            assert [(s.feature_cycles, s.t_index) for s in samples] == want
            for s in samples:
                # values equal their cycle, so this checks every feature precedes the label
                assert max(s.features) < s.label == s.t_index
                assert max(s.feature_cycles) < s.t_index
            total += len(samples)
        info["note"] = f"1000 series, {total} windows"


# --- 5 -------------------------------------------------------------------------------------

def test_criterion_05_end_to_end_campaign(request, tmp_path):
    with criterion(request, 5, 60) as info:
        store, sim, elapsed = c5_campaign(tmp_path)
        missing = []
        for src, dst in permutations(sim.ases, 2):
            for cat in CATEGORIES:
                if not store.search(SearchCriteria(src=src, dst=dst, category=cat)):
                    missing.append((str(src), str(dst), cat))
        info["note"] = f"campaign {elapsed:.1f} s, {len(store.search())} records, missing {len(missing)}"
        assert not missing
        assert csv_bytes(tmp_path / "csv1") == csv_bytes(tmp_path / "csv2")


# --- 6 -------------------------------------------------------------------------------------

def test_criterion_06_task5(request, default_data):
    data, gen_s = default_data
    with criterion(request, 6, 120, {"extra_s": gen_s}) as info:
        report, _ = c6_run(data)
        t = report["tasks"][0]
        acc = {r["model"]: r["metrics"]["accuracy"] for r in t["results"]}
        info["note"] = (f"forest {acc['random_forest']:.4f}, oracle {acc['argmax_first_difference']:.4f} "
                        f"(published 0.9914)")
        assert t["samples"]["train"] + t["samples"]["test"] == 2000
        assert acc["random_forest"] >= 0.95
        assert acc["random_forest"] >= acc["argmax_first_difference"] - 0.02


# --- 7 -------------------------------------------------------------------------------------

def test_criterion_07_task2(request):
    with criterion(request, 7, 120) as info:
        report, _ = c7_run()
        t = report["tasks"][0]
        res = {r["target"]: r["metrics"] for r in t["results"]}
        mix, abrupt = res["precursor_mix"], res["abrupt_only"]
        events = t["samples"]["precursor_mix"]["failure_events"]
        info["note"] = (f"F1 {mix['f1']:.3f} (need 0.80, published 0.86), recall mix {mix['recall']:.3f} "
                        f"vs abrupt {abrupt['recall']:.3f}, {events} failures")
        assert events >= 150
        assert abrupt["recall"] < mix["recall"]
        assert mix["f1"] >= 0.80


# --- 8 -------------------------------------------------------------------------------------

def test_criterion_08_task3(request, default_data):
    data, gen_s = default_data
    with criterion(request, 8, 60, {"extra_s": gen_s}) as info:
        (normal, _), (gross, _) = c8_run(data)
        auc = normal["tasks"][0]["results"][0]["metrics"]["auc_roc"]
        auc_gross = gross["tasks"][0]["results"][0]["metrics"]["auc_roc"]
        info["note"] = f"AUC {auc:.4f} (published 0.7748), gross control {auc_gross:.4f}"
        assert auc >= 0.70
        assert auc_gross >= 0.95


# --- 9 -------------------------------------------------------------------------------------

def test_criterion_09_task1(request, default_data):
    data, gen_s = default_data
    with criterion(request, 9, 120, {"extra_s": gen_s}) as info:
        (report, _), control = c9_run(data)
        res = {(r["model"], r["target"]): r["metrics"]["mae"] for r in report["tasks"][0]["results"]}
        lin = res[("linreg", "bandwidth_mbps")]
        ens = res[("tree_ensemble_boosting", "bandwidth_mbps")]
        rtt0 = next(r for r in control.report["results"] if r["target"] == "rtt_ms")["metrics"]["mae"]
        info["note"] = f"bandwidth MAE ensemble {ens:.4f} vs linreg {lin:.4f}, zero-noise RTT MAE {rtt0:.2e}"
        assert ens <= lin
        assert rtt0 < 1e-6


# --- 10 ------------------------------------------------------------------------------------

def test_criterion_10_task4_checker(request):
    with criterion(request, 10, 30) as info:
        flags, mismatches, breaks = c10_run()
        info["note"] = f"{len(flags)} flags, {mismatches} mismatches, {breaks} monotonicity breaks"
        assert mismatches == 0
        assert breaks == 0


# --- 11 ------------------------------------------------------------------------------------

def test_criterion_11_determinism(request, tmp_path, default_data):
    with criterion(request, 11, 600) as info:
        first, _ = default_data
        again = default_campaign(SEED)
        same = {}
        c5_campaign(tmp_path / "a")
        c5_campaign(tmp_path / "b")
        same[5] = csv_bytes(tmp_path / "a" / "csv1") == csv_bytes(tmp_path / "b" / "csv1")
        same["sim"] = again.rows == first.rows and again.hop_rows == first.hop_rows
        same[6] = c6_run(first)[1] == c6_run(again)[1]
        same[7] = c7_run()[1] == c7_run()[1]
        a8, b8 = c8_run(first), c8_run(again)
        same[8] = a8[0][1] == b8[0][1] and a8[1][1] == b8[1][1]
        a9, b9 = c9_run(first), c9_run(again)
        same[9] = a9[0][1] == b9[0][1] and a9[1].report == b9[1].report
        same[10] = c10_run() == c10_run()
        info["note"] = "differs: " + (", ".join(str(k) for k, v in same.items() if not v) or "none")
        assert all(same.values())


# --- 12 ------------------------------------------------------------------------------------

def test_criterion_12_linreg(request):
    with criterion(request, 12, 10) as info:
        rng = np.random.default_rng(12)
        X = rng.uniform(-5, 5, size=(200, 5))
        beta = np.array([2.0, -1.5, 0.25, 3.0, -0.75])
        y = X @ beta + 4.0
        m = fit_linreg(X, y)
        err = mae(y, predict_linreg(m, X))
        assert np.max(np.abs(m.coef - beta)) < 1e-9 and abs(m.intercept - 4.0) < 1e-9
        assert err < 1e-9
        worst = 0.0
        for seed in range(20):
            r = np.random.default_rng(seed)
            Xn = r.normal(size=(100, 6))
            yn = Xn @ r.normal(size=6) + r.normal(size=100)
            for lam in (1e-8, 0.1, 10.0):
                mn = fit_linreg(Xn, yn, lam)
                g = mn.objective_gradient(Xn, yn)
                X1 = np.hstack([np.ones((100, 1)), Xn])
                scale = 2.0 * np.abs(X1).T @ (np.abs(yn) + np.abs(mn.predict(Xn)))
                scale[1:] += 2.0 * lam * np.abs(mn.coef)
                worst = max(worst, float(np.max(np.abs(g) / scale)))
        info["note"] = f"noiseless MAE {err:.1e}, worst relative gradient {worst:.1e}"
        assert worst < 1e-6
