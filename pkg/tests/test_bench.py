import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from pathml.bench import (
    PROFILES,
    Candidate,
    QoeProfile,
    QoeWeights,
    emit_report,
    load_csv_data,
    qoe_score,
    recommend,
    run_bench,
    satisfied,
)
from pathml.bench.campaign import run_campaign, simulate
from pathml.bench.report import REPORT_SCHEMA, dumps_report, render_markdown, validate_report
from pathml.bench.tasks import (
    argmax_oracle,
    default_campaign,
    task1_run,
    task2_campaign,
    task2_run,
    task3_run,
    task4_run,
    task5_inject,
    task5_run,
)
from pathml.datastore import Store
from pathml.errors import (
    DegenerateLabels,
    InsufficientData,
    InsufficientHops,
    InvalidContamination,
    InvalidSpec,
    NoCandidates,
    SchemaError,
    SingleClassAuc,
)
from pathml.simnet import SimSpec
from pathml.transform import FeatureSample, export_csv

QUIET = dict(noise_sigma_ms=0.0, diurnal_amplitude_pct=0.0, cross_traffic_amplitude_pct=0.0)
GAMING = next(p for p in PROFILES if p.name == "Online gaming")


@pytest.fixture(scope="module")
def small():
    """Four simulated days with the default failure rate."""
    return default_campaign(0, 192)


# --- QoE ---------------------------------------------------------------------------------

def test_profiles_table():
    got = {p.name: (p.max_rtt_ms, p.max_loss_pct, p.min_bw_mbps) for p in PROFILES}
    assert got["Online gaming"] == (50, 1, 0.5)
    assert len(got) == 5


def test_qoe_a_b_example():
    a = Candidate(100.0, 0.0, 10.0, "A")
    b = Candidate(40.0, 0.0, 2.0, "B")
    ranked = recommend([a, b], GAMING)
    # A: 0.4*0 + 0.2*0.5 + 0.4*1 = 0.5; B: 0.4*1 + 0.2*0.5 + 0.4*0 = 0.5; tie keeps input order
    idx, scores = oracles.qoe_top([(100, 0, 10), (40, 0, 2)], (0.4, 0.2, 0.4))
    assert [round(s, 12) for s in scores] == [0.5, 0.5]
    assert ranked[0][0] is a and idx == 0
    assert not satisfied(ranked[0][0], GAMING)
    meets = [oracles.meets(c.rtt_ms, c.loss_pct, c.bw_mbps, 50, 1, 0.5) for c in (a, b)]
    assert meets == [False, True]


def test_qoe_bandwidth_weighted():
    a = Candidate(100.0, 0.0, 10.0, "A")
    b = Candidate(40.0, 0.0, 2.0, "B")
    ranked = recommend([a, b], GAMING, QoeWeights(0.3, 0.2, 0.5))
    assert ranked[0][0] is a
    assert qoe_score(a, [a, b], QoeWeights(0.3, 0.2, 0.5)) == pytest.approx(0.6)


def test_qoe_single_candidate():
    c = Candidate(10.0, 0.1, 50.0)
    for w in (QoeWeights(), QoeWeights(1, 0, 0), QoeWeights(0, 0, 1)):
        (top, score), = recommend([c], GAMING, w)
        assert score == pytest.approx(0.5)
        assert satisfied(top, GAMING)


def test_qoe_no_candidates():
    with pytest.raises(NoCandidates):
        recommend([], GAMING)


def test_qoe_weights_normalised():
    w = QoeWeights(2, 1, 1)
    assert (w.w_rtt, w.w_loss, w.w_bw) == (0.5, 0.25, 0.25)
    with pytest.raises(InvalidSpec):
        QoeWeights(-1, 1, 1)
    with pytest.raises(InvalidSpec):
        QoeProfile("bad", 0, 1, 1)


_cand = st.tuples(
    st.floats(1, 500, allow_nan=False), st.floats(0, 10, allow_nan=False), st.floats(0.1, 200, allow_nan=False)
)
_weights = st.tuples(st.floats(0.01, 1), st.floats(0.01, 1), st.floats(0.01, 1))


@settings(max_examples=200)
@given(st.lists(_cand, min_size=1, max_size=8), _weights)
def test_qoe_top_matches_oracle(cands, w):
    ranked = recommend([Candidate(*c, str(i)) for i, c in enumerate(cands)], None, QoeWeights(*w))
    idx, scores = oracles.qoe_top(cands, w)
    assert scores[int(ranked[0][0].ident)] == pytest.approx(scores[idx], abs=1e-9)
    assert all(b <= a + 1e-12 for (_, a), (_, b) in zip(ranked, ranked[1:]))


@settings(max_examples=200)
@given(
    st.lists(_cand, min_size=1, max_size=8),
    _weights,
    st.tuples(st.floats(1, 500), st.floats(0.1, 10), st.floats(0.1, 200)),
    st.tuples(st.floats(0, 200), st.floats(0, 5), st.floats(0, 1)),
)
def test_qoe_satisfaction_monotone(cands, w, thresholds, relax):
    prof = QoeProfile("p", *thresholds)
    looser = QoeProfile("q", thresholds[0] + relax[0], thresholds[1] + relax[1],
                        max(thresholds[2] * (1 - relax[2]), 1e-9))
    top, _ = recommend([Candidate(*c) for c in cands], prof, QoeWeights(*w))[0]
    if satisfied(top, prof):
        assert satisfied(top, looser)


@settings(max_examples=200)
@given(st.lists(_cand, min_size=2, max_size=8), _weights, st.data())
def test_qoe_dominated_inside_envelope_keeps_top(cands, w, data):
    base = [Candidate(*c, str(i)) for i, c in enumerate(cands)]
    top_before = recommend(base, None, QoeWeights(*w))[0][0]
    # a candidate dominated by an existing one whose metrics stay within the
    # current min/max envelope leaves every normalised value unchanged
    ref = data.draw(st.sampled_from(base))
    rtts = [c.rtt_ms for c in base]
    losses = [c.loss_pct for c in base]
    bws = [c.bw_mbps for c in base]
    new = Candidate(
        data.draw(st.floats(ref.rtt_ms, max(rtts))),
        data.draw(st.floats(ref.loss_pct, max(losses))),
        data.draw(st.floats(min(bws), ref.bw_mbps)),
        "new",
    )
    top_after = recommend(base + [new], None, QoeWeights(*w))[0][0]
    assert top_after is top_before


def test_qoe_dominated_outside_envelope_can_flip():
    # the general case: stretching one metric's range re-weights the others
    a = Candidate(10.0, 0.0, 50.0, "A")
    b = Candidate(20.0, 0.0, 60.0, "B")
    w = QoeWeights(0.5, 0.0, 0.5)
    assert recommend([a, b], None, w)[0][0] is a
    worse = Candidate(200.0, 0.0, 55.0, "C")
    assert recommend([a, b, worse], None, w)[0][0] is b


# --- task 1 ------------------------------------------------------------------------------

def test_task1_zero_noise_rtt():
    d = simulate(SimSpec(seed=0, **QUIET), 40)
    out = task1_run(d, 0)
    rtt = next(r for r in out.report["results"] if r["target"] == "rtt_ms")
    assert rtt["metrics"]["mae"] < 1e-6
    assert {(r["model"], r["target"]) for r in out.report["results"]} == {
        ("linreg", "rtt_ms"), ("linreg", "bandwidth_mbps"), ("tree_ensemble_boosting", "bandwidth_mbps")}


def test_task1_insufficient():
    d = simulate(SimSpec(seed=0, as_count=2, paths_per_pair=1), 14)
    with pytest.raises(InsufficientData):
        task1_run(d, 0)


# --- task 2 ------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def task2_pair():
    spec = SimSpec(seed=0, **QUIET)
    prec = task2_campaign(0, precursor_share=1.0, precursor_choices=(4,), spec=spec, cycles=336, failures=100)
    abrupt = task2_campaign(0, precursor_share=0.0, spec=spec, cycles=336, failures=100)
    return task2_run(prec, 0, campaign="precursor"), task2_run(abrupt, 0, campaign="abrupt")


def test_task2_precursor_zero_noise(task2_pair):
    m = task2_pair[0].report["results"][0]["metrics"]
    assert m["f1"] >= 0.95


def test_task2_abrupt_recall_lower(task2_pair):
    rp = task2_pair[0].report["results"][0]["metrics"]["recall"]
    ra = task2_pair[1].report["results"][0]["metrics"]["recall"]
    assert ra < rp


def test_task2_degenerate_without_failures():
    d = simulate(SimSpec(seed=0, as_count=2, paths_per_pair=2), 20)
    with pytest.raises(DegenerateLabels):
        task2_run(d, 0)


# --- task 3 ------------------------------------------------------------------------------

def test_task3_gross_anomalies(small):
    out = task3_run(small, 0, contamination=0.1, factor=(5.0, 8.0))
    assert out.report["results"][0]["metrics"]["auc_roc"] >= 0.95


def test_task3_zero_contamination(small):
    with pytest.raises(SingleClassAuc):
        task3_run(small, 0, contamination=0.0)


@pytest.mark.parametrize("p", [-0.1, 0.25, 1.0])
def test_task3_invalid_contamination(small, p):
    with pytest.raises(InvalidContamination):
        task3_run(small, 0, contamination=p)


# --- task 4 ------------------------------------------------------------------------------

def test_task4_rates(small):
    out = task4_run(small)
    res = {r["target"]: r["metrics"] for r in out.report["results"]}
    assert set(res) == {p.name for p in PROFILES}
    for m in res.values():
        assert 0.0 <= m["satisfaction_rate"] <= 1.0
        assert m["satisfied"] <= m["decisions"]


# --- task 5 ------------------------------------------------------------------------------

_vec = st.lists(st.floats(0.1, 29.0), min_size=2, max_size=7).map(
    lambda incs: tuple(float(x) for x in np.cumsum(incs)))


@settings(max_examples=100)
@given(st.lists(_vec, min_size=1, max_size=20), st.integers(0, 2**32 - 1), st.integers(7, 9))
def test_task5_label_soundness(vecs, seed, width):
    # noise-free vectors whose per-hop increments stay below the injected delay
    samples = [FeatureSample(v + (-1.0,) * (width - len(v)), None, "f", i) for i, v in enumerate(vecs)]
    for v, j in task5_inject(samples, seed, (30.0, 100.0)):
        assert argmax_oracle(v) == j == oracles.argmax_first_difference(v)


def test_task5_needs_two_hops():
    with pytest.raises(InsufficientHops):
        task5_inject([FeatureSample((5.0, -1.0), None, "f", 0)], 0)


def test_task5_fixed_delay(small):
    out = task5_run(small, 0, n_samples=600, delay_ms=(50.0, 50.0))
    acc = {r["model"]: r["metrics"]["accuracy"] for r in out.report["results"]}
    assert acc["random_forest"] >= acc["argmax_first_difference"] - 0.02


def test_task5_zero_delay_chance(small):
    out = task5_run(small, 0, n_samples=600, delay_ms=(0.0, 0.0))
    acc = out.report["results"][0]["metrics"]["accuracy"]
    # paths carry 3 to 7 hops, so chance sits between 1/7 and 1/3
    assert 1 / 7 - 0.1 < acc < 1 / 3


# --- report ------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def bench_twice(small, tmp_path_factory):
    outs = []
    for name in ("a", "b"):
        d = tmp_path_factory.mktemp(name)
        report, preds = run_bench("all", small, 0, d, {"samples": 400})
        outs.append((report, preds, d))
    return outs


def test_report_validates(bench_twice):
    report, _, _ = bench_twice[0]
    validate_report(report)
    assert [t["task"] for t in report["tasks"]] == ["task1", "task2", "task3", "task4", "task5"]
    for t in report["tasks"]:
        assert t["provenance"] == {"source": "sim", "seed": 0, "cycles": 192}
        for r in t.get("results", []):
            assert "n_train" in r and "n_test" in r


def test_report_json_byte_identical(bench_twice):
    (_, _, a), (_, _, b) = bench_twice
    for name in ("report.json", "report.md"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    csvs = sorted(p.name for p in a.glob("task*_predictions.csv"))
    assert csvs == [f"task{i}_predictions.csv" for i in range(1, 6) if (b / f"task{i}_predictions.csv").exists()]
    for name in csvs:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_markdown_one_table_per_task(bench_twice):
    report, _, d = bench_twice[0]
    md = (d / "report.md").read_text()
    assert md == render_markdown(report)
    for t in report["tasks"]:
        assert f"## {t['task']}" in md
    sections = md.split("\n## ")[1:]
    for s in sections:
        if "Not run" in s:
            continue
        assert "| Model |" in s or "| Profile |" in s


def test_report_schema_rejects():
    bad = {"schema_version": 1, "tool": {"name": "pathml", "version": "0"}, "seed": 0,
           "data": {"source": "sim"}, "paper_reference": {},
           "tasks": [{"task": "task1", "status": "ok", "provenance": {"source": "sim", "seed": 0, "cycles": 1}}]}
    with pytest.raises(SchemaError):
        validate_report(bad)
    bad["tasks"][0]["status"] = "insufficient_data"
    with pytest.raises(SchemaError):
        dumps_report(bad)
    bad["tasks"][0]["error"] = {"kind": "InsufficientData", "message": "x"}
    assert json.loads(dumps_report(bad))["tasks"][0]["error"]["kind"] == "InsufficientData"
    assert REPORT_SCHEMA["properties"]["schema_version"]["const"] == 1


def test_emit_report_markdown_for_insufficient(tmp_path):
    report, _ = run_bench(["task2"], simulate(SimSpec(seed=0, as_count=2, paths_per_pair=2), 20), 0)
    assert report["tasks"][0]["status"] == "insufficient_data"
    emit_report(report, tmp_path)
    assert "Not run" in (tmp_path / "report.md").read_text()


def test_csv_data_path(tmp_path):
    spec = SimSpec(seed=3, as_count=3)
    run_campaign(spec, 48, store=Store(tmp_path / "store"))
    export_csv(Store(tmp_path / "store"), None, None, tmp_path / "csv")
    data = load_csv_data(tmp_path / "csv", seed=3)
    assert data.source == "csv" and data.cycles == 48
    report, preds = run_bench(["task1", "task4"], str(tmp_path / "csv"), 3)
    assert report["data"]["source"] == "csv"
    assert all(t["status"] == "ok" for t in report["tasks"])
    assert set(preds) == {"task1", "task4"}
