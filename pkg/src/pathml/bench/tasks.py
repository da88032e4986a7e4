"""The five benchmark tasks: data shaping, model fitting, evaluation."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from ..errors import (
    DegenerateLabels,
    InsufficientData,
    InsufficientHops,
    InvalidContamination,
    SingleClassAuc,
)
from ..mlcore import (
    accuracy,
    auc_roc,
    confusion_matrix,
    f1,
    fit_forest,
    fit_iforest,
    fit_linreg,
    fit_tree_ensemble_regressor,
    mae,
    precision,
    recall,
)
from ..mlcore.split import SplitSpec, split_point
from ..simnet import SimSpec, build, generate_plan
from ..transform import (
    FAILURE_FEATURES,
    WindowSpec,
    build_failure_samples,
    build_forecast_samples,
    build_hop_samples,
    window_samples,
)
from . import paper_reference as ref
from .campaign import CampaignData, simulate
from .qoe import PROFILES, Candidate, QoeWeights, recommend, satisfied

TASK_IDS = ("task1", "task2", "task3", "task4", "task5")
MIN_FORECAST_SAMPLES = 200
DEFAULT_CYCLES = 336  # one week at a 30-minute cadence
TASK2_CYCLES = 672
TASK2_FAILURES = 200
TASK2_CATEGORIES = ("showpaths", "comparer", "ping", "bandwidth")


@dataclass
class TaskOutput:
    task: str
    report: dict
    pred_header: tuple = ()
    pred_rows: list = field(default_factory=list)


def _rng(seed: int, task: str, *extra) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), TASK_IDS.index(task) + 1, *extra]))


def _temporal(samples):
    """Order samples by time, then split 80/20."""
    ordered = sorted(samples, key=lambda s: (s.t_index, s.fingerprint, s.group))
    k = split_point(len(ordered), SplitSpec())
    return ordered[:k], ordered[k:]


def _xy(samples):
    X = np.array([s.features for s in samples], dtype=float)
    y = np.array([s.label for s in samples])
    return X, y


def _r(x: float) -> float:
    return float(round(float(x), 10))


def default_events(sim, cycles: int, seed: int, failures_per_path_week: float = 1.0) -> list:
    fps = sorted(sim.paths)
    weeks = cycles / (7 * sim.spec.cycles_per_day)
    n = int(round(failures_per_path_week * weeks * len(fps)))
    return generate_plan(sim, fps, cycles, failures=n, seed=seed)


def default_campaign(seed: int, cycles: int = DEFAULT_CYCLES, spec: SimSpec | None = None,
                     with_events: bool = True) -> CampaignData:
    spec = spec or SimSpec(seed=seed)
    events = default_events(build(spec), cycles, seed) if with_events else []
    return simulate(spec, cycles, events)


# --- Task 1: next-step forecasting ------------------------------------------------

def task1_run(data: CampaignData, seed: int = 0, n: int = 12, ensemble: str = "boosting") -> TaskOutput:
    wspec = WindowSpec(n)
    results, preds = [], []
    jobs = (
        ("rtt_avg", "rtt_ms", ("linreg",)),
        ("bw_achieved", "bandwidth_mbps", ("linreg", f"tree_ensemble_{ensemble}")),
    )
    counts = {}
    for metric, target, models in jobs:
        samples = build_forecast_samples(data.rows, metric, wspec)
        if len(samples) < MIN_FORECAST_SAMPLES:
            raise InsufficientData(f"task1 {target}: {len(samples)} windowed samples, need {MIN_FORECAST_SAMPLES}",
                                   required=MIN_FORECAST_SAMPLES, actual=len(samples))
        train, test = _temporal(samples)
        Xtr, ytr = _xy(train)
        Xte, yte = _xy(test)
        counts[target] = {"train": len(train), "test": len(test)}
        for model in models:
            if model == "linreg":
                y_hat = fit_linreg(Xtr, ytr.astype(float)).predict(Xte)
            else:
                y_hat = fit_tree_ensemble_regressor(Xtr, ytr.astype(float), kind=ensemble, seed=seed).predict(Xte)
            results.append({"model": model, "target": target, "metrics": {"mae": _r(mae(yte, y_hat))},
                            "n_train": len(train), "n_test": len(test)})
            for s, yh in zip(test, y_hat):
                preds.append((target, model, s.fingerprint, s.group, s.t_index, _r(s.label), _r(yh)))
    report = {
        "task": "task1",
        "title": "Next-step RTT and bandwidth forecasting",
        "params": {"window": n, "horizon": 1, "ensemble": ensemble, "split": "temporal 0.8"},
        "results": results,
        "samples": counts,
        "paper_reference": ref.as_dict()["task1_mae"],
    }
    header = ("target", "model", "fingerprint", "group", "t_index", "actual", "predicted")
    return TaskOutput("task1", report, header, preds)


# --- Task 2: failure prediction ------------------------------------------------------

def task2_campaign(seed: int, precursor_share: float = 0.8, failures: int = TASK2_FAILURES,
                   cycles: int = TASK2_CYCLES, spec: SimSpec | None = None,
                   precursor_choices=(2, 3, 4)) -> CampaignData:
    spec = spec or SimSpec(seed=seed)
    sim = build(spec)
    plan = generate_plan(sim, sorted(sim.paths), cycles, failures=failures, precursor_share=precursor_share,
                         precursor_choices=precursor_choices, seed=seed)
    return simulate(spec, cycles, plan, enabled=TASK2_CATEGORIES)


def task2_run(data: CampaignData, seed: int = 0, k: int = 6, n_trees: int = 100,
              campaign: str = "unavailable_next") -> TaskOutput:
    samples = build_failure_samples(data.rows, k)
    train, test = _temporal(samples)
    Xtr, ytr = _xy(train)
    Xte, yte = _xy(test)
    if len(set(ytr.tolist())) < 2:
        raise DegenerateLabels(f"task2: training labels hold a single class ({len(train)} samples)")
    model = fit_forest(Xtr, ytr.astype(int), "classify", n_trees=n_trees, seed=seed)
    prob = model.predict_proba(Xte, 1)
    y_hat = (prob >= 0.5).astype(int)
    yte = yte.astype(int)
    metrics = {
        "f1": _r(f1(yte, y_hat)),
        "precision": _r(precision(yte, y_hat)),
        "recall": _r(recall(yte, y_hat)),
    }
    n_fail = sum(1 for e in data.events if e.kind == "failure")
    report = {
        "task": "task2",
        "title": "Path failure prediction at T+1",
        "params": {"k": k, "features": list(FAILURE_FEATURES), "threshold": 0.5, "n_trees": n_trees},
        "results": [{"model": "random_forest", "target": campaign, "metrics": metrics,
                     "n_train": len(train), "n_test": len(test)}],
        "samples": {"train": len(train), "test": len(test), "positives_train": int(ytr.astype(int).sum()),
                    "positives_test": int(yte.sum()), "failure_events": n_fail},
        "paper_reference": {"f1": ref.TABLE2_F1},
    }
    rows = [(s.fingerprint, s.t_index, int(y), _r(p), int(yh)) for s, y, p, yh in zip(test, yte, prob, y_hat)]
    return TaskOutput("task2", report, ("fingerprint", "t_index", "label", "vote_fraction", "predicted"), rows)


# --- Task 3: anomaly detection -------------------------------------------------------------

def _ping_series(rows) -> dict:
    out = defaultdict(dict)
    for r in rows:
        if r.category == "ping" and not r.concurrent and r.available and r.rtt_avg_ms is not None:
            out[r.fingerprint][r.cycle_index] = (r.rtt_avg_ms, r.loss_pct)
    return out


def task3_run(data: CampaignData, seed: int = 0, contamination: float = 0.05, factor=(1.5, 3.0),
              extra_loss_pct=(2.0, 10.0), n: int = 6, n_trees: int = 100, subsample: int = 256) -> TaskOutput:
    if not 0.0 <= contamination <= 0.2:
        raise InvalidContamination(f"contamination must lie in (0, 0.2], got {contamination}")
    series = _ping_series(data.rows)
    windows = []
    for fp in sorted(series):
        cycles = sorted(series[fp])
        for fc, vals, _t, _lab in window_samples(cycles, [series[fp][c] for c in cycles], WindowSpec(n)):
            windows.append((fc[-1], fp, np.array(vals, dtype=float)))
    windows.sort(key=lambda w: (w[0], w[1]))
    if len(windows) < 10:
        raise InsufficientData(f"task3: {len(windows)} windows", required=10, actual=len(windows))
    k = split_point(len(windows), SplitSpec())
    train, test = windows[:k], windows[k:]
    # per-path scale from the training slice only
    scale = defaultdict(list)
    for _, fp, w in train:
        scale[fp].extend(w[:, 0].tolist())
    fallback = float(np.median([w[-1, 0] for _, _, w in train]))
    med = {fp: float(np.median(v)) for fp, v in scale.items()}

    def feats(fp, w):
        s = med.get(fp, fallback) or 1.0
        return np.concatenate([w[:, 0] / s, w[:, 1]])

    rng = _rng(seed, "task3")
    n_inject = int(round(contamination * len(test)))
    chosen = set(rng.choice(len(test), size=n_inject, replace=False).tolist()) if n_inject else set()
    Xte, yte = [], []
    for i, (_, fp, w) in enumerate(test):
        w = w.copy()
        if i in chosen:
            w[:, 0] *= rng.uniform(*factor)
            w[:, 1] = np.minimum(100.0, w[:, 1] + rng.uniform(*extra_loss_pct))
        Xte.append(feats(fp, w))
        yte.append(int(i in chosen))
    if not chosen:
        raise SingleClassAuc("task3: no anomalies injected into the test slice; AUC is undefined")
    model = fit_iforest(np.array([feats(fp, w) for _, fp, w in train]), n_trees, subsample, seed)
    scores = model.score(np.array(Xte))
    auc = auc_roc(np.array(yte), scores)
    report = {
        "task": "task3",
        "title": "Anomaly detection with an isolation forest",
        "params": {"contamination": contamination, "factor": list(factor), "extra_loss_pct": list(extra_loss_pct),
                   "window": n, "n_trees": n_trees, "subsample": subsample},
        "results": [{"model": "isolation_forest", "target": "injected_anomaly", "metrics": {"auc_roc": _r(auc)},
                     "n_train": len(train), "n_test": len(test)}],
        "samples": {"train": len(train), "test": len(test), "injected": n_inject},
        "paper_reference": {"auc_roc": ref.TABLE3_AUC},
    }
    rows = [(fp, t, y, _r(s)) for (t, fp, _), y, s in zip(test, yte, scores)]
    return TaskOutput("task3", report, ("fingerprint", "t_index", "label", "score"), rows)


# --- Task 4: QoE-aware recommendation ------------------------------------------------------

def decision_instants(rows) -> list:
    """[(cycle, src, dst, [Candidate...])] for every pair with at least one candidate.

    A candidate is a path pinged at that cycle (and reachable) whose bandwidth
    is known: the largest achieved rate of the latest test on that path at or
    before the cycle.
    """
    bw = defaultdict(dict)
    pings = defaultdict(list)
    for r in rows:
        if r.fingerprint is None:
            continue
        if r.category in ("bandwidth", "mp_bandwidth"):
            v = max(r.bw_achieved_cs_mbps, r.bw_achieved_sc_mbps)
            bw[r.fingerprint][r.cycle_index] = max(v, bw[r.fingerprint].get(r.cycle_index, -1.0))
        elif r.category == "ping" and not r.concurrent and r.available:
            pings[(r.cycle_index, r.src, r.dst)].append(r)
    bw_sorted = {fp: sorted(d) for fp, d in bw.items()}
    out = []
    for (cycle, src, dst) in sorted(pings):
        cands = []
        for r in sorted(pings[(cycle, src, dst)], key=lambda r: r.fingerprint):
            cs = [c for c in bw_sorted.get(r.fingerprint, ()) if c <= cycle]
            if not cs:
                continue
            cands.append(Candidate(r.rtt_avg_ms, r.loss_pct, bw[r.fingerprint][cs[-1]], r.fingerprint))
        if cands:
            out.append((cycle, src, dst, cands))
    return out


def task4_run(data: CampaignData, profiles=PROFILES, weights: QoeWeights = QoeWeights()) -> TaskOutput:
    instants = decision_instants(data.rows)
    if not instants:
        raise InsufficientData("task4: no decision instant has a candidate path", required=1, actual=0)
    results, rows = [], []
    for prof in profiles:
        ok = 0
        for cycle, src, dst, cands in instants:
            top, score = recommend(cands, prof, weights)[0]
            good = satisfied(top, prof)
            ok += good
            rows.append((prof.name, cycle, src, dst, len(cands), top.ident, _r(score), int(good)))
        rate = ok / len(instants)
        results.append({"model": "qoe_minmax", "target": prof.name,
                        "metrics": {"satisfaction_rate": _r(rate), "satisfied": ok, "decisions": len(instants)},
                        "n_train": 0, "n_test": len(instants)})
    report = {
        "task": "task4",
        "title": "QoE-aware path recommendation",
        "params": {"weights": {"rtt": weights.w_rtt, "loss": weights.w_loss, "bw": weights.w_bw},
                   "profiles": [p.__dict__ for p in profiles]},
        "results": results,
        "samples": {"decision_instants": len(instants)},
        "paper_reference": {"satisfaction_pct": dict(ref.TABLE5_SATISFACTION_PCT)},
    }
    header = ("profile", "cycle", "src", "dst", "candidates", "top_fingerprint", "score", "satisfied")
    return TaskOutput("task4", report, header, rows)


# --- Task 5: bottleneck localisation ----------------------------------------------------------

def real_hops(vec) -> int:
    return sum(1 for v in vec if v != -1.0)


def first_differences(vec) -> np.ndarray:
    """Per-hop increments of a padded cumulative vector; pads stay -1."""
    v = np.asarray(vec, dtype=float)
    n = real_hops(v)
    d = np.full(v.shape, -1.0)
    d[:n] = np.diff(np.concatenate([[0.0], v[:n]]))
    return d


def argmax_oracle(vec) -> int:
    n = real_hops(vec)
    return int(np.argmax(first_differences(vec)[:n]))


def task5_inject(hop_samples, seed: int = 0, delay_ms=(30.0, 100.0)) -> list:
    """[(features, label)]: add a delay from a random hop onward; label = that hop."""
    rng = _rng(seed, "task5", 1)
    out = []
    for s in hop_samples:
        v = np.array(s.features, dtype=float)
        n = real_hops(v)
        if n < 2:
            raise InsufficientHops(f"hop vector of {s.fingerprint} has {n} real hops; need at least 2")
        j = int(rng.integers(n))
        d = float(rng.uniform(*delay_ms)) if delay_ms[1] > 0 else 0.0
        v[j:n] += d
        out.append((v, j))
    return out


def task5_features(vec) -> np.ndarray:
    return np.concatenate([np.asarray(vec, dtype=float), first_differences(vec)])


def task5_run(data: CampaignData, seed: int = 0, n_samples: int = 2000, delay_ms=(30.0, 100.0),
              n_trees: int = 100) -> TaskOutput:
    base = build_hop_samples(data.hop_rows, data.interval_minutes)
    base = [s for s in base if real_hops(s.features) >= 2]
    if len(base) < 10:
        raise InsufficientData(f"task5: {len(base)} usable traceroutes", required=10, actual=len(base))
    rng = _rng(seed, "task5", 0)
    take = min(n_samples, len(base))
    picked = [base[i] for i in sorted(rng.choice(len(base), size=take, replace=False).tolist())]
    picked.sort(key=lambda s: (s.t_index, s.fingerprint))
    injected = task5_inject(picked, seed, delay_ms)
    k = split_point(len(injected), SplitSpec())
    X = np.array([task5_features(v) for v, _ in injected])
    y = np.array([j for _, j in injected])
    model = fit_forest(X[:k], y[:k], "classify", n_trees=n_trees, seed=seed)
    y_hat = model.predict(X[k:])
    oracle = np.array([argmax_oracle(v) for v, _ in injected[k:]])
    labels, cm = confusion_matrix(y[k:], y_hat, sorted(set(y.tolist())))
    report = {
        "task": "task5",
        "title": "Bottleneck hop localisation",
        "params": {"samples": take, "delay_ms": list(delay_ms), "n_trees": n_trees,
                   "features": "cumulative per-hop RTT (padded -1) + first differences"},
        "results": [
            {"model": "random_forest", "target": "bottleneck_hop",
             "metrics": {"accuracy": _r(accuracy(y[k:], y_hat))}, "n_train": k, "n_test": len(y) - k},
            {"model": "argmax_first_difference", "target": "bottleneck_hop",
             "metrics": {"accuracy": _r(accuracy(y[k:], oracle))}, "n_train": 0, "n_test": len(y) - k},
        ],
        "confusion_matrix": {"labels": [int(x) for x in labels], "matrix": cm.tolist()},
        "samples": {"train": k, "test": len(y) - k},
        "paper_reference": {"accuracy": ref.TABLE6_ACCURACY},
    }
    rows = [(s.fingerprint, s.t_index, int(t), int(p), int(o))
            for s, t, p, o in zip(picked[k:], y[k:], y_hat, oracle)]
    return TaskOutput("task5", report, ("fingerprint", "t_index", "label", "predicted", "oracle"), rows)
