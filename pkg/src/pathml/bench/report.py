"""Benchmark report documents: JSON (schema-checked), markdown, prediction dumps."""
from __future__ import annotations

import csv
import io
import json
import os
from pathlib import Path

import jsonschema

from .. import __version__
from ..errors import IoError, SchemaError
from . import paper_reference as ref

REPORT_SCHEMA_VERSION = 1

_RESULT = {
    "type": "object",
    "required": ["model", "target", "metrics", "n_train", "n_test"],
    "properties": {
        "model": {"type": "string"},
        "target": {"type": "string"},
        "metrics": {"type": "object", "additionalProperties": {"type": "number"}},
        "n_train": {"type": "integer", "minimum": 0},
        "n_test": {"type": "integer", "minimum": 0},
    },
}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "tool", "seed", "data", "tasks", "paper_reference"],
    "properties": {
        "schema_version": {"const": REPORT_SCHEMA_VERSION},
        "tool": {"type": "object", "required": ["name", "version"]},
        "seed": {"type": "integer", "minimum": 0},
        "data": {
            "type": "object",
            "required": ["source"],
            "properties": {"source": {"enum": ["sim", "csv"]}},
        },
        "paper_reference": {"type": "object"},
        "tasks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["task", "status", "provenance"],
                "properties": {
                    "task": {"enum": ["task1", "task2", "task3", "task4", "task5"]},
                    "status": {"enum": ["ok", "insufficient_data"]},
                    "provenance": {
                        "type": "object",
                        "required": ["source", "seed", "cycles"],
                    },
                    "results": {"type": "array", "items": _RESULT},
                    "error": {
                        "type": "object",
                        "required": ["kind", "message"],
                        "properties": {"kind": {"type": "string"}, "message": {"type": "string"}},
                    },
                },
                "if": {"properties": {"status": {"const": "ok"}}},
                "then": {"required": ["results", "samples"]},
                "else": {"required": ["error"]},
            },
        },
    },
}


def new_report(seed: int, data: dict) -> dict:
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "tool": {"name": "pathml", "version": __version__},
        "seed": seed,
        "data": data,
        "tasks": [],
        "paper_reference": ref.as_dict(),
    }


def validate_report(report: dict) -> dict:
    try:
        jsonschema.validate(report, REPORT_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(f"report invalid at {where}: {exc.message}") from None
    return report


def dumps_report(report: dict) -> str:
    return json.dumps(validate_report(report), indent=2) + "\n"


# --- markdown ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def _table(header, rows) -> list:
    out = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    out += ["| " + " | ".join(_fmt(c) for c in r) + " |" for r in rows]
    return out


def _task_md(t: dict) -> list:
    lines = [f"## {t['task']}: {t.get('title', '')}".rstrip(": "), ""]
    prov = t["provenance"]
    lines.append(f"Data: {prov['source']}, seed {prov['seed']}, {prov['cycles']} cycles.")
    lines.append("")
    if t["status"] != "ok":
        lines.append(f"Not run: `{t['error']['kind']}`: {t['error']['message']}")
        return lines + [""]
    res = t["results"]
    if t["task"] == "task1":
        published = {(r["model"], r["target"]): r["mae"] for r in t["paper_reference"]}
        rows = []
        for r in res:
            pm = published.get(("linreg" if r["model"] == "linreg" else "lightgbm", r["target"]), "")
            rows.append((r["model"], r["target"], r["metrics"]["mae"], pm, r["n_train"], r["n_test"]))
        lines += _table(("Model", "Target", "MAE", "Published MAE", "Train", "Test"), rows)
    elif t["task"] == "task2":
        rows = [(r["model"], r["target"], r["metrics"]["f1"], r["metrics"]["precision"], r["metrics"]["recall"],
                 r["n_train"], r["n_test"]) for r in res]
        lines += _table(("Model", "Campaign", "F1", "Precision", "Recall", "Train", "Test"), rows)
        lines += ["", f"Published F1: {t['paper_reference']['f1']}"]
    elif t["task"] == "task3":
        rows = [(r["model"], r["metrics"]["auc_roc"], t["paper_reference"]["auc_roc"], r["n_train"], r["n_test"])
                for r in res]
        lines += _table(("Model", "AUC-ROC", "Published AUC-ROC", "Train", "Test"), rows)
    elif t["task"] == "task4":
        profs = t["params"]["profiles"]
        lines += _table(("Profile", "Max RTT (ms)", "Max loss (%)", "Min bandwidth (Mbps)"),
                        [(p["name"], p["max_rtt_ms"], p["max_loss_pct"], p["min_bw_mbps"]) for p in profs])
        lines.append("")
        published = t["paper_reference"]["satisfaction_pct"]
        rows = [(r["target"], 100.0 * r["metrics"]["satisfaction_rate"], published.get(r["target"], ""),
                 r["metrics"]["decisions"]) for r in res]
        lines += _table(("Profile", "Satisfaction (%)", "Published (%)", "Decisions"), rows)
    elif t["task"] == "task5":
        rows = [(r["model"], r["metrics"]["accuracy"], r["n_train"], r["n_test"]) for r in res]
        lines += _table(("Model", "Accuracy", "Train", "Test"), rows)
        lines += ["", f"Published accuracy: {t['paper_reference']['accuracy']}", ""]
        cm = t["confusion_matrix"]
        lines += _table(("true \\ pred", *map(str, cm["labels"])),
                        [(lab, *row) for lab, row in zip(cm["labels"], cm["matrix"])])
    return lines + [""]


def render_markdown(report: dict) -> str:
    lines = ["# Benchmark report", ""]
    d = report["data"]
    lines.append(f"Seed {report['seed']}; data source `{d['source']}`.")
    lines.append("Published values come from a private four-week deployment and are shown for comparison only.")
    lines.append("")
    for t in report["tasks"]:
        lines += _task_md(t)
    return "\n".join(lines).rstrip() + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _write(path: Path, text: str) -> None:
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def emit_report(report: dict, out_dir, predictions=None, formats=("json", "markdown")) -> list:
    """Write report.json / report.md and task<k>_predictions.csv; returns the paths."""
    out = Path(out_dir)
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        if "json" in formats:
            _write(out / "report.json", dumps_report(report))
            written.append(out / "report.json")
        if "markdown" in formats:
            _write(out / "report.md", render_markdown(report))
            written.append(out / "report.md")
        for task, (header, rows) in sorted((predictions or {}).items()):
            p = out / f"{task}_predictions.csv"
            _write(p, _csv(header, rows))
            written.append(p)
    except OSError as exc:
        raise IoError(f"cannot write report under {out}: {exc.strerror}") from None
    return written
