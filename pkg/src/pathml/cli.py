"""Command-line entry point: ``pathml <command> ...``.

Exit codes: 0 success, 1 usage, 2 configuration/schema, 3 backend,
4 insufficient data. Failures print one ``error[<kind>]: message`` line to
stderr.
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
from datetime import datetime, timedelta, timezone
from pathlib import Path

from . import __version__
from .config import (
    CATEGORIES,
    AsDescriptor,
    CampaignConfig,
    ServerDescriptor,
    add_as,
    add_server,
    config_from_dict,
    load_config,
    remove_as,
    remove_server,
    save_config,
    set_category,
    validate_isd_as,
)
from .errors import EXIT_BACKEND, EXIT_DATA, EXIT_OK, EXIT_USAGE, PathMLError
from .utc import format_utc, parse_utc

CONFIG_ENV = "PATHML_CONFIG"


class UsageError(Exception):
    def __init__(self, message: str, usage: str = ""):
        super().__init__(message)
        self.usage = usage


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, self.format_usage())


def _utc(text: str) -> datetime:
    try:
        return parse_utc(text)
    except ValueError:
        pass
    try:
        return datetime.strptime(text, "%Y-%m-%d").replace(tzinfo=timezone.utc)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a UTC timestamp (YYYY-MM-DDTHH:MM:SSZ or YYYY-MM-DD): {text!r}")


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


# --- config resolution --------------------------------------------------------------

def _config_path(args, required: bool = True):
    path = getattr(args, "config", None) or os.environ.get(CONFIG_ENV)
    if not path and required:
        raise UsageError(f"--config is required (or set {CONFIG_ENV})", args._usage)
    return Path(path) if path else None


def _load(args) -> tuple:
    path = _config_path(args)
    return path, load_config(path)


def _store_root(args) -> Path:
    if getattr(args, "root", None):
        return Path(args.root)
    path, cfg = _load(args)
    root = Path(cfg.storage_root)
    return root if root.is_absolute() else path.parent / root


def _open_store(args, create: bool = False):
    from .datastore import Store

    return Store(_store_root(args), create=create)


# --- config ------------------------------------------------------------------------

def cmd_config_init(args):
    path = _config_path(args)
    if path.exists() and not args.force:
        raise UsageError(f"{path} exists; pass --force to overwrite", args._usage)
    cfg = CampaignConfig(validate_isd_as(args.local_as), storage_root=args.storage_root, seed=args.seed)
    save_config(cfg, path)
    print(f"wrote {path}")


def cmd_config_show(args):
    _, cfg = _load(args)
    if args.json:
        _print_json(cfg.to_dict())
        return
    p = cfg.pipeline
    print(f"local_as: {cfg.local_as}")
    print(f"storage_root: {cfg.storage_root}")
    print(f"seed: {cfg.seed}")
    print(f"ases: {len(cfg.ases)}")
    for a in cfg.ases:
        print(f"  {a.isd_as}  {a.ip}  {a.name}")
    print(f"servers: {len(cfg.servers)}")
    for s in cfg.servers:
        print(f"  {s.isd_as}  {s.address}  {s.name}")
    print(f"interval_minutes: {p.interval_minutes}")
    print(f"bandwidth_tiers_mbps: {', '.join(str(t) for t in p.bandwidth_tiers_mbps)}")
    print(f"ping_count: {p.ping_count}")
    print(f"paths_per_pair: {p.paths_per_pair}")
    print("enabled: " + ", ".join(c for c in CATEGORIES if p.enabled[c]))


def _mutate(args, fn, message: str):
    path, cfg = _load(args)
    save_config(fn(cfg), path)
    print(message)


def cmd_as_add(args):
    entry = AsDescriptor(validate_isd_as(args.isd_as), args.ip, args.name)
    _mutate(args, lambda c: add_as(c, entry), f"added AS {entry.isd_as}")


def cmd_as_remove(args):
    ia = validate_isd_as(args.isd_as)
    _mutate(args, lambda c: remove_as(c, ia), f"removed AS {ia}")


def cmd_server_add(args):
    entry = ServerDescriptor(validate_isd_as(args.isd_as), args.ip, args.port, args.name)
    _mutate(args, lambda c: add_server(c, entry), f"added server {entry.address} at {entry.isd_as}")


def cmd_server_remove(args):
    ia = validate_isd_as(args.isd_as)
    _mutate(args, lambda c: remove_server(c, ia), f"removed server at {ia}")


def cmd_pipeline(args):
    on = args.action == "enable"
    _mutate(args, lambda c: set_category(c, args.category, on), f"{args.category}: {'enabled' if on else 'disabled'}")


# --- collection ------------------------------------------------------------------------

def _sim_backend(args, cfg, config_path: Path):
    from .simnet import SimClock, SimNetBackend, SimSpec, build, load_events, load_spec

    spec_path = Path(args.sim_spec) if args.sim_spec else config_path.parent / "simspec.json"
    spec = load_spec(spec_path) if spec_path.exists() else SimSpec(seed=cfg.seed)
    sim = build(spec)
    events_path = config_path.parent / "events.json"
    if events_path.exists():
        sim.schedule_events(load_events(events_path))
    if args.cycle is not None:
        cycle = args.cycle
    else:
        elapsed = datetime.now(timezone.utc) - parse_utc(spec.epoch)
        cycle = max(0, int(elapsed.total_seconds()) // (spec.cycle_minutes * 60))
    clock = SimClock(cycle, spec.epoch, spec.cycle_minutes)
    return SimNetBackend(sim, cfg.local_as, clock), clock


def cmd_run_cycle(args):
    from .collector import WallClock, run_cycle
    from .datastore import Store

    path, cfg = _load(args)
    if args.backend == "sim":
        backend, clock = _sim_backend(args, cfg, path)
    else:
        from .scionproto import SubprocessAdapter

        backend, clock = SubprocessAdapter(cfg.local_as), WallClock(cfg.pipeline.interval_minutes)
    root = Path(cfg.storage_root)
    store = Store(root if root.is_absolute() else path.parent / root)
    report = run_cycle(cfg, backend, store, clock, timeout=args.timeout)
    if args.json:
        _print_json(report.to_dict())
        return
    if report.lock_skipped:
        print(f"cycle {format_utc(report.cycle_start)}: skipped, another cycle holds the lock")
        return
    print(f"cycle {format_utc(report.cycle_start)}: {report.stored} records in {report.duration_ms:.0f} ms")
    for c in CATEGORIES:
        n = report.counts[c]
        if n.attempted or not cfg.pipeline.enabled[c]:
            state = f"{n.succeeded}/{n.attempted} ok" if cfg.pipeline.enabled[c] else "disabled"
            print(f"  {c}: {state}")
    for cat, pair, reason in report.skipped:
        print(f"  skipped {cat} {pair}: {reason}")
    for w in report.warnings:
        print(f"  warning: {w}")
    if report.stored == 0 and report.errors:
        cat, pair, kind = report.errors[0]
        print(f"error[{kind}]: every probe failed ({cat} {pair} first)", file=sys.stderr)
        return EXIT_BACKEND


def cmd_schedule_print(args):
    from .collector import cron_line

    path, cfg = _load(args)
    line = cron_line(cfg, args.binary, str(path.resolve()))
    if args.json:
        _print_json({"cron": line, "interval_minutes": cfg.pipeline.interval_minutes})
    else:
        print(line)


def cmd_schedule_install(args):
    from .collector import cron_line

    path, cfg = _load(args)
    line = cron_line(cfg, args.binary, str(path.resolve()))
    if args.crontab:
        target = Path(args.crontab)
        existing = target.read_text().splitlines() if target.exists() else []
    else:
        res = subprocess.run(["crontab", "-l"], capture_output=True, text=True)
        existing = res.stdout.splitlines() if res.returncode == 0 else []
    if line in existing:
        print(f"already installed: {line}")
        return
    text = "\n".join([*existing, line]) + "\n"
    if args.crontab:
        target.write_text(text)
    else:
        res = subprocess.run(["crontab", "-"], input=text, capture_output=True, text=True)
        if res.returncode != 0:
            from .errors import BackendError

            raise BackendError(f"crontab rejected the schedule: {res.stderr.strip()}", "CrontabFailed")
    print(f"installed: {line}")


# --- data / export -------------------------------------------------------------------

def _criteria(args):
    from .datastore import SearchCriteria

    return SearchCriteria(
        src=validate_isd_as(args.src) if args.src else None,
        dst=validate_isd_as(args.dst) if args.dst else None,
        category=args.category,
        time_from=args.time_from,
        time_to=args.time_to,
        fingerprint=args.fingerprint.lower() if args.fingerprint else None,
    ).validate()


def cmd_data_search(args):
    store = _open_store(args)
    keys = store.keys(_criteria(args))
    if args.json:
        out = []
        for k in keys:
            item = {"path": str(k.path), "area": k.area}
            item["record"] = store.load(k.path).to_dict() if args.records else None
            if not args.records:
                del item["record"]
                item.update(category=k.category, timestamp=format_utc(k.timestamp), src=str(k.src),
                            dst=str(k.dst), fingerprint=k.fingerprint, seq=k.seq)
            out.append(item)
        _print_json(out)
        return
    for k in keys:
        print(f"{format_utc(k.timestamp)}  {k.category:<12} {k.src}>{k.dst}  {k.fingerprint or '-':<16}  {k.path}")
    print(f"{len(keys)} records")


def cmd_data_archive(args):
    store = _open_store(args)
    n = store.archive(args.time_from, args.time_to, args.category or None)
    print(f"archived {n} records")


def cmd_data_purge(args):
    store = _open_store(args)
    areas = (args.area,) if args.area else ("measurements", "archives")
    n = store.purge(_criteria(args), dry_run=args.dry_run, areas=areas)
    print(f"{'would purge' if args.dry_run else 'purged'} {n} records")


def cmd_data_status(args):
    store = _open_store(args)
    st = store.status()
    if args.json:
        _print_json(st)
        return
    for area in ("measurements", "archives"):
        cats = st[area]
        print(f"{area}: {sum(v['files'] for v in cats.values())} files")
        for c in CATEGORIES:
            if c in cats:
                print(f"  {c}: {cats[c]['files']} files, {cats[c]['bytes']} bytes")
    print(f"current: {st['current']}  history: {st['history']}")
    print(f"total: {st['total_files']} files, {st['total_bytes']} bytes")


def cmd_export_csv(args):
    from .transform import export_csv

    store = _open_store(args)
    interval = args.interval
    if interval is None:
        try:
            interval = _load(args)[1].pipeline.interval_minutes
        except UsageError:
            interval = 30
    summary = export_csv(store, args.time_from, args.time_to, args.out, interval)
    print(f"wrote {summary.measurements_path} ({summary.measurement_rows} rows)")
    print(f"wrote {summary.hops_path} ({summary.hop_rows} rows)")
    if summary.skipped:
        print(f"skipped {summary.skipped} unreadable records")


# --- simulation -------------------------------------------------------------------------

def cmd_sim_campaign(args):
    from .bench.campaign import mesh_configs, bench_pipeline, run_campaign
    from .datastore import Store
    from .simnet import SimSpec, build, dumps_events, dumps_spec, load_events, load_spec, plan_from_rates
    from .transform import export_csv

    spec = load_spec(args.spec) if args.spec else SimSpec()
    if args.seed is not None:
        spec = SimSpec.from_dict({**spec.to_dict(), "seed": args.seed})
    sim = build(spec)
    if args.events:
        events = load_events(args.events)
    elif args.auto:
        events = plan_from_rates(sim, sorted(sim.paths), args.cycles, args.failures_per_week,
                                 args.anomaly_contamination, args.bottlenecks, seed=spec.seed)
    else:
        events = []
    out = Path(args.out)
    store = Store(out / "store")
    run_campaign(spec, args.cycles, events, args.categories or None, store)
    start = parse_utc(spec.epoch)
    end = start + timedelta(minutes=spec.cycle_minutes * args.cycles)
    summary = export_csv(store, start, end, out, spec.cycle_minutes)
    (out / "simspec.json").write_text(dumps_spec(spec))
    (out / "events.json").write_text(dumps_events(sim.schedule_events(events).event_list()))
    cfg = mesh_configs(sim, bench_pipeline(spec, args.categories or None), spec.seed)[0]
    save_config(config_from_dict({**cfg.to_dict(), "storage_root": "store"}), out / "campaign.json")
    print(f"simulated {args.cycles} cycles over {spec.as_count} ASes (seed {spec.seed}), {len(events)} events")
    print(f"wrote {summary.measurements_path} ({summary.measurement_rows} rows)")
    print(f"wrote {summary.hops_path} ({summary.hop_rows} rows)")


# --- bench ---------------------------------------------------------------------------------

def cmd_bench_run(args):
    from .bench import run_bench

    params = {"contamination": args.contamination, "factor": tuple(args.factor),
              "delay_ms": tuple(args.delay), "samples": args.samples, "ensemble": args.ensemble}
    if args.cycles is not None:
        params["cycles"] = args.cycles
    tasks = "all" if args.task == "all" else [args.task]
    report, _ = run_bench(tasks, args.data, args.seed, args.out, params)
    failed = None
    for t in report["tasks"]:
        if t["status"] == "ok":
            summary = "; ".join(
                f"{r['model']} {r['target']} " + " ".join(f"{k}={v:.4f}" if isinstance(v, float) else f"{k}={v}" for k, v in r["metrics"].items())
                for r in t["results"]
            )
            print(f"{t['task']}: ok  {summary}")
        else:
            print(f"{t['task']}: insufficient_data  {t['error']['kind']}: {t['error']['message']}")
            failed = t
    print(f"wrote {Path(args.out) / 'report.json'}")
    if failed is not None and args.task != "all":
        print(f"error[{failed['error']['kind']}]: {failed['error']['message']}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


# --- parser -------------------------------------------------------------------------------------

def _add_config_arg(p):
    p.add_argument("--config", help=f"campaign config file (default: ${CONFIG_ENV})")


def _add_root_arg(p):
    _add_config_arg(p)
    p.add_argument("--root", help="datastore root (default: the config's storage_root)")


def _add_criteria(p):
    p.add_argument("--src")
    p.add_argument("--dst")
    p.add_argument("--category", choices=CATEGORIES)
    p.add_argument("--fingerprint")
    p.add_argument("--from", dest="time_from", type=_utc)
    p.add_argument("--to", dest="time_to", type=_utc)


def build_parser() -> argparse.ArgumentParser:
    root = _Parser(prog="pathml", description="Path measurement collection, datasets and benchmarks.")
    root.add_argument("--version", action="version", version=f"pathml {__version__}")
    sub = root.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def leaf(parent, name, fn, help_text, config=True):
        p = parent.add_parser(name, help=help_text, description=help_text)
        if config:
            _add_config_arg(p)
        p.set_defaults(fn=fn, _usage=p.format_usage())
        return p

    cfg = sub.add_parser("config", help="edit the campaign configuration")
    cs = cfg.add_subparsers(dest="config_cmd", required=True, parser_class=_Parser)
    p = leaf(cs, "init", cmd_config_init, "write a new configuration")
    p.add_argument("--local-as", required=True)
    p.add_argument("--storage-root", default="pathml-data")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--force", action="store_true")
    p = leaf(cs, "show", cmd_config_show, "print the configuration")
    p.add_argument("--json", action="store_true")

    a = cs.add_parser("as", help="remote ASes")
    asub = a.add_subparsers(dest="as_cmd", required=True, parser_class=_Parser)
    p = leaf(asub, "add", cmd_as_add, "register a remote AS")
    p.add_argument("isd_as")
    p.add_argument("--ip", required=True)
    p.add_argument("--name", required=True)
    p = leaf(asub, "remove", cmd_as_remove, "remove a remote AS")
    p.add_argument("isd_as")

    s = cs.add_parser("server", help="bandwidth servers")
    ssub = s.add_subparsers(dest="server_cmd", required=True, parser_class=_Parser)
    p = leaf(ssub, "add", cmd_server_add, "register a bandwidth server")
    p.add_argument("isd_as")
    p.add_argument("--ip", required=True)
    p.add_argument("--port", type=int, default=30100)
    p.add_argument("--name", required=True)
    p = leaf(ssub, "remove", cmd_server_remove, "remove the bandwidth server of an AS")
    p.add_argument("isd_as")

    pl = cs.add_parser("pipeline", help="measurement categories")
    psub = pl.add_subparsers(dest="action", required=True, parser_class=_Parser)
    for action in ("enable", "disable"):
        p = leaf(psub, action, cmd_pipeline, f"{action} a measurement category")
        p.add_argument("category")

    p = leaf(sub, "run-cycle", cmd_run_cycle, "run one measurement cycle")
    p.add_argument("--backend", choices=("sim", "scion"), default="scion")
    p.add_argument("--sim-spec", help="simspec.json for the sim backend (default: next to the config)")
    p.add_argument("--cycle", type=int, help="simulated cycle index (sim backend)")
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--json", action="store_true")

    sch = sub.add_parser("schedule", help="cron scheduling")
    schs = sch.add_subparsers(dest="schedule_cmd", required=True, parser_class=_Parser)
    p = leaf(schs, "print", cmd_schedule_print, "print the crontab line")
    p.add_argument("--binary", default="pathml")
    p.add_argument("--json", action="store_true")
    p = leaf(schs, "install", cmd_schedule_install, "add the crontab line")
    p.add_argument("--binary", default="pathml")
    p.add_argument("--crontab", help="write to this file instead of the user crontab")

    d = sub.add_parser("data", help="datastore management")
    ds = d.add_subparsers(dest="data_cmd", required=True, parser_class=_Parser)
    p = leaf(ds, "search", cmd_data_search, "list records matching criteria", config=False)
    _add_root_arg(p)
    _add_criteria(p)
    p.add_argument("--json", action="store_true")
    p.add_argument("--records", action="store_true", help="with --json, include full record documents")
    p = leaf(ds, "archive", cmd_data_archive, "move records into archives/", config=False)
    _add_root_arg(p)
    p.add_argument("--from", dest="time_from", type=_utc)
    p.add_argument("--to", dest="time_to", type=_utc)
    p.add_argument("--category", action="append", choices=CATEGORIES)
    p = leaf(ds, "purge", cmd_data_purge, "delete records matching criteria", config=False)
    _add_root_arg(p)
    _add_criteria(p)
    p.add_argument("--area", choices=("measurements", "archives"))
    p.add_argument("--dry-run", action="store_true")
    p = leaf(ds, "status", cmd_data_status, "summarize the datastore", config=False)
    _add_root_arg(p)
    p.add_argument("--json", action="store_true")

    e = sub.add_parser("export", help="dataset export")
    es = e.add_subparsers(dest="export_cmd", required=True, parser_class=_Parser)
    p = leaf(es, "csv", cmd_export_csv, "write measurements.csv and hops.csv", config=False)
    _add_root_arg(p)
    p.add_argument("--from", dest="time_from", type=_utc)
    p.add_argument("--to", dest="time_to", type=_utc)
    p.add_argument("--out", required=True)
    p.add_argument("--interval", type=int, help="cycle length in minutes (default: from config, else 30)")

    sm = sub.add_parser("sim", help="simulated campaigns")
    sms = sm.add_subparsers(dest="sim_cmd", required=True, parser_class=_Parser)
    p = leaf(sms, "campaign", cmd_sim_campaign, "run a simulated full-mesh campaign and export it", config=False)
    p.add_argument("--spec", help="simspec.json (default: built-in topology)")
    p.add_argument("--cycles", type=int, default=48)
    p.add_argument("--seed", type=int)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--events", help="events.json with an explicit plan")
    g.add_argument("--auto", action="store_true", help="generate a plan from the rate flags")
    p.add_argument("--failures-per-week", type=float, default=1.0)
    p.add_argument("--anomaly-contamination", type=float, default=0.0)
    p.add_argument("--bottlenecks", type=int, default=0)
    p.add_argument("--category", dest="categories", action="append", choices=CATEGORIES)
    p.add_argument("--out", default="sim-out")

    b = sub.add_parser("bench", help="benchmark tasks")
    bs = b.add_subparsers(dest="bench_cmd", required=True, parser_class=_Parser)
    p = leaf(bs, "run", cmd_bench_run, "run benchmark tasks and write reports", config=False)
    p.add_argument("task", choices=("task1", "task2", "task3", "task4", "task5", "all"))
    p.add_argument("--data", default="sim", help="'sim' or a directory holding measurements.csv/hops.csv")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="bench-out")
    p.add_argument("--cycles", type=int, help="simulated cycles for --data sim")
    p.add_argument("--contamination", type=float, default=0.05)
    p.add_argument("--factor", type=float, nargs=2, default=(1.5, 3.0), metavar=("LO", "HI"))
    p.add_argument("--delay", type=float, nargs=2, default=(30.0, 100.0), metavar=("LO", "HI"))
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--ensemble", choices=("boosting", "forest"), default="boosting")
    return root


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        rc = args.fn(args)
    except UsageError as exc:
        if exc.usage:
            sys.stderr.write(exc.usage)
        print(f"error[usage]: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PathMLError as exc:
        print(f"error[{exc.kind}]: {exc}", file=sys.stderr)
        return exc.exit_code
    return EXIT_OK if rc is None else rc


def main(argv=None) -> None:
    try:
        rc = dispatch(argv)
        sys.stdout.flush()
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        rc = EXIT_OK
    sys.exit(rc)


if __name__ == "__main__":
    main()
