"""File-backed measurement store.

Layout under the root::

    current/                        latest showpaths record per AS pair
    history/                        the previous (N-1) showpaths record per pair
    measurements/<date>/<category>/ one JSON file per record
    archives/<date>/<category>/     records moved out by archive()
    logs/                           per-cycle execution logs

Files are written to a hidden temp name and renamed into place, so readers
never observe a partial record.
"""
from __future__ import annotations

import contextlib
import fcntl
import json
import os
import re
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

from .config import CATEGORIES, IsdAs
from .errors import InvalidCriteria, IoError, SchemaError, StoreUnavailable
from .records import RecordEnvelope
from .utc import compact_utc, parse_compact_utc, parse_utc

_NAME_RE = re.compile(
    r"^(?P<ts>\d{8}T\d{6}Z)_(?P<src>\d+-[0-9a-f-]+)_(?P<dst>\d+-[0-9a-f-]+)"
    r"(?:_(?P<fp>[0-9a-f]{16}))?_(?P<seq>\d{4})\.json$"
)
AREAS = ("measurements", "archives")


def record_filename(envelope: RecordEnvelope, seq: int = 0) -> str:
    if not 0 <= seq <= 9999:
        raise SchemaError(f"collision suffix {seq} outside 0..9999")
    ts = compact_utc(parse_utc(envelope.timestamp_utc))
    fp = f"_{envelope.fingerprint}" if envelope.fingerprint else ""
    return f"{ts}_{envelope.src.slug}_{envelope.dst.slug}{fp}_{seq:04d}.json"


@dataclass(frozen=True)
class RecordKey:
    """What a record file name says about its content."""

    path: Path
    area: str
    category: str
    timestamp: datetime
    src: IsdAs
    dst: IsdAs
    fingerprint: str | None
    seq: int


@dataclass(frozen=True)
class SearchCriteria:
    src: IsdAs | None = None
    dst: IsdAs | None = None
    category: str | None = None
    time_from: datetime | None = None
    time_to: datetime | None = None
    fingerprint: str | None = None

    def validate(self) -> "SearchCriteria":
        if self.category is not None and self.category not in CATEGORIES:
            raise InvalidCriteria(f"unknown category {self.category!r}")
        if self.time_from and self.time_to and self.time_from > self.time_to:
            raise InvalidCriteria("time range is inverted (from > to)")
        return self

    def matches(self, key: RecordKey) -> bool:
        return (
            (self.src is None or key.src == self.src)
            and (self.dst is None or key.dst == self.dst)
            and (self.category is None or key.category == self.category)
            and (self.time_from is None or key.timestamp >= self.time_from)
            and (self.time_to is None or key.timestamp <= self.time_to)
            and (self.fingerprint is None or key.fingerprint == self.fingerprint)
        )


def _dumps(envelope: RecordEnvelope) -> str:
    return json.dumps(envelope.to_dict(), indent=2) + "\n"


class Store:
    def __init__(self, root, create: bool = True):
        self.root = Path(root)
        self.fault_hook = None  # called between temp write and rename; tests inject crashes here
        try:
            if create:
                for sub in ("current", "history", "measurements", "archives", "logs"):
                    (self.root / sub).mkdir(parents=True, exist_ok=True)
            elif not self.root.is_dir():
                raise StoreUnavailable(f"store root {self.root} does not exist")
        except OSError as exc:
            raise StoreUnavailable(f"cannot initialise store at {self.root}: {exc.strerror}") from None

    # writing -----------------------------------------------------------------

    def _atomic_write(self, target: Path, text: str) -> None:
        tmp = target.with_name(f".{target.name}.tmp")
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            with open(tmp, "w") as fh:
                fh.write(text)
                fh.flush()
                os.fsync(fh.fileno())
            if self.fault_hook is not None:
                self.fault_hook(tmp, target)
            os.replace(tmp, target)
        except OSError as exc:
            raise IoError(f"cannot write {target}: {exc.strerror}") from None

    def path_for(self, envelope: RecordEnvelope, seq: int = 0) -> Path:
        date = envelope.timestamp_utc[:10]
        return self.root / "measurements" / date / envelope.category / record_filename(envelope, seq)

    def store(self, envelope: RecordEnvelope, seq: int = 0) -> Path:
        envelope.validate()
        target = self.path_for(envelope, seq)
        self._atomic_write(target, _dumps(envelope))
        return target

    def load(self, path) -> RecordEnvelope:
        try:
            doc = json.loads(Path(path).read_text())
        except OSError as exc:
            raise IoError(f"cannot read {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON ({exc.msg})") from None
        return RecordEnvelope.from_dict(doc)

    # showpaths rotation ------------------------------------------------------

    def _pair_file(self, area: str, src: IsdAs, dst: IsdAs) -> Path:
        return self.root / area / f"{src.slug}_{dst.slug}.json"

    def rotate_showpaths(self, envelope: RecordEnvelope) -> tuple:
        """Make ``envelope`` the current listing; the old current becomes history."""
        if envelope.category != "showpaths":
            raise SchemaError("only showpaths records rotate")
        envelope.validate()
        cur = self._pair_file("current", envelope.src, envelope.dst)
        hist = self._pair_file("history", envelope.src, envelope.dst)
        moved = None
        try:
            if cur.exists():
                hist.parent.mkdir(parents=True, exist_ok=True)
                os.replace(cur, hist)
                moved = hist
        except OSError as exc:
            raise IoError(f"cannot rotate {cur}: {exc.strerror}") from None
        self._atomic_write(cur, _dumps(envelope))
        return cur, moved

    def current_showpaths(self, src: IsdAs, dst: IsdAs) -> RecordEnvelope | None:
        f = self._pair_file("current", src, dst)
        return self.load(f) if f.exists() else None

    def history_showpaths(self, src: IsdAs, dst: IsdAs) -> RecordEnvelope | None:
        f = self._pair_file("history", src, dst)
        return self.load(f) if f.exists() else None

    # locking / logs ------------------------------------------------------------

    @contextlib.contextmanager
    def cycle_lock(self):
        """Exclusive cycle lock; yields False when another cycle holds it."""
        path = self.root / ".cycle.lock"
        try:
            fh = open(path, "a+")
        except OSError as exc:
            raise StoreUnavailable(f"cannot open lock {path}: {exc.strerror}") from None
        try:
            try:
                fcntl.flock(fh, fcntl.LOCK_EX | fcntl.LOCK_NB)
            except BlockingIOError:
                yield False
                return
            try:
                fh.seek(0)
                fh.truncate()
                fh.write(f"{os.getpid()}\n")
                fh.flush()
                yield True
            finally:
                fcntl.flock(fh, fcntl.LOCK_UN)
        finally:
            fh.close()

    def log_path(self, cycle_start: datetime) -> Path:
        return self.root / "logs" / f"cycle-{compact_utc(cycle_start)}.log"

    # queries -------------------------------------------------------------------

    def _keys(self, areas=AREAS):
        for area in areas:
            base = self.root / area
            if not base.is_dir():
                continue
            for date_dir in sorted(base.iterdir()):
                if not date_dir.is_dir():
                    continue
                for cat_dir in sorted(date_dir.iterdir()):
                    if not cat_dir.is_dir() or cat_dir.name not in CATEGORIES:
                        continue
                    for f in sorted(cat_dir.iterdir()):
                        m = _NAME_RE.match(f.name)
                        if not m:
                            continue
                        yield RecordKey(
                            path=f,
                            area=area,
                            category=cat_dir.name,
                            timestamp=parse_compact_utc(m.group("ts")),
                            src=IsdAs.from_slug(m.group("src")),
                            dst=IsdAs.from_slug(m.group("dst")),
                            fingerprint=m.group("fp"),
                            seq=int(m.group("seq")),
                        )

    def search(self, criteria: SearchCriteria | None = None, areas=AREAS) -> list:
        criteria = (criteria or SearchCriteria()).validate()
        hits = [k for k in self._keys(areas) if criteria.matches(k)]
        return [k.path for k in sorted(hits, key=lambda k: (k.timestamp, k.category, str(k.path)))]

    def keys(self, criteria: SearchCriteria | None = None, areas=AREAS) -> list:
        criteria = (criteria or SearchCriteria()).validate()
        return [k for k in self._keys(areas) if criteria.matches(k)]

    def archive(self, time_from: datetime | None, time_to: datetime | None, categories=None) -> int:
        """Move matching measurement files into archives/; returns the moved count."""
        crit = SearchCriteria(time_from=time_from, time_to=time_to).validate()
        cats = set(categories) if categories else set(CATEGORIES)
        unknown = cats - set(CATEGORIES)
        if unknown:
            raise InvalidCriteria(f"unknown category {sorted(unknown)[0]!r}")
        moved = 0
        for k in list(self._keys(("measurements",))):
            if k.category not in cats or not crit.matches(k):
                continue
            rel = k.path.relative_to(self.root / "measurements")
            target = self.root / "archives" / rel
            try:
                target.parent.mkdir(parents=True, exist_ok=True)
                os.replace(k.path, target)
            except OSError as exc:
                raise IoError(f"cannot archive {k.path}: {exc.strerror}") from None
            moved += 1
        self._prune_empty(self.root / "measurements")
        return moved

    def purge(self, criteria: SearchCriteria | None = None, dry_run: bool = False, areas=AREAS) -> int:
        victims = self.search(criteria, areas)
        if dry_run:
            return len(victims)
        for f in victims:
            try:
                f.unlink()
            except OSError as exc:
                raise IoError(f"cannot delete {f}: {exc.strerror}") from None
        for area in areas:
            self._prune_empty(self.root / area)
        return len(victims)

    def status(self) -> dict:
        """Per-area, per-category file counts and byte totals."""
        out = {area: {c: {"files": 0, "bytes": 0} for c in CATEGORIES} for area in AREAS}
        for k in self._keys():
            slot = out[k.area][k.category]
            slot["files"] += 1
            slot["bytes"] += k.path.stat().st_size
        for area in ("current", "history"):
            d = self.root / area
            out[area] = len(list(d.glob("*.json"))) if d.is_dir() else 0
        out["total_files"] = sum(out[a][c]["files"] for a in AREAS for c in CATEGORIES)
        out["total_bytes"] = sum(out[a][c]["bytes"] for a in AREAS for c in CATEGORIES)
        return out

    @staticmethod
    def _prune_empty(base: Path) -> None:
        if not base.is_dir():
            return
        for d in sorted((p for p in base.rglob("*") if p.is_dir()), key=lambda p: -len(p.parts)):
            with contextlib.suppress(OSError):
                d.rmdir()


class MemoryStore:
    """In-memory stand-in with the collector-facing surface of Store.

    Used by the benchmarks to run long simulated campaigns without touching
    disk; ``envelopes`` keeps every stored record keyed like the file layout.
    """

    def __init__(self):
        self.records: dict = {}
        self._current: dict = {}
        self._history: dict = {}

    def store(self, envelope: RecordEnvelope, seq: int = 0):
        envelope.validate()
        key = (envelope.category, record_filename(envelope, seq))
        self.records[key] = envelope
        return key

    def rotate_showpaths(self, envelope: RecordEnvelope):
        pair = (envelope.src, envelope.dst)
        if pair in self._current:
            self._history[pair] = self._current[pair]
        self._current[pair] = envelope
        return pair, pair if pair in self._history else None

    def current_showpaths(self, src, dst):
        return self._current.get((src, dst))

    def history_showpaths(self, src, dst):
        return self._history.get((src, dst))

    @contextlib.contextmanager
    def cycle_lock(self):
        yield True

    def log_path(self, cycle_start):
        return None

    @property
    def envelopes(self) -> list:
        return [self.records[k] for k in sorted(self.records)]
