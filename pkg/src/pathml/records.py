"""Measurement record envelope and the per-category payload types."""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from . import __version__
from .config import CATEGORIES, IsdAs, validate_isd_as
from .errors import SchemaError
from .scionproto import BandwidthResult, PathRecord, PingResult, TracerouteResult
from .utc import parse_utc

SCHEMA_VERSION = 1
TOOL = {"name": "pathml", "version": __version__}


@dataclass(frozen=True)
class ShowpathsResult:
    dst: IsdAs
    paths: tuple = ()

    @property
    def fingerprints(self) -> list:
        return [p.fingerprint for p in self.paths]

    def to_dict(self) -> dict:
        return {"dst": str(self.dst), "paths": [p.to_dict() for p in self.paths]}

    @classmethod
    def from_dict(cls, d: dict) -> "ShowpathsResult":
        return cls(validate_isd_as(d["dst"]), tuple(PathRecord.from_dict(p) for p in d["paths"]))


@dataclass(frozen=True)
class ComparerResult:
    src: IsdAs
    dst: IsdAs
    added: frozenset = frozenset()
    removed: frozenset = frozenset()
    persisted: frozenset = frozenset()
    prev_total: int = 0
    cur_total: int = 0

    def to_dict(self) -> dict:
        return {
            "pair": [str(self.src), str(self.dst)],
            "added": sorted(self.added),
            "removed": sorted(self.removed),
            "persisted": sorted(self.persisted),
            "prev_total": self.prev_total,
            "cur_total": self.cur_total,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ComparerResult":
        src, dst = (validate_isd_as(x) for x in d["pair"])
        return cls(src, dst, frozenset(d["added"]), frozenset(d["removed"]), frozenset(d["persisted"]),
                   int(d["prev_total"]), int(d["cur_total"]))


@dataclass(frozen=True)
class MpPingResult:
    """Two pings run concurrently on distinct paths to one destination."""

    dst: IsdAs
    paths: tuple
    results: tuple
    errors: tuple = ()

    def to_dict(self) -> dict:
        return {
            "dst": str(self.dst),
            "paths": list(self.paths),
            "results": [r.to_dict() if r is not None else None for r in self.results],
            "errors": list(self.errors),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MpPingResult":
        return cls(
            validate_isd_as(d["dst"]),
            tuple(d["paths"]),
            tuple(PingResult.from_dict(r) if r is not None else None for r in d["results"]),
            tuple(d.get("errors", ())),
        )


@dataclass(frozen=True)
class MpBandwidthRun:
    target_mbps: float
    results: tuple

    def to_dict(self) -> dict:
        return {"target_mbps": self.target_mbps,
                "results": [r.to_dict() if r is not None else None for r in self.results]}

    @classmethod
    def from_dict(cls, d: dict) -> "MpBandwidthRun":
        return cls(d["target_mbps"],
                   tuple(BandwidthResult.from_dict(r) if r is not None else None for r in d["results"]))


@dataclass(frozen=True)
class MpBandwidthResult:
    """Per tier, two bandwidth tests run concurrently on distinct paths."""

    dst: IsdAs
    paths: tuple
    runs: tuple
    errors: tuple = ()

    def to_dict(self) -> dict:
        return {"dst": str(self.dst), "paths": list(self.paths), "runs": [r.to_dict() for r in self.runs],
                "errors": list(self.errors)}

    @classmethod
    def from_dict(cls, d: dict) -> "MpBandwidthResult":
        return cls(validate_isd_as(d["dst"]), tuple(d["paths"]),
                   tuple(MpBandwidthRun.from_dict(r) for r in d["runs"]), tuple(d.get("errors", ())))


PAYLOAD_TYPES = {
    "showpaths": ShowpathsResult,
    "comparer": ComparerResult,
    "bandwidth": BandwidthResult,
    "mp_bandwidth": MpBandwidthResult,
    "ping": PingResult,
    "mp_prober": MpPingResult,
    "traceroute": TracerouteResult,
}


_FP_RE = re.compile(r"^[0-9a-f]{16}$")


@dataclass(frozen=True)
class RecordEnvelope:
    timestamp_utc: str
    category: str
    src: IsdAs
    dst: IsdAs
    payload: object
    fingerprint: str | None = None
    tool: dict = field(default_factory=lambda: dict(TOOL))
    schema_version: int = SCHEMA_VERSION

    def validate(self) -> "RecordEnvelope":
        if self.category not in CATEGORIES:
            raise SchemaError(f"unknown category {self.category!r}")
        try:
            parse_utc(self.timestamp_utc)
        except (ValueError, TypeError):
            raise SchemaError(f"timestamp {self.timestamp_utc!r} is not YYYY-MM-DDTHH:MM:SSZ") from None
        if self.fingerprint is not None and not _FP_RE.match(str(self.fingerprint)):
            raise SchemaError(f"fingerprint {self.fingerprint!r} is not 16 lowercase hex digits")
        if self.schema_version != SCHEMA_VERSION:
            raise SchemaError(f"unsupported schema_version {self.schema_version}")
        expected = PAYLOAD_TYPES[self.category]
        if not isinstance(self.payload, expected):
            raise SchemaError(
                f"category {self.category!r} needs a {expected.__name__} payload, got {type(self.payload).__name__}"
            )
        return self

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "timestamp_utc": self.timestamp_utc,
            "category": self.category,
            "src": str(self.src),
            "dst": str(self.dst),
            "fingerprint": self.fingerprint,
            "tool": dict(self.tool),
            "payload": self.payload.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RecordEnvelope":
        try:
            category = d["category"]
            if category not in PAYLOAD_TYPES:
                raise SchemaError(f"unknown category {category!r}")
            return cls(
                timestamp_utc=d["timestamp_utc"],
                category=category,
                src=validate_isd_as(d["src"]),
                dst=validate_isd_as(d["dst"]),
                payload=PAYLOAD_TYPES[category].from_dict(d["payload"]),
                fingerprint=d.get("fingerprint"),
                tool=dict(d.get("tool", TOOL)),
                schema_version=int(d.get("schema_version", SCHEMA_VERSION)),
            ).validate()
        except SchemaError:
            raise
        except Exception as exc:  # noqa: BLE001 - any malformed document is a schema problem
            raise SchemaError(f"malformed record: {type(exc).__name__}: {exc}") from None
