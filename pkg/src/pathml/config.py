"""Measurement topology and pipeline configuration.

A campaign is described by one JSON document (``campaign.json``). All
objects here are immutable; the registry helpers return updated copies and
leave the input untouched when they raise.
"""
from __future__ import annotations

import ipaddress
import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import (
    DependencyViolation,
    DuplicateAs,
    DuplicateServer,
    InvalidIp,
    IoError,
    IsdOutOfRange,
    MalformedIsdAs,
    PortOutOfRange,
    SchemaError,
    UnknownCategory,
)

CATEGORIES = (
    "showpaths",
    "comparer",
    "bandwidth",
    "mp_bandwidth",
    "ping",
    "mp_prober",
    "traceroute",
)

_ISD_AS_RE = re.compile(r"^(?P<isd>\d+)-(?P<as>[0-9a-fA-F]{1,4}(?::[0-9a-fA-F]{1,4}){2}|\d+)$")


@dataclass(frozen=True, order=True)
class IsdAs:
    isd: int
    as_code: str

    def __str__(self) -> str:
        return f"{self.isd}-{self.as_code}"

    @property
    def slug(self) -> str:
        """Filesystem-safe form, e.g. ``19-ffaa-0-1301``."""
        return str(self).replace(":", "-")

    @classmethod
    def from_slug(cls, slug: str) -> "IsdAs":
        isd, _, rest = slug.partition("-")
        return validate_isd_as(f"{isd}-{rest.replace('-', ':')}")


def validate_isd_as(text: str) -> IsdAs:
    """Parse ``ISD-AS`` text; hex AS codes are lowercased."""
    if not isinstance(text, str):
        raise MalformedIsdAs(f"ISD-AS must be a string, got {type(text).__name__}")
    m = _ISD_AS_RE.match(text.strip())
    if not m:
        raise MalformedIsdAs(f"malformed ISD-AS {text!r}")
    isd_text = m.group("isd")
    if len(isd_text) > 1 and isd_text.startswith("0"):
        raise MalformedIsdAs(f"ISD has leading zeros in {text!r}")
    isd = int(isd_text)
    if not 1 <= isd <= 65535:
        raise IsdOutOfRange(f"ISD {isd} outside [1, 65535] in {text!r}")
    as_code = m.group("as")
    if ":" in as_code:
        as_code = as_code.lower()
    return IsdAs(isd, as_code)


def _check_ip(ip: str) -> str:
    try:
        return str(ipaddress.ip_address(ip))
    except (ValueError, TypeError):
        raise InvalidIp(f"not an IP literal: {ip!r}") from None


@dataclass(frozen=True)
class AsDescriptor:
    isd_as: IsdAs
    ip: str
    name: str

    def __post_init__(self):
        _check_ip(self.ip)
        if not self.name:
            raise SchemaError("AS name must be non-empty")

    def to_dict(self) -> dict:
        return {"isd_as": str(self.isd_as), "ip": self.ip, "name": self.name}


@dataclass(frozen=True)
class ServerDescriptor:
    isd_as: IsdAs
    ip: str
    port: int
    name: str

    def __post_init__(self):
        _check_ip(self.ip)
        if isinstance(self.port, bool) or not isinstance(self.port, int) or not 1 <= self.port <= 65535:
            raise PortOutOfRange(f"port {self.port!r} outside [1, 65535]")
        if not self.name:
            raise SchemaError("server name must be non-empty")

    @property
    def address(self) -> str:
        return f"{self.ip}:{self.port}"

    def to_dict(self) -> dict:
        return {"isd_as": str(self.isd_as), "ip": self.ip, "port": self.port, "name": self.name}

    @classmethod
    def from_dict(cls, d: dict) -> "ServerDescriptor":
        return cls(validate_isd_as(d["isd_as"]), d["ip"], d["port"], d["name"])


def _default_enabled() -> dict:
    return {c: True for c in CATEGORIES}


@dataclass(frozen=True)
class PipelineConfig:
    enabled: dict = field(default_factory=_default_enabled)
    interval_minutes: int = 30
    bandwidth_tiers_mbps: tuple = (10, 50, 100)
    ping_count: int = 10
    paths_per_pair: int = 3
    mp_concurrency: int = 2

    def __post_init__(self):
        keys = set(self.enabled)
        if keys != set(CATEGORIES):
            unknown = sorted(keys - set(CATEGORIES))
            if unknown:
                raise UnknownCategory(f"unknown category {unknown[0]!r}")
            raise SchemaError(f"pipeline.enabled missing {sorted(set(CATEGORIES) - keys)}")
        for name in ("interval_minutes", "ping_count", "paths_per_pair"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise SchemaError(f"pipeline.{name} must be a positive integer, got {v!r}")
        if any(isinstance(t, bool) or not isinstance(t, (int, float)) or t <= 0 for t in self.bandwidth_tiers_mbps):
            raise SchemaError("pipeline.bandwidth_tiers_mbps must hold positive numbers")
        if self.mp_concurrency != 2:
            raise SchemaError("pipeline.mp_concurrency is fixed at 2")
        if self.enabled["mp_bandwidth"] and not self.bandwidth_tiers_mbps:
            raise DependencyViolation("mp_bandwidth needs at least one bandwidth tier")
        if self.enabled["comparer"] and not self.enabled["showpaths"]:
            raise DependencyViolation("comparer needs showpaths enabled")

    def to_dict(self) -> dict:
        return {
            "enabled": {c: bool(self.enabled[c]) for c in CATEGORIES},
            "interval_minutes": self.interval_minutes,
            "bandwidth_tiers_mbps": list(self.bandwidth_tiers_mbps),
            "ping_count": self.ping_count,
            "paths_per_pair": self.paths_per_pair,
        }


@dataclass(frozen=True)
class CampaignConfig:
    local_as: IsdAs
    ases: tuple = ()
    servers: tuple = ()
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    storage_root: str = "pathml-data"
    seed: int = 0

    def __post_init__(self):
        if any(a.isd_as == self.local_as for a in self.ases):
            raise SchemaError(f"local_as {self.local_as} must not appear in ases")
        if not self.storage_root:
            raise SchemaError("storage_root must be non-empty")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise SchemaError("seed must be a 64-bit unsigned integer")
        seen = set()
        for a in self.ases:
            if a.isd_as in seen:
                raise DuplicateAs(f"AS {a.isd_as} registered twice")
            seen.add(a.isd_as)
        seen = set()
        for s in self.servers:
            if s.isd_as in seen:
                raise DuplicateServer(f"server {s.isd_as} registered twice")
            seen.add(s.isd_as)

    def remote(self, isd_as: IsdAs) -> AsDescriptor | None:
        return next((a for a in self.ases if a.isd_as == isd_as), None)

    def servers_at(self, isd_as: IsdAs) -> list:
        return [s for s in self.servers if s.isd_as == isd_as]

    def to_dict(self) -> dict:
        return {
            "local_as": str(self.local_as),
            "ases": [a.to_dict() for a in self.ases],
            "servers": [s.to_dict() for s in self.servers],
            "pipeline": self.pipeline.to_dict(),
            "storage_root": self.storage_root,
            "seed": self.seed,
        }


def add_as(config: CampaignConfig, entry: AsDescriptor) -> CampaignConfig:
    if any(a.isd_as == entry.isd_as for a in config.ases):
        raise DuplicateAs(f"AS {entry.isd_as} already registered")
    return replace(config, ases=config.ases + (entry,))


def add_server(config: CampaignConfig, entry: ServerDescriptor) -> CampaignConfig:
    if any(s.isd_as == entry.isd_as for s in config.servers):
        raise DuplicateServer(f"server {entry.isd_as} already registered")
    return replace(config, servers=config.servers + (entry,))


def remove_as(config: CampaignConfig, isd_as: IsdAs) -> CampaignConfig:
    return replace(config, ases=tuple(a for a in config.ases if a.isd_as != isd_as))


def remove_server(config: CampaignConfig, isd_as: IsdAs) -> CampaignConfig:
    return replace(config, servers=tuple(s for s in config.servers if s.isd_as != isd_as))


def set_category(config: CampaignConfig, category: str, on: bool) -> CampaignConfig:
    if category not in CATEGORIES:
        raise UnknownCategory(f"unknown category {category!r}; choose from {', '.join(CATEGORIES)}")
    enabled = dict(config.pipeline.enabled)
    enabled[category] = bool(on)
    return replace(config, pipeline=replace(config.pipeline, enabled=enabled))


# --- JSON document ---------------------------------------------------------

_TOP_KEYS = {"local_as", "ases", "servers", "pipeline", "storage_root", "seed"}
_PIPELINE_KEYS = {"enabled", "interval_minutes", "bandwidth_tiers_mbps", "ping_count", "paths_per_pair", "mp_concurrency"}


def _reject_unknown(d, allowed: set, where: str):
    if not isinstance(d, dict):
        raise SchemaError(f"{where}: expected an object")
    extra = sorted(set(d) - allowed)
    if extra:
        raise SchemaError(f"{where}: unknown field {extra[0]!r}")


def _field(where: str, fn, *args):
    try:
        return fn(*args)
    except SchemaError:
        raise
    except (MalformedIsdAs, IsdOutOfRange, InvalidIp, PortOutOfRange) as exc:
        raise SchemaError(f"{where}: {exc}") from None
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"{where}: missing or mistyped field {exc}") from None


def config_from_dict(doc: dict) -> CampaignConfig:
    _reject_unknown(doc, _TOP_KEYS, "campaign")
    if "local_as" not in doc:
        raise SchemaError("campaign: missing field 'local_as'")
    local_as = _field("local_as", validate_isd_as, doc["local_as"])
    ases = []
    for i, a in enumerate(doc.get("ases", [])):
        _reject_unknown(a, {"isd_as", "ip", "name"}, f"ases[{i}]")
        isd_as = _field(f"ases[{i}].isd_as", validate_isd_as, a.get("isd_as"))
        ases.append(_field(f"ases[{i}]", AsDescriptor, isd_as, a.get("ip"), a.get("name")))
    servers = []
    for i, s in enumerate(doc.get("servers", [])):
        _reject_unknown(s, {"isd_as", "ip", "port", "name"}, f"servers[{i}]")
        isd_as = _field(f"servers[{i}].isd_as", validate_isd_as, s.get("isd_as"))
        servers.append(_field(f"servers[{i}]", ServerDescriptor, isd_as, s.get("ip"), s.get("port"), s.get("name")))
    p = doc.get("pipeline", {})
    _reject_unknown(p, _PIPELINE_KEYS, "pipeline")
    enabled = p.get("enabled", _default_enabled())
    if isinstance(enabled, dict):
        unknown = sorted(set(enabled) - set(CATEGORIES))
        if unknown:
            raise SchemaError(f"pipeline.enabled: unknown field {unknown[0]!r}")
        enabled = {**_default_enabled(), **enabled}
    defaults = PipelineConfig()
    pipeline = _field(
        "pipeline",
        lambda: PipelineConfig(
            enabled=enabled,
            interval_minutes=p.get("interval_minutes", defaults.interval_minutes),
            bandwidth_tiers_mbps=tuple(p.get("bandwidth_tiers_mbps", defaults.bandwidth_tiers_mbps)),
            ping_count=p.get("ping_count", defaults.ping_count),
            paths_per_pair=p.get("paths_per_pair", defaults.paths_per_pair),
            mp_concurrency=p.get("mp_concurrency", 2),
        ),
    )
    return CampaignConfig(
        local_as=local_as,
        ases=tuple(ases),
        servers=tuple(servers),
        pipeline=pipeline,
        storage_root=doc.get("storage_root", "pathml-data"),
        seed=doc.get("seed", 0),
    )


def dumps_config(config: CampaignConfig) -> str:
    return json.dumps(config.to_dict(), indent=2) + "\n"


def save_config(config: CampaignConfig, path) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(f".{path.name}.tmp")
        tmp.write_text(dumps_config(config))
        tmp.replace(path)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None


def load_config(path) -> CampaignConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return config_from_dict(doc)
