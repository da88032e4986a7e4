"""Typed probe results, SCION tool-output parsers and the probe backends.

The text grammar the parsers accept is documented in ``docs/fixtures.md``.
The ``render_*`` helpers write the same grammar and are used to build fixture
corpora and fake tool binaries.
"""
from __future__ import annotations

import os
import re
import shutil
import subprocess
from dataclasses import dataclass, field
from typing import Protocol

from .config import IsdAs, ServerDescriptor, validate_isd_as
from .errors import (
    BackendError,
    EmptyOutput,
    InvariantViolation,
    MalformedIsdAs,
    IsdOutOfRange,
    ParseError,
    ProbeTimeout,
    ServerUnreachable,
)
from .fingerprint import path_fingerprint

PATH_STATUSES = ("alive", "timeout", "unknown")
BW_OVERSHOOT = 1.05
DEFAULT_TIMEOUT_S = 60.0


@dataclass(frozen=True)
class HopRef:
    isd_as: IsdAs
    ingress_if: int
    egress_if: int

    def to_dict(self) -> dict:
        return {"isd_as": str(self.isd_as), "ingress_if": self.ingress_if, "egress_if": self.egress_if}

    @classmethod
    def from_dict(cls, d: dict) -> "HopRef":
        return cls(validate_isd_as(d["isd_as"]), int(d["ingress_if"]), int(d["egress_if"]))


@dataclass(frozen=True)
class PathRecord:
    hops: tuple
    mtu: int
    status: str = "alive"
    expiry: str | None = None
    fingerprint: str = ""

    def __post_init__(self):
        if not self.hops:
            raise InvariantViolation("path has no hops")
        if self.status not in PATH_STATUSES:
            raise InvariantViolation(f"unknown path status {self.status!r}")
        fp = path_fingerprint(self.hops)
        if not self.fingerprint:
            object.__setattr__(self, "fingerprint", fp)
        elif self.fingerprint != fp:
            raise InvariantViolation(f"fingerprint {self.fingerprint} does not match hops ({fp})")

    @property
    def src(self) -> IsdAs:
        return self.hops[0].isd_as

    @property
    def dst(self) -> IsdAs:
        return self.hops[-1].isd_as

    def sequence(self) -> str:
        """Hop-predicate sequence used to pin this path on the command line."""
        return " ".join(f"{h.isd_as}#{h.ingress_if},{h.egress_if}" for h in self.hops)

    def to_dict(self) -> dict:
        return {
            "fingerprint": self.fingerprint,
            "hops": [h.to_dict() for h in self.hops],
            "mtu": self.mtu,
            "status": self.status,
            "expiry": self.expiry,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PathRecord":
        return cls(
            hops=tuple(HopRef.from_dict(h) for h in d["hops"]),
            mtu=int(d["mtu"]),
            status=d["status"],
            expiry=d.get("expiry"),
            fingerprint=d.get("fingerprint", ""),
        )


@dataclass(frozen=True)
class PingResult:
    dst: IsdAs
    fingerprint: str | None
    sent: int
    received: int
    loss_pct: float
    rtt_min_ms: float | None = None
    rtt_avg_ms: float | None = None
    rtt_max_ms: float | None = None
    jitter_ms: float | None = None

    def validate(self) -> "PingResult":
        if self.sent < 1 or not 0 <= self.received <= self.sent:
            raise InvariantViolation(f"received {self.received} of sent {self.sent}")
        expected = 100.0 * (self.sent - self.received) / self.sent
        if abs(self.loss_pct - expected) > 0.01:
            raise InvariantViolation(f"loss {self.loss_pct}% inconsistent with {self.received}/{self.sent}")
        rtts = (self.rtt_min_ms, self.rtt_avg_ms, self.rtt_max_ms, self.jitter_ms)
        if self.received == 0:
            if any(v is not None for v in rtts):
                raise InvariantViolation("RTT statistics present although nothing was received")
        else:
            if any(v is None or v < 0 for v in rtts):
                raise InvariantViolation("RTT statistics missing or negative")
            if not self.rtt_min_ms <= self.rtt_avg_ms <= self.rtt_max_ms:
                raise InvariantViolation("RTT statistics not ordered min <= avg <= max")
        return self

    def to_dict(self) -> dict:
        return {
            "dst": str(self.dst),
            "fingerprint": self.fingerprint,
            "sent": self.sent,
            "received": self.received,
            "loss_pct": self.loss_pct,
            "rtt_min_ms": self.rtt_min_ms,
            "rtt_avg_ms": self.rtt_avg_ms,
            "rtt_max_ms": self.rtt_max_ms,
            "jitter_ms": self.jitter_ms,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PingResult":
        return cls(
            dst=validate_isd_as(d["dst"]),
            fingerprint=d.get("fingerprint"),
            sent=int(d["sent"]),
            received=int(d["received"]),
            loss_pct=float(d["loss_pct"]),
            rtt_min_ms=d.get("rtt_min_ms"),
            rtt_avg_ms=d.get("rtt_avg_ms"),
            rtt_max_ms=d.get("rtt_max_ms"),
            jitter_ms=d.get("jitter_ms"),
        ).validate()


@dataclass(frozen=True)
class BandwidthResult:
    server: ServerDescriptor | None
    fingerprint: str | None
    target_mbps: float
    achieved_cs_mbps: float
    achieved_sc_mbps: float
    loss_pct: float

    def validate(self) -> "BandwidthResult":
        if self.target_mbps <= 0:
            raise InvariantViolation("target bandwidth must be positive")
        for v in (self.achieved_cs_mbps, self.achieved_sc_mbps):
            if v < 0:
                raise InvariantViolation("negative achieved bandwidth")
            if v > BW_OVERSHOOT * self.target_mbps:
                raise InvariantViolation(f"achieved {v} Mbps exceeds {BW_OVERSHOOT} x target {self.target_mbps}")
        if not 0 <= self.loss_pct <= 100:
            raise InvariantViolation(f"loss {self.loss_pct}% outside [0, 100]")
        return self

    def to_dict(self) -> dict:
        return {
            "server": self.server.to_dict() if self.server else None,
            "fingerprint": self.fingerprint,
            "target_mbps": self.target_mbps,
            "achieved_cs_mbps": self.achieved_cs_mbps,
            "achieved_sc_mbps": self.achieved_sc_mbps,
            "loss_pct": self.loss_pct,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BandwidthResult":
        return cls(
            server=ServerDescriptor.from_dict(d["server"]) if d.get("server") else None,
            fingerprint=d.get("fingerprint"),
            target_mbps=d["target_mbps"],
            achieved_cs_mbps=d["achieved_cs_mbps"],
            achieved_sc_mbps=d["achieved_sc_mbps"],
            loss_pct=d["loss_pct"],
        ).validate()


@dataclass(frozen=True)
class TracerouteHop:
    index: int
    hop: HopRef
    rtts_ms: tuple = ()

    def to_dict(self) -> dict:
        return {"index": self.index, "hop": self.hop.to_dict(), "rtts_ms": list(self.rtts_ms)}

    @classmethod
    def from_dict(cls, d: dict) -> "TracerouteHop":
        return cls(int(d["index"]), HopRef.from_dict(d["hop"]), tuple(d["rtts_ms"]))


@dataclass(frozen=True)
class TracerouteResult:
    dst: IsdAs
    fingerprint: str | None
    hops: tuple = field(default_factory=tuple)

    def validate(self) -> "TracerouteResult":
        if not self.hops:
            raise InvariantViolation("traceroute without hops")
        for i, h in enumerate(self.hops):
            if h.index != i:
                raise InvariantViolation(f"hop index {h.index} where {i} expected")
            if len(h.rtts_ms) not in (0, 3) or any(r < 0 for r in h.rtts_ms):
                raise InvariantViolation(f"hop {i} must carry 3 non-negative RTTs or none")
        if self.hops[0].hop.ingress_if != 0 or self.hops[-1].hop.egress_if != 0:
            raise InvariantViolation("endpoint hops must have interface 0 on the outside")
        return self

    @property
    def hop_refs(self) -> tuple:
        return tuple(h.hop for h in self.hops)

    def to_dict(self) -> dict:
        return {"dst": str(self.dst), "fingerprint": self.fingerprint, "hops": [h.to_dict() for h in self.hops]}

    @classmethod
    def from_dict(cls, d: dict) -> "TracerouteResult":
        return cls(
            validate_isd_as(d["dst"]),
            d.get("fingerprint"),
            tuple(TracerouteHop.from_dict(h) for h in d["hops"]),
        ).validate()


# --- parsers -----------------------------------------------------------------

_SHOWPATHS_HEADER = re.compile(r"^Available paths to (\S+)$")
_ZERO_PATHS = re.compile(r"^0 paths$")
_HOP_GROUP = re.compile(r"^\d+ Hops:$")
_PATH_LINE = re.compile(
    r"^\[(?P<idx>\d+)\]\s+Hops:\s+\[(?P<hops>[^\[\]]*)\]\s+MTU:\s+(?P<mtu>\d+)"
    r"\s+NextHop:\s+(?P<nexthop>\S+)(?:\s+Expires:\s+(?P<expiry>\S+))?"
    r"\s+Status:\s+(?P<status>\w+)(?:\s+LocalIP:\s+\S+)?$"
)
_LINK = re.compile(r"^(\d+)>(\d+)$")


def _lines(text: str):
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line:
            yield no, line


def _isd_as_token(token: str, lineno: int) -> IsdAs:
    try:
        return validate_isd_as(token)
    except (MalformedIsdAs, IsdOutOfRange):
        raise ParseError("bad ISD-AS", lineno, token) from None


def _parse_hop_list(body: str, lineno: int) -> tuple:
    tokens = body.split()
    if not tokens or len(tokens) % 2 == 0:
        raise ParseError("hop list must alternate ISD-AS and links", lineno, tokens[-1] if tokens else body)
    ases = []
    links = []
    for i, tok in enumerate(tokens):
        if i % 2 == 0:
            ases.append(_isd_as_token(tok, lineno))
        else:
            m = _LINK.match(tok)
            if not m:
                raise ParseError("bad link token", lineno, tok)
            links.append((int(m.group(1)), int(m.group(2))))
    hops = []
    for i, ia in enumerate(ases):
        ingress = links[i - 1][1] if i > 0 else 0
        egress = links[i][0] if i < len(links) else 0
        hops.append(HopRef(ia, ingress, egress))
    return tuple(hops)


def parse_showpaths(text: str, dst: IsdAs) -> list:
    """Parse one ``scion showpaths`` listing into path records (listing order)."""
    lines = list(_lines(text))
    if not lines:
        raise EmptyOutput("showpaths produced no output")
    lineno, first = lines[0]
    m = _SHOWPATHS_HEADER.match(first)
    if not m:
        raise ParseError("missing 'Available paths to' header", lineno, first)
    if _isd_as_token(m.group(1), lineno) != dst:
        raise ParseError(f"listing is for {m.group(1)}, expected {dst}", lineno, m.group(1))
    body = lines[1:]
    if len(body) == 1 and _ZERO_PATHS.match(body[0][1]):
        return []
    paths = []
    for lineno, line in body:
        if _HOP_GROUP.match(line):
            continue
        pm = _PATH_LINE.match(line)
        if not pm:
            tokens = line.split()
            raise ParseError("malformed path line", lineno, tokens[-1] if tokens else line)
        if int(pm.group("idx")) != len(paths):
            raise ParseError("path indices not contiguous", lineno, pm.group("idx"))
        status = pm.group("status")
        if status not in PATH_STATUSES:
            raise ParseError("unknown status", lineno, status)
        hops = _parse_hop_list(pm.group("hops"), lineno)
        if hops[-1].isd_as != dst:
            raise ParseError(f"path ends at {hops[-1].isd_as}, expected {dst}", lineno, str(hops[-1].isd_as))
        paths.append(PathRecord(hops=hops, mtu=int(pm.group("mtu")), status=status, expiry=pm.group("expiry")))
    if not paths:
        raise EmptyOutput("header present but no paths listed and no '0 paths' declaration", lines[0][0])
    return paths


_NUM = r"(\d+(?:\.\d+)?)"
_PING_SUMMARY = re.compile(
    rf"^(\d+) (?:packets )?transmitted, (\d+) received, {_NUM}% packet loss(?:, time {_NUM}ms)?$"
)
_PING_RTT = re.compile(rf"^(?:rtt )?min/avg/max/mdev = {_NUM}/{_NUM}/{_NUM}/{_NUM} ms$")


def parse_ping(text: str, dst: IsdAs, fingerprint: str | None = None) -> PingResult:
    """Extract the summary statistics of one ``scion ping`` run.

    An all-lost run is data, not an error: RTT fields come back as None.
    """
    summary = rtt = None
    for lineno, line in _lines(text):
        if (m := _PING_SUMMARY.match(line)) is not None:
            if summary is not None:
                raise ParseError("duplicate summary line", lineno, line)
            summary = (lineno, m)
        elif (m := _PING_RTT.match(line)) is not None:
            if rtt is not None:
                raise ParseError("duplicate rtt line", lineno, line)
            rtt = (lineno, m)
    if summary is None:
        raise ParseError("ping summary line missing")
    lineno, m = summary
    sent, received, stated_loss = int(m.group(1)), int(m.group(2)), float(m.group(3))
    if sent < 1 or received > sent:
        raise ParseError("impossible packet counts", lineno, m.group(0))
    loss = round(100.0 * (sent - received) / sent, 4)
    if abs(stated_loss - loss) >= 1.0:
        raise ParseError(f"stated loss {stated_loss}% disagrees with counts", lineno, m.group(3))
    if received == 0:
        if rtt is not None:
            raise ParseError("rtt statistics for a run with no replies", rtt[0], rtt[1].group(0))
        return PingResult(dst, fingerprint, sent, 0, loss).validate()
    if rtt is None:
        raise ParseError("rtt statistics line missing", lineno)
    lo, avg, hi, mdev = (float(rtt[1].group(i)) for i in range(1, 5))
    if not lo <= avg <= hi:
        raise ParseError("rtt statistics out of order", rtt[0], rtt[1].group(0))
    return PingResult(dst, fingerprint, sent, received, loss, lo, avg, hi, mdev).validate()


_BW_SECTION = re.compile(r"^(S->C|C->S) results$")
_BW_ACHIEVED = re.compile(rf"^Achieved bandwidth:\s*(?:\d+ bps / )?{_NUM} Mbps$")
_BW_LOSS = re.compile(rf"^Loss rate:\s*{_NUM}\s*%$")
_UNREACHABLE = re.compile(r"connection refused|no route to host|dial .*failed|server unreachable", re.I)


def parse_bwtest(
    text: str,
    target_mbps: float,
    server: ServerDescriptor | None = None,
    fingerprint: str | None = None,
) -> BandwidthResult:
    """Parse ``scion-bwtestclient`` output (both directions).

    Reported loss is the worse of the two directions.
    """
    if _UNREACHABLE.search(text):
        raise ServerUnreachable(f"bandwidth server {server.address if server else ''} unreachable".strip())
    section = None
    seen: dict = {}
    for lineno, line in _lines(text):
        if (m := _BW_SECTION.match(line)) is not None:
            section = m.group(1)
            if section in seen:
                raise ParseError("duplicate result section", lineno, line)
            seen[section] = {}
        elif (m := _BW_ACHIEVED.match(line)) is not None:
            if section is None or "achieved" in seen[section]:
                raise ParseError("achieved bandwidth outside a result section", lineno, line)
            seen[section]["achieved"] = float(m.group(1))
        elif (m := _BW_LOSS.match(line)) is not None:
            if section is None or "loss" in seen[section]:
                raise ParseError("loss rate outside a result section", lineno, line)
            seen[section]["loss"] = float(m.group(1))
        elif line.startswith(("Achieved", "Loss rate")):
            raise ParseError("malformed result line", lineno, line)
    for direction in ("S->C", "C->S"):
        if direction not in seen or "achieved" not in seen[direction]:
            raise ParseError(f"missing {direction} achieved bandwidth")
    loss = max(seen[d].get("loss", 0.0) for d in ("S->C", "C->S"))
    if loss > 100:
        raise ParseError(f"loss {loss}% above 100")
    return BandwidthResult(
        server=server,
        fingerprint=fingerprint,
        target_mbps=float(target_mbps),
        achieved_cs_mbps=seen["C->S"]["achieved"],
        achieved_sc_mbps=seen["S->C"]["achieved"],
        loss_pct=loss,
    ).validate()


_TR_HOP = re.compile(r"^(\d+)\s+(\S+)\s+IfID=(\d+),(\d+)\s+(.+)$")
_TR_RTT = re.compile(rf"^{_NUM}ms$")


def parse_traceroute(text: str, dst: IsdAs, fingerprint: str | None = None) -> TracerouteResult:
    hops = []
    for lineno, line in _lines(text):
        if not line[0].isdigit():
            continue
        m = _TR_HOP.match(line)
        if not m:
            raise ParseError("malformed hop line", lineno, line)
        index = int(m.group(1))
        if index != len(hops):
            raise ParseError("hop numbering not contiguous", lineno, m.group(1))
        hop = HopRef(_isd_as_token(m.group(2), lineno), int(m.group(3)), int(m.group(4)))
        tail = m.group(5).split()
        if tail == ["*", "*", "*"]:
            rtts = ()
        else:
            if len(tail) != 3:
                raise ParseError("expected three RTT samples or '* * *'", lineno, m.group(5))
            vals = []
            for tok in tail:
                rm = _TR_RTT.match(tok)
                if not rm:
                    raise ParseError("bad RTT sample", lineno, tok)
                vals.append(float(rm.group(1)))
            rtts = tuple(vals)
        hops.append(TracerouteHop(index, hop, rtts))
    if not hops:
        raise ParseError("traceroute listed no hops")
    if hops[-1].hop.isd_as != dst:
        raise ParseError(f"traceroute ends at {hops[-1].hop.isd_as}, expected {dst}")
    try:
        return TracerouteResult(dst, fingerprint, tuple(hops)).validate()
    except InvariantViolation as exc:
        raise ParseError(str(exc)) from None


# --- renderers (fixture grammar writers) ---------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.3f}"


def render_showpaths(dst: IsdAs, paths, next_hop: str = "10.0.0.1:30041") -> str:
    out = [f"Available paths to {dst}"]
    if not paths:
        out.append("0 paths")
        return "\n".join(out) + "\n"
    group = None
    for i, p in enumerate(paths):
        if len(p.hops) != group:
            group = len(p.hops)
            out.append(f"{group} Hops:")
        parts = [str(p.hops[0].isd_as)]
        for a, b in zip(p.hops, p.hops[1:]):
            parts.append(f"{a.egress_if}>{b.ingress_if}")
            parts.append(str(b.isd_as))
        expiry = f" Expires: {p.expiry}" if p.expiry else ""
        out.append(
            f"[{i}] Hops: [{' '.join(parts)}] MTU: {p.mtu} NextHop: {next_hop}{expiry} "
            f"Status: {p.status} LocalIP: 127.0.0.1"
        )
    return "\n".join(out) + "\n"


def render_ping(result: PingResult, samples=(), ip: str = "10.0.0.2") -> str:
    out = [f"PING {result.dst},[{ip}] pld=0B scion_pkt=112B"]
    for seq, s in enumerate(samples):
        out.append(f"120 bytes from {result.dst},{ip}: scmp_seq={seq} time={_fmt(s)}ms")
    out.append("")
    out.append(f"--- {result.dst},[{ip}] statistics ---")
    loss = f"{result.loss_pct:g}"
    out.append(f"{result.sent} packets transmitted, {result.received} received, {loss}% packet loss, time {result.sent * 1000}ms")
    if result.received:
        out.append(
            f"rtt min/avg/max/mdev = {_fmt(result.rtt_min_ms)}/{_fmt(result.rtt_avg_ms)}/"
            f"{_fmt(result.rtt_max_ms)}/{_fmt(result.jitter_ms)} ms"
        )
    return "\n".join(out) + "\n"


def render_bwtest(result: BandwidthResult, duration_s: int = 3) -> str:
    t = result.target_mbps
    out = [
        "Test parameters:",
        f" test duration: {duration_s}s",
        " packet size: 1000 bytes",
        f" target bandwidth: {t:g} Mbps",
    ]
    for label, achieved in (("S->C", result.achieved_sc_mbps), ("C->S", result.achieved_cs_mbps)):
        out += [
            f"{label} results",
            f"Attempted bandwidth: {int(round(t * 1e6))} bps / {t:.2f} Mbps",
            f"Achieved bandwidth: {int(round(achieved * 1e6))} bps / {achieved:.2f} Mbps",
            f"Loss rate: {result.loss_pct:.1f}%",
        ]
    return "\n".join(out) + "\n"


def render_traceroute(result: TracerouteResult) -> str:
    out = ["Using path:", f"  Hops: {len(result.hops)}", ""]
    for h in result.hops:
        rtts = " ".join(f"{_fmt(r)}ms" for r in h.rtts_ms) if h.rtts_ms else "* * *"
        out.append(f"{h.index} {h.hop.isd_as} IfID={h.hop.ingress_if},{h.hop.egress_if} {rtts}")
    return "\n".join(out) + "\n"


# --- backends ------------------------------------------------------------------

class ProbeBackend(Protocol):
    local_as: IsdAs

    def showpaths(self, dst: IsdAs, timeout: float = DEFAULT_TIMEOUT_S) -> list: ...

    def ping(self, dst: IsdAs, count: int, path: PathRecord | None = None,
             timeout: float = DEFAULT_TIMEOUT_S) -> PingResult: ...

    def bwtest(self, server: ServerDescriptor, target_mbps: float, path: PathRecord | None = None,
               timeout: float = DEFAULT_TIMEOUT_S) -> BandwidthResult: ...

    def traceroute(self, dst: IsdAs, path: PathRecord | None = None,
                   timeout: float = DEFAULT_TIMEOUT_S) -> TracerouteResult: ...


class SubprocessAdapter:
    """Runs the real SCION command line tools and parses their output.

    ``PATHML_SCION_BIN`` (or ``bin_dir``) names the directory holding
    ``scion`` and ``scion-bwtestclient``; otherwise they are looked up on PATH.
    """

    def __init__(self, local_as: IsdAs, bin_dir: str | None = None):
        self.local_as = local_as
        self.bin_dir = bin_dir or os.environ.get("PATHML_SCION_BIN")

    def _tool(self, name: str) -> str:
        if self.bin_dir:
            return os.path.join(self.bin_dir, name)
        return shutil.which(name) or name

    def _run(self, argv: list, timeout: float) -> str:
        try:
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout)
        except subprocess.TimeoutExpired as exc:
            tail = (exc.stderr or b"")
            tail = tail.decode(errors="replace") if isinstance(tail, bytes) else tail
            raise ProbeTimeout(f"{os.path.basename(argv[0])} timed out after {timeout}s", _tail(tail)) from None
        except OSError as exc:
            raise BackendError(f"cannot execute {argv[0]}: {exc.strerror}", "ToolMissing") from None
        if proc.returncode != 0:
            if _UNREACHABLE.search(proc.stdout + proc.stderr):
                raise ServerUnreachable("bandwidth server unreachable", _tail(proc.stderr))
            raise BackendError(
                f"{os.path.basename(argv[0])} exited with status {proc.returncode}: {_tail(proc.stderr)}",
                "ToolExit",
                _tail(proc.stderr),
            )
        return proc.stdout

    def command(self, action: str, **kw) -> list:
        """Command line for an action; exposed so the argv contract is testable."""
        path = kw.get("path")
        seq = ["--sequence", path.sequence()] if path is not None else []
        if action == "showpaths":
            return [self._tool("scion"), "showpaths", str(kw["dst"]), "--format", "human"]
        if action == "ping":
            return [self._tool("scion"), "ping", str(kw["dst"]), "-c", str(kw["count"]), *seq]
        if action == "bwtest":
            server = kw["server"]
            return [self._tool("scion-bwtestclient"), "-s", server.address, "-cs", f"{kw['target_mbps']:g}Mbps", *seq]
        if action == "traceroute":
            return [self._tool("scion"), "traceroute", str(kw["dst"]), *seq]
        raise ValueError(f"unknown action {action!r}")

    def showpaths(self, dst, timeout=DEFAULT_TIMEOUT_S):
        return parse_showpaths(self._run(self.command("showpaths", dst=dst), timeout), dst)

    def ping(self, dst, count, path=None, timeout=DEFAULT_TIMEOUT_S):
        text = self._run(self.command("ping", dst=dst, count=count, path=path), timeout)
        return parse_ping(text, dst, path.fingerprint if path else None)

    def bwtest(self, server, target_mbps, path=None, timeout=DEFAULT_TIMEOUT_S):
        text = self._run(self.command("bwtest", server=server, target_mbps=target_mbps, path=path), timeout)
        return parse_bwtest(text, target_mbps, server, path.fingerprint if path else None)

    def traceroute(self, dst, path=None, timeout=DEFAULT_TIMEOUT_S):
        text = self._run(self.command("traceroute", dst=dst, path=path), timeout)
        return parse_traceroute(text, dst, path.fingerprint if path else None)


def _tail(text: str, lines: int = 5) -> str:
    return "\n".join((text or "").strip().splitlines()[-lines:])


@dataclass(frozen=True)
class ProbeRequest:
    action: str
    dst: IsdAs | None = None
    path: PathRecord | None = None
    server: ServerDescriptor | None = None
    target_mbps: float | None = None
    count: int = 10


def run_probe(backend, request: ProbeRequest, timeout: float = DEFAULT_TIMEOUT_S, retries: int = 1):
    """Dispatch one probe; a Timeout is retried ``retries`` times, nothing else is."""
    attempt = 0
    while True:
        try:
            return _dispatch(backend, request, timeout)
        except ProbeTimeout:
            if attempt >= retries:
                raise
            attempt += 1


def _dispatch(backend, r: ProbeRequest, timeout: float):
    if r.action == "showpaths":
        return backend.showpaths(r.dst, timeout=timeout)
    if r.action == "ping":
        return backend.ping(r.dst, r.count, path=r.path, timeout=timeout)
    if r.action == "bwtest":
        return backend.bwtest(r.server, r.target_mbps, path=r.path, timeout=timeout)
    if r.action == "traceroute":
        return backend.traceroute(r.dst, path=r.path, timeout=timeout)
    raise ValueError(f"unknown probe action {r.action!r}")
