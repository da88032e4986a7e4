"""Independent reference implementations used to check the package.

Nothing here imports the code under test beyond plain data types; each
oracle is the most direct (often brute-force) statement of its definition.
"""
import hashlib
import random


def fingerprint(hops) -> str:
    text = "|".join(f"{h.isd_as}#{h.ingress_if},{h.egress_if}" for h in hops)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def auc_pairs(labels, scores) -> float:
    pos = [s for y, s in zip(labels, scores) if y == 1]
    neg = [s for y, s in zip(labels, scores) if y == 0]
    wins = 0.0
    for p in pos:
        for n in neg:
            wins += 1.0 if p > n else 0.5 if p == n else 0.0
    return wins / (len(pos) * len(neg))


def windows(cycles, n, horizon=1):
    """All (feature cycles, target cycle) pairs over a gapped series."""
    have = set(cycles)
    out = []
    for c in sorted(have):
        feats = list(range(c, c + n))
        target = c + n - 1 + horizon
        if all(f in have for f in feats) and target in have and all(
            x in have for x in range(c, target + 1)
        ):
            out.append((tuple(feats), target))
    return out


def meets(rtt, loss, bw, max_rtt, max_loss, min_bw) -> bool:
    return rtt <= max_rtt and loss <= max_loss and bw >= min_bw


def qoe_top(cands, weights):
    """Index of the best-scoring candidate by direct formula; ties to the earliest."""
    w = [x / sum(weights) for x in weights]

    def norm(vals):
        lo, hi = min(vals), max(vals)
        return [0.5 if hi == lo else (v - lo) / (hi - lo) for v in vals]

    r = norm([c[0] for c in cands])
    l = norm([c[1] for c in cands])
    b = norm([c[2] for c in cands])
    scores = [w[0] * (1 - r[i]) + w[1] * (1 - l[i]) + w[2] * b[i] for i in range(len(cands))]
    best = max(scores)
    return scores.index(best), scores


def argmax_first_difference(vector) -> int:
    real = [v for v in vector if v != -1]
    diffs = [real[0]] + [b - a for a, b in zip(real, real[1:])]
    return max(range(len(diffs)), key=lambda j: (diffs[j], -j))


def check_path(p):
    assert p.hops, "no hops"
    assert p.fingerprint == fingerprint(p.hops)
    assert p.status in ("alive", "timeout", "unknown")
    assert p.hops[0].ingress_if == 0 and p.hops[-1].egress_if == 0
    assert p.mtu > 0


def check_ping(r):
    assert 1 <= r.sent and 0 <= r.received <= r.sent
    assert abs(r.loss_pct - 100.0 * (r.sent - r.received) / r.sent) < 1e-6
    stats = (r.rtt_min_ms, r.rtt_avg_ms, r.rtt_max_ms, r.jitter_ms)
    if r.received == 0:
        assert all(v is None for v in stats)
    else:
        assert all(v is not None and v >= 0 for v in stats)
        assert r.rtt_min_ms <= r.rtt_avg_ms <= r.rtt_max_ms


def check_bw(r):
    assert r.target_mbps > 0
    for v in (r.achieved_cs_mbps, r.achieved_sc_mbps):
        assert 0 <= v <= 1.05 * r.target_mbps + 1e-9
    assert 0 <= r.loss_pct <= 100


def check_traceroute(r):
    assert r.hops
    for i, h in enumerate(r.hops):
        assert h.index == i
        assert len(h.rtts_ms) in (0, 3) and all(x >= 0 for x in h.rtts_ms)
    assert r.hops[0].hop.ingress_if == 0 and r.hops[-1].hop.egress_if == 0


CHECKS = {"showpaths": lambda v: [check_path(p) for p in v], "ping": check_ping, "bwtest": check_bw,
          "traceroute": check_traceroute}


# --- fixture corruption --------------------------------------------------------

def _lines_matching(text, pred):
    lines = text.splitlines()
    return lines, [i for i, l in enumerate(lines) if pred(l.strip())]


def corrupt(kind: str, text: str, rng: random.Random) -> str:
    """A mutation that provably breaks the grammar or a type invariant."""
    lines = text.splitlines()
    if kind == "showpaths":
        _, idx = _lines_matching(text, lambda l: l.startswith("["))
        op = rng.choice(["truncate", "header", "index", "drop_all", "bad_link", "bad_mtu"] if idx else ["header", "empty"])
        if op == "empty":
            return ""
        if op == "header":
            lines[0] = "Available paths to 19ffaa:0:1303"
        elif op == "drop_all":
            lines = lines[:1]
        else:
            i = rng.choice(idx)
            line = lines[i]
            if op == "truncate":
                cut = line.index(">", line.index("Hops: [")) + 1
                lines[i] = line[:cut]
            elif op == "index":
                lines[i] = line.replace(line[: line.index("]") + 1], "[99]", 1)
            elif op == "bad_link":
                lines[i] = line.replace(">", "-", 1)
            elif op == "bad_mtu":
                lines[i] = line.replace("MTU: ", "MTU: x", 1)
    elif kind == "ping":
        _, s = _lines_matching(text, lambda l: "transmitted" in l)
        _, r = _lines_matching(text, lambda l: l.startswith("rtt"))
        ops = ["drop_summary", "too_many", "bad_loss"] + (["disorder", "drop_rtt"] if r else ["spurious_rtt"])
        op = rng.choice(ops)
        i = s[0]
        if op == "drop_summary":
            del lines[i]
        elif op == "too_many":
            sent = int(lines[i].split()[0])
            lines[i] = f"{sent} packets transmitted, {sent + 1} received, 0% packet loss"
        elif op == "bad_loss":
            parts = lines[i].split(", ")
            sent, rec = int(parts[0].split()[0]), int(parts[1].split()[0])
            true = 100.0 * (sent - rec) / sent
            lines[i] = f"{sent} packets transmitted, {rec} received, {(true + 50) % 100 + 0.0:g}% packet loss"
        elif op == "disorder":
            lines[r[0]] = "rtt min/avg/max/mdev = 9.000/5.000/1.000/0.100 ms"
        elif op == "drop_rtt":
            del lines[r[0]]
        elif op == "spurious_rtt":
            lines.insert(i + 1, "rtt min/avg/max/mdev = 1.000/2.000/3.000/0.100 ms")
    elif kind == "bwtest":
        _, ach = _lines_matching(text, lambda l: l.startswith("Achieved"))
        _, sec = _lines_matching(text, lambda l: l.endswith("results"))
        op = rng.choice(["drop_achieved", "overshoot", "dup_section", "garble", "drop_section"])
        if op == "drop_achieved":
            del lines[rng.choice(ach)]
        elif op == "overshoot":
            lines[rng.choice(ach)] = "Achieved bandwidth: 9999.00 Mbps"
        elif op == "dup_section":
            lines[sec[1]] = lines[sec[0]]
        elif op == "garble":
            lines[rng.choice(ach)] = "Achieved bandwidth: fast"
        elif op == "drop_section":
            j = rng.choice(sec)
            lines = lines[:j] + lines[j + 4:]
    elif kind == "traceroute":
        _, hops = _lines_matching(text, lambda l: l[:1].isdigit())
        op = rng.choice(["renumber", "bad_rtt", "two_rtts", "bad_as", "drop_last", "no_hops"])
        i = rng.choice(hops)
        parts = lines[i].split()
        if op == "renumber":
            parts[0] = str(int(parts[0]) + 5)
        elif op == "bad_rtt":
            parts[-1] = "abcms"
        elif op == "two_rtts":
            parts = parts[:3] + ["1.000ms", "2.000ms"]
        elif op == "bad_as":
            parts[1] = "19ffaa"
        elif op == "drop_last":
            lines = lines[: hops[-1]]
            return "\n".join(lines) + "\n"
        elif op == "no_hops":
            return "\n".join(l for k, l in enumerate(lines) if k not in hops) + "\n"
        lines[i] = " ".join(parts)
    return "\n".join(lines) + "\n"
