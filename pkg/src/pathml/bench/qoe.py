"""QoE-aware path recommendation: min-max scoring and profile thresholds."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidSpec, NoCandidates


@dataclass(frozen=True)
class QoeProfile:
    name: str
    max_rtt_ms: float
    max_loss_pct: float
    min_bw_mbps: float

    def __post_init__(self):
        if min(self.max_rtt_ms, self.max_loss_pct, self.min_bw_mbps) <= 0:
            raise InvalidSpec(f"profile {self.name!r}: thresholds must be positive")

    def satisfied_by(self, c: "Candidate") -> bool:
        return c.rtt_ms <= self.max_rtt_ms and c.loss_pct <= self.max_loss_pct and c.bw_mbps >= self.min_bw_mbps


PROFILES = (
    QoeProfile("Video conference", 150, 2, 1),
    QoeProfile("Online gaming", 50, 1, 0.5),
    QoeProfile("File transfer", 500, 5, 10),
    QoeProfile("Browsing", 300, 3, 0.1),
    QoeProfile("Streaming", 200, 1, 5),
)


@dataclass(frozen=True)
class QoeWeights:
    w_rtt: float = 0.4
    w_loss: float = 0.2
    w_bw: float = 0.4

    def __post_init__(self):
        ws = (self.w_rtt, self.w_loss, self.w_bw)
        if min(ws) < 0 or sum(ws) <= 0:
            raise InvalidSpec("QoE weights must be non-negative and not all zero")
        total = sum(ws)
        object.__setattr__(self, "w_rtt", self.w_rtt / total)
        object.__setattr__(self, "w_loss", self.w_loss / total)
        object.__setattr__(self, "w_bw", self.w_bw / total)


@dataclass(frozen=True)
class Candidate:
    rtt_ms: float
    loss_pct: float
    bw_mbps: float
    ident: str = ""


def _minmax(v: np.ndarray) -> np.ndarray:
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.full(v.shape, 0.5)
    return (v - lo) / (hi - lo)


def qoe_scores(candidates, weights: QoeWeights = QoeWeights()) -> np.ndarray:
    if not candidates:
        raise NoCandidates("no candidate paths to score")
    rtt = _minmax(np.array([c.rtt_ms for c in candidates], dtype=float))
    loss = _minmax(np.array([c.loss_pct for c in candidates], dtype=float))
    bw = _minmax(np.array([c.bw_mbps for c in candidates], dtype=float))
    return weights.w_rtt * (1 - rtt) + weights.w_loss * (1 - loss) + weights.w_bw * bw


def qoe_score(candidate: Candidate, candidates, weights: QoeWeights = QoeWeights()) -> float:
    """Score of ``candidate`` normalised against the candidate set it belongs to."""
    pool = list(candidates)
    if candidate not in pool:
        pool.append(candidate)
    return float(qoe_scores(pool, weights)[pool.index(candidate)])


def recommend(candidates, profile: QoeProfile | None = None, weights: QoeWeights = QoeWeights()) -> list:
    """Candidates best-first as (candidate, score); equal scores keep input order.

    The profile does not enter the score; it only judges the top choice.
    """
    cands = list(candidates)
    scores = qoe_scores(cands, weights)
    order = sorted(range(len(cands)), key=lambda i: (-scores[i], i))
    return [(cands[i], float(scores[i])) for i in order]


def satisfied(top: Candidate, profile: QoeProfile) -> bool:
    return profile.satisfied_by(top)
