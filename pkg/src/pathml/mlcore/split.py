from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidFraction


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    mode: str = "temporal"

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise InvalidFraction(f"train_fraction must lie strictly between 0 and 1, got {self.train_fraction}")
        if self.mode != "temporal":
            raise InvalidFraction(f"unsupported split mode {self.mode!r}")


def split_point(n: int, spec: SplitSpec) -> int:
    return int(np.floor(n * spec.train_fraction))


def temporal_split(dataset, spec: SplitSpec = SplitSpec()):
    """First ``train_fraction`` of the (time-ordered) samples train, the rest test."""
    if isinstance(spec, (int, float)):
        spec = SplitSpec(float(spec))
    k = split_point(len(dataset), spec)
    idx = np.arange(len(dataset))
    return dataset.subset(idx[:k]), dataset.subset(idx[k:])
