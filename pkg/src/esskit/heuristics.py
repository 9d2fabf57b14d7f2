"""Offline choice of which slots must meet the tracking band when rho2 < 1.

All selectors return ``ceil(rho2 * T)`` tracked slots as sorted 1-based
indices.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

HEURISTICS = ("rand", "mincap", "fixint")


def tracked_count(T: int, rho2: float) -> int:
    if not 0 < rho2 <= 1:
        raise ValueError("rho2 must be in (0, 1]")
    # guard against 0.7 * 10 = 7.000000000000001
    return min(T, math.ceil(rho2 * T - 1e-9))


@dataclass(frozen=True)
class TrackedSet:
    slots: tuple[int, ...]
    rho2: float
    total_slots: int

    def __post_init__(self):
        s = tuple(int(t) for t in self.slots)
        object.__setattr__(self, "slots", s)
        if list(s) != sorted(set(s)):
            raise ValueError("tracked slots must be strictly ascending")
        if s and (s[0] < 1 or s[-1] > self.total_slots):
            raise ValueError("tracked slot out of range")
        if len(s) != tracked_count(self.total_slots, self.rho2):
            raise ValueError("tracked set size must equal ceil(rho2 * T)")

    def __len__(self) -> int:
        return len(self.slots)

    def __iter__(self):
        return iter(self.slots)

    @property
    def untracked(self) -> list[int]:
        keep = set(self.slots)
        return [t for t in range(1, self.total_slots + 1) if t not in keep]

    def to_json(self) -> str:
        return json.dumps(list(self.slots))


def rand_select(T: int, rho2: float, seed: int) -> TrackedSet:
    """Uniform random subset.

    The subset is a prefix of one seeded permutation, so for a fixed seed
    the sets grow monotonically with ``rho2``.
    """
    k = tracked_count(T, rho2)
    order = np.random.default_rng(seed).permutation(T)
    return TrackedSet(tuple(sorted(int(i) + 1 for i in order[:k])), rho2, T)


def min_cap_select(signal: Sequence[float], rho2: float) -> TrackedSet:
    mags = np.abs(np.asarray(signal, dtype=float))
    T = len(mags)
    k = tracked_count(T, rho2)
    order = np.lexsort((np.arange(T), mags))  # by magnitude, then index
    return TrackedSet(tuple(sorted(int(i) + 1 for i in order[:k])), rho2, T)


def violation_slots(T: int, rho2: float) -> list[int]:
    """Evenly spaced untracked slots at ``ceil(k T / V)`` for ``k = 1..V``."""
    V = T - tracked_count(T, rho2)
    return [-((-k * T) // V) for k in range(1, V + 1)]


def fix_int_select(T: int, rho2: float) -> TrackedSet:
    skip = set(violation_slots(T, rho2))
    return TrackedSet(tuple(t for t in range(1, T + 1) if t not in skip), rho2, T)


def select(name: str, signal: Sequence[float], rho2: float, seed: int = 0) -> TrackedSet:
    T = len(signal)
    if name == "rand":
        return rand_select(T, rho2, seed)
    if name == "mincap":
        return min_cap_select(signal, rho2)
    if name == "fixint":
        return fix_int_select(T, rho2)
    raise ValueError(f"unknown heuristic {name!r}; expected one of {HEURISTICS}")
