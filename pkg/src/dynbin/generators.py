"""Reproducible instance families: the adaptive equal-size construction
with deferred durations, the randomized equal-size lower-bound families,
and generic uniform workloads for fuzzing.

All randomness comes from Python's seeded Mersenne Twister; the
identifier below is recorded in every generated instance header so a
stated seed pins the draw.
"""

from __future__ import annotations

import math
import random

from .core import Instance, Item

RNG_ID = "python-random-mt19937"


class LongestPerBinResolver:
    """Adaptive adversary for the deferred-duration construction: after
    observing the time-0 packing, the lowest-id deferred item in each
    nonempty bin becomes long-lived (duration mu) until long_count such
    items are marked; everything else gets duration 1."""

    def __init__(self, mu: float, long_count: int):
        self.mu = float(mu)
        self.long_count = int(long_count)

    def resolve(self, snapshot) -> dict[int, float]:
        assignment: dict[int, float] = {}
        marked = 0
        for _bin_id, deferred_ids in snapshot:
            if deferred_ids and marked < self.long_count:
                assignment[deferred_ids[0]] = self.mu
                marked += 1
            for item_id in deferred_ids:
                assignment.setdefault(item_id, 1.0)
        return assignment

    def header(self) -> dict:
        return {"name": "longest-per-bin", "mu": self.mu, "long_count": self.long_count}


def resolver_from_header(header: dict) -> LongestPerBinResolver:
    if header.get("name") != "longest-per-bin":
        raise ValueError(f"unknown adversary {header.get('name')!r}")
    return LongestPerBinResolver(header["mu"], header["long_count"])


def gen_fig2(k: int, mu: float) -> tuple[Instance, LongestPerBinResolver]:
    """k^2 items of size 1/k arriving at time 0 with deferred durations,
    plus the adaptive resolver marking one long item per algorithm bin."""
    if k < 2:
        raise ValueError("k must be >= 2")
    if mu <= 1:
        raise ValueError("mu must exceed 1")
    resolver = LongestPerBinResolver(mu, k)
    items = tuple(Item(i, 0.0, 1, None) for i in range(k * k))
    instance = Instance(items=items, scale=k, adversary=resolver.header())
    return instance, resolver


def gen_tradeoff_lb(inv_s: int, k: int, mu: float, seed: int) -> Instance:
    """k/s items of size s = 1/inv_s, all at time 0; each duration is
    independently mu with probability s, else 1."""
    if inv_s < 2:
        raise ValueError("inv_s must be >= 2")
    if k < inv_s or k % inv_s != 0:
        raise ValueError("k must be a positive multiple of inv_s")
    rng = random.Random(seed)
    n = k * inv_s
    items = tuple(
        Item(i, 0.0, 1, mu if rng.random() < 1.0 / inv_s else 1.0) for i in range(n)
    )
    return Instance(items=items, scale=inv_s, seed=seed, rng=RNG_ID)


def gen_basic_lb(k: int, mu: float, seed: int) -> Instance:
    """k^2 items of size 1/k, duration mu with probability 1/k else 1;
    the zero-migration hardness family."""
    if k < 2:
        raise ValueError("k must be >= 2")
    return gen_tradeoff_lb(inv_s=k, k=k, mu=mu, seed=seed)


def gen_delay_lb(c: int, seed: int) -> Instance:
    """4C items of size 1/(2*sqrt(C)), duration sqrt(C) with probability
    1/(2*sqrt(C)) else 1. C must be a perfect square >= 4 so every size
    and duration is exactly representable."""
    if c < 4:
        raise ValueError("C must be >= 4")
    root = math.isqrt(c)
    if root * root != c:
        raise ValueError("C must be a perfect square")
    rng = random.Random(seed)
    items = tuple(
        Item(i, 0.0, 1, float(root) if rng.random() < 1.0 / (2 * root) else 1.0)
        for i in range(4 * c)
    )
    return Instance(items=items, scale=2 * root, seed=seed, rng=RNG_ID)


def gen_uniform(
    n: int,
    size_grid: int,
    duration_range: tuple[float, float],
    arrival_window: float,
    seed: int,
) -> Instance:
    """n items with uniform numerators on a power-of-two size grid,
    uniform durations, and uniform arrivals in [0, arrival_window)."""
    if size_grid < 1 or size_grid & (size_grid - 1):
        raise ValueError("size_grid must be a power of two")
    dmin, dmax = duration_range
    if dmin <= 0 or dmax < dmin:
        raise ValueError("bad duration range")
    if arrival_window < 0:
        raise ValueError("arrival window must be nonnegative")
    rng = random.Random(seed)
    items = []
    for i in range(n):
        items.append(
            Item(
                id=i,
                arrival=rng.uniform(0.0, arrival_window) if arrival_window else 0.0,
                size_num=rng.randint(1, size_grid),
                duration=rng.uniform(dmin, dmax),
            )
        )
    return Instance(items=tuple(items), scale=size_grid, seed=seed, rng=RNG_ID)
