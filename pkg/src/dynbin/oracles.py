"""Offline optimum computations: exact per-snapshot bin packing via
branch-and-bound, the time-integrated optimum, and closed-form expected
upper bounds for the randomized lower-bound instances."""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass, field

from .core import Instance, span, vol

DEFAULT_MAX_ITEMS = 24
DEFAULT_TIME_BUDGET = 2.0


class SnapshotTooLarge(ValueError):
    pass


class TimeBudgetExceeded(RuntimeError):
    pass


def ffd_snapshot(sizes, scale: int) -> int:
    """First-Fit-Decreasing bin count; an upper bound on the optimum."""
    bins: list[int] = []
    for s in sorted(sizes, reverse=True):
        for i, load in enumerate(bins):
            if load + s <= scale:
                bins[i] = load + s
                break
        else:
            bins.append(s)
    return len(bins)


_opt_cache: dict[tuple[tuple[int, ...], int], int] = {}


def opt_snapshot(
    sizes,
    scale: int,
    max_items: int = DEFAULT_MAX_ITEMS,
    time_budget: float = DEFAULT_TIME_BUDGET,
) -> int:
    """Exact minimum number of unit-capacity bins for a static multiset.

    FFD seeds the upper bound; when it meets the ceil(total/scale) lower
    bound the answer is immediate regardless of snapshot size. Otherwise
    a branch-and-bound over descending sizes (duplicate-load and
    symmetric-bin pruning) runs within the item and time limits.
    """
    sizes = sorted(sizes, reverse=True)
    if not sizes:
        return 0
    if any(s <= 0 or s > scale for s in sizes):
        raise ValueError("snapshot sizes must lie in (0, scale]")
    key = (tuple(sizes), scale)
    cached = _opt_cache.get(key)
    if cached is not None:
        return cached

    ub = ffd_snapshot(sizes, scale)
    lb = -(-sum(sizes) // scale)  # ceil
    if lb == ub:
        _opt_cache[key] = ub
        return ub
    if len(sizes) > max_items:
        raise SnapshotTooLarge(
            f"snapshot too large for exact oracle ({len(sizes)} > {max_items})"
        )

    deadline = _time.perf_counter() + time_budget
    suffix = [0] * (len(sizes) + 1)
    for i in range(len(sizes) - 1, -1, -1):
        suffix[i] = suffix[i + 1] + sizes[i]

    best = ub
    bins: list[int] = []

    def descend(i: int) -> None:
        nonlocal best
        if i == len(sizes):
            best = min(best, len(bins))
            return
        if _time.perf_counter() > deadline:
            raise TimeBudgetExceeded("snapshot solve exceeded its time budget")
        free = len(bins) * scale - (suffix[0] - suffix[i])
        bound = len(bins) + max(0, -(-(suffix[i] - free) // scale))
        if bound >= best:
            return
        s = sizes[i]
        seen: set[int] = set()
        for j, load in enumerate(bins):
            if load + s <= scale and load not in seen:
                seen.add(load)
                bins[j] = load + s
                descend(i + 1)
                bins[j] = load
        if len(bins) + 1 < best:
            bins.append(s)
            descend(i + 1)
            bins.pop()

    descend(0)
    _opt_cache[key] = best
    return best


@dataclass
class OptInterval:
    start: float
    end: float
    exact: bool
    opt: int  # exact value, or the L1 lower bound when inexact
    lower: int
    upper: int  # FFD bin count


@dataclass
class OptReport:
    opt_total: float
    all_exact: bool
    lower_bound: float  # max(vol, span)
    upper_bound: float  # integral of the FFD step function
    intervals: list[OptInterval] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "opt_total": self.opt_total,
            "all_exact": self.all_exact,
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
            "intervals": [
                [iv.start, iv.end, iv.exact, iv.opt, iv.lower, iv.upper]
                for iv in self.intervals
            ],
        }


def live_sizes_at(instance: Instance, t: float) -> list[int]:
    """Size numerators of items whose half-open lifetime contains t."""
    return [
        it.size_num
        for it in instance.items
        if it.arrival <= t < it.arrival + it.duration
    ]


def opt_total(
    instance: Instance,
    max_items: int = DEFAULT_MAX_ITEMS,
    time_budget: float = DEFAULT_TIME_BUDGET,
) -> OptReport:
    """Integrate the per-time packing optimum over event intervals.

    The optimum may repack arbitrarily at any moment, so it is piecewise
    constant between arrival/departure events. Intervals whose snapshot
    is too large fall back to bounds and are flagged inexact.
    """
    boundaries = sorted(
        {it.arrival for it in instance.items}
        | {it.arrival + it.duration for it in instance.items}
    )
    intervals: list[OptInterval] = []
    total = 0.0
    upper_total = 0.0
    all_exact = True
    for start, end in zip(boundaries, boundaries[1:]):
        sizes = live_sizes_at(instance, start)
        ffd = ffd_snapshot(sizes, instance.scale)
        l1 = -(-sum(sizes) // instance.scale)
        try:
            opt = opt_snapshot(sizes, instance.scale, max_items, time_budget)
            exact = True
        except (SnapshotTooLarge, TimeBudgetExceeded):
            opt = l1
            exact = False
            all_exact = False
        intervals.append(OptInterval(start, end, exact, opt, l1, ffd))
        total += opt * (end - start)
        upper_total += ffd * (end - start)
    return OptReport(
        opt_total=total,
        all_exact=all_exact,
        lower_bound=max(vol(instance), span(instance)) if instance.items else 0.0,
        upper_bound=upper_total,
        intervals=intervals,
    )


def opt_expected_ub_tradeoff(k: float, s: float, mu: float) -> float:
    """Closed-form expected cost of the witness packing for the random
    equal-size instances: mu*(s*k + 1) + k + 1."""
    return mu * (s * k + 1) + k + 1
