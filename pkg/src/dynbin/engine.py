"""Deterministic event-driven simulator for dynamic bin packing policies.

The engine owns all packing state. Policies observe bins and item sizes
and decide placements/migrations through the engine API; they never see
durations (non-clairvoyance) -- the only duration information a policy
receives is the departure event itself.

Event order at equal time: departures, then migration checkpoints, then
arrivals, then adversary resolution; ties broken by item id.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Iterable, Iterator

from .core import Instance, UnresolvedDurationError, validate

BAD = "Bad"
GOOD = "Good"
JUNK = "Junk"
DEDICATED = "Dedicated"


class SimulationError(Exception):
    pass


class CapacityViolation(SimulationError):
    pass


class EventKind(IntEnum):
    DEPARTURE = 0
    CHECKPOINT = 1
    ARRIVAL = 2
    ADVERSARY_RESOLVE = 3


@dataclass
class Bin:
    id: int
    label: str
    group: str
    load: int = 0
    items: set[int] = field(default_factory=set)
    persistent: bool = False  # survives emptying (junk bin within its phase)
    closed: bool = False

    @property
    def open(self) -> bool:
        return self.load > 0


@dataclass(frozen=True)
class LedgerEntry:
    time: float
    item: int
    size_num: int
    source: int
    destination: int
    class_key: str
    rule: str


class MigrationLedger:
    def __init__(self, scale: int):
        self.scale = scale
        self.entries: list[LedgerEntry] = []

    def record(self, entry: LedgerEntry) -> None:
        self.entries.append(entry)

    @property
    def unit_count(self) -> int:
        return len(self.entries)

    @property
    def size_sum(self) -> float:
        return sum(e.size_num for e in self.entries) / self.scale

    def per_class(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for e in self.entries:
            counts[e.class_key] = counts.get(e.class_key, 0) + 1
        return counts

    def times_of(self, item_id: int) -> list[float]:
        return [e.time for e in self.entries if e.item == item_id]


@dataclass
class Segment:
    start: float
    end: float
    open_bins: int


@dataclass
class SimulationResult:
    total_active_time: float
    segments: list[Segment]
    ledger: MigrationLedger
    departures: dict[int, float]
    resolved_durations: dict[int, float]
    migrations_per_item: dict[int, int]
    trace: list[dict]
    scale: int

    def to_dict(self) -> dict:
        return {
            "total_active_time": self.total_active_time,
            "segments": [[s.start, s.end, s.open_bins] for s in self.segments],
            "ledger": [
                [e.time, e.item, e.size_num, e.source, e.destination, e.class_key, e.rule]
                for e in self.ledger.entries
            ],
            "departures": {str(k): v for k, v in sorted(self.departures.items())},
            "migration_counts": {
                "unit": self.ledger.unit_count,
                "size_sum": self.ledger.size_sum,
                "per_class": self.ledger.per_class(),
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def migration_counts(result: SimulationResult) -> tuple[int, float, dict[str, int]]:
    ledger = result.ledger
    return ledger.unit_count, ledger.size_sum, ledger.per_class()


def per_time_open_bins(result: SimulationResult) -> list[Segment]:
    return result.segments


def total_active_time(result: SimulationResult) -> float:
    return result.total_active_time


class Policy:
    """Behavioral contract implemented by each packing algorithm."""

    name = "policy"

    def bind(self, engine: "Engine") -> None:
        self.engine = engine

    def on_arrival(self, item_id: int, size_num: int, time: float) -> None:
        raise NotImplementedError

    def on_departure(self, item_id: int, bin_id: int, time: float) -> None:
        pass

    def on_checkpoints(self, item_ids: list[int], time: float) -> None:
        for item_id in item_ids:
            self.on_checkpoint(item_id, time)

    def on_checkpoint(self, item_id: int, time: float) -> None:
        pass


class Engine:
    """Drives one policy through one instance. Single-threaded."""

    def __init__(
        self,
        instance: Instance,
        policy: Policy,
        delay_cost: float = 0.0,
        adversary=None,
        observers: Iterable[Callable[["Engine", float], None]] = (),
    ):
        problems = validate(instance)
        if problems:
            raise SimulationError("invalid instance: " + "; ".join(problems))
        if delay_cost < 0:
            raise SimulationError("delay cost must be nonnegative")
        if instance.has_deferred() and adversary is None:
            raise SimulationError("instance has deferred durations but no adversary")
        self.instance = instance
        self.scale = instance.scale
        self.policy = policy
        self.delay_cost = delay_cost
        self.adversary = adversary
        self.observers = list(observers)

        self.items = {it.id: it for it in instance.items}
        self.durations: dict[int, float | None] = {
            it.id: it.duration for it in instance.items
        }
        self.bins: dict[int, Bin] = {}
        self._next_bin_id = 0
        self.placement: dict[int, int] = {}
        self.live: dict[int, int] = {}  # item id -> size numerator
        self.departure_time: dict[int, float] = {}
        self.migrations_per_item: dict[int, int] = {}
        self.ledger = MigrationLedger(self.scale)
        self.resolved: dict[int, float] = {}
        self.trace: list[dict] = []
        self._open_count = 0
        self._pending_checkpoints: dict[int, set[float]] = {}
        self._heap: list[tuple[float, int, int]] = []
        self._current: dict | None = None  # trace record of the event in flight
        # bind-time actions (e.g. a policy pre-opening a persistent bin)
        self._setup: dict = {"time": None, "kind": "SETUP", "item": None, "actions": []}
        self._arrival_placed = False

    # ------------------------------------------------------------------
    # policy-facing API

    def size_of(self, item_id: int) -> int:
        return self.items[item_id].size_num

    def live_count(self) -> int:
        return len(self.live)

    def bin(self, bin_id: int) -> Bin:
        return self.bins[bin_id]

    def bins_in(self, group: str) -> Iterator[Bin]:
        """Non-closed bins of a group in opening order."""
        for b in self.bins.values():
            if b.group == group and not b.closed:
                yield b

    def open_bin(self, label: str, group: str, persistent: bool = False) -> Bin:
        b = Bin(id=self._next_bin_id, label=label, group=group, persistent=persistent)
        self._next_bin_id += 1
        self.bins[b.id] = b
        self._record("open", bin=b.id, label=label, group=group)
        return b

    def close_bin(self, bin_id: int) -> None:
        b = self.bins[bin_id]
        b.persistent = False
        if b.load == 0:
            b.closed = True
            self._record("close", bin=bin_id)

    def set_label(self, bin_id: int, label: str) -> None:
        b = self.bins[bin_id]
        if b.label == label:
            return
        if b.label == GOOD and label == BAD:
            raise SimulationError(f"bin {bin_id}: Good bins never become Bad")
        self._record("label", bin=bin_id, old=b.label, new=label)
        b.label = label

    def place(self, item_id: int, bin_id: int) -> None:
        """Place a newly arrived item."""
        if item_id in self.placement:
            raise SimulationError(f"item {item_id} already placed")
        self._attach(item_id, bin_id)
        self._record("place", item=item_id, bin=bin_id, size=self.size_of(item_id))
        self._arrival_placed = True

    def begin_migration(self, item_id: int) -> int:
        """Detach an item from its bin; must be completed in the same event."""
        if item_id not in self.live:
            raise SimulationError(f"cannot migrate departed item {item_id}")
        src = self.placement.pop(item_id)
        self._detach(item_id, src)
        self._staged = getattr(self, "_staged", {})
        self._staged[item_id] = src
        return self.size_of(item_id)

    def complete_migration(
        self, item_id: int, bin_id: int, rule: str, class_key: str, time: float
    ) -> None:
        src = self._staged.pop(item_id)
        self._attach(item_id, bin_id)
        size = self.size_of(item_id)
        self.ledger.record(
            LedgerEntry(time, item_id, size, src, bin_id, class_key, rule)
        )
        self.migrations_per_item[item_id] = self.migrations_per_item.get(item_id, 0) + 1
        self._record("migrate", item=item_id, src=src, dst=bin_id, size=size)
        if self.delay_cost > 0:
            # closed form, not accumulation: keeps the delayed departure
            # bit-identical to arrival + duration + C * migrations
            it = self.items[item_id]
            new_dep = (
                it.arrival
                + self.durations[item_id]
                + self.delay_cost * self.migrations_per_item[item_id]
            )
            self.departure_time[item_id] = new_dep
            heapq.heappush(self._heap, (new_dep, EventKind.DEPARTURE, item_id))

    def migrate(
        self, item_id: int, bin_id: int, rule: str, class_key: str, time: float
    ) -> None:
        self.begin_migration(item_id)
        self.complete_migration(item_id, bin_id, rule, class_key, time)

    def schedule_checkpoint(self, item_id: int, time: float) -> None:
        self._pending_checkpoints.setdefault(item_id, set()).add(time)
        heapq.heappush(self._heap, (time, EventKind.CHECKPOINT, item_id))

    # ------------------------------------------------------------------
    # internals

    def _attach(self, item_id: int, bin_id: int) -> None:
        b = self.bins[bin_id]
        if b.closed:
            raise SimulationError(f"bin {bin_id} is closed")
        size = self.size_of(item_id)
        if b.load + size > self.scale:
            raise CapacityViolation(
                f"capacity violation: item {item_id} (size {size}/{self.scale}) "
                f"does not fit in bin {bin_id} at load {b.load}/{self.scale}"
            )
        was_open = b.open
        b.load += size
        b.items.add(item_id)
        self.placement[item_id] = bin_id
        if not was_open:
            self._open_count += 1

    def _detach(self, item_id: int, bin_id: int) -> None:
        b = self.bins[bin_id]
        b.items.discard(item_id)
        b.load -= self.size_of(item_id)
        if b.load == 0:
            self._open_count -= 1
            if not b.persistent:
                b.closed = True
                self._record("close", bin=bin_id)

    def _record(self, action: str, **fields) -> None:
        target = self._current if self._current is not None else self._setup
        target["actions"].append({"action": action, **fields})

    def _schedule_departure(self, item_id: int, time: float) -> None:
        self.departure_time[item_id] = time
        heapq.heappush(self._heap, (time, EventKind.DEPARTURE, item_id))

    def _resolve(self, time: float) -> None:
        snapshot = []
        for b in sorted(self.bins.values(), key=lambda b: b.id):
            deferred = sorted(
                i for i in b.items if self.durations[i] is None
            )
            if deferred:
                snapshot.append((b.id, deferred))
        assignment = self.adversary.resolve(snapshot)
        for item_id, duration in self.durations.items():
            if duration is None:
                if item_id not in assignment or assignment[item_id] is None:
                    raise SimulationError(
                        f"adversary left item {item_id} unresolved"
                    )
                d = float(assignment[item_id])
                if d <= 0:
                    raise SimulationError("adversary assigned nonpositive duration")
                self.durations[item_id] = d
                self.resolved[item_id] = d
                self._schedule_departure(item_id, self.items[item_id].arrival + d)

    def run(self) -> SimulationResult:
        heap = self._heap
        for it in self.instance.items:
            heapq.heappush(heap, (it.arrival, EventKind.ARRIVAL, it.id))
            if it.duration is not None:
                self._schedule_departure(it.id, it.arrival + it.duration)
        deferred = [it for it in self.instance.items if it.deferred]
        if deferred:
            resolve_at = max(it.arrival for it in deferred)
            heapq.heappush(heap, (resolve_at, EventKind.ADVERSARY_RESOLVE, -1))

        self.policy.bind(self)
        if self._setup["actions"]:
            self.trace.append(self._setup)

        segments: list[Segment] = []
        total = 0.0
        prev_time: float | None = None
        departures: dict[int, float] = {}

        while heap:
            time, kind, item_id = heapq.heappop(heap)
            # drop stale rescheduled departures / fired checkpoints
            if kind == EventKind.DEPARTURE:
                if item_id not in self.live or self.departure_time[item_id] != time:
                    continue
            elif kind == EventKind.CHECKPOINT:
                pending = self._pending_checkpoints.get(item_id, set())
                if item_id not in self.live or time not in pending:
                    continue
                pending.discard(time)

            if prev_time is None:
                prev_time = time
            elif time > prev_time:
                total += self._open_count * (time - prev_time)
                segments.append(Segment(prev_time, time, self._open_count))
                prev_time = time

            self._current = {"time": time, "kind": EventKind(kind).name, "item": item_id, "actions": []}

            if kind == EventKind.ARRIVAL:
                size = self.size_of(item_id)
                self.live[item_id] = size
                self._arrival_placed = False
                self.policy.on_arrival(item_id, size, time)
                if not self._arrival_placed:
                    raise SimulationError(
                        f"policy did not place arriving item {item_id}"
                    )
            elif kind == EventKind.DEPARTURE:
                bin_id = self.placement.pop(item_id)
                del self.live[item_id]
                departures[item_id] = time
                self._record(
                    "depart", item=item_id, bin=bin_id, size=self.size_of(item_id)
                )
                self._detach(item_id, bin_id)
                self.policy.on_departure(item_id, bin_id, time)
            elif kind == EventKind.CHECKPOINT:
                batch = [item_id]
                while heap and heap[0][0] == time and heap[0][1] == EventKind.CHECKPOINT:
                    _, _, other = heapq.heappop(heap)
                    pending = self._pending_checkpoints.get(other, set())
                    if other in self.live and time in pending:
                        pending.discard(time)
                        batch.append(other)
                self.policy.on_checkpoints(batch, time)
            else:  # ADVERSARY_RESOLVE
                self._resolve(time)

            self.trace.append(self._current)
            self._current = None
            for obs in self.observers:
                obs(self, time)

        if self.live:
            raise SimulationError("items left in the system at end of trace")

        return SimulationResult(
            total_active_time=total,
            segments=segments,
            ledger=self.ledger,
            departures=departures,
            resolved_durations=dict(self.resolved),
            migrations_per_item=dict(self.migrations_per_item),
            trace=self.trace,
            scale=self.scale,
        )

def simulate(
    instance: Instance,
    policy: Policy,
    delay_cost: float = 0.0,
    adversary=None,
    observers: Iterable[Callable[[Engine, float], None]] = (),
) -> SimulationResult:
    """Run a policy over an instance; deterministic for identical inputs."""
    return Engine(instance, policy, delay_cost, adversary, observers).run()


def resolve_adversary(snapshot, resolver) -> dict[int, float]:
    """Apply a duration resolver to a packing snapshot.

    snapshot: list of (bin id, sorted deferred item ids), ordered by bin id.
    """
    return resolver.resolve(snapshot)


def verify_packing(result: SimulationResult) -> str | None:
    """Re-walk the trace; returns a violation message or None if clean."""
    scale = result.scale
    loads: dict[int, int] = {}
    labels: dict[int, str] = {}
    placed: dict[int, tuple[int, int]] = {}  # item -> (bin, size)
    for event in result.trace:
        t = event["time"]
        for act in event["actions"]:
            kind = act["action"]
            if kind == "open":
                loads[act["bin"]] = 0
                labels[act["bin"]] = act["label"]
            elif kind == "place":
                item, b, size = act["item"], act["bin"], act["size"]
                if item in placed:
                    return f"t={t}: item {item} placed twice"
                loads[b] += size
                if loads[b] > scale:
                    return f"t={t}: bin {b} overflows capacity"
                placed[item] = (b, size)
            elif kind == "migrate":
                item, src, dst, size = act["item"], act["src"], act["dst"], act["size"]
                if item not in placed or placed[item][0] != src:
                    return f"t={t}: migration of item {item} from wrong bin"
                loads[src] -= size
                loads[dst] += size
                if loads[dst] > scale:
                    return f"t={t}: bin {dst} overflows capacity"
                placed[item] = (dst, size)
            elif kind == "depart":
                item, b = act["item"], act["bin"]
                if item not in placed or placed[item][0] != b:
                    return f"t={t}: departure of item {item} from wrong bin"
                loads[b] -= placed[item][1]
                del placed[item]
            elif kind == "label":
                b, old, new = act["bin"], act["old"], act["new"]
                if old == GOOD and new == BAD:
                    return f"t={t}: bin {b} relabeled Good -> Bad"
                labels[b] = new
    if placed:
        return "items left placed at end of trace"
    return None
