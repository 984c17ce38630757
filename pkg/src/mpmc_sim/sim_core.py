"""Deterministic multi-clock discrete-time simulation engine.

Time is a single global integer axis in picoseconds.  Every clock in the
system (controller, memory, per-port module clocks) is a `ClockDomain` with
an integer period and phase, so arbitrary clock ratios stay exact -- there is
no floating-point time anywhere.

Events scheduled for the same tick are dispatched in ascending
(domain id, target id, insertion sequence) order, which makes every run
fully reproducible.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Callable


class SimulationError(Exception):
    """A component violated an engine contract (e.g. scheduled in the past)."""


@dataclass(frozen=True)
class ClockDomain:
    """A periodic clock on the global picosecond axis.

    Rising edge k occurs at tick ``phase_ps + k * period_ps``.
    """

    id: int
    period_ps: int
    phase_ps: int = 0

    def __post_init__(self):
        if self.period_ps <= 0:
            raise ValueError("period_ps must be positive")
        if not (0 <= self.phase_ps < self.period_ps):
            raise ValueError("phase_ps must be in [0, period_ps)")

    def edge_tick(self, k: int) -> int:
        return self.phase_ps + k * self.period_ps

    def edge_index_at_or_after(self, tick: int) -> int:
        """Index of the first rising edge at tick >= `tick`."""
        if tick <= self.phase_ps:
            return 0
        return -(-(tick - self.phase_ps) // self.period_ps)

    def next_edge_at_or_after(self, tick: int) -> int:
        return self.edge_tick(self.edge_index_at_or_after(tick))

    def next_edge_after(self, tick: int) -> int:
        return self.next_edge_at_or_after(tick + 1)

    def edge_count(self, start: int, end: int) -> int:
        """Number of rising edges in the half-open window [start, end)."""
        if start > end:
            raise ValueError("window start must be <= end")
        if end <= self.phase_ps:
            return 0
        first = self.edge_index_at_or_after(start)
        last_excl = self.edge_index_at_or_after(end)
        return max(0, last_excl - first)


@dataclass(order=True)
class Event:
    at: int
    domain: int
    target: int
    sequence: int
    fn: Callable[[int], None] = field(compare=False)


class Engine:
    """Single-threaded event engine with a deterministic total order.

    An engine instance is fully self-contained; the harness runs one engine
    per sweep point.
    """

    def __init__(self, record_dispatch_log: bool = False):
        self._queue: list[Event] = []
        self._now = 0
        self._seq = 0
        self.domains: dict[int, ClockDomain] = {}
        self.dispatch_log: list[tuple[int, int, int, int]] | None = (
            [] if record_dispatch_log else None
        )

    @property
    def now(self) -> int:
        return self._now

    def add_domain(self, period_ps: int, phase_ps: int = 0) -> ClockDomain:
        dom = ClockDomain(id=len(self.domains), period_ps=period_ps, phase_ps=phase_ps)
        self.domains[dom.id] = dom
        return dom

    def schedule(self, at: int, domain: int, target: int, fn: Callable[[int], None]) -> None:
        if at < self._now:
            raise SimulationError(
                f"event scheduled in the past: at={at} now={self._now} "
                f"(domain={domain}, target={target})"
            )
        heapq.heappush(self._queue, Event(at, domain, target, self._seq, fn))
        self._seq += 1

    def run_until(self, limit: int) -> int:
        """Dispatch every event with at <= limit; returns the final tick."""
        if limit < self._now:
            raise SimulationError(f"run_until limit {limit} is in the past (now={self._now})")
        q = self._queue
        log = self.dispatch_log
        while q and q[0].at <= limit:
            ev = heapq.heappop(q)
            self._now = ev.at
            if log is not None:
                log.append((ev.at, ev.domain, ev.target, ev.sequence))
            ev.fn(ev.at)
        self._now = limit
        return self._now

    def pending(self) -> int:
        return len(self._queue)
