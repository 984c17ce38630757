"""Dual-clock dual-port FIFO with delayed-pointer synchronization.

Each port of the controller carries one of these per direction.  The
gray-counter pointer crossing of the hardware is modeled functionally: each
side sees the *opposite* side's pointer as it was `sync_stages` of its own
clock periods ago, and its *own* pointer exactly.  That reproduces the
conservative behavior of a two-flop synchronizer (a writer may see the FIFO
as fuller than it is, a reader as emptier) without modeling gray-code bits.

All operations are timestamped on the global picosecond axis; push times
must fall on write-domain edges and pop times on read-domain edges.  With
``sync_stages = 0`` and both domains identical the FIFO degenerates to an
ideal single-clock queue.
"""

from __future__ import annotations

from bisect import bisect_right
from collections import deque
from dataclasses import dataclass

from .sim_core import ClockDomain


@dataclass(frozen=True)
class FifoConfig:
    depth: int
    entry_width_bits: int
    almost_full_threshold: int
    almost_empty_threshold: int
    write_domain: ClockDomain
    read_domain: ClockDomain
    sync_stages: int = 2

    def __post_init__(self):
        if self.depth < 1 or self.depth & (self.depth - 1):
            raise ValueError("depth must be a power of two")
        if not (0 < self.almost_full_threshold <= self.depth):
            raise ValueError("almost_full_threshold out of range")
        if not (0 < self.almost_empty_threshold <= self.depth):
            raise ValueError("almost_empty_threshold out of range")
        if self.sync_stages < 0:
            raise ValueError("sync_stages must be >= 0")


class Dcdwff:
    """The FIFO proper.  One instance must not be shared by two engines."""

    def __init__(self, config: FifoConfig):
        self.config = config
        self._storage: deque = deque()
        # Completed-op counters plus the tick of every op still inside the
        # visibility horizon.  Ticks are appended monotonically.
        self._push_ticks: list[int] = []
        self._pop_ticks: list[int] = []
        self._pushes = 0  # total accepted pushes, ever
        self._pops = 0
        self._last_push_tick = -1
        self._last_pop_tick = -1
        self.rejected_pushes = 0

    # -- pointer visibility ------------------------------------------------

    def _delay(self, observer_domain: ClockDomain) -> int:
        return self.config.sync_stages * observer_domain.period_ps

    def _ops_at_or_before(self, ticks: list[int], base: int, tick: int) -> int:
        # `base` = ops already trimmed from the recorded list.
        return base + bisect_right(ticks, tick)

    def _trim(self):
        # Ticks far in the past can never influence a visibility query again;
        # keep the recorded windows short so long soaks stay O(1) per op.
        horizon = max(self._delay(self.config.read_domain), self._delay(self.config.write_domain))
        for ticks in (self._push_ticks, self._pop_ticks):
            if len(ticks) > 4 * self.config.depth + 64:
                ref = min(self._last_push_tick, self._last_pop_tick) - 2 * horizon
                cut = bisect_right(ticks, ref)
                if cut:
                    del ticks[:cut]

    @property
    def _push_base(self) -> int:
        return self._pushes - len(self._push_ticks)

    @property
    def _pop_base(self) -> int:
        return self._pops - len(self._pop_ticks)

    def true_occupancy(self, tick: int) -> int:
        p = self._ops_at_or_before(self._push_ticks, self._push_base, tick)
        q = self._ops_at_or_before(self._pop_ticks, self._pop_base, tick)
        return p - q

    def occupancy_seen_by_reader(self, tick: int) -> int:
        """Pushes delayed through the synchronizer, own pops exact."""
        d = self._delay(self.config.read_domain)
        p = self._ops_at_or_before(self._push_ticks, self._push_base, tick - d)
        q = self._ops_at_or_before(self._pop_ticks, self._pop_base, tick)
        return max(0, p - q)

    def occupancy_seen_by_writer(self, tick: int) -> int:
        """Own pushes exact, pops delayed through the synchronizer."""
        d = self._delay(self.config.write_domain)
        p = self._ops_at_or_before(self._push_ticks, self._push_base, tick)
        q = self._ops_at_or_before(self._pop_ticks, self._pop_base, tick - d)
        return p - q

    def space_seen_by_writer(self, tick: int) -> int:
        return self.config.depth - self.occupancy_seen_by_writer(tick)

    # -- spec operations ---------------------------------------------------

    def push(self, word, tick: int) -> bool:
        """Attempt a push at a write-domain edge; rejected when observed full."""
        if tick < self._last_push_tick:
            raise ValueError("push ticks must be monotonically non-decreasing")
        if self.occupancy_seen_by_writer(tick) >= self.config.depth:
            self.rejected_pushes += 1
            return False
        self._storage.append(word)
        self._push_ticks.append(tick)
        self._pushes += 1
        self._last_push_tick = tick
        self._trim()
        return True

    def pop(self, tick: int):
        """Pop at a read-domain edge; returns the word or None when observed empty."""
        if tick < self._last_pop_tick:
            raise ValueError("pop ticks must be monotonically non-decreasing")
        if self.occupancy_seen_by_reader(tick) <= 0:
            return None
        assert self._storage, "underflow: reader-visible word missing from storage"
        word = self._storage.popleft()
        self._pop_ticks.append(tick)
        self._pops += 1
        self._last_pop_tick = tick
        self._trim()
        return word

    def status(self, tick: int, observer: str) -> dict:
        """Flags as seen from one side ('reader' is the controller-facing side
        of a write-path FIFO)."""
        if observer == "reader":
            occ = self.occupancy_seen_by_reader(tick)
        elif observer == "writer":
            occ = self.occupancy_seen_by_writer(tick)
        else:
            raise ValueError("observer must be 'reader' or 'writer'")
        cfg = self.config
        return {
            "full": self.occupancy_seen_by_writer(tick) >= cfg.depth,
            "almost_full": self.occupancy_seen_by_reader(tick) >= cfg.almost_full_threshold,
            "empty": self.occupancy_seen_by_reader(tick) <= 0,
            "almost_empty": self.occupancy_seen_by_reader(tick) <= cfg.depth - cfg.almost_empty_threshold,
            "observed_occupancy": occ,
        }

    # -- prediction helpers (used by event-driven components) --------------

    def tick_reader_sees_at_least(self, count: int, from_tick: int) -> int | None:
        """Earliest tick >= from_tick at which the reader-observed occupancy
        reaches `count`, assuming no further pops.  None if the recorded push
        history (including scheduled future pushes) cannot reach it."""
        d = self._delay(self.config.read_domain)
        q = self._ops_at_or_before(self._pop_ticks, self._pop_base, from_tick)
        need = q + count  # need this many pushes visible
        idx = need - 1 - self._push_base
        if idx < 0:
            return from_tick
        if idx >= len(self._push_ticks):
            return None
        return max(from_tick, self._push_ticks[idx] + d)

    def tick_writer_sees_space(self, count: int, from_tick: int) -> int | None:
        """Earliest tick >= from_tick at which writer-observed free space
        reaches `count`, assuming no further pushes."""
        d = self._delay(self.config.write_domain)
        p = self._ops_at_or_before(self._push_ticks, self._push_base, from_tick)
        need = p - (self.config.depth - count)  # pops that must be visible
        idx = need - 1 - self._pop_base
        if idx < 0:
            return from_tick
        if idx >= len(self._pop_ticks):
            return None
        return max(from_tick, self._pop_ticks[idx] + d)
