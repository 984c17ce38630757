"""Port-side traffic models (the application modules behind each port).

A streaming write source keeps its port's write FIFO topped up, pushing one
entry per module-clock edge whenever the writer-observed space allows; a
streaming read sink drains the return FIFO one entry per edge.  Both are
event-driven: they sleep whenever the FIFO state blocks them and are woken
either by their own predictions or by the arbiter moving data.

Payload and expectation callbacks take the running entry index for the
port, so soak tests can generate and verify reproducible pseudo-random
data end to end.
"""

from __future__ import annotations

from .config_regs import READ, WRITE

_BATCH_CAP = 8192


def splitmix64(x: int) -> int:
    """Reproducible 64-bit mixing function used for soak payloads."""
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


class StreamWriteSource:
    """Pushes entries into the port's write FIFO as fast as space allows."""

    def __init__(self, system, port: int, payload_fn=None, max_entries=None):
        self.sys = system
        self.port = port
        self.fifo = system.write_fifos[port]
        self.domain = system.mod_domains[port]
        self.payload_fn = payload_fn
        self.max_entries = max_entries
        self.index = 0
        self.next_push_tick = self.domain.next_edge_at_or_after(0)
        self._wake_at: int | None = None

    def _done(self) -> bool:
        return self.max_entries is not None and self.index >= self.max_entries

    def request_wake(self, tick: int) -> None:
        if self._done():
            return
        at = max(tick, self.sys.engine.now)
        if self._wake_at is not None and self._wake_at <= at:
            return
        self._wake_at = at
        self.sys.engine.schedule(at, self.domain.id, self.sys.target_source(self.port),
                                 self._wake)

    def _wake(self, tick: int) -> None:
        if self._wake_at is not None and tick < self._wake_at:
            return  # superseded by an earlier wake
        self._wake_at = None
        t = max(self.next_push_tick, self.domain.next_edge_at_or_after(tick))
        pushed = 0
        while not self._done() and pushed < _BATCH_CAP:
            if self.fifo.space_seen_by_writer(t) <= 0:
                break
            value = self.payload_fn(self.index) if self.payload_fn else 0
            accepted = self.fifo.push(value, t)
            assert accepted
            self.index += 1
            pushed += 1
            t += self.domain.period_ps
        self.next_push_tick = t
        if pushed:
            self.sys.arbiter.notify(self.port, WRITE, self.sys.engine.now)
        if self._done():
            return
        if pushed >= _BATCH_CAP:
            self.request_wake(self.sys.engine.now)
            return
        at = self.fifo.tick_writer_sees_space(1, t)
        if at is not None:
            self.request_wake(at)
        # Otherwise: sleep until the arbiter records more pops.


class StreamReadSink:
    """Drains the port's return FIFO, optionally verifying every entry."""

    def __init__(self, system, port: int, expect_fn=None):
        self.sys = system
        self.port = port
        self.fifo = system.read_fifos[port]
        self.domain = system.mod_domains[port]
        self.expect_fn = expect_fn
        self.index = 0
        self.mismatches = 0
        self.next_pop_tick = self.domain.next_edge_at_or_after(0)
        self._wake_at: int | None = None

    def request_wake(self, tick: int) -> None:
        at = max(tick, self.sys.engine.now)
        if self._wake_at is not None and self._wake_at <= at:
            return
        self._wake_at = at
        self.sys.engine.schedule(at, self.domain.id, self.sys.target_sink(self.port),
                                 self._wake)

    def _wake(self, tick: int) -> None:
        if self._wake_at is not None and tick < self._wake_at:
            return
        self._wake_at = None
        t = max(self.next_pop_tick, self.domain.next_edge_at_or_after(tick))
        popped = 0
        while popped < _BATCH_CAP:
            if self.fifo.occupancy_seen_by_reader(t) <= 0:
                break
            value = self.fifo.pop(t)
            assert value is not None
            if self.expect_fn is not None and value != self.expect_fn(self.index):
                self.mismatches += 1
            self.index += 1
            popped += 1
            t += self.domain.period_ps
        self.next_pop_tick = t
        if popped:
            self.sys.arbiter.notify(self.port, READ, self.sys.engine.now)
        if popped >= _BATCH_CAP:
            self.request_wake(self.sys.engine.now)
            return
        at = self.fifo.tick_reader_sees_at_least(1, t)
        if at is not None:
            self.request_wake(at)
