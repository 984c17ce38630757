"""MPMC scheduling core.

The PRE stage polls ports each controller cycle, qualifies at most one
outstanding request per (port, direction) through a 32-bit flag register,
and enqueues qualified requests into the read/write request FIFOs after a
fixed two-cycle pipeline delay.

The POS stage drains requests into the DRAM model.  Under WFCFS it
snapshots one direction's request FIFO as a window, drains it completely,
then alternates; under the FCFS baseline it serves a single unified queue
in strict arrival order.  Requests expand into row-local DDR3 command
sequences; read data flows back through the port's return FIFO while write
data is staged out of the port's write FIFO at one entry per controller
cycle.

Polling is event-driven for speed: ports mark themselves ready via
`notify()` and the poll event only runs when at least one candidate is
marked.  Readiness, once verified, can only be consumed by a grant, so the
lazy evaluation is exact with respect to a poll-every-cycle model.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .config_regs import READ, WRITE

WFCFS = "wfcfs"
FCFS = "fcfs"

PRE_PIPELINE_CYCLES = 2  # readiness-to-enqueue latency of the PRE stage

# POS command-pipeline lookahead, in memory cycles: the next request is taken
# up once the data bus is reserved to within this horizon, so row preparation
# for queued requests overlaps the current data transfer (the point of bank
# interleaving) while command generation stays a bounded distance ahead of
# the bus.  Sized to cover the longest row-preparation chain (write recovery
# + precharge + activate-to-CAS).
POS_LEAD_CYCLES = 24

# Arbitration is held off for a fixed span after reset, standing in for DRAM
# initialization (scaled down to desk-run length).  Streaming modules keep
# filling their FIFOs meanwhile, so the first poll pass sees every lane with a
# full burst buffered and qualifies them in scan order -- which is what makes
# the FCFS baseline's arrival order interleave directions.  Must stay well
# below the measurement warmup.
START_DELAY_CYCLES = 512


@dataclass
class MemRequest:
    port: int
    direction: str
    start_address: int       # controller words
    word_count: int          # BC, controller words
    enqueue_tick: int        # poll qualification tick
    arrival_tick: int = 0    # tick the request entered RFF/WFF
    window_id: int = -1
    first_word_tick: int = -1
    last_word_tick: int = -1


@dataclass
class Window:
    direction: str
    requests: deque = field(default_factory=deque)
    id: int = -1

    @property
    def size(self) -> int:
        return len(self.requests)


class Arbiter:
    """PRE + POS stages bound to one `MpmcSystem`."""

    def __init__(self, system, policy: str = WFCFS, trace: bool = False,
                 wr_setup_cycles: int = 3, start_cycles: int = START_DELAY_CYCLES):
        if policy not in (WFCFS, FCFS):
            raise ValueError(f"unknown arbitration policy {policy!r}")
        self.sys = system
        self.policy = policy
        self.wr_setup_cycles = wr_setup_cycles  # controller cycles, WCTRL datapath arm time
        self.start_tick = system.ctrl_domain.edge_tick(start_cycles)
        n = system.registers.num_ports
        self.num_ports = n
        self.flags = {READ: 0, WRITE: 0}
        self.ready = {READ: 0, WRITE: 0}
        self.rff: deque[MemRequest] = deque()
        self.wff: deque[MemRequest] = deque()
        self.fcfs_queue: deque[MemRequest] = deque()
        self.window: Window | None = None
        self.window_counter = 0
        self.last_served_direction: str | None = None
        self.direction_switches = 0
        self.pos_busy = False
        self._wctrl_free_tick = 0  # single shared write-staging datapath
        self._wr_gate_cycle = 0    # WCTRL re-arm: earliest next WR command
        self._poll_pending = False
        self._kick_pending = False
        self._recheck_pending: set[tuple[int, str]] = set()
        self.trace: list[tuple[int, int, str, int, int, int]] | None = [] if trace else None
        self.served: int = 0

    # ------------------------------------------------------------------ PRE

    def _fifo_need_entries(self, port: int, direction: str) -> tuple:
        """(fifo, required entry count) backing the readiness condition."""
        pc = self.sys.registers.port(port)
        bc = self.sys.registers.regs(port, direction).bc
        need = bc * pc.pack_ratio
        if direction == WRITE:
            return self.sys.write_fifos[port], need
        return self.sys.read_fifos[port], need

    def _is_ready(self, port: int, direction: str, tick: int) -> bool:
        if self.flags[direction] >> port & 1:
            return False
        if not self.sys.registers.has_pending(port, direction):
            return False
        fifo, need = self._fifo_need_entries(port, direction)
        if direction == WRITE:
            # Data for a full burst must be visible on the controller side.
            return fifo.occupancy_seen_by_reader(tick) >= need
        # A full burst of return data must fit as seen by the controller.
        return fifo.space_seen_by_writer(tick) >= need

    def notify(self, port: int, direction: str, tick: int) -> None:
        """A FIFO level or flag changed; consider the port at the next poll."""
        if self.flags[direction] >> port & 1:
            return
        if not self.sys.registers.has_pending(port, direction):
            return
        self.ready[direction] |= 1 << port
        self._schedule_poll(tick)

    def _schedule_poll(self, tick: int) -> None:
        if self._poll_pending:
            return
        self._poll_pending = True
        at = self.sys.ctrl_domain.next_edge_at_or_after(max(tick, self.start_tick))
        self.sys.engine.schedule(at, self.sys.ctrl_domain.id, self.sys.TARGET_ARBITER,
                                 self._poll)

    def _scan_order(self):
        if self.policy == WFCFS:
            # One pass: all read lanes, then all write lanes.
            for p in range(self.num_ports):
                yield p, READ
            for p in range(self.num_ports):
                yield p, WRITE
        else:
            # The FCFS baseline scans port-major, interleaving directions.
            for p in range(self.num_ports):
                yield p, READ
                yield p, WRITE

    def _poll(self, tick: int) -> None:
        self._poll_pending = False
        qualified = []  # (port, direction) in scan order
        for port, direction in self._scan_order():
            if not (self.ready[direction] >> port & 1):
                continue
            self.ready[direction] &= ~(1 << port)
            if self._is_ready(port, direction, tick):
                qualified.append((port, direction))
            else:
                self._schedule_recheck(port, direction, tick)
        for port, direction in qualified:
            self._qualify(port, direction, tick)

    def _qualify(self, port: int, direction: str, tick: int) -> None:
        regs = self.sys.registers
        addr, _finished = regs.advance_ca(port, direction)
        self.flags[direction] |= 1 << port
        req = MemRequest(port=port, direction=direction, start_address=addr,
                         word_count=regs.regs(port, direction).bc, enqueue_tick=tick)
        arrival = tick + PRE_PIPELINE_CYCLES * self.sys.ctrl_domain.period_ps
        self.sys.engine.schedule(arrival, self.sys.ctrl_domain.id, self.sys.TARGET_ARBITER,
                                 lambda t, r=req: self._arrive(r, t))

    def _schedule_recheck(self, port: int, direction: str, tick: int) -> None:
        """Predict the earliest tick the condition can hold and re-notify then."""
        key = (port, direction)
        if key in self._recheck_pending:
            return
        fifo, need = self._fifo_need_entries(port, direction)
        if direction == WRITE:
            at = fifo.tick_reader_sees_at_least(need, tick)
        else:
            at = fifo.tick_writer_sees_space(need, tick)
        if at is None:
            return  # a later notify will retrigger once more ops are recorded
        self._recheck_pending.add(key)

        def recheck(t, p=port, d=direction, k=key):
            self._recheck_pending.discard(k)
            self.notify(p, d, t)

        self.sys.engine.schedule(max(at, tick), self.sys.ctrl_domain.id,
                                 self.sys.TARGET_ARBITER, recheck)

    def _arrive(self, req: MemRequest, tick: int) -> None:
        req.arrival_tick = tick
        if self.policy == FCFS:
            self.fcfs_queue.append(req)
        elif req.direction == READ:
            self.rff.append(req)
        else:
            self.wff.append(req)
        # Kick POS through a same-tick event so every arrival from one poll
        # pass lands in RFF/WFF before a window is snapshotted.
        if not self._kick_pending:
            self._kick_pending = True
            self.sys.engine.schedule(tick, self.sys.ctrl_domain.id,
                                     self.sys.TARGET_ARBITER, self._deferred_kick)

    def _deferred_kick(self, tick: int) -> None:
        self._kick_pending = False
        self.kick(tick)

    # ------------------------------------------------------------------ POS

    def _next_request(self) -> MemRequest | None:
        if self.policy == FCFS:
            return self.fcfs_queue.popleft() if self.fcfs_queue else None
        if self.window and self.window.requests:
            return self.window.requests.popleft()
        # Snapshot a new window: the opposite direction first, falling back
        # to the same direction so an empty FIFO never blocks the other.
        prev = self.window.direction if self.window else WRITE
        order = (READ, WRITE) if prev == WRITE else (WRITE, READ)
        for direction in order:
            fifo = self.rff if direction == READ else self.wff
            if fifo:
                self.window = Window(direction=direction, requests=deque(fifo),
                                     id=self.window_counter)
                self.window_counter += 1
                fifo.clear()
                return self.window.requests.popleft()
        return None

    def kick(self, tick: int) -> None:
        if self.pos_busy:
            return
        req = self._next_request()
        if req is None:
            return
        self.pos_busy = True
        self._service(req, tick)

    def _service(self, req: MemRequest, tick: int) -> None:
        sys = self.sys
        dev = sys.device
        port = req.port
        if req.direction != self.last_served_direction:
            if self.last_served_direction is not None:
                self.direction_switches += 1
                if self.policy == FCFS:
                    # FCFS has no windows; keep same-direction runs grouped
                    # under one id so the trace stays comparable.
                    self.window_counter += 1
            self.last_served_direction = req.direction
        if self.policy == FCFS:
            req.window_id = self.window_counter
        else:
            req.window_id = self.window.id if self.window else -1
        if self.trace is not None:
            self.trace.append((tick, port, req.direction, req.start_address,
                               req.word_count, req.window_id))

        start_cycle = dev.cycle_at_or_after(tick)
        if dev.refresh_due(start_cycle):
            dev.perform_refresh(start_cycle)

        pc = sys.registers.port(port)
        ratio = pc.pack_ratio
        ctrl = sys.ctrl_domain

        if req.direction == WRITE:
            fifo = sys.write_fifos[port]
            # The single WCTRL datapath drains one entry per controller cycle;
            # WR data beats must stay behind the staging front, and between
            # consecutive write bursts WCTRL re-arms for the next port, which
            # keeps the first WR of this request a fixed distance behind the
            # previous write request's last WR.
            stage_base = ctrl.next_edge_after(max(tick, self._wctrl_free_tick))
            # The FIFO's controller-side port is one full controller word per
            # controller cycle; the width conversion happens inside the FIFO,
            # so a narrow module port does not slow the staging path.
            entries = []
            t_pop = stage_base
            for i in range(req.word_count):
                for _ in range(ratio):
                    entry = fifo.pop(t_pop)
                    assert entry is not None, "write grant without a full burst buffered"
                    entries.append(entry)
                t_pop += ctrl.period_ps
            self._wctrl_free_tick = t_pop
            word_ready = [dev.cycle_at_or_after(stage_base + i * ctrl.period_ps)
                          for i in range(req.word_count)]
            words = [_pack(entries[i * ratio:(i + 1) * ratio], pc.data_width_bits)
                     for i in range(req.word_count)]
            last_cmd, first_cas, end_beats = sys.issuer.issue_transaction(
                WRITE, req.start_address, req.word_count, port, start_cycle,
                wr_word_ready_cycles=word_ready,
                cas_at_or_after=self._wr_gate_cycle)
            last_wr_cycle = (end_beats[-1] + 1 - dev.timing.bl) // 2 - dev.timing.cwl
            self._wr_gate_cycle = (last_wr_cycle + dev.timing.tccd
                                   + 2 * self.wr_setup_cycles)
            for i, w in enumerate(words):
                dev.write_backing(req.start_address + i, w)
            req.first_word_tick = dev.beat_tick(end_beats[0])
            req.last_word_tick = dev.beat_tick(end_beats[-1])
            completion = req.last_word_tick
            sys.engine.schedule(completion, ctrl.id, sys.TARGET_ARBITER,
                                lambda t, r=req: self._complete(r, t))
            sys.notify_write_source(port, sys.engine.now)
        else:
            fifo = sys.read_fifos[port]
            need = req.word_count * ratio
            assert fifo.space_seen_by_writer(tick) >= need, \
                "read grant without return-FIFO space"
            last_cmd, first_cas, end_beats = sys.issuer.issue_transaction(
                READ, req.start_address, req.word_count, port, start_cycle)
            # Return data: one controller word per controller cycle (the FIFO
            # width-converts), no earlier than the word's last beat on the bus.
            t_push = -ctrl.period_ps
            for i in range(req.word_count):
                word = dev.read_backing(req.start_address + i)
                avail = ctrl.next_edge_at_or_after(dev.beat_tick(end_beats[i]))
                t_push = max(avail, t_push + ctrl.period_ps)
                for lane in range(ratio):
                    ok = fifo.push(_lane(word, lane, pc.data_width_bits), t_push)
                    assert ok, "read-return FIFO overflow"
            req.first_word_tick = dev.beat_tick(end_beats[0])
            req.last_word_tick = t_push
            sys.engine.schedule(t_push, ctrl.id, sys.TARGET_ARBITER,
                                lambda t, r=req: self._complete(r, t))
            sys.notify_read_sink(port, sys.engine.now)

        self.served += 1
        # Take up the next request once the bus reservation is within the
        # command-pipeline lookahead.
        lead = ctrl.next_edge_at_or_after(
            max(0, dev.beat_tick(dev.bus_free_beat) - POS_LEAD_CYCLES * dev.timing.tck_ps))
        sys.engine.schedule(max(lead, sys.engine.now), ctrl.id, sys.TARGET_ARBITER,
                            self._service_done)

    def _service_done(self, tick: int) -> None:
        self.pos_busy = False
        self.kick(tick)

    def _complete(self, req: MemRequest, tick: int) -> None:
        assert self.flags[req.direction] >> req.port & 1
        self.flags[req.direction] &= ~(1 << req.port)
        self.sys.metrics.record(req)
        self.notify(req.port, req.direction, tick)


def _pack(entries: list[int], width: int) -> int:
    word = 0
    for i, e in enumerate(entries):
        word |= (e & ((1 << width) - 1)) << (i * width)
    return word


def _lane(word: int, lane: int, width: int) -> int:
    return (word >> (lane * width)) & ((1 << width) - 1)
