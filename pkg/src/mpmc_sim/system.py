"""Wires one complete controller instance: engine, clocks, FIFOs, arbiter,
DRAM device, and per-port traffic.  One `MpmcSystem` per sweep point; systems
share nothing, so the harness may run them in any order (or in parallel)
with identical results.
"""

from __future__ import annotations

from .arbiter import WFCFS, Arbiter, MemRequest
from .config_regs import (CONTROLLER_WORD_BITS, READ, WRITE, ConfigRegisters)
from .dcdwff import Dcdwff, FifoConfig
from .dram_model import DramDevice, TimingParams, TransactionIssuer
from .sim_core import Engine
from .traffic import StreamReadSink, StreamWriteSource

# Deterministic component ids for the event tie-break order.
_TARGET_ARBITER = 100
_TARGET_SOURCE_BASE = 200
_TARGET_SINK_BASE = 1000


def _pow2_at_least(n: int) -> int:
    p = 1
    while p < n:
        p <<= 1
    return p


class MetricsCollector:
    def __init__(self):
        self.requests: list[MemRequest] = []

    def record(self, req: MemRequest) -> None:
        self.requests.append(req)


class MpmcSystem:
    TARGET_ARBITER = _TARGET_ARBITER

    def __init__(self, registers: ConfigRegisters, timing: TimingParams,
                 policy: str = WFCFS, *, sync_stages: int = 2,
                 log_commands: bool = False, trace: bool = False,
                 wr_setup_cycles: int = 3, start_cycles: int | None = None,
                 record_dispatch_log: bool = False):
        self.registers = registers
        self.timing = timing
        self.engine = Engine(record_dispatch_log=record_dispatch_log)
        self.mem_domain = self.engine.add_domain(timing.tck_ps)
        self.ctrl_domain = self.engine.add_domain(2 * timing.tck_ps)
        self.mod_domains = {}
        self.write_fifos: dict[int, Dcdwff] = {}
        self.read_fifos: dict[int, Dcdwff] = {}
        for p in range(registers.num_ports):
            pc = registers.port(p)
            period = round(1e6 / pc.clock_mhz)
            self.mod_domains[p] = self.engine.add_domain(int(period))
            ratio = pc.pack_ratio
            for direction in (WRITE, READ):
                if direction not in pc.regs:
                    continue
                bc_entries = pc.regs[direction].bc * ratio
                depth = _pow2_at_least(max(8, 2 * bc_entries))
                cfg = FifoConfig(
                    depth=depth,
                    entry_width_bits=pc.data_width_bits,
                    almost_full_threshold=bc_entries,
                    almost_empty_threshold=bc_entries,
                    write_domain=self.mod_domains[p] if direction == WRITE else self.ctrl_domain,
                    read_domain=self.ctrl_domain if direction == WRITE else self.mod_domains[p],
                    sync_stages=sync_stages,
                )
                if direction == WRITE:
                    self.write_fifos[p] = Dcdwff(cfg)
                else:
                    self.read_fifos[p] = Dcdwff(cfg)
        self.device = DramDevice(timing, registers.address_map, log_commands=log_commands)
        self.issuer = TransactionIssuer(self.device)
        self.metrics = MetricsCollector()
        arb_kw = {} if start_cycles is None else {"start_cycles": start_cycles}
        self.arbiter = Arbiter(self, policy=policy, trace=trace,
                               wr_setup_cycles=wr_setup_cycles, **arb_kw)
        self.write_sources: dict[int, StreamWriteSource] = {}
        self.read_sinks: dict[int, StreamReadSink] = {}

    def target_source(self, port: int) -> int:
        return _TARGET_SOURCE_BASE + port

    def target_sink(self, port: int) -> int:
        return _TARGET_SINK_BASE + port

    def add_write_source(self, port: int, payload_fn=None, max_entries=None):
        src = StreamWriteSource(self, port, payload_fn=payload_fn, max_entries=max_entries)
        self.write_sources[port] = src
        return src

    def add_read_sink(self, port: int, expect_fn=None):
        sink = StreamReadSink(self, port, expect_fn=expect_fn)
        self.read_sinks[port] = sink
        return sink

    def notify_write_source(self, port: int, tick: int) -> None:
        src = self.write_sources.get(port)
        if src is not None:
            src.request_wake(tick)

    def notify_read_sink(self, port: int, tick: int) -> None:
        sink = self.read_sinks.get(port)
        if sink is not None:
            sink.request_wake(tick)

    def run(self, controller_cycles: int) -> int:
        """Start traffic and run for the given number of controller cycles."""
        for src in self.write_sources.values():
            src.request_wake(0)
        for sink in self.read_sinks.values():
            sink.request_wake(0)
        for p in range(self.registers.num_ports):
            pc = self.registers.ports.get(p)
            if pc is None:
                continue
            for direction in pc.regs:
                self.arbiter.notify(p, direction, 0)
        end = self.ctrl_domain.edge_tick(controller_cycles)
        return self.engine.run_until(end)

    # -- post-run accounting ------------------------------------------------

    def beat_window(self, start_tick: int, end_tick: int) -> tuple[int, int]:
        """Beat-slot index range whose data lands inside [start, end)."""
        tck = self.timing.tck_ps
        lo = max(0, 2 * start_tick // tck - 2)
        while self.device.beat_tick(lo) < start_tick:
            lo += 1
        hi = max(lo, 2 * end_tick // tck - 2)
        while self.device.beat_tick(hi) < end_tick:
            hi += 1
        return lo, hi

    def useful_beats(self, start_tick: int, end_tick: int):
        """Per (port, direction) useful data beats inside the tick window."""
        lo, hi = self.beat_window(start_tick, end_tick)
        out: dict[tuple[int, str], int] = {}
        for start_beat, n, direction, port, useful in self.device.reservations:
            a = max(start_beat, lo)
            b = min(start_beat + n, hi)
            if b <= a:
                continue
            out[(port, direction)] = out.get((port, direction), 0) + useful * (b - a) // n
        return out, hi - lo

    def exhausted_ports(self) -> list[tuple[int, str]]:
        """Ports whose configured region ran out (invalidates streaming runs)."""
        out = []
        for p in range(self.registers.num_ports):
            pc = self.registers.ports.get(p)
            if pc is None:
                continue
            for direction, regs in pc.regs.items():
                streaming = (direction == WRITE and p in self.write_sources) or \
                            (direction == READ and p in self.read_sinks)
                if streaming and regs.started and regs.ca >= regs.ea:
                    out.append((p, direction))
        return out
