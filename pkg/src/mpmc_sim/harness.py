"""Experiment harness: traffic setup, metrics, sweeps, CSV reports.

Reproduces the evaluation workloads at desk scale:

* ``expa`` / ``expb`` / ``expc`` -- four duplex streaming ports with the three
  bank assignments (all-one-bank, paired, fully interleaved) under WFCFS.
* ``expd`` -- the fully interleaved assignment under the plain-FCFS baseline.
* ``peak`` -- the N x BC sweep with consecutive ports on different banks.
* ``rw``   -- pure-read and pure-write streams measured independently.

Every sweep point runs on its own engine instance and is deterministic per
seed, so repeated runs produce byte-identical CSV output.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields

from .arbiter import FCFS, WFCFS
from .config_regs import (READ, WRITE, AddressMap, ConfigRegisters,
                          address_map_from_geometry)
from .dram_model import BEATS_PER_WORD, POISON_WORD, TimingParams, load_timing
from .system import MpmcSystem
from .traffic import splitmix64

DEFAULT_WARMUP_CYCLES = 10_000
DEFAULT_WINDOW_CYCLES = 1_000_000

EXPERIMENT_BANKS = {
    "expa": (0, 0, 0, 0),
    "expb": (0, 1, 0, 1),
    "expc": (0, 1, 2, 3),
    "expd": (0, 1, 2, 3),
}

PEAK_N_LIST = (2, 4, 8, 16, 32)
PEAK_BC_LIST = (4, 8, 16, 32, 64)


class HarnessError(Exception):
    pass


def theoretical_gbps(timing: TimingParams) -> float:
    """Peak data-bus bandwidth: two 32-bit beats per memory cycle."""
    return 2 * 32 / timing.tck_ps * 1000.0


@dataclass
class EffReport:
    experiment: str
    name: str
    N: int
    BC: int
    policy: str
    port: str  # port number or "all"
    achieved_gbps: float
    eff_percent: float
    words: int
    lat_first_mean_ns: float
    lat_first_p95_ns: float
    lat_last_mean_ns: float
    lat_last_p95_ns: float


CSV_COLUMNS = [f.name for f in fields(EffReport)]


def prf_word(seed: int, word_addr: int) -> int:
    """128-bit reproducible payload for a controller word."""
    lo = splitmix64(seed * 0x100000001 + 2 * word_addr)
    hi = splitmix64(seed * 0x100000001 + 2 * word_addr + 1)
    return (hi << 64) | lo


# -- region planning -------------------------------------------------------

def plan_regions(amap: AddressMap, bank_assignment, bc_read: int, bc_write: int):
    """Assign each port disjoint read/write word regions inside its bank.

    Ports sharing a bank split its rows; each slot's lower half is the read
    region and the upper half the write region.  Requires the column field in
    the least-significant position so regions are contiguous.
    """
    if amap.order[-1] != "col":
        raise HarnessError("streaming experiments need a column-low address map")
    row_span = amap.row_span_words()
    rows = 1 << amap.row_bits
    regions = []
    per_bank: dict[int, int] = {}
    slots = {b: list(bank_assignment).count(b) for b in set(bank_assignment)}
    for port, bank in enumerate(bank_assignment):
        slot = per_bank.get(bank, 0)
        per_bank[bank] = slot + 1
        rows_per_slot = rows // slots[bank]
        half = rows_per_slot // 2
        if half < 1:
            raise HarnessError("too many ports per bank for the device geometry")
        base_row = slot * rows_per_slot
        entry = {}
        for direction, row0, bc in ((READ, base_row, bc_read),
                                    (WRITE, base_row + half, bc_write)):
            sa = amap.encode(bank, row0, 0)
            capacity = half * row_span
            ea = sa + (capacity // bc) * bc
            entry[direction] = (sa, ea, bc)
        regions.append(entry)
    return regions


def build_streaming_registers(amap: AddressMap, bank_assignment, bc: int,
                              *, directions=(READ, WRITE), clocks=None,
                              widths=None) -> ConfigRegisters:
    n = len(bank_assignment)
    regs = ConfigRegisters(amap, n)
    regions = plan_regions(amap, bank_assignment, bc, bc)
    for port in range(n):
        pc = regs.port(port)
        if clocks is not None:
            pc.clock_mhz = clocks[port % len(clocks)]
        if widths is not None:
            pc.data_width_bits = widths[port % len(widths)]
        for direction in directions:
            sa, ea, bcd = regions[port][direction]
            regs.load_config(port, direction, sa, ea, bcd)
    return regs


# -- single sweep point ----------------------------------------------------

def run_point(*, experiment: str, name: str, bank_assignment, bc: int,
              policy: str = WFCFS, directions=(READ, WRITE),
              cycles: int = DEFAULT_WINDOW_CYCLES,
              warmup: int = DEFAULT_WARMUP_CYCLES,
              timing: TimingParams | None = None,
              amap: AddressMap | None = None,
              seed: int = 1, clocks=None, widths=None,
              log_commands: bool = False, trace: bool = False,
              integrity: bool = False):
    """Run one configuration and return (rows, system)."""
    timing = timing or load_timing("ddr3-sockit-300")
    amap = amap or address_map_from_geometry(8, 1 << 15, 1 << 8)
    regs = build_streaming_registers(amap, bank_assignment, bc,
                                     directions=directions, clocks=clocks,
                                     widths=widths)
    system = MpmcSystem(regs, timing, policy=policy, log_commands=log_commands,
                        trace=trace)

    n = len(bank_assignment)
    read_regions: list[tuple[int, int]] = []
    for port in range(n):
        pc = regs.port(port)
        ratio = pc.pack_ratio
        width = pc.data_width_bits
        if WRITE in directions:
            sa_w = regs.regs(port, WRITE).sa
            payload = None
            if integrity:
                def payload(idx, sa=sa_w, r=ratio, w=width, s=seed):
                    word = prf_word(s, sa + idx // r)
                    return (word >> ((idx % r) * w)) & ((1 << w) - 1)
            system.add_write_source(port, payload_fn=payload)
        if READ in directions:
            expect = None
            if integrity:
                sa_r, ea_r = regs.regs(port, READ).sa, regs.regs(port, READ).ea
                read_regions.append((sa_r, ea_r))

                def expect(idx, sa=sa_r, r=ratio, w=width, s=seed):
                    word = prf_word(s, sa + idx // r)
                    return (word >> ((idx % r) * w)) & ((1 << w) - 1)
            system.add_read_sink(port, expect_fn=expect)
    if read_regions:
        # Read regions carry reproducible pre-image content, generated lazily
        # so huge regions cost nothing up front.
        def background(addr, regions=tuple(read_regions), s=seed):
            for sa, ea in regions:
                if sa <= addr < ea:
                    return prf_word(s, addr)
            return POISON_WORD

        system.device.background_fn = background

    system.run(warmup + cycles)
    if system.exhausted_ports():
        raise HarnessError(
            f"{name}: ports exhausted their regions mid-run: {system.exhausted_ports()}")
    rows = summarize(system, experiment=experiment, name=name, n=n, bc=bc,
                     policy=policy, warmup=warmup, cycles=cycles)
    return rows, system


def _percentile(sorted_values, q: float) -> float:
    if not sorted_values:
        return 0.0
    idx = min(len(sorted_values) - 1, int(q * len(sorted_values)))
    return sorted_values[idx]


def summarize(system: MpmcSystem, *, experiment: str, name: str, n: int,
              bc: int, policy: str, warmup: int, cycles: int) -> list[EffReport]:
    ctrl = system.ctrl_domain
    w_start = ctrl.edge_tick(warmup)
    w_end = ctrl.edge_tick(warmup + cycles)
    useful, slots = system.useful_beats(w_start, w_end)
    peak = theoretical_gbps(system.timing)

    lat_first: dict[int, list[float]] = {}
    lat_last: dict[int, list[float]] = {}
    for req in system.metrics.requests:
        if not (w_start <= req.enqueue_tick < w_end) or req.first_word_tick < 0:
            continue
        lat_first.setdefault(req.port, []).append((req.first_word_tick - req.enqueue_tick) / 1000.0)
        lat_last.setdefault(req.port, []).append((req.last_word_tick - req.enqueue_tick) / 1000.0)

    rows = []
    total_beats = 0
    all_first: list[float] = []
    all_last: list[float] = []
    for port in range(n):
        beats = sum(v for (p, _d), v in useful.items() if p == port)
        total_beats += beats
        lf = sorted(lat_first.get(port, []))
        ll = sorted(lat_last.get(port, []))
        all_first.extend(lf)
        all_last.extend(ll)
        eff = 100.0 * beats / slots if slots else 0.0
        rows.append(EffReport(
            experiment=experiment, name=name, N=n, BC=bc, policy=policy,
            port=str(port), achieved_gbps=peak * eff / 100.0, eff_percent=eff,
            words=beats // BEATS_PER_WORD,
            lat_first_mean_ns=sum(lf) / len(lf) if lf else 0.0,
            lat_first_p95_ns=_percentile(lf, 0.95),
            lat_last_mean_ns=sum(ll) / len(ll) if ll else 0.0,
            lat_last_p95_ns=_percentile(ll, 0.95),
        ))
    all_first.sort()
    all_last.sort()
    eff = 100.0 * total_beats / slots if slots else 0.0
    rows.append(EffReport(
        experiment=experiment, name=name, N=n, BC=bc, policy=policy,
        port="all", achieved_gbps=peak * eff / 100.0, eff_percent=eff,
        words=total_beats // BEATS_PER_WORD,
        lat_first_mean_ns=sum(all_first) / len(all_first) if all_first else 0.0,
        lat_first_p95_ns=_percentile(all_first, 0.95),
        lat_last_mean_ns=sum(all_last) / len(all_last) if all_last else 0.0,
        lat_last_p95_ns=_percentile(all_last, 0.95),
    ))
    return rows


def aggregate_eff(rows: list[EffReport]) -> float:
    for row in rows:
        if row.port == "all":
            return row.eff_percent
    raise HarnessError("no aggregate row")


# -- experiments -----------------------------------------------------------

def peak_bank_assignment(n: int, num_banks: int = 8):
    """Consecutive ports on different banks."""
    return tuple(p % min(n, num_banks) if num_banks >= 2 else 0 for p in range(n))


def run_bank_experiment(exp: str, bc_list=PEAK_BC_LIST, *, cycles=DEFAULT_WINDOW_CYCLES,
                        warmup=DEFAULT_WARMUP_CYCLES, timing=None, amap=None,
                        seed=1, policy_override=None, point_hook=None, **kw):
    if exp not in EXPERIMENT_BANKS:
        raise HarnessError(f"unknown experiment {exp!r}")
    policy = policy_override or (FCFS if exp == "expd" else WFCFS)
    rows: list[EffReport] = []
    eff: dict[int, float] = {}
    for bc in bc_list:
        name = f"N4_BC{bc}"
        point, system = run_point(experiment=exp, name=name,
                                  bank_assignment=EXPERIMENT_BANKS[exp], bc=bc,
                                  policy=policy, cycles=cycles, warmup=warmup,
                                  timing=timing, amap=amap, seed=seed, **kw)
        eff[bc] = aggregate_eff(point)
        rows.extend(point)
        if point_hook:
            point_hook(f"{exp}_{name}", system)
    return rows, eff


def run_peak_sweep(n_list=PEAK_N_LIST, bc_list=PEAK_BC_LIST, *,
                   cycles=DEFAULT_WINDOW_CYCLES, warmup=DEFAULT_WARMUP_CYCLES,
                   timing=None, amap=None, seed=1, policy=WFCFS,
                   point_hook=None, **kw):
    rows: list[EffReport] = []
    eff: dict[tuple[int, int], float] = {}
    for n in n_list:
        for bc in bc_list:
            name = f"N{n}_BC{bc}"
            point, system = run_point(experiment="peak", name=name,
                                      bank_assignment=peak_bank_assignment(n), bc=bc,
                                      policy=policy, cycles=cycles, warmup=warmup,
                                      timing=timing, amap=amap, seed=seed, **kw)
            eff[(n, bc)] = aggregate_eff(point)
            rows.extend(point)
            if point_hook:
                point_hook(f"peak_{name}", system)
    return rows, eff


def run_rw_asymmetry(n_list=(32,), bc_list=(64,), *, cycles=DEFAULT_WINDOW_CYCLES,
                     warmup=DEFAULT_WARMUP_CYCLES, timing=None, amap=None,
                     seed=1, point_hook=None, **kw):
    """Pure-write vs pure-read streaming; returns (rows, {(n, bc): (wr, rd)})."""
    rows: list[EffReport] = []
    eff: dict[tuple[int, int], tuple[float, float]] = {}
    for n in n_list:
        for bc in bc_list:
            pair = []
            for direction, tag in ((WRITE, "write"), (READ, "read")):
                name = f"N{n}_BC{bc}_{tag}"
                point, system = run_point(
                    experiment="rw", name=name,
                    bank_assignment=peak_bank_assignment(n), bc=bc,
                    policy=WFCFS, directions=(direction,), cycles=cycles,
                    warmup=warmup, timing=timing, amap=amap, seed=seed, **kw)
                pair.append(aggregate_eff(point))
                rows.extend(point)
                if point_hook:
                    point_hook(f"rw_{name}", system)
            eff[(n, bc)] = (pair[0], pair[1])
    return rows, eff


# -- CSV -------------------------------------------------------------------

def emit_csv(rows: list[EffReport], path: str) -> None:
    """Deterministic delimited output: header plus one row per report line."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([
                row.experiment, row.name, row.N, row.BC, row.policy, row.port,
                f"{row.achieved_gbps:.4f}", f"{row.eff_percent:.4f}", row.words,
                f"{row.lat_first_mean_ns:.2f}", f"{row.lat_first_p95_ns:.2f}",
                f"{row.lat_last_mean_ns:.2f}", f"{row.lat_last_p95_ns:.2f}",
            ])


def parse_csv(path: str) -> list[EffReport]:
    out = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != CSV_COLUMNS:
            raise HarnessError(f"unexpected CSV header in {path}")
        for rec in reader:
            out.append(EffReport(
                experiment=rec["experiment"], name=rec["name"], N=int(rec["N"]),
                BC=int(rec["BC"]), policy=rec["policy"], port=rec["port"],
                achieved_gbps=float(rec["achieved_gbps"]),
                eff_percent=float(rec["eff_percent"]), words=int(rec["words"]),
                lat_first_mean_ns=float(rec["lat_first_mean_ns"]),
                lat_first_p95_ns=float(rec["lat_first_p95_ns"]),
                lat_last_mean_ns=float(rec["lat_last_mean_ns"]),
                lat_last_p95_ns=float(rec["lat_last_p95_ns"]),
            ))
    return out


def dump_command_log(system: MpmcSystem, path: str) -> None:
    """One line per command: tick kind bank row col (oracle replay format)."""
    log = system.device.command_log
    if log is None:
        raise HarnessError("run was started without command logging")
    tck = system.timing.tck_ps
    with open(path, "w") as f:
        for cycle, kind, bank, row, col in log:
            f.write(f"{cycle * tck} {kind} {bank} {row} {col}\n")


def dump_arbitration_trace(system: MpmcSystem, path: str) -> None:
    """One line per serviced request: tick port direction address bc window."""
    trace = system.arbiter.trace
    if trace is None:
        raise HarnessError("run was started without arbitration tracing")
    with open(path, "w") as f:
        for tick, port, direction, addr, bc, window in trace:
            f.write(f"{tick} {port} {direction} {addr} {bc} {window}\n")
