"""Timing-accurate DDR3 device model and protocol checker.

All scheduling inside this module is in integer memory-clock cycles; the
data bus is tracked at beat granularity (two beats per memory cycle).  The
model is self-checking: `issue()` recomputes the earliest legal cycle for
every command and treats any mismatch as a fatal protocol error, so a run
that completes has, by construction, a legal command stream.  An independent
brute-force checker in the test suite replays the command log as redundancy.

A sparse backing store keyed by controller-word address gives end-to-end
data integrity; unwritten locations read as a fixed poison pattern.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from importlib import resources

from .config_regs import AddressMap, expand_transaction

ACT, PRE, RD, WR, REF = "ACT", "PRE", "RD", "WR", "REF"

BEAT_BITS = 32
BEATS_PER_WORD = 4  # 128-bit controller word on a 32-bit DDR3 bus
POISON_BEAT = 0xDEADBEEF
POISON_WORD = sum(POISON_BEAT << (BEAT_BITS * i) for i in range(BEATS_PER_WORD))


class ProtocolError(Exception):
    """A command was issued at an illegal cycle; names the violated constraint."""


@dataclass(frozen=True)
class TimingParams:
    """DDR3 timing set, normalized to memory-clock cycles (tCK in ps)."""

    tck_ps: int
    cl: int
    cwl: int
    bl: int
    tccd: int
    trcd: int
    trp: int
    tras: int
    trc: int
    trtp: int
    twr: int
    twtr: int
    trrd: int
    tfaw: int
    trefi: int
    trfc: int

    def __post_init__(self):
        if self.trc < self.tras + self.trp:
            raise ValueError("tRC must be >= tRAS + tRP")
        if self.tras < self.trcd:
            raise ValueError("tRAS must be >= tRCD")
        for name in ("tck_ps", "cl", "cwl", "bl", "tccd", "trcd", "trp", "tras",
                     "trc", "trtp", "twr", "twtr", "trrd", "tfaw", "trefi", "trfc"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    # Bus-turnaround command spacings per the standard DDR3 equations.
    @property
    def rd_to_wr(self) -> int:
        return self.cl - self.cwl + self.bl // 2 + 2

    @property
    def wr_to_rd(self) -> int:
        return self.cwl + self.bl // 2 + self.twtr

    @property
    def wr_to_pre(self) -> int:
        return self.cwl + self.bl // 2 + self.twr


_CYCLE_FIELDS = {"cl", "cwl", "bl", "tccd", "trcd", "trp", "tras", "trc",
                 "trtp", "twr", "twtr", "trrd", "tfaw", "trefi", "trfc"}


def parse_timing_text(text: str) -> TimingParams:
    """Parse a flat key/value timing file (`name value unit` per line).

    Units: ps (tck only), ck (cycles), ns (converted with ceiling), plus
    optional `<name>_min_ck` lines giving a cycle floor for ns values.
    """
    raw: dict[str, tuple[float, str]] = {}
    mins: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace("=", " ").split()
        if len(parts) not in (2, 3):
            raise ValueError(f"timing line {lineno}: expected 'name value [unit]'")
        name = parts[0].lower()
        value = float(parts[1])
        unit = parts[2].lower() if len(parts) == 3 else "ck"
        if name.endswith("_min_ck"):
            mins[name[:-7]] = int(value)
        else:
            raw[name] = (value, unit)

    if "tck" not in raw:
        raise ValueError("timing file must define tck")
    tck_value, tck_unit = raw.pop("tck")
    if tck_unit == "ps":
        tck_ps = int(tck_value)
    elif tck_unit == "ns":
        tck_ps = int(round(tck_value * 1000))
    else:
        raise ValueError("tck unit must be ps or ns")

    fields: dict[str, int] = {"tck_ps": tck_ps}
    for name, (value, unit) in raw.items():
        if name not in _CYCLE_FIELDS:
            raise ValueError(f"unknown timing parameter {name!r}")
        if unit in ("ck", "beats"):
            cycles = int(value)
        elif unit == "ns":
            ps = value * 1000
            rounder = math.floor if name == "trefi" else math.ceil
            cycles = int(rounder(ps / tck_ps))
        else:
            raise ValueError(f"{name}: unknown unit {unit!r}")
        fields[name] = max(cycles, mins.get(name, 1))
    missing = _CYCLE_FIELDS - fields.keys()
    if missing:
        raise ValueError(f"timing file missing parameters: {sorted(missing)}")
    return TimingParams(**fields)


def load_timing(name_or_path: str) -> TimingParams:
    """Load a named preset from package data, or a timing file from disk."""
    preset = resources.files("mpmc_sim").joinpath("timings", f"{name_or_path}.txt")
    if preset.is_file():
        return parse_timing_text(preset.read_text())
    with open(name_or_path) as f:
        return parse_timing_text(f.read())


class _Bank:
    __slots__ = ("open_row", "next_act", "next_pre", "next_rd", "next_wr", "last_act")

    def __init__(self):
        self.open_row = None
        self.next_act = 0
        self.next_pre = 0
        self.next_rd = 0
        self.next_wr = 0
        self.last_act = -(10 ** 9)


class DramDevice:
    """One DDR3 device behind the controller: banks, buses, refresh, store."""

    def __init__(self, timing: TimingParams, address_map: AddressMap,
                 log_commands: bool = False):
        self.timing = timing
        self.address_map = address_map
        self.num_banks = 1 << address_map.bank_bits
        self.banks = [_Bank() for _ in range(self.num_banks)]
        # Single command bus, one command per edge.  Kept as a set of occupied
        # cycles (not a high-water mark) so row preparation for the next
        # transaction can slot into gaps between an earlier transaction's
        # commands -- that overlap is what makes bank interleaving pay off.
        self.cmd_cycles: set[int] = set()
        self.next_cas = 0          # tCCD, either direction
        self.rd_allowed = 0        # write-to-read turnaround
        self.wr_allowed = 0        # read-to-write turnaround
        self.next_act_any = 0      # tRRD
        self.act_hist: deque[int] = deque(maxlen=4)  # tFAW window
        self.bus_free_beat = 0
        self.last_ref_cycle = 0
        self.command_log: list[tuple[int, str, int, int, int]] | None = (
            [] if log_commands else None
        )
        # Aggregate counters always kept; per-reservation detail optional.
        self.reservations: list[tuple[int, int, str, int, int]] = []
        self._store: dict[int, int] = {}
        # Optional generator for never-written locations (lazy pre-image for
        # soak runs); falls back to the poison pattern.
        self.background_fn = None

    # -- command scheduling ------------------------------------------------

    def beat_tick(self, beat: int) -> int:
        """Tick at which the data of beat slot `beat` has transferred."""
        return (beat + 1) * self.timing.tck_ps // 2

    def cycle_at_or_after(self, tick: int) -> int:
        return -(-tick // self.timing.tck_ps)

    def legal_issue_cycle(self, kind: str, bank: int, row: int | None = None,
                          at_or_after: int = 0) -> int:
        t = self.timing
        b = self.banks[bank] if kind != REF else None
        c = at_or_after
        if kind == ACT:
            c = max(c, b.next_act, self.next_act_any)
            if len(self.act_hist) == 4:
                c = max(c, self.act_hist[0] + t.tfaw)
        elif kind == PRE:
            c = max(c, b.next_pre)
        elif kind == RD:
            c = max(c, b.next_rd, self.next_cas, self.rd_allowed,
                    -(-self.bus_free_beat // 2) - t.cl)
        elif kind == WR:
            c = max(c, b.next_wr, self.next_cas, self.wr_allowed,
                    -(-self.bus_free_beat // 2) - t.cwl)
        elif kind == REF:
            c = max(c, max(bk.next_act for bk in self.banks))
        else:
            raise ValueError(f"unknown command kind {kind!r}")
        while c in self.cmd_cycles:
            c += 1
        return c

    def _check(self, kind: str, bank: int, row: int | None, cycle: int):
        legal = self.legal_issue_cycle(kind, bank, row, at_or_after=cycle)
        if legal != cycle:
            raise ProtocolError(
                f"{kind} bank={bank} issued at cycle {cycle}, earliest legal {legal}"
            )
        if kind == ACT and self.banks[bank].open_row is not None:
            raise ProtocolError(f"ACT to bank {bank} with row {self.banks[bank].open_row} open")
        if kind in (RD, WR):
            if self.banks[bank].open_row != row:
                raise ProtocolError(
                    f"{kind} bank={bank} row={row} but open row is {self.banks[bank].open_row}"
                )
        if kind == REF:
            for i, bk in enumerate(self.banks):
                if bk.open_row is not None:
                    raise ProtocolError(f"REF with bank {i} row {bk.open_row} open")

    def issue(self, kind: str, bank: int, cycle: int, row: int | None = None,
              col: int = 0, port: int = -1, useful_beats: int = 0,
              direction: str | None = None) -> tuple[int, int]:
        """Issue one command; returns (start_beat, n_beats) for RD/WR.

        `col` is the column address in controller-word units; a RD/WR moves
        one BL burst (bl beats) on the data bus.
        """
        self._check(kind, bank, row, cycle)
        t = self.timing
        b = self.banks[bank] if kind != REF else None
        self.cmd_cycles.add(cycle)
        if len(self.cmd_cycles) > 8192:
            # New commands are always placed at or after the current
            # transaction's start cycle, so far-past slots can be dropped.
            horizon = cycle - 512
            self.cmd_cycles = {c for c in self.cmd_cycles if c >= horizon}
        beats = (0, 0)
        if kind == ACT:
            b.open_row = row
            b.last_act = cycle
            b.next_rd = max(b.next_rd, cycle + t.trcd)
            b.next_wr = max(b.next_wr, cycle + t.trcd)
            b.next_pre = max(b.next_pre, cycle + t.tras)
            b.next_act = max(b.next_act, cycle + t.trc)
            self.next_act_any = max(self.next_act_any, cycle + t.trrd)
            self.act_hist.append(cycle)
        elif kind == PRE:
            b.open_row = None
            b.next_act = max(b.next_act, cycle + t.trp)
        elif kind in (RD, WR):
            self.next_cas = cycle + t.tccd
            latency = t.cl if kind == RD else t.cwl
            start_beat = 2 * (cycle + latency)
            assert start_beat >= self.bus_free_beat, "data bus slot collision"
            self.bus_free_beat = start_beat + t.bl
            beats = (start_beat, t.bl)
            if kind == RD:
                b.next_pre = max(b.next_pre, cycle + t.trtp)
                self.wr_allowed = max(self.wr_allowed, cycle + t.rd_to_wr)
            else:
                b.next_pre = max(b.next_pre, cycle + t.wr_to_pre)
                self.rd_allowed = max(self.rd_allowed, cycle + t.wr_to_rd)
            self.reservations.append(
                (start_beat, t.bl, direction or kind.lower(), port, useful_beats))
        elif kind == REF:
            for bk in self.banks:
                bk.next_act = max(bk.next_act, cycle + t.trfc)
            self.last_ref_cycle = cycle
        if self.command_log is not None:
            self.command_log.append((cycle, kind, bank, row if row is not None else -1, col))
        return beats

    # -- refresh -----------------------------------------------------------

    def refresh_due(self, cycle: int) -> bool:
        return cycle >= self.last_ref_cycle + self.timing.trefi

    def perform_refresh(self, at_cycle: int) -> int:
        """Close all banks, refresh, return the cycle when banks are usable."""
        for bank in range(self.num_banks):
            if self.banks[bank].open_row is not None:
                c = self.legal_issue_cycle(PRE, bank, at_or_after=at_cycle)
                self.issue(PRE, bank, c)
        c = self.legal_issue_cycle(REF, 0, at_or_after=at_cycle)
        self.issue(REF, 0, c)
        return c + self.timing.trfc

    # -- backing store -----------------------------------------------------

    def write_backing(self, word_addr: int, value: int) -> None:
        self._store[word_addr] = value

    def read_backing(self, word_addr: int) -> int:
        value = self._store.get(word_addr)
        if value is not None:
            return value
        if self.background_fn is not None:
            return self.background_fn(word_addr)
        return POISON_WORD

    def write_beat(self, beat_addr: int, value: int) -> None:
        word, lane = divmod(beat_addr, BEATS_PER_WORD)
        mask = (1 << BEAT_BITS) - 1
        shift = BEAT_BITS * lane
        self._store[word] = (self.read_backing(word) & ~(mask << shift)) | ((value & mask) << shift)

    def read_beat(self, beat_addr: int) -> int:
        word, lane = divmod(beat_addr, BEATS_PER_WORD)
        return (self.read_backing(word) >> (BEAT_BITS * lane)) & ((1 << BEAT_BITS) - 1)


class TransactionIssuer:
    """Turns one granted transaction into a legal DDR3 command sequence.

    Opens and closes rows on demand (open-row policy with precharge only on
    a row miss) and returns per-word completion beats so the arbiter can
    time the data paths.
    """

    def __init__(self, device: DramDevice):
        self.device = device

    def issue_transaction(self, direction: str, start_word: int, word_count: int,
                          port: int, at_cycle: int,
                          wr_word_ready_cycles: list[int] | None = None,
                          cas_at_or_after: int = 0):
        """Issue all commands for a transaction.

        `wr_word_ready_cycles[i]` is the earliest cycle at which write word i
        has been staged from the port FIFO.  A WR command may lead its data:
        the beats of burst word j are consumed CWL + j * beats/2 cycles after
        the command, so staging only has to stay ahead of that deadline.
        `cas_at_or_after` floors only the column commands (row preparation may
        still run early); the arbiter uses it for the write-datapath re-arm.

        Returns (last_cmd_cycle, first_cas_cycle, word_end_beats) where
        word_end_beats[i] is the beat slot completing word (start_word + i)
        on the bus and first_cas_cycle is when the data phase began.
        """
        dev = self.device
        t = dev.timing
        kind = RD if direction == "read" else WR
        burst_words = t.bl // BEATS_PER_WORD
        spans = expand_transaction(dev.address_map, start_word, word_count)
        word_end_beats: list[int] = []
        last_cmd = at_cycle
        first_cas: int | None = None
        wi = 0  # word index within the transaction
        for bank, row, col, span_words in spans:
            b = dev.banks[bank]
            if b.open_row != row:
                if b.open_row is not None:
                    c = dev.legal_issue_cycle(PRE, bank, at_or_after=at_cycle)
                    dev.issue(PRE, bank, c)
                    last_cmd = max(last_cmd, c)
                c = dev.legal_issue_cycle(ACT, bank, row, at_or_after=at_cycle)
                dev.issue(ACT, bank, c, row=row)
                last_cmd = max(last_cmd, c)
            done = 0
            while done < span_words:
                # Column commands are aligned to the BL burst; a partial
                # burst still occupies all bl beats on the bus.
                cmd_word = (start_word + wi) - ((start_word + wi) % burst_words)
                in_burst = burst_words - ((start_word + wi) - cmd_word)
                take = min(span_words - done, in_burst)
                burst_off = (start_word + wi) - cmd_word
                floor = max(at_cycle, cas_at_or_after)
                if kind == WR and wr_word_ready_cycles is not None:
                    wpc = BEATS_PER_WORD // 2  # bus cycles per word
                    floor = max([floor] + [
                        wr_word_ready_cycles[wi + k] - t.cwl - (burst_off + k) * wpc
                        for k in range(take)])
                c = dev.legal_issue_cycle(kind, bank, row, at_or_after=floor)
                start_beat, _ = dev.issue(
                    kind, bank, c, row=row, col=cmd_word, port=port,
                    useful_beats=take * BEATS_PER_WORD, direction=direction)
                last_cmd = max(last_cmd, c)
                if first_cas is None:
                    first_cas = c
                for k in range(take):
                    end_beat = start_beat + (burst_off + k + 1) * BEATS_PER_WORD - 1
                    word_end_beats.append(end_beat)
                done += take
                wi += take
        assert len(word_end_beats) == word_count and first_cas is not None
        return last_cmd, first_cas, word_end_beats
