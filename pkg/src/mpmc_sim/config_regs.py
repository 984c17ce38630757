"""Controller configuration registers and address mapping.

Holds the per-port, per-direction transfer descriptors (start / end / current
address and burst count), the current-address update applied on every grant,
and the linear-word-address to (bank, row, column) mapping that realizes the
bank-interleaving assignments.

Addresses are in controller-word units.  The controller word is 128 bits =
four 32-bit memory beats, so that 150 MHz x 128 b matches the DDR3 device's
19.2 Gbps theoretical bandwidth.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

CONTROLLER_WORD_BITS = 128
MAX_PORTS = 32
MAX_BC = 64

READ = "read"
WRITE = "write"
DIRECTIONS = (READ, WRITE)


class ConfigError(Exception):
    """Rejected configuration (out-of-range BC, SA > EA, bad geometry...)."""


@dataclass
class AddressMap:
    """Bit-field split of a controller-word address into row/bank/column.

    `col_bits` counts column bits at controller-word granularity.  With the
    default (bank, row, col) order the bank bits sit at the top of the
    address, so a port's whole region can be pinned to one bank just by
    choosing its start address.
    """

    col_bits: int
    bank_bits: int
    row_bits: int
    order: tuple[str, str, str] = ("bank", "row", "col")

    def __post_init__(self):
        if sorted(self.order) != ["bank", "col", "row"]:
            raise ConfigError(f"order must be a permutation of bank/row/col, got {self.order}")
        if min(self.col_bits, self.bank_bits, self.row_bits) < 0:
            raise ConfigError("negative bit-field width")

    @property
    def total_bits(self) -> int:
        return self.col_bits + self.bank_bits + self.row_bits

    @property
    def capacity_words(self) -> int:
        return 1 << self.total_bits

    def _widths(self) -> dict[str, int]:
        return {"col": self.col_bits, "bank": self.bank_bits, "row": self.row_bits}

    def decode(self, addr: int) -> tuple[int, int, int]:
        """Word address -> (bank, row, col)."""
        if not (0 <= addr < self.capacity_words):
            raise ConfigError(f"address {addr:#x} outside device capacity")
        widths = self._widths()
        fields = {}
        shift = 0
        for name in reversed(self.order):  # least-significant field first
            w = widths[name]
            fields[name] = (addr >> shift) & ((1 << w) - 1)
            shift += w
        return fields["bank"], fields["row"], fields["col"]

    def encode(self, bank: int, row: int, col: int) -> int:
        widths = self._widths()
        values = {"bank": bank, "row": row, "col": col}
        addr = 0
        for name in self.order:  # most-significant field first
            w = widths[name]
            if not (0 <= values[name] < (1 << w)):
                raise ConfigError(f"{name}={values[name]} does not fit in {w} bits")
            addr = (addr << w) | values[name]
        return addr

    def row_span_words(self) -> int:
        """Contiguous words sharing (bank, row) under this order."""
        if self.order[-1] != "col":
            return 1
        return 1 << self.col_bits


@dataclass
class TransferRegs:
    """SA/EA/CA/BC for one (port, direction)."""

    sa: int
    ea: int
    bc: int
    ca: int = field(init=False)
    started: bool = field(init=False, default=False)

    def __post_init__(self):
        self.ca = self.sa


@dataclass
class PortConfig:
    port: int
    regs: dict[str, TransferRegs] = field(default_factory=dict)
    clock_mhz: float = 150.0
    data_width_bits: int = CONTROLLER_WORD_BITS

    @property
    def pack_ratio(self) -> int:
        """Port entries per controller word."""
        return CONTROLLER_WORD_BITS // self.data_width_bits


class ConfigRegisters:
    """The register file: per-port transfer descriptors plus the address map."""

    def __init__(self, address_map: AddressMap, num_ports: int):
        if not (1 <= num_ports <= MAX_PORTS):
            raise ConfigError(f"port count {num_ports} outside [1, {MAX_PORTS}]")
        self.address_map = address_map
        self.num_ports = num_ports
        self.ports: dict[int, PortConfig] = {}

    def port(self, port: int) -> PortConfig:
        if port not in self.ports:
            self.ports[port] = PortConfig(port)
        return self.ports[port]

    def load_config(self, port: int, direction: str, sa: int, ea: int, bc: int) -> None:
        if direction not in DIRECTIONS:
            raise ConfigError(f"unknown direction {direction!r}")
        if not (1 <= bc <= MAX_BC):
            raise ConfigError(f"BC={bc} outside [1, {MAX_BC}]")
        if sa > ea:
            raise ConfigError(f"SA={sa:#x} > EA={ea:#x}")
        cap = self.address_map.capacity_words
        if ea >= cap + bc:
            raise ConfigError(f"EA={ea:#x} beyond device capacity ({cap:#x} words)")
        if sa >= cap:
            raise ConfigError(f"SA={sa:#x} beyond device capacity")
        if not (0 <= port < self.num_ports):
            raise ConfigError(f"port {port} outside [0, {self.num_ports})")
        self.port(port).regs[direction] = TransferRegs(sa=sa, ea=ea, bc=bc)

    def regs(self, port: int, direction: str) -> TransferRegs:
        try:
            return self.ports[port].regs[direction]
        except KeyError:
            raise AssertionError(f"port {port} {direction} was never configured") from None

    def has_pending(self, port: int, direction: str) -> bool:
        r = self.ports.get(port)
        if r is None or direction not in r.regs:
            return False
        t = r.regs[direction]
        return (not t.started) or t.ca < t.ea

    def advance_ca(self, port: int, direction: str) -> tuple[int, bool]:
        """Apply one grant: returns (granted start address, finished-after)."""
        t = self.regs(port, direction)
        if not t.started:
            t.started = True
            granted = t.ca
            t.ca += t.bc
        elif t.ca < t.ea:
            granted = t.ca
            t.ca += t.bc
        else:
            return t.ca, True
        return granted, t.ca >= t.ea

    def decode_address(self, addr: int) -> tuple[int, int, int]:
        return self.address_map.decode(addr)


def expand_transaction(address_map: AddressMap, start_word: int,
                       word_count: int) -> list[tuple[int, int, int, int]]:
    """Split one granted transaction into row-local column-command spans.

    Returns (bank, row, col_start_word, word_count) tuples in address order;
    each span stays inside one row.  The DRAM model turns each span into
    ceil(span_beats / burst_beats) column commands.
    """
    assert word_count >= 1
    spans = []
    row_span = address_map.row_span_words()
    addr = start_word
    remaining = word_count
    while remaining > 0:
        bank, row, col = address_map.decode(addr)
        in_row = row_span - (addr % row_span) if row_span > 1 else 1
        take = min(remaining, in_row)
        spans.append((bank, row, col, take))
        addr += take
        remaining -= take
    total = sum(s[3] for s in spans)
    assert total == word_count
    return spans


# -- configuration file ----------------------------------------------------

DEFAULT_GEOMETRY = {"banks": 8, "rows": 1 << 15, "cols_words": 1 << 8}


def address_map_from_geometry(banks: int, rows: int, cols_words: int,
                              order: tuple[str, str, str] = ("bank", "row", "col")) -> AddressMap:
    def log2_exact(n, what):
        if n < 1 or n & (n - 1):
            raise ConfigError(f"{what}={n} must be a power of two")
        return n.bit_length() - 1

    return AddressMap(
        col_bits=log2_exact(cols_words, "cols_words"),
        bank_bits=log2_exact(banks, "banks"),
        row_bits=log2_exact(rows, "rows"),
        order=order,
    )


def parse_config_file(path: str) -> dict:
    """Parse and validate an INI-style config file.

    Sections: [memory] (geometry, address-map order, timing preset),
    [port.N] (sa/ea/bc per direction, clock, width), optional [experiment].
    Returns a plain dict; raises ConfigError on any invalid value.
    """
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")

    out: dict = {"memory": {}, "ports": {}, "experiment": {}}

    mem = cp["memory"] if cp.has_section("memory") else {}
    geometry = dict(DEFAULT_GEOMETRY)
    for key in ("banks", "rows", "cols_words"):
        if key in mem:
            geometry[key] = int(mem[key])
    order_name = mem.get("bank_order", "bank-row-col") if mem else "bank-row-col"
    try:
        order = tuple(order_name.split("-"))
        amap = address_map_from_geometry(geometry["banks"], geometry["rows"],
                                         geometry["cols_words"], order)  # type: ignore[arg-type]
    except (ConfigError, ValueError) as e:
        raise ConfigError(f"[memory]: {e}") from None
    out["memory"] = {"geometry": geometry, "order": order, "address_map": amap,
                     "timing": mem.get("timing", "ddr3-sockit-300") if mem else "ddr3-sockit-300"}

    port_ids = []
    for section in cp.sections():
        if not section.startswith("port."):
            continue
        try:
            pid = int(section.split(".", 1)[1])
        except ValueError:
            raise ConfigError(f"bad port section name [{section}]") from None
        port_ids.append(pid)
        s = cp[section]
        try:
            port = {
                "sa_read": int(s.get("sa_read", "0"), 0),
                "ea_read": int(s.get("ea_read", "0"), 0),
                "bc_read": int(s.get("bc_read", "8")),
                "sa_write": int(s.get("sa_write", "0"), 0),
                "ea_write": int(s.get("ea_write", "0"), 0),
                "bc_write": int(s.get("bc_write", "8")),
                "clock_mhz": float(s.get("clock_mhz", "150")),
                "data_width_bits": int(s.get("data_width_bits", "128")),
            }
        except ValueError as e:
            raise ConfigError(f"[{section}]: {e}") from None
        if port["data_width_bits"] not in (8, 16, 32, 64, 128):
            raise ConfigError(f"[{section}]: unsupported data width {port['data_width_bits']}")
        if CONTROLLER_WORD_BITS % port["data_width_bits"]:
            raise ConfigError(f"[{section}]: width must divide the controller word")
        if port["clock_mhz"] <= 0:
            raise ConfigError(f"[{section}]: clock_mhz must be positive")
        out["ports"][pid] = port

    if port_ids:
        n = max(port_ids) + 1
        if n > MAX_PORTS:
            raise ConfigError(f"port id {max(port_ids)} exceeds maximum {MAX_PORTS - 1}")
        regs = ConfigRegisters(amap, n)
        for pid, port in out["ports"].items():
            pc = regs.port(pid)
            pc.clock_mhz = port["clock_mhz"]
            pc.data_width_bits = port["data_width_bits"]
            for d, key in ((READ, "read"), (WRITE, "write")):
                regs.load_config(pid, d, port[f"sa_{key}"], port[f"ea_{key}"], port[f"bc_{key}"])
        out["registers"] = regs

    if cp.has_section("experiment"):
        s = cp["experiment"]
        out["experiment"] = {k: s[k] for k in s}

    return out
