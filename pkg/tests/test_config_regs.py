"""Register-file tests: the current-address recurrence against a scalar-loop
oracle, address-map round-trips, transaction expansion, and config parsing."""

import random

import pytest

from mpmc_sim.config_regs import (
    READ, WRITE, AddressMap, ConfigError, ConfigRegisters,
    address_map_from_geometry, expand_transaction, parse_config_file)


def make_regs(num_ports=4, **geometry):
    geo = {"banks": 8, "rows": 1 << 15, "cols_words": 1 << 8, **geometry}
    return ConfigRegisters(address_map_from_geometry(**geo), num_ports)


# -- load_config ------------------------------------------------------------

def test_load_sets_ca_to_sa():
    regs = make_regs()
    regs.load_config(0, READ, sa=0, ea=1024, bc=8)
    assert regs.regs(0, READ).ca == 0


def test_load_rejections():
    regs = make_regs()
    with pytest.raises(ConfigError):
        regs.load_config(0, READ, sa=0, ea=1024, bc=65)
    with pytest.raises(ConfigError):
        regs.load_config(0, READ, sa=0, ea=1024, bc=0)
    with pytest.raises(ConfigError):
        regs.load_config(0, READ, sa=200, ea=100, bc=4)
    with pytest.raises(ConfigError):
        regs.load_config(0, "sideways", sa=0, ea=8, bc=4)
    with pytest.raises(ConfigError):
        regs.load_config(9, READ, sa=0, ea=8, bc=4)
    cap = regs.address_map.capacity_words
    with pytest.raises(ConfigError):
        regs.load_config(0, READ, sa=cap, ea=cap + 8, bc=4)


def test_equal_sa_ea_leaves_one_transaction():
    regs = make_regs()
    regs.load_config(0, WRITE, sa=100, ea=100, bc=4)
    assert regs.has_pending(0, WRITE)
    granted, finished = regs.advance_ca(0, WRITE)
    assert granted == 100 and finished
    assert not regs.has_pending(0, WRITE)


def test_port_count_bounds():
    amap = address_map_from_geometry(8, 1 << 15, 1 << 8)
    with pytest.raises(ConfigError):
        ConfigRegisters(amap, 0)
    with pytest.raises(ConfigError):
        ConfigRegisters(amap, 33)
    ConfigRegisters(amap, 32)


def test_unconfigured_advance_is_fatal():
    regs = make_regs()
    with pytest.raises(AssertionError):
        regs.advance_ca(2, READ)


# -- the CA recurrence ------------------------------------------------------

def test_advance_examples():
    regs = make_regs()
    regs.load_config(0, READ, sa=0, ea=64, bc=8)
    granted, finished = regs.advance_ca(0, READ)
    assert granted == 0 and not finished
    assert regs.regs(0, READ).ca == 8

    regs.load_config(1, READ, sa=0, ea=32, bc=16)
    assert regs.advance_ca(1, READ) == (0, False)
    assert regs.regs(1, READ).ca == 16
    assert regs.advance_ca(1, READ) == (16, True)
    assert regs.regs(1, READ).ca == 32


def grant_oracle(sa: int, ea: int, bc: int):
    """Scalar loop mirroring the register update literally."""
    ca = sa
    grants = []
    started = False
    while (not started) or ca < ea:
        started = True
        grants.append(ca)
        ca += bc
    return grants, ca


def test_grant_count_matches_scalar_loop_oracle():
    rng = random.Random(42)
    regs = make_regs(num_ports=1)
    for _ in range(10_000):
        bc = rng.randint(1, 64)
        sa = rng.randrange(0, 1 << 20)
        ea = sa + rng.randrange(0, 1 << 12)
        grants, final_ca = grant_oracle(sa, ea, bc)
        direction = rng.choice((READ, WRITE))
        regs.load_config(0, direction, sa, ea, bc)
        got = []
        finished = False
        while not finished:
            granted, finished = regs.advance_ca(0, direction)
            got.append(granted)
        assert got == grants
        assert regs.regs(0, direction).ca == final_ca
        span = ea - sa
        assert len(got) == (1 if span == 0 else -(-span // bc))
        # Strictly increasing by exactly BC until finished.
        assert all(b - a == bc for a, b in zip(got, got[1:]))
        # Extra grants after finish leave CA unchanged.
        assert regs.advance_ca(0, direction) == (final_ca, True)


# -- address map ------------------------------------------------------------

def test_decode_trivial_and_bank_starts():
    amap = address_map_from_geometry(8, 1 << 15, 1 << 8)
    assert amap.decode(0) == (0, 0, 0)
    step = 1 << (amap.row_bits + amap.col_bits)
    for b in range(4):
        bank, row, col = amap.decode(b * step)
        assert (bank, row, col) == (b, 0, 0)


def test_encode_decode_round_trip():
    rng = random.Random(9)
    for order in (("bank", "row", "col"), ("row", "bank", "col"),
                  ("col", "bank", "row")):
        amap = AddressMap(col_bits=8, bank_bits=3, row_bits=15, order=order)
        for _ in range(100_000 // 3):
            addr = rng.randrange(amap.capacity_words)
            assert amap.encode(*amap.decode(addr)) == addr


def test_map_validation():
    with pytest.raises(ConfigError):
        AddressMap(col_bits=8, bank_bits=3, row_bits=15, order=("bank", "bank", "col"))
    with pytest.raises(ConfigError):
        AddressMap(col_bits=-1, bank_bits=3, row_bits=15)
    amap = AddressMap(col_bits=2, bank_bits=1, row_bits=2)
    with pytest.raises(ConfigError):
        amap.decode(1 << 5)
    with pytest.raises(ConfigError):
        amap.encode(2, 0, 0)
    with pytest.raises(ConfigError):
        address_map_from_geometry(banks=6, rows=4, cols_words=4)


def test_contiguous_region_stays_in_one_bank():
    amap = address_map_from_geometry(8, 1 << 15, 1 << 8)
    span = 1 << (amap.row_bits + amap.col_bits)
    start = 3 * span
    banks = {amap.decode(start + off)[0] for off in range(0, span, 977)}
    assert banks == {3}


# -- expand_transaction -----------------------------------------------------

def expansion_oracle(amap, start, count):
    """Group consecutive word addresses by (bank, row) by direct decode."""
    groups = []
    for addr in range(start, start + count):
        bank, row, col = amap.decode(addr)
        if groups and groups[-1][0] == (bank, row):
            groups[-1][1] += 1
        else:
            groups.append([(bank, row), 1, col])
    return [(br[0], br[1], c, n) for (br, n, c) in
            [(g[0], g[1], g[2]) for g in groups]]


def test_expand_within_one_row():
    amap = address_map_from_geometry(8, 1 << 15, 1 << 8)
    spans = expand_transaction(amap, 0, 4)
    assert spans == [(0, 0, 0, 4)]


def test_expand_across_row_boundary():
    amap = address_map_from_geometry(8, 1 << 15, 1 << 8)
    row_span = amap.row_span_words()
    spans = expand_transaction(amap, row_span - 3, 8)
    assert len(spans) == 2
    assert sum(s[3] for s in spans) == 8
    assert spans[0][3] == 3 and spans[1][2] == 0


def test_expand_matches_decode_oracle():
    rng = random.Random(1)
    amap = address_map_from_geometry(8, 1 << 6, 1 << 4)  # small: boundaries common
    for _ in range(500):
        start = rng.randrange(amap.capacity_words - 64)
        count = rng.randint(1, 64)
        spans = expand_transaction(amap, start, count)
        oracle = expansion_oracle(amap, start, count)
        assert [(s[0], s[1], s[3]) for s in spans] == \
               [(o[0], o[1], o[3]) for o in oracle]
        assert sum(s[3] for s in spans) == count


# -- configuration file -----------------------------------------------------

GOOD_CONFIG = """
[memory]
banks = 8
rows = 32768
cols_words = 256
bank_order = bank-row-col
timing = ddr3-sockit-300

[port.0]
sa_read = 0x0
ea_read = 0x400
bc_read = 8
sa_write = 0x800
ea_write = 0xC00
bc_write = 8
clock_mhz = 100
data_width_bits = 32

[port.1]
ea_read = 64
bc_read = 16
ea_write = 64
bc_write = 16

[experiment]
name = smoke
"""


def test_parse_config_file(tmp_path):
    path = tmp_path / "mpmc.cfg"
    path.write_text(GOOD_CONFIG)
    cfg = parse_config_file(str(path))
    assert set(cfg["ports"]) == {0, 1}
    assert cfg["ports"][0]["clock_mhz"] == 100.0
    assert cfg["experiment"]["name"] == "smoke"
    regs = cfg["registers"]
    assert regs.num_ports == 2
    assert regs.regs(0, WRITE).sa == 0x800
    assert regs.port(0).pack_ratio == 4


@pytest.mark.parametrize("mutation, needle", [
    ("data_width_bits = 32", "data_width_bits = 48"),
    ("bc_read = 8", "bc_read = 70"),
    ("clock_mhz = 100", "clock_mhz = 0"),
    ("banks = 8", "banks = 5"),
])
def test_parse_config_rejections(tmp_path, mutation, needle):
    path = tmp_path / "bad.cfg"
    path.write_text(GOOD_CONFIG.replace(mutation, needle))
    with pytest.raises(ConfigError):
        parse_config_file(str(path))


def test_parse_config_missing_file():
    with pytest.raises(ConfigError):
        parse_config_file("/nonexistent/mpmc.cfg")
