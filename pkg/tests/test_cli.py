"""CLI behavior: experiments, output artifacts, validation, exit codes."""

import pytest

from mpmc_sim.cli import main
from mpmc_sim.harness import parse_csv

QUICK = ["--cycles", "4000", "--warmup", "500"]


def run_cli(*argv):
    return main(list(argv))


def test_run_expa_prints_summary(capsys):
    rc = run_cli("run", "--experiment", "expa", "--burst-count", "8", *QUICK)
    assert rc == 0
    out = capsys.readouterr().out
    assert "expa N4_BC8: EFF" in out


def test_run_writes_csv(tmp_path):
    out = tmp_path / "expc.csv"
    rc = run_cli("run", "--experiment", "expc", "--burst-count", "4,8",
                 "--out", str(out), *QUICK)
    assert rc == 0
    rows = parse_csv(str(out))
    assert {r.BC for r in rows} == {4, 8}
    assert sum(1 for r in rows if r.port == "all") == 2


def test_run_deterministic_output(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["run", "--experiment", "expb", "--burst-count", "8",
            "--seed", "7", *QUICK]
    assert run_cli(*args, "--out", str(a)) == 0
    assert run_cli(*args, "--out", str(b)) == 0
    assert a.read_bytes() == b.read_bytes()


def test_run_peak_single_point_with_assert(tmp_path):
    rc = run_cli("run", "--experiment", "peak", "--ports", "4",
                 "--burst-count", "8,16", "--assert",
                 "--out", str(tmp_path / "peak.csv"), *QUICK)
    assert rc == 0


def test_run_rw(tmp_path):
    rc = run_cli("run", "--experiment", "rw", "--ports", "4",
                 "--burst-count", "16", "--out", str(tmp_path / "rw.csv"),
                 *QUICK)
    assert rc == 0
    rows = parse_csv(str(tmp_path / "rw.csv"))
    assert {r.name for r in rows} == {"N4_BC16_write", "N4_BC16_read"}


def test_run_dumps(tmp_path):
    rc = run_cli("run", "--experiment", "expa", "--burst-count", "4",
                 "--dump-commands", str(tmp_path / "cmd.log"),
                 "--dump-arbitration", str(tmp_path / "arb.log"), *QUICK)
    assert rc == 0
    assert (tmp_path / "cmd.expa_N4_BC4.log").stat().st_size > 0
    assert (tmp_path / "arb.expa_N4_BC4.log").stat().st_size > 0


def test_run_plots(tmp_path):
    rc = run_cli("run", "--experiment", "expa", "--burst-count", "4,8",
                 "--plots", str(tmp_path), *QUICK)
    assert rc == 0
    pngs = list(tmp_path.glob("*.png"))
    assert pngs and all(p.stat().st_size > 1000 for p in pngs)


def test_run_fcfs_override(tmp_path):
    out = tmp_path / "c.csv"
    rc = run_cli("run", "--experiment", "expc", "--burst-count", "8",
                 "--arbiter", "fcfs", "--out", str(out), *QUICK)
    assert rc == 0
    assert all(r.policy == "fcfs" for r in parse_csv(str(out)))


def test_bad_timing_path_is_config_error(capsys):
    rc = run_cli("run", "--experiment", "expa", "--timing", "/no/such/file",
                 *QUICK)
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_bank_experiment_rejects_port_override(capsys):
    rc = run_cli("run", "--experiment", "expa", "--ports", "8", *QUICK)
    assert rc == 1


def test_validate_good(tmp_path, capsys):
    cfg = tmp_path / "good.cfg"
    cfg.write_text("""
[memory]
banks = 8
rows = 32768
cols_words = 256

[port.0]
ea_read = 1024
ea_write = 1024
""")
    assert run_cli("validate", str(cfg)) == 0
    assert "OK: 1 port(s)" in capsys.readouterr().out


def test_validate_bad(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[port.0]\nbc_read = 1000\nea_read = 8\nea_write = 8\n")
    assert run_cli("validate", str(cfg)) == 1
    assert "error:" in capsys.readouterr().err


def test_missing_subcommand():
    with pytest.raises(SystemExit):
        run_cli()
