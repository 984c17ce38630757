"""Command-line interface.

``mpmc-sim run`` executes one of the canned experiments and writes a CSV
report (optionally with rendered figures and command/arbitration dumps);
``mpmc-sim validate`` checks a configuration file without running anything.

Exit codes: 0 success, 1 configuration error, 2 protocol violation,
3 acceptance-property failure (with ``--assert``).
"""

from __future__ import annotations

import argparse
import os
import sys

from . import harness
from .arbiter import FCFS, WFCFS
from .config_regs import ConfigError, address_map_from_geometry, parse_config_file
from .dram_model import ProtocolError, load_timing
from .harness import HarnessError

EXPERIMENTS = ("expa", "expb", "expc", "expd", "peak", "rw")


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mpmc-sim",
                                description="Multi-port memory controller simulator")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write a CSV report")
    run.add_argument("--experiment", choices=EXPERIMENTS, required=True)
    run.add_argument("--ports", type=int, default=None,
                     help="port count (peak/rw only; expa-expd are fixed at 4)")
    run.add_argument("--burst-count", type=_int_list, default=None, metavar="LIST",
                     help="comma-separated burst counts, e.g. 4,8,16,32,64")
    run.add_argument("--cycles", type=int, default=harness.DEFAULT_WINDOW_CYCLES,
                     help="measured controller cycles per point")
    run.add_argument("--warmup", type=int, default=harness.DEFAULT_WARMUP_CYCLES,
                     help="controller cycles excluded from metrics")
    run.add_argument("--seed", type=int, default=1)
    run.add_argument("--timing", default="ddr3-sockit-300",
                     help="timing preset name or file path")
    run.add_argument("--arbiter", choices=(WFCFS, FCFS), default=None,
                     help="override the arbitration policy")
    run.add_argument("--bank-order", choices=("bank-row-col", "row-bank-col"),
                     default="bank-row-col")
    run.add_argument("--dump-commands", metavar="PATH", default=None)
    run.add_argument("--dump-arbitration", metavar="PATH", default=None)
    run.add_argument("--out", metavar="CSV_PATH", default=None)
    run.add_argument("--plots", metavar="DIR", default=None,
                     help="render figures into DIR alongside the CSV")
    run.add_argument("--assert", dest="check", action="store_true",
                     help="check the experiment's structural properties")

    val = sub.add_parser("validate", help="validate a configuration file")
    val.add_argument("config")
    return p


def _point_hook(args, paths: list[str]):
    if not (args.dump_commands or args.dump_arbitration):
        return None

    def hook(name: str, system) -> None:
        for base, dump in ((args.dump_commands, harness.dump_command_log),
                           (args.dump_arbitration, harness.dump_arbitration_trace)):
            if base:
                stem, ext = os.path.splitext(base)
                path = f"{stem}.{name}{ext or '.log'}"
                dump(system, path)
                paths.append(path)

    return hook


def _check_properties(args, eff) -> list[str]:
    problems = []
    if args.experiment == "peak":
        ns = sorted({n for n, _ in eff})
        bcs = sorted({bc for _, bc in eff})
        for n in ns:
            for lo, hi in zip(bcs, bcs[1:]):
                if (n, lo) in eff and (n, hi) in eff and eff[(n, hi)] < eff[(n, lo)]:
                    problems.append(f"EFF not monotonic in BC at N={n}: "
                                    f"{eff[(n, lo)]:.2f} -> {eff[(n, hi)]:.2f}")
        for bc in bcs:
            for lo, hi in zip(ns, ns[1:]):
                if (lo, bc) in eff and (hi, bc) in eff and eff[(hi, bc)] < eff[(lo, bc)]:
                    problems.append(f"EFF not monotonic in N at BC={bc}: "
                                    f"{eff[(lo, bc)]:.2f} -> {eff[(hi, bc)]:.2f}")
    elif args.experiment == "rw":
        for (n, bc), (wr, rd) in eff.items():
            if rd <= wr:
                problems.append(f"read EFF {rd:.2f} not above write EFF {wr:.2f} "
                                f"at N={n} BC={bc}")
    return problems


def cmd_run(args) -> int:
    timing = load_timing(args.timing)
    order = tuple(args.bank_order.split("-"))
    amap = address_map_from_geometry(8, 1 << 15, 1 << 8, order)  # type: ignore[arg-type]
    bc_list = tuple(args.burst_count) if args.burst_count else None
    dumps: list[str] = []
    hook = _point_hook(args, dumps)
    kw = dict(cycles=args.cycles, warmup=args.warmup, timing=timing, amap=amap,
              seed=args.seed, log_commands=bool(args.dump_commands),
              trace=bool(args.dump_arbitration), point_hook=hook)

    if args.experiment in ("expa", "expb", "expc", "expd"):
        if args.ports not in (None, 4):
            raise ConfigError("expa-expd use the fixed four-port bank assignments")
        if args.arbiter:
            kw["policy_override"] = args.arbiter
        rows, eff = harness.run_bank_experiment(
            args.experiment, bc_list or harness.PEAK_BC_LIST, **kw)
    elif args.experiment == "peak":
        n_list = (args.ports,) if args.ports else harness.PEAK_N_LIST
        if args.arbiter:
            kw["policy"] = args.arbiter
        rows, eff = harness.run_peak_sweep(n_list, bc_list or harness.PEAK_BC_LIST, **kw)
    else:
        n_list = (args.ports,) if args.ports else (32,)
        rows, eff = harness.run_rw_asymmetry(n_list, bc_list or (64,), **kw)

    if args.out:
        harness.emit_csv(rows, args.out)
        print(f"wrote {args.out} ({len(rows)} rows)")
    else:
        for row in rows:
            if row.port == "all":
                print(f"{row.experiment} {row.name}: EFF {row.eff_percent:.2f} % "
                      f"({row.achieved_gbps:.2f} Gbps)")
    for path in dumps:
        print(f"wrote {path}")
    if args.plots:
        from .plots import render_figures
        for path in render_figures(rows, args.plots):
            print(f"wrote {path}")

    if args.check:
        problems = _check_properties(args, eff)
        if problems:
            for msg in problems:
                print(f"property violated: {msg}", file=sys.stderr)
            return 3
    return 0


def cmd_validate(args) -> int:
    cfg = parse_config_file(args.config)
    nports = len(cfg["ports"])
    print(f"OK: {nports} port(s), geometry {cfg['memory']['geometry']}, "
          f"timing {cfg['memory']['timing']}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        return cmd_validate(args)
    except (ConfigError, HarnessError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except ProtocolError as e:
        print(f"protocol violation: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
