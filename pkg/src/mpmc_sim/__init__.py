"""Cycle-accurate multi-port memory controller simulator."""

from .arbiter import FCFS, WFCFS, Arbiter, MemRequest
from .config_regs import (AddressMap, ConfigError, ConfigRegisters,
                          address_map_from_geometry, expand_transaction,
                          parse_config_file)
from .dcdwff import Dcdwff, FifoConfig
from .dram_model import (DramDevice, ProtocolError, TimingParams,
                         TransactionIssuer, load_timing, parse_timing_text)
from .harness import (EffReport, emit_csv, parse_csv, run_bank_experiment,
                      run_peak_sweep, run_point, run_rw_asymmetry,
                      theoretical_gbps)
from .sim_core import ClockDomain, Engine, SimulationError
from .system import MpmcSystem

__all__ = [
    "AddressMap", "Arbiter", "ClockDomain", "ConfigError", "ConfigRegisters",
    "Dcdwff", "DramDevice", "EffReport", "Engine", "FCFS", "FifoConfig",
    "MemRequest", "MpmcSystem", "ProtocolError", "SimulationError",
    "TimingParams", "TransactionIssuer", "WFCFS", "address_map_from_geometry",
    "emit_csv", "expand_transaction", "load_timing", "parse_config_file",
    "parse_csv", "parse_timing_text", "run_bank_experiment", "run_peak_sweep",
    "run_point", "run_rw_asymmetry", "theoretical_gbps",
]
