"""Associative processor simulator: CAM model, LUT compiler, bit-serial ISA,
SIMD kernels and a device cost model."""

from apsim.cam import CamArray, ContractError, KeyMask, TagVector
from apsim.cost import TechPreset, cost_report, energy, lifetime, presets, runtime
from apsim.isa import OpKind, Stats, emit, run, table_area, table_runtime
from apsim.lut import LutSchedule, TruthTable, compile_table, parse_table, verify_schedule
from apsim.machine import ApMachine, KernelResult

__all__ = [
    "ApMachine", "CamArray", "ContractError", "KernelResult", "KeyMask", "LutSchedule", "OpKind",
    "Stats", "TagVector", "TechPreset", "TruthTable", "compile_table", "cost_report", "emit",
    "energy", "lifetime", "parse_table", "presets", "run", "runtime", "table_area",
    "table_runtime", "verify_schedule",
]
