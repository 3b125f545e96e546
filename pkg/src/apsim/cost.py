"""Energy, time and endurance pricing of execution statistics.

Units: energies in fJ, latencies in ns, areas in um^2 inside presets; the
pricing functions return SI units (J, s, W).

Compare energy per cell is not a published device number. It defaults to a
tenth of the write energy and every report carries ``compare_energy_assumed``.
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from apsim.cam import ContractError
from apsim.isa import Stats

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SECONDS_PER_YEAR = 365.25 * 24 * 3600


@dataclass(frozen=True)
class TechPreset:
    name: str
    endurance_cycles: float
    write_energy_fJ: float
    write_latency_ns: float
    cell_area_um2: float
    compare_energy_fJ: float | None = None
    cycle_time_ns: float | None = None
    # resistive cells store a bit in two complementary devices (2T2R)
    devices_per_cell: int = 2
    write_energy_range_fJ: tuple[float, float] | None = None
    write_latency_range_ns: tuple[float, float] | None = None

    def __post_init__(self):
        if self.compare_energy_fJ is None:
            object.__setattr__(self, "compare_energy_fJ", self.write_energy_fJ / 10)
        if self.cycle_time_ns is None:
            object.__setattr__(self, "cycle_time_ns", max(self.write_latency_ns, 1.0))
        for f in ("endurance_cycles", "write_energy_fJ", "write_latency_ns", "cell_area_um2",
                  "compare_energy_fJ", "cycle_time_ns", "devices_per_cell"):
            if not getattr(self, f) > 0:
                raise ContractError(f"{self.name}.{f} must be positive")
        if self.endurance_cycles < 1e6:
            raise ContractError(f"{self.name}.endurance_cycles below 1e6")

    def cycle_time_for(self, clock_hz: float | None) -> float:
        """Cycle period in ns: the clock period unless writes are slower."""
        if clock_hz is None:
            return self.cycle_time_ns
        if clock_hz <= 0:
            raise ContractError("clock must be positive")
        return max(self.write_latency_ns, 1e9 / clock_hz)


_PRESETS = (
    TechPreset("Redox", 1e12, 115.0, 0.085, 0.0014),
    TechPreset("PCM", 1e11, 1000.0, 0.7, 0.0014),
    TechPreset("MTJ", 1e12, 10.0, 0.2, 0.0014),
    TechPreset("FeD", 4e6, 100.0, 10.0, 0.0032),
    # ranges 1..100 fJ and 0.1..0.25 ns collapsed to a nominal point
    TechPreset("SRAM", 1e16, 50.0, 0.175, 0.042, devices_per_cell=1,
               write_energy_range_fJ=(1.0, 100.0), write_latency_range_ns=(0.1, 0.25)),
)


def presets() -> list[TechPreset]:
    return list(_PRESETS)


def preset(name: str, table: list[TechPreset] | None = None) -> TechPreset:
    for p in table or _PRESETS:
        if p.name.lower() == name.lower():
            return p
    raise ContractError(f"unknown technology {name!r}")


_NUMERIC = {f.name for f in dataclasses.fields(TechPreset)} - {
    "name", "write_energy_range_fJ", "write_latency_range_ns"}


def apply_overrides(table: list[TechPreset], overrides: dict) -> list[TechPreset]:
    """``overrides`` maps preset name to ``{field: number}``."""
    out = list(table)
    for pname, fields in overrides.items():
        if not isinstance(fields, dict):
            raise ContractError(f"override {pname!r} must be written as {pname}.field = value")
        idx = next((i for i, p in enumerate(out) if p.name.lower() == pname.lower()), None)
        if idx is None:
            raise ContractError(f"unknown technology {pname!r}")
        for k, v in fields.items():
            if k not in _NUMERIC:
                raise ContractError(f"unknown preset field {pname}.{k}")
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ContractError(f"{pname}.{k} must be a number")
        changes = dict(fields)
        # derived defaults follow their source unless set explicitly
        if "write_energy_fJ" in changes and "compare_energy_fJ" not in changes:
            changes["compare_energy_fJ"] = None
        if "write_latency_ns" in changes and "cycle_time_ns" not in changes:
            changes["cycle_time_ns"] = None
        out[idx] = dataclasses.replace(out[idx], **changes)
    return out


def load_overrides(path: str | Path, table: list[TechPreset] | None = None) -> list[TechPreset]:
    """Read ``Preset.field = number`` lines (TOML dotted keys)."""
    try:
        data = tomllib.loads(Path(path).read_text())
    except (OSError, tomllib.TOMLDecodeError) as e:
        raise ContractError(f"{path}: {e}") from e
    return apply_overrides(table or presets(), data)


def energy(stats: Stats, tech: TechPreset) -> float:
    """Joules: driven cell writes plus per-cell compare evaluations."""
    fj = stats.writes_total * tech.write_energy_fJ + stats.compare_cell_evals * tech.compare_energy_fJ
    return fj * 1e-15


def runtime(stats: Stats, tech: TechPreset, clock_hz: float | None = None) -> float:
    return stats.total_cycles * tech.cycle_time_for(clock_hz) * 1e-9


def lifetime(op_writes_per_cycle: float, clock_hz: float, tech: TechPreset | float) -> float:
    """Seconds until one cell absorbing the sustained write rate wears out."""
    endurance = tech.endurance_cycles if isinstance(tech, TechPreset) else float(tech)
    if not 0 < op_writes_per_cycle <= 1:
        raise ContractError(f"write rate {op_writes_per_cycle} outside (0, 1]")
    if clock_hz <= 0:
        raise ContractError("clock must be positive")
    return endurance / (op_writes_per_cycle * clock_hz)


def row_switches(stats: Stats, tech: TechPreset) -> np.ndarray:
    """Device switching events per row (changed bits times devices per cell)."""
    if stats.flips_per_cell is None:
        return np.zeros(0)
    return stats.flips_per_cell.sum(axis=1) * tech.devices_per_cell


@dataclass
class CostReport:
    energy_J: float
    time_s: float
    avg_power_W: float
    lifetime_s: float
    lifetime_mean_s: float
    limiting_cell: tuple[int, int] | None
    write_rate: float
    compare_energy_assumed: bool = True

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def cost_report(stats: Stats, tech: TechPreset, clock_hz: float = 1e9) -> CostReport:
    """Price ``stats`` on ``tech``.

    The headline lifetime charges the mean per-row switching rate against a
    single cell; ``lifetime_mean_s`` spreads each written cell's own rate.
    """
    e = energy(stats, tech)
    t = runtime(stats, tech, clock_hz)
    cycles = stats.total_cycles
    limiting = None
    rate = 0.0
    life = life_mean = float("inf")
    if stats.writes_per_cell is not None and stats.writes_total and cycles:
        limiting = tuple(int(i) for i in np.unravel_index(np.argmax(stats.writes_per_cell),
                                                          stats.writes_per_cell.shape))
        sw = row_switches(stats, tech)
        active = sw[sw > 0]
        if active.size:
            # one cell cannot switch more than once per cycle
            rate = min(1.0, float(active.mean()) / cycles)
            life = lifetime(rate, clock_hz, tech)
        per_cell = stats.writes_per_cell[stats.writes_per_cell > 0]
        life_mean = tech.endurance_cycles / (float(per_cell.mean()) / cycles * clock_hz)
    power = e / t if t > 0 else 0.0
    return CostReport(e, t, power, life, life_mean, limiting, rate)
