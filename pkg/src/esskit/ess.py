"""Storage technology parameters, cost amortization and state-of-charge dynamics.

Rates are in kW, energies in kWh and slot lengths in hours unless a name
says otherwise (``ramp_time_seconds``).  The stored-energy recursion is

    e_t = (1 - mu_slot) * e_{t-1} + (r_t - d_t) * slot_hours
    u_t = r_t / eta - d_t

where ``mu_slot`` is the per-hour self-discharge compounded over one slot.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

TECHNOLOGY_NAMES = ("la", "li", "uc", "fw", "caes")


@dataclass(frozen=True)
class EssTechnology:
    name: str
    power_price: float  # $/kW
    energy_price: float  # $/kWh
    float_life_days: float
    cycle_life: float
    self_discharge_per_hour: float
    charge_efficiency: float
    charge_rate_ratio: float
    depth_of_discharge: float
    ramp_time_seconds: float

    def __post_init__(self):
        checks = [
            (0 < self.charge_efficiency <= 1, "charge_efficiency must be in (0, 1]"),
            (self.charge_rate_ratio >= 1, "charge_rate_ratio must be >= 1"),
            (0 < self.depth_of_discharge <= 1, "depth_of_discharge must be in (0, 1]"),
            (0 <= self.self_discharge_per_hour < 1, "self_discharge_per_hour must be in [0, 1)"),
            (self.float_life_days > 0, "float_life_days must be > 0"),
            (self.cycle_life > 0, "cycle_life must be > 0"),
            (self.ramp_time_seconds >= 0, "ramp_time_seconds must be >= 0"),
            (self.power_price >= 0 and self.energy_price >= 0, "prices must be >= 0"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(f"{self.name}: {msg}")

    @classmethod
    def from_dict(cls, name: str, data: Mapping) -> "EssTechnology":
        known = {f.name for f in fields(cls)} - {"name"}
        unknown = set(data) - known - {"name"}
        if unknown:
            raise ValueError(f"{name}: unknown technology keys {sorted(unknown)}")
        missing = known - set(data)
        if missing:
            raise ValueError(f"{name}: missing technology keys {sorted(missing)}")
        return cls(name=name, **{k: float(data[k]) for k in known})

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("name")
        return d

    def replace(self, **changes) -> "EssTechnology":
        d = asdict(self)
        d.update(changes)
        return EssTechnology(**d)


@dataclass(frozen=True)
class Capacities:
    p_cap: float  # kW
    e_cap: float  # kWh

    def __post_init__(self):
        if self.p_cap < 0 or self.e_cap < 0:
            raise ValueError("capacities must be non-negative")


@dataclass(frozen=True)
class DailyPrices:
    power_price_per_day: float
    energy_price_per_day: float

    def __post_init__(self):
        if self.power_price_per_day < 0 or self.energy_price_per_day < 0:
            raise ValueError("daily prices must be non-negative")

    def scaled(self, factor: float) -> "DailyPrices":
        return DailyPrices(self.power_price_per_day * factor, self.energy_price_per_day * factor)


@dataclass(frozen=True)
class Schedule:
    """Per-slot operation of a store over ``T`` slots.

    ``charge``, ``discharge`` and ``net_power`` hold one value per slot;
    ``stored_energy`` holds the state at every slot boundary (``T + 1``
    values, starting with the initial energy).
    """

    slot_hours: float
    charge: np.ndarray
    discharge: np.ndarray
    net_power: np.ndarray
    stored_energy: np.ndarray

    def __post_init__(self):
        n = len(self.charge)
        if len(self.discharge) != n or len(self.net_power) != n:
            raise ValueError("rate sequences must have equal length")
        if len(self.stored_energy) != n + 1:
            raise ValueError("stored_energy must have one more entry than the rate sequences")

    @property
    def num_slots(self) -> int:
        return len(self.charge)

    def co_charging_slots(self, tol: float = 1e-6) -> list[int]:
        """1-based slots where the store charges and discharges at once."""
        both = (self.charge > tol) & (self.discharge > tol)
        return [int(i) + 1 for i in np.flatnonzero(both)]

    def to_csv(self, path, beta: Sequence[float] | None = None) -> None:
        header = "t,r_kw,d_kw,u_kw,e_kwh"
        if beta is not None:
            header += ",beta"
        lines = [header]
        # row 0 carries the initial energy only
        row0 = f"0,,,,{float(self.stored_energy[0])!r}"
        lines.append(row0 + ("," if beta is not None else ""))
        for t in range(self.num_slots):
            line = (
                f"{t + 1},{float(self.charge[t])!r},{float(self.discharge[t])!r},"
                f"{float(self.net_power[t])!r},{float(self.stored_energy[t + 1])!r}"
            )
            if beta is not None:
                line += f",{float(beta[t])!r}"
            lines.append(line)
        Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class Violation:
    slot: int
    constraint: str
    magnitude: float


def per_slot_self_discharge(tech: EssTechnology, slot_hours: float) -> float:
    if slot_hours <= 0:
        raise ValueError("slot_hours must be positive")
    return 1.0 - (1.0 - tech.self_discharge_per_hour) ** slot_hours


def effective_life_days(tech: EssTechnology, cycles_per_day: float) -> float:
    if cycles_per_day < 0:
        raise ValueError("cycles_per_day must be non-negative")
    if cycles_per_day == 0:
        return tech.float_life_days
    return min(tech.float_life_days, tech.cycle_life / cycles_per_day)


def amortized_prices(tech: EssTechnology, cycles_per_day: float) -> DailyPrices:
    """Equipment prices spread evenly over the effective life in days."""
    life = effective_life_days(tech, cycles_per_day)
    return DailyPrices(tech.power_price / life, tech.energy_price / life)


def daily_cost(prices: DailyPrices, caps: Capacities) -> float:
    return prices.power_price_per_day * caps.p_cap + prices.energy_price_per_day * caps.e_cap


def simulate_schedule(
    tech: EssTechnology,
    e0: float,
    charge: Sequence[float],
    discharge: Sequence[float],
    slot_hours: float,
) -> Schedule:
    r = np.asarray(charge, dtype=float)
    d = np.asarray(discharge, dtype=float)
    if r.shape != d.shape or r.ndim != 1:
        raise ValueError("charge and discharge must be 1-D sequences of equal length")
    if np.any(r < 0) or np.any(d < 0):
        raise ValueError("charge and discharge rates must be non-negative")
    keep = 1.0 - per_slot_self_discharge(tech, slot_hours)
    e = np.empty(len(r) + 1)
    e[0] = e0
    for t in range(len(r)):
        e[t + 1] = keep * e[t] + (r[t] - d[t]) * slot_hours
    u = r / tech.charge_efficiency - d
    return Schedule(slot_hours, r, d, u, e)


def max_ramp_step(tech: EssTechnology, caps: Capacities, slot_hours: float) -> float:
    """Largest allowed slot-to-slot increase of the discharge rate (inf if unlimited)."""
    if tech.ramp_time_seconds == 0:
        return math.inf
    return caps.p_cap * slot_hours * 3600.0 / tech.ramp_time_seconds


def check_feasibility(
    sched: Schedule,
    tech: EssTechnology,
    caps: Capacities,
    tol: float = 1e-6,
) -> list[Violation]:
    """Every violated rate, energy and ramp limit of ``sched``; empty when feasible.

    Slots are 1-based for rates; energy states use their boundary index
    (0 is the initial state).
    """
    out: list[Violation] = []
    r, d, e = sched.charge, sched.discharge, sched.stored_energy
    charge_cap = caps.p_cap / tech.charge_rate_ratio
    e_floor = (1.0 - tech.depth_of_discharge) * caps.e_cap
    for t in range(sched.num_slots):
        if r[t] < -tol:
            out.append(Violation(t + 1, "charge_nonneg", float(-r[t])))
        if r[t] > charge_cap + tol:
            out.append(Violation(t + 1, "charge_cap", float(r[t] - charge_cap)))
        if d[t] < -tol:
            out.append(Violation(t + 1, "discharge_nonneg", float(-d[t])))
        if d[t] > caps.p_cap + tol:
            out.append(Violation(t + 1, "discharge_cap", float(d[t] - caps.p_cap)))
    for t, et in enumerate(e):
        if et > caps.e_cap + tol:
            out.append(Violation(t, "energy_cap", float(et - caps.e_cap)))
        if et < e_floor - tol:
            out.append(Violation(t, "depth_of_discharge", float(e_floor - et)))
    step = max_ramp_step(tech, caps, sched.slot_hours)
    for t in range(sched.num_slots - 1):
        rise = d[t + 1] - d[t]
        if rise > step + tol:
            out.append(Violation(t + 2, "ramp", float(rise - step)))
    return out


def recursion_residuals(sched: Schedule, tech: EssTechnology) -> tuple[float, float]:
    """Max absolute residual of the energy and net-power identities."""
    keep = 1.0 - per_slot_self_discharge(tech, sched.slot_hours)
    e = sched.stored_energy
    energy_res = e[1:] - keep * e[:-1] - (sched.charge - sched.discharge) * sched.slot_hours
    power_res = sched.net_power - (sched.charge / tech.charge_efficiency - sched.discharge)
    if sched.num_slots == 0:
        return 0.0, 0.0
    return float(np.max(np.abs(energy_res))), float(np.max(np.abs(power_res)))


def load_technologies(path) -> dict[str, EssTechnology]:
    """Read a technology map from JSON.

    Accepts either the bare ``{name: {field: value}}`` map or a config
    object holding it under ``"technologies"``.
    """
    data = json.loads(Path(path).read_text())
    return technologies_from_mapping(data.get("technologies", data))


def technologies_from_mapping(data: Mapping) -> dict[str, EssTechnology]:
    return {name: EssTechnology.from_dict(name, spec) for name, spec in data.items()}


def save_technologies(techs: Iterable[EssTechnology], path) -> None:
    payload = {t.name: t.to_dict() for t in techs}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")
