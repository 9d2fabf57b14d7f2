"""Profit-maximizing participation plans for three market programs.

* Regulation service reserves (RSR): track ``R * beta_t`` with a tracking
  penalty and a relative tracking band on a chosen set of slots.
* Contingency reserves (CR): one full-rate discharge call of ``R`` over a
  window, starting from a full store.
* Peak shaving (PS): cut the facility peak by ``R`` with a store that
  ends the day where it started.

All three share the decision variables ``P_cap, E_cap, R`` and the per-slot
``r, d, u, e`` of the storage model.  Profit is revenue per day minus the
amortized daily equipment cost.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from .ess import (
    Capacities,
    EssTechnology,
    Schedule,
    amortized_prices,
    daily_cost,
    max_ramp_step,
    per_slot_self_discharge,
)
from .lp import INF, LpProblem, LpSolution, Status, add_abs_penalty, solve
from .traces import POWER_KW, RSR_SIGNAL, Trace

log = logging.getLogger(__name__)

DAYS_PER_MONTH = 30.4
CapPair = tuple[Optional[float], Optional[float]]


class ContractError(ValueError):
    """Inputs violate a precondition of a program builder."""


def _cap_pair(value) -> Optional[CapPair]:
    if value is None:
        return None
    if isinstance(value, Capacities):
        return (value.p_cap, value.e_cap)
    p, e = value
    return (None if p is None else float(p), None if e is None else float(e))


@dataclass(frozen=True)
class RsrSpec:
    signal: Trace
    reserve_price: float = 0.1  # $/kWh
    penalty_coeff: float = 1.0
    rho1: float = 0.2
    rho2: float = 1.0
    cycles_per_day: float = 0.0
    hours_per_day: float = 24.0
    cap_bounds: Optional[CapPair] = None
    fixed_caps: Optional[CapPair] = None
    periodic: bool = False

    def __post_init__(self):
        if self.signal.kind != RSR_SIGNAL:
            raise ContractError("RSR needs a regulation signal trace")
        if not 0 < self.rho1 < 1:
            raise ContractError("rho1 must be in (0, 1)")
        if not 0 < self.rho2 <= 1:
            raise ContractError("rho2 must be in (0, 1]")
        if self.reserve_price < 0 or self.penalty_coeff < 0:
            raise ContractError("reserve_price and penalty_coeff must be non-negative")
        object.__setattr__(self, "cap_bounds", _cap_pair(self.cap_bounds))
        object.__setattr__(self, "fixed_caps", _cap_pair(self.fixed_caps))


@dataclass(frozen=True)
class CrSpec:
    """Contingency reserve call.

    ``window_start`` and ``window_end`` are slot boundaries: the store is
    full at boundary ``window_start`` and discharges at ``R`` through slots
    ``window_start + 1 .. window_end``.
    """

    reserve_price: float = 0.025  # $/kW/day
    window_start: int = 0
    window_end: int = 10
    cycles_per_day: float = 1.0
    slot_seconds: float = 60.0
    horizon_slots: Optional[int] = None
    cap_bounds: Optional[CapPair] = None
    fixed_caps: Optional[CapPair] = None

    def __post_init__(self):
        if self.reserve_price < 0:
            raise ContractError("reserve_price must be non-negative")
        if self.window_end <= self.window_start:
            raise ContractError("contingency window is empty")
        if self.window_start < 0:
            raise ContractError("window_start must be >= 0")
        if self.horizon_slots is not None and self.window_end > self.horizon_slots:
            raise ContractError("contingency window extends past the horizon")
        object.__setattr__(self, "cap_bounds", _cap_pair(self.cap_bounds))
        object.__setattr__(self, "fixed_caps", _cap_pair(self.fixed_caps))

    @property
    def window_hours(self) -> float:
        return (self.window_end - self.window_start) * self.slot_seconds / 3600.0

    @property
    def horizon(self) -> int:
        return self.window_end if self.horizon_slots is None else self.horizon_slots


@dataclass(frozen=True)
class PsSpec:
    power_trace: Trace
    opex_peak_price: float = 12.0  # $/kW/month
    capex_peak_price: float = 10.0  # $/W
    capex_horizon_days: float = 3650.0
    cycles_per_day: float = 1.0
    cap_bounds: Optional[CapPair] = None
    fixed_caps: Optional[CapPair] = None

    def __post_init__(self):
        if self.power_trace.kind != POWER_KW:
            raise ContractError("peak shaving needs a power trace")
        if len(self.power_trace) == 0:
            raise ContractError("power trace is empty")
        if self.opex_peak_price < 0 or self.capex_peak_price < 0:
            raise ContractError("prices must be non-negative")
        if not self.capex_horizon_days > 0:
            raise ContractError("capex_horizon_days must be positive")
        object.__setattr__(self, "cap_bounds", _cap_pair(self.cap_bounds))
        object.__setattr__(self, "fixed_caps", _cap_pair(self.fixed_caps))

    @property
    def shaving_price_per_day(self) -> float:
        """$/kW/day for each kW cut from the peak."""
        return self.opex_peak_price / DAYS_PER_MONTH + self.capex_peak_price * 1000.0 / self.capex_horizon_days


ProgramSpec = Union[RsrSpec, CrSpec, PsSpec]


def program_name(spec: ProgramSpec) -> str:
    return {RsrSpec: "rsr", CrSpec: "cr", PsSpec: "ps"}[type(spec)]


@dataclass
class ProgramPlan:
    program: str
    lp_status: Status
    caps: Optional[Capacities] = None
    reserve: float = math.nan
    schedule: Optional[Schedule] = None
    revenue_per_day: float = math.nan
    cost_per_day: float = math.nan
    profit_per_day: float = math.nan
    objective_value: float = math.nan
    tracked: Optional[list[int]] = None
    co_charging_slots: list[int] = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.lp_status is Status.OPTIMAL

    def to_dict(self) -> dict:
        out = {"program": self.program, "lp_status": self.lp_status.value}
        if self.optimal:
            # adding 0.0 turns solver -0.0 into 0.0 in reports
            out.update(
                p_cap_kw=float(self.caps.p_cap) + 0.0,
                e_cap_kwh=float(self.caps.e_cap) + 0.0,
                reserve_kw=float(self.reserve) + 0.0,
                revenue_per_day=float(self.revenue_per_day) + 0.0,
                cost_per_day=float(self.cost_per_day) + 0.0,
                profit_per_day=float(self.profit_per_day) + 0.0,
                num_slots=self.schedule.num_slots,
                slot_hours=self.schedule.slot_hours,
                co_charging_slots=len(self.co_charging_slots),
            )
            if self.tracked is not None:
                out["tracked_slots"] = len(self.tracked)
        return out


@dataclass
class StorageVars:
    """Column indices of the storage decision variables in an LP."""

    p_cap: int
    e_cap: int
    reserve: int
    r: list[int]
    d: list[int]
    u: list[int]
    e: list[int]
    slot_hours: float
    abs_err: list[int] = field(default_factory=list)


def _cap_bounds(fixed: Optional[CapPair], bounds: Optional[CapPair], k: int) -> tuple[float, float]:
    if fixed is not None and fixed[k] is not None:
        return fixed[k], fixed[k]
    if bounds is not None and bounds[k] is not None:
        return 0.0, bounds[k]
    return 0.0, INF


def _add_storage(
    p: LpProblem,
    tech: EssTechnology,
    T: int,
    slot_hours: float,
    cycles_per_day: float,
    fixed: Optional[CapPair],
    bounds: Optional[CapPair],
    reserve_price: float,
    reserve_upper: float = INF,
) -> StorageVars:
    """Capacities, reserve and the storage dynamics/limits shared by every program."""
    prices = amortized_prices(tech, cycles_per_day)
    P = p.add_var("P_cap", *_cap_bounds(fixed, bounds, 0), objective=-prices.power_price_per_day)
    E = p.add_var("E_cap", *_cap_bounds(fixed, bounds, 1), objective=-prices.energy_price_per_day)
    R = p.add_var("R", 0.0, reserve_upper, objective=reserve_price)
    r = [p.add_var(f"r{t}") for t in range(1, T + 1)]
    d = [p.add_var(f"d{t}") for t in range(1, T + 1)]
    u = [p.add_var(f"u{t}", -INF, INF) for t in range(1, T + 1)]
    e = [p.add_var(f"e{t}") for t in range(T + 1)]

    eta = tech.charge_efficiency
    keep = 1.0 - per_slot_self_discharge(tech, slot_hours)
    floor = 1.0 - tech.depth_of_discharge
    for t in range(T):
        p.add_constraint({u[t]: 1.0, r[t]: -1.0 / eta, d[t]: 1.0}, "==", 0.0)
        p.add_constraint({e[t + 1]: 1.0, e[t]: -keep, r[t]: -slot_hours, d[t]: slot_hours}, "==", 0.0)
        p.add_constraint({r[t]: 1.0, P: -1.0 / tech.charge_rate_ratio}, "<=", 0.0)
        p.add_constraint({d[t]: 1.0, P: -1.0}, "<=", 0.0)
    for t in range(T + 1):
        p.add_constraint({e[t]: 1.0, E: -1.0}, "<=", 0.0)
        if floor > 0:
            p.add_constraint({e[t]: -1.0, E: floor}, "<=", 0.0)
    step = max_ramp_step(tech, Capacities(1.0, 0.0), slot_hours)  # per kW of P_cap
    # a step of at least P_cap is already implied by 0 <= d <= P_cap
    if step < 1.0:
        for t in range(T - 1):
            p.add_constraint({d[t + 1]: 1.0, d[t]: -1.0, P: -step}, "<=", 0.0)
    return StorageVars(P, E, R, r, d, u, e, slot_hours)


def _check_tracked(tracked: Optional[Sequence[int]], T: int, rho2: float) -> list[int]:
    if tracked is None:
        if rho2 < 1:
            raise ContractError("rho2 < 1 needs an explicit tracked slot set")
        return list(range(1, T + 1))
    slots = sorted(set(int(t) for t in tracked))
    if slots and (slots[0] < 1 or slots[-1] > T):
        raise ContractError(f"tracked slots must lie in [1, {T}]")
    if rho2 == 1 and len(slots) != T:
        raise ContractError("rho2 = 1 requires every slot to be tracked")
    return slots


def build_rsr_lp(tech: EssTechnology, spec: RsrSpec, tracked: Optional[Sequence[int]] = None):
    """Regulation-service LP; returns ``(problem, variables, tracked_slots)``.

    ``tracked`` holds 1-based slots where the band
    ``|u_t - R beta_t| <= rho1 R |beta_t|`` is enforced (all slots when
    omitted, which requires ``rho2 = 1``).  The tracking penalty covers
    every slot.
    """
    beta = spec.signal.values
    T = len(beta)
    slots = _check_tracked(tracked, T, spec.rho2)
    scale = spec.hours_per_day * spec.reserve_price
    p = LpProblem()
    v = _add_storage(
        p, tech, T, spec.signal.slot_hours, spec.cycles_per_day, spec.fixed_caps, spec.cap_bounds, scale
    )
    weight = spec.penalty_coeff * scale / T if T else 0.0
    for t in range(T):
        v.abs_err.append(add_abs_penalty(p, {v.u[t]: 1.0, v.reserve: -beta[t]}, weight, name=f"s{t + 1}"))
    for t1 in slots:
        t = t1 - 1
        band = spec.rho1 * abs(beta[t])
        p.add_constraint({v.u[t]: 1.0, v.reserve: -beta[t] - band}, "<=", 0.0)
        p.add_constraint({v.u[t]: -1.0, v.reserve: beta[t] - band}, "<=", 0.0)
    if spec.periodic:
        p.add_constraint({v.e[0]: 1.0, v.e[T]: -1.0}, "==", 0.0)
    return p, v, slots


def build_cr_lp(tech: EssTechnology, spec: CrSpec, horizon_slots: Optional[int] = None):
    """Contingency-reserve LP; returns ``(problem, variables)``.

    Outside the call window the store may charge but never discharge.
    """
    T = spec.horizon if horizon_slots is None else int(horizon_slots)
    if not 0 <= spec.window_start < spec.window_end <= T:
        raise ContractError("contingency window must lie inside the horizon")
    p = LpProblem()
    v = _add_storage(
        p, tech, T, spec.slot_seconds / 3600.0, spec.cycles_per_day, spec.fixed_caps, spec.cap_bounds,
        spec.reserve_price,
    )
    for t in range(T):
        if spec.window_start <= t < spec.window_end:
            p.set_bounds(v.r[t], 0.0, 0.0)
            p.add_constraint({v.d[t]: 1.0, v.reserve: -1.0}, "==", 0.0)
        else:
            p.set_bounds(v.d[t], 0.0, 0.0)
    p.add_constraint({v.e[spec.window_start]: 1.0, v.e_cap: -1.0}, "==", 0.0)
    return p, v


def build_ps_lp(tech: EssTechnology, spec: PsSpec):
    """Peak-shaving LP; returns ``(problem, variables)``."""
    load = spec.power_trace.values
    T = len(load)
    peak = float(load.max())
    p = LpProblem()
    v = _add_storage(
        p, tech, T, spec.power_trace.slot_hours, spec.cycles_per_day, spec.fixed_caps, spec.cap_bounds,
        spec.shaving_price_per_day, reserve_upper=peak,
    )
    for t in range(T):
        p.add_constraint({v.u[t]: 1.0, v.reserve: 1.0}, "<=", peak - load[t])
        p.add_constraint({v.u[t]: 1.0}, ">=", -load[t])
    p.add_constraint({v.e[0]: 1.0, v.e[T]: -1.0}, "==", 0.0)
    return p, v


def rsr_revenue(spec: RsrSpec, reserve: float, net_power: np.ndarray) -> float:
    """Daily RSR revenue of delivering ``net_power`` against a reserve offer."""
    beta = spec.signal.values
    scale = spec.hours_per_day * spec.reserve_price
    err = np.abs(np.asarray(net_power) - reserve * beta).mean() if len(beta) else 0.0
    return scale * reserve - spec.penalty_coeff * scale * err


def cr_revenue(spec: CrSpec, reserve: float) -> float:
    return spec.reserve_price * reserve


def ps_revenue(spec: PsSpec, reserve: float) -> float:
    return spec.shaving_price_per_day * reserve


def tracking_band_hits(beta: np.ndarray, reserve: float, net_power: np.ndarray, rho1: float, tol: float = 1e-6) -> np.ndarray:
    """Boolean per slot: delivered power within the relative tracking band."""
    return np.abs(net_power - reserve * beta) <= rho1 * reserve * np.abs(beta) + tol


def _extract(name: str, tech: EssTechnology, spec: ProgramSpec, v: StorageVars, sol: LpSolution) -> ProgramPlan:
    x = sol.primal
    caps = Capacities(max(x[v.p_cap], 0.0), max(x[v.e_cap], 0.0))
    reserve = max(float(x[v.reserve]), 0.0)
    r = np.maximum(x[v.r], 0.0)
    d = np.maximum(x[v.d], 0.0)
    sched = Schedule(v.slot_hours, r, d, x[v.u].copy(), x[v.e].copy())
    cost = daily_cost(amortized_prices(tech, spec.cycles_per_day), caps)
    if isinstance(spec, RsrSpec):
        scale = spec.hours_per_day * spec.reserve_price
        T = len(spec.signal)
        penalty = spec.penalty_coeff * scale * float(np.sum(x[v.abs_err])) / T if T else 0.0
        revenue = scale * reserve - penalty
    elif isinstance(spec, CrSpec):
        revenue = cr_revenue(spec, reserve)
    else:
        revenue = ps_revenue(spec, reserve)
    plan = ProgramPlan(
        program=name,
        lp_status=sol.status,
        caps=caps,
        reserve=reserve,
        schedule=sched,
        revenue_per_day=revenue,
        cost_per_day=cost,
        profit_per_day=revenue - cost,
        objective_value=sol.objective_value,
    )
    plan.co_charging_slots = sched.co_charging_slots()
    if plan.co_charging_slots:
        log.info("%s/%s: simultaneous charge and discharge in %d slots", name, tech.name, len(plan.co_charging_slots))
    return plan


def build(tech: EssTechnology, spec: ProgramSpec, tracked: Optional[Sequence[int]] = None):
    """Build the program LP; returns ``(problem, variables, tracked_or_None)``."""
    if isinstance(spec, RsrSpec):
        return build_rsr_lp(tech, spec, tracked)
    if isinstance(spec, CrSpec):
        return (*build_cr_lp(tech, spec), None)
    if isinstance(spec, PsSpec):
        return (*build_ps_lp(tech, spec), None)
    raise TypeError(f"unsupported program spec {type(spec).__name__}")


def optimize(
    tech: EssTechnology,
    spec: ProgramSpec,
    tracked: Optional[Sequence[int]] = None,
    method: str = "highs",
) -> ProgramPlan:
    name = program_name(spec)
    problem, v, slots = build(tech, spec, tracked)
    sol = solve(problem, method=method)
    if not sol.optimal:
        return ProgramPlan(program=name, lp_status=sol.status, tracked=slots)
    plan = _extract(name, tech, spec, v, sol)
    plan.tracked = slots
    return plan


SWEEP_PARAMS = ("p_cap", "e_cap", "reserve_price", "opex_price", "capex_price")


def apply_param(spec: ProgramSpec, name: str, value: float) -> ProgramSpec:
    """Copy of ``spec`` with one sweep parameter set."""
    if name in ("p_cap", "e_cap"):
        k = 0 if name == "p_cap" else 1
        fixed = list(spec.fixed_caps) if spec.fixed_caps is not None else [None, None]
        fixed[k] = float(value)
        return replace(spec, fixed_caps=tuple(fixed))
    if name == "reserve_price":
        if isinstance(spec, PsSpec):
            raise ContractError("reserve_price does not apply to peak shaving")
        return replace(spec, reserve_price=float(value))
    if name in ("opex_price", "capex_price"):
        if not isinstance(spec, PsSpec):
            raise ContractError(f"{name} applies to peak shaving only")
        field_name = "opex_peak_price" if name == "opex_price" else "capex_peak_price"
        return replace(spec, **{field_name: float(value)})
    raise ContractError(f"unknown sweep parameter {name!r}; expected one of {SWEEP_PARAMS}")


@dataclass
class SweepResult:
    """Profit grid over one or two parameter axes.

    ``profit[i][j]`` pairs ``axis1`` value ``i`` with ``axis2`` value ``j``
    (a single column when there is no second axis).  Failed points hold
    NaN profit and their status string.
    """

    axis1_name: str
    axis1: list[float]
    axis2_name: Optional[str]
    axis2: list[float]
    profit: np.ndarray
    status: list[list[str]]

    def to_csv(self, path) -> None:
        col_label = self.axis2_name or "profit"
        cols = self.axis2 if self.axis2_name else [None]
        head = [f"{self.axis1_name}\\{col_label}" if self.axis2_name else self.axis1_name]
        head += [repr(float(c)) for c in cols] if self.axis2_name else ["profit_per_day"]
        lines = [",".join(head)]
        for i, a in enumerate(self.axis1):
            cells = []
            for j in range(len(cols)):
                st = self.status[i][j]
                cells.append(repr(float(self.profit[i, j])) if st == Status.OPTIMAL.value else st)
            lines.append(",".join([repr(float(a))] + cells))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def _sweep_point(args):
    tech, spec, tracked, method = args
    try:
        plan = optimize(tech, spec, tracked, method)
    except Exception as exc:  # recorded in-cell, never aborts the sweep
        return math.nan, f"Error: {exc}".replace(",", ";")
    if not plan.optimal:
        return math.nan, plan.lp_status.value
    return plan.profit_per_day, plan.lp_status.value


def sweep(
    tech: EssTechnology,
    spec: ProgramSpec,
    axis1: tuple[str, Sequence[float]],
    axis2: Optional[tuple[str, Sequence[float]]] = None,
    tracked: Optional[Sequence[int]] = None,
    workers: int = 1,
    method: str = "highs",
) -> SweepResult:
    """Optimize at every grid point with the swept parameters fixed.

    ``workers > 1`` fans the points out to a process pool; results are
    assembled in grid order either way.
    """
    name1, values1 = axis1
    values1 = [float(x) for x in values1]
    if not values1:
        raise ContractError("sweep axis is empty")
    name2, values2 = (axis2[0], [float(x) for x in axis2[1]]) if axis2 else (None, [math.nan])
    if axis2 and not values2:
        raise ContractError("sweep axis is empty")
    for name in (name1, name2):
        if name is not None and name not in SWEEP_PARAMS:
            raise ContractError(f"unknown sweep parameter {name!r}; expected one of {SWEEP_PARAMS}")
    jobs = []
    for a in values1:
        for b in values2:
            s = apply_param(spec, name1, a)
            if name2 is not None:
                s = apply_param(s, name2, b)
            jobs.append((tech, s, tracked, method))
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs), os.cpu_count() or 1)) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    n2 = len(values2)
    profit = np.array([r[0] for r in results], dtype=float).reshape(len(values1), n2)
    status = [[results[i * n2 + j][1] for j in range(n2)] for i in range(len(values1))]
    return SweepResult(name1, values1, name2, values2 if name2 else [], profit, status)
