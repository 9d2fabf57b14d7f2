"""Real-time regulation-service operation without signal foresight.

Two policies are provided.  The threshold policy (batteries) tracks small
signal values exactly, caps mid-range values and spends large-signal slots
restoring the store toward a middle energy level.  The fixed-interval
policy (capacitors, flywheels) tracks with a cap and restores the store
every ``adjust_interval`` slots.  Both clamp every action so the store
never leaves its power and energy limits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .ess import Capacities, EssTechnology, Schedule, check_feasibility, max_ramp_step, per_slot_self_discharge
from .heuristics import select, tracked_count
from .programs import RsrSpec, optimize, rsr_revenue, tracking_band_hits
from .traces import Trace

DEFAULT_LAMBDA = {"battery": 0.9, "ucfw": 0.75}
POLICY_FOR_TECH = {"la": "battery", "li": "battery", "caes": "battery", "uc": "ucfw", "fw": "ucfw"}
HEURISTIC_FOR_POLICY = {"battery": "mincap", "ucfw": "fixint"}


def middle_energy(tech: EssTechnology, caps: Capacities, slot_hours: float) -> float:
    """Restore target ``DoD * E_cap / (2 (1 - mu))``, kept inside the usable band."""
    mu = per_slot_self_discharge(tech, slot_hours)
    e_m = tech.depth_of_discharge * caps.e_cap / (2.0 * (1.0 - mu))
    floor = (1.0 - tech.depth_of_discharge) * caps.e_cap
    return min(max(e_m, floor), caps.e_cap)


@dataclass
class BatteryPolicy:
    theta0: float
    theta1: float
    reserve: float
    target_energy: float
    rho1: float
    rho2: float
    # optional hook: called after every slot with (policy, beta, in_band)
    on_step: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        if not 0 <= self.theta1 <= self.theta0 <= 1:
            raise ValueError("thresholds must satisfy 0 <= theta1 <= theta0 <= 1")
        if self.reserve < 0:
            raise ValueError("reserve must be non-negative")

    def desired(self, t: int, beta: float, e_prev: float, keep: float, slot_hours: float, limits) -> float:
        mag = abs(beta)
        if mag < self.theta1:
            return self.reserve * beta
        if mag <= self.theta0:
            return self.theta1 * self.reserve * math.copysign(1.0, beta)
        return _toward(self.target_energy, e_prev, keep, slot_hours, limits)


@dataclass
class UcFwPolicy:
    adjust_interval: Optional[int]  # None: never adjust
    theta1: float
    reserve: float
    target_energy: float
    rho1: float
    rho2: float
    on_step: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        if self.adjust_interval is not None and self.adjust_interval < 1:
            raise ValueError("adjust_interval must be >= 1")
        if self.reserve < 0:
            raise ValueError("reserve must be non-negative")

    def desired(self, t: int, beta: float, e_prev: float, keep: float, slot_hours: float, limits) -> float:
        if self.adjust_interval is not None and t % self.adjust_interval == 0:
            return _toward(self.target_energy, e_prev, keep, slot_hours, limits)
        if abs(beta) < self.theta1:
            return self.reserve * beta
        return self.theta1 * self.reserve * math.copysign(1.0, beta)


def empirical_quantile(values: Sequence[float], q: float) -> float:
    """Smallest sample ``v`` with at least a ``q`` fraction of samples ``<= v``."""
    s = np.sort(np.asarray(values, dtype=float))
    k = max(tracked_count(len(s), q) - 1, 0)
    return float(s[k])


def init_battery_policy(
    hist_signal,
    rho1: float,
    rho2: float,
    tech: EssTechnology,
    caps: Capacities,
    reserve: float,
    slot_hours: Optional[float] = None,
) -> BatteryPolicy:
    values, slot_hours = _signal_values(hist_signal, slot_hours)
    if len(values) == 0:
        raise ValueError("historical signal is empty")
    theta0 = empirical_quantile(np.abs(values), rho2)
    return BatteryPolicy(
        theta0=theta0,
        theta1=(1.0 - rho1) * theta0,
        reserve=float(reserve),
        target_energy=middle_energy(tech, caps, slot_hours),
        rho1=rho1,
        rho2=rho2,
    )


def init_ucfw_policy(
    rho1: float,
    rho2: float,
    tech: EssTechnology,
    caps: Capacities,
    reserve: float,
    slot_hours: float,
) -> UcFwPolicy:
    interval = None if rho2 >= 1 else math.ceil(1.0 / (1.0 - rho2) - 1e-9)
    return UcFwPolicy(
        adjust_interval=interval,
        theta1=1.0 - rho1,
        reserve=float(reserve),
        target_energy=middle_energy(tech, caps, slot_hours),
        rho1=rho1,
        rho2=rho2,
    )


def _signal_values(signal, slot_hours):
    if isinstance(signal, Trace):
        return signal.values, signal.slot_hours if slot_hours is None else slot_hours
    if slot_hours is None:
        raise ValueError("slot_hours is required for a bare signal sequence")
    return np.asarray(signal, dtype=float), slot_hours


@dataclass(frozen=True)
class _Limits:
    charge_max: float
    discharge_max: float
    e_min: float
    e_max: float
    eta: float


def _limits(tech: EssTechnology, caps: Capacities) -> _Limits:
    return _Limits(
        caps.p_cap / tech.charge_rate_ratio,
        caps.p_cap,
        (1.0 - tech.depth_of_discharge) * caps.e_cap,
        caps.e_cap,
        tech.charge_efficiency,
    )


def _toward(target: float, e_prev: float, keep: float, slot_hours: float, lim: _Limits) -> float:
    """Net power that moves the store toward ``target`` as fast as limits allow."""
    gap = target - keep * e_prev
    if gap > 0:
        return min(gap / slot_hours, lim.charge_max) / lim.eta
    return -min(-gap / slot_hours, lim.discharge_max)


def _clamp(u: float, e_prev: float, keep: float, slot_hours: float, lim: _Limits, d_prev=None, ramp=math.inf):
    """Realize a desired net power as ``(r, d, u)`` inside every store limit."""
    decayed = keep * e_prev
    r_lo = max(0.0, (lim.e_min - decayed) / slot_hours)
    r_hi = max(0.0, min(lim.charge_max, (lim.e_max - decayed) / slot_hours))
    d_hi = max(0.0, min(lim.discharge_max, (decayed - lim.e_min) / slot_hours))
    if d_prev is not None:
        d_hi = min(d_hi, d_prev + ramp)
    if u >= 0 or r_lo > 0:
        r = min(max(u * lim.eta, r_lo), r_hi)
        return r, 0.0, r / lim.eta
    d = min(-u, d_hi)
    return 0.0, d, -d


def policy_step(policy, t: int, e_prev: float, beta_rt: float, tech: EssTechnology, caps: Capacities,
                slot_hours: float, d_prev: Optional[float] = None) -> tuple[float, float, float]:
    """One slot of ``policy``; returns the realized ``(r, d, u)``.

    ``t`` is the 1-based slot index.  ``d_prev`` (previous discharge)
    enables the discharge ramp limit.
    """
    if abs(beta_rt) > 1:
        raise ValueError("signal value outside [-1, 1]")
    lim = _limits(tech, caps)
    keep = 1.0 - per_slot_self_discharge(tech, slot_hours)
    want = 0.0 if policy.reserve == 0 else policy.desired(t, beta_rt, e_prev, keep, slot_hours, lim)
    ramp = max_ramp_step(tech, caps, slot_hours)
    return _clamp(want, e_prev, keep, slot_hours, lim, d_prev, ramp)


def battery_step(policy: BatteryPolicy, e_prev: float, beta_rt: float, tech: EssTechnology, caps: Capacities,
                 slot_hours: float, d_prev: Optional[float] = None):
    return policy_step(policy, 1, e_prev, beta_rt, tech, caps, slot_hours, d_prev)


def ucfw_step(policy: UcFwPolicy, t: int, e_prev: float, beta_rt: float, tech: EssTechnology, caps: Capacities,
              slot_hours: float, d_prev: Optional[float] = None):
    return policy_step(policy, t, e_prev, beta_rt, tech, caps, slot_hours, d_prev)


def estimate_reserve(hourly_offline_R: Sequence[float], lam: float) -> float:
    """Discounted minimum of recent offline reserve optima."""
    if len(hourly_offline_R) == 0:
        raise ValueError("reserve history is empty")
    if not 0 < lam <= 1:
        raise ValueError("lambda must be in (0, 1]")
    return lam * float(min(hourly_offline_R))


@dataclass
class OnlineResult:
    schedule: Schedule
    reserve: float
    revenue_per_day: float
    tracked_ok_count: int
    required_count: int
    violations: int
    beta: np.ndarray = field(repr=False)

    @property
    def feasible(self) -> bool:
        return self.violations == 0 and self.tracked_ok_count >= self.required_count

    @property
    def tracked_ok_fraction(self) -> float:
        n = self.schedule.num_slots
        return self.tracked_ok_count / n if n else 1.0

    def report(self) -> dict:
        return {
            "reserve_kw": self.reserve,
            "revenue": self.revenue_per_day,
            "tracked_ok_fraction": self.tracked_ok_fraction,
            "violations": self.violations,
            "feasible": self.feasible,
        }

    def to_csv(self, path) -> None:
        self.schedule.to_csv(path, beta=self.beta)


def run_online(
    policy,
    signal: Trace,
    tech: EssTechnology,
    caps: Capacities,
    reserve_price: float = 0.1,
    penalty_coeff: float = 1.0,
    hours_per_day: float = 24.0,
) -> OnlineResult:
    """Step ``policy`` over ``signal`` from the middle energy level."""
    beta = signal.values
    T = len(beta)
    dt = signal.slot_hours
    keep = 1.0 - per_slot_self_discharge(tech, dt)
    r = np.zeros(T)
    d = np.zeros(T)
    u = np.zeros(T)
    e = np.empty(T + 1)
    e[0] = policy.target_energy
    d_prev = None
    for t in range(T):
        r[t], d[t], u[t] = policy_step(policy, t + 1, e[t], float(beta[t]), tech, caps, dt, d_prev)
        e[t + 1] = keep * e[t] + (r[t] - d[t]) * dt
        d_prev = d[t]
        if policy.on_step is not None:
            hit = bool(tracking_band_hits(beta[t:t + 1], policy.reserve, u[t:t + 1], policy.rho1)[0])
            policy.on_step(policy, float(beta[t]), hit)
    sched = Schedule(dt, r, d, u, e)
    spec = RsrSpec(signal=signal, reserve_price=reserve_price, penalty_coeff=penalty_coeff,
                   rho1=policy.rho1, rho2=policy.rho2, hours_per_day=hours_per_day)
    revenue = rsr_revenue(spec, policy.reserve, u)
    hits = int(np.count_nonzero(tracking_band_hits(beta, policy.reserve, u, policy.rho1)))
    violations = len(check_feasibility(sched, tech, caps, tol=1e-9))
    return OnlineResult(sched, policy.reserve, revenue, hits, tracked_count(T, policy.rho2) if T else 0, violations, beta)


@dataclass
class HoldoutHour:
    hour: int
    reserve_kw: float
    online: OnlineResult
    offline_reserve_kw: float
    offline_revenue: float

    def report(self) -> dict:
        out = {"hour": self.hour}
        out.update(self.online.report())
        out["offline_reserve_kw"] = self.offline_reserve_kw
        out["offline_revenue"] = self.offline_revenue
        return out


def offline_hourly_reserves(
    tech: EssTechnology,
    caps: Capacities,
    signal: Trace,
    rho1: float,
    rho2: float,
    heuristic: str,
    hours: Sequence[int],
    reserve_price: float = 0.1,
    penalty_coeff: float = 1.0,
    seed: int = 0,
) -> dict[int, tuple[float, float]]:
    """Offline optimum ``(R, revenue)`` per 1-hour block of ``signal`` at fixed capacities."""
    per_hour = _slots_per_hour(signal)
    out = {}
    for h in hours:
        block = signal.window(h * per_hour, (h + 1) * per_hour)
        tracked = None if rho2 >= 1 else list(select(heuristic, block.values, rho2, seed))
        spec = RsrSpec(signal=block, reserve_price=reserve_price, penalty_coeff=penalty_coeff, rho1=rho1,
                       rho2=rho2, fixed_caps=(caps.p_cap, caps.e_cap))
        plan = optimize(tech, spec, tracked)
        if not plan.optimal:
            raise RuntimeError(f"offline optimum for hour {h} is {plan.lp_status.value}")
        out[h] = (plan.reserve, plan.revenue_per_day)
    return out


def _slots_per_hour(signal: Trace) -> int:
    per_hour = 3600.0 / signal.slot_seconds
    if abs(per_hour - round(per_hour)) > 1e-9:
        raise ValueError("slot length must divide one hour")
    return int(round(per_hour))


def holdout_protocol(
    tech: EssTechnology,
    caps: Capacities,
    signal: Trace,
    lam: float,
    rho1: float = 0.2,
    rho2: float = 0.9,
    policy_kind: Optional[str] = None,
    window_hours: int = 12,
    reserve_price: float = 0.1,
    penalty_coeff: float = 1.0,
    seed: int = 0,
) -> list[HoldoutHour]:
    """Test each hour after the first ``window_hours`` using only earlier hours.

    The online reserve is ``lam`` times the smallest offline optimum of the
    preceding ``window_hours`` hours; threshold statistics come from the
    same history.
    """
    if not 0 <= lam <= 1:
        raise ValueError("lambda must be in [0, 1]")
    kind = policy_kind or POLICY_FOR_TECH.get(tech.name, "battery")
    if kind not in DEFAULT_LAMBDA:
        raise ValueError(f"unknown policy kind {kind!r}")
    per_hour = _slots_per_hour(signal)
    total_hours = len(signal) // per_hour
    if total_hours < 2 * window_hours:
        raise ValueError(f"signal covers {total_hours} h, need at least {2 * window_hours} h")
    test_hours = range(window_hours, 2 * window_hours)
    heuristic = HEURISTIC_FOR_POLICY[kind]
    offline = offline_hourly_reserves(
        tech, caps, signal, rho1, rho2, heuristic, range(0, 2 * window_hours), reserve_price, penalty_coeff, seed
    )
    results = []
    for h in test_hours:
        past = [offline[k][0] for k in range(h - window_hours, h)]
        reserve = lam * min(past) if lam > 0 else 0.0
        hist = signal.window((h - window_hours) * per_hour, h * per_hour)
        block = signal.window(h * per_hour, (h + 1) * per_hour)
        if kind == "battery":
            policy = init_battery_policy(hist, rho1, rho2, tech, caps, reserve)
        else:
            policy = init_ucfw_policy(rho1, rho2, tech, caps, reserve, signal.slot_hours)
        res = run_online(policy, block, tech, caps, reserve_price, penalty_coeff)
        results.append(HoldoutHour(h, reserve, res, offline[h][0], offline[h][1]))
    return results
