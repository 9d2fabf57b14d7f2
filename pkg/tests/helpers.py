"""Shared builders for the test suite."""
from __future__ import annotations

import numpy as np

from esskit.ess import EssTechnology
from esskit.lp import LpProblem
from esskit.traces import POWER_KW, RSR_SIGNAL, Trace


def to_problem(inst: dict) -> LpProblem:
    p = LpProblem()
    for j, cj in enumerate(inst["c"]):
        p.add_var(f"x{j}", inst["lo"][j], inst["hi"][j], cj)
    for row, rel, rhs in zip(inst["A"], inst["rel"], inst["b"]):
        p.add_constraint({j: a for j, a in enumerate(row) if a}, rel, rhs)
    return p


def make_tech(**overrides) -> EssTechnology:
    """Cheap, lossy test store; equipment cost is small next to revenue."""
    base = dict(
        name="test",
        power_price=1.0,
        energy_price=1.0,
        float_life_days=3650.0,
        cycle_life=1e6,
        self_discharge_per_hour=0.01,
        charge_efficiency=0.9,
        charge_rate_ratio=2.0,
        depth_of_discharge=0.8,
        ramp_time_seconds=0.001,
    )
    base.update(overrides)
    return EssTechnology(**base)


def signal(values, slot_seconds=60.0) -> Trace:
    return Trace(slot_seconds, np.asarray(values, dtype=float), RSR_SIGNAL)


def power(values, slot_seconds=900.0) -> Trace:
    return Trace(slot_seconds, np.asarray(values, dtype=float), POWER_KW)
