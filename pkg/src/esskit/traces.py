"""Uniformly sampled traces: regulation signals and facility power.

CSV layout::

    t,beta                 (or t,power_kw)
    # slot_seconds=4
    1,0.0
    2,0.013
    ...
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

RSR_SIGNAL = "rsr_signal"
POWER_KW = "power_kw"
KINDS = (RSR_SIGNAL, POWER_KW)
_COLUMN = {RSR_SIGNAL: "beta", POWER_KW: "power_kw"}
_KIND_OF_COLUMN = {v: k for k, v in _COLUMN.items()}


class TraceParseError(ValueError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Trace:
    slot_seconds: float
    values: np.ndarray
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown trace kind {self.kind!r}")
        if not self.slot_seconds > 0:
            raise ValueError("slot_seconds must be positive")
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 1:
            raise ValueError("trace values must be one-dimensional")
        if not np.all(np.isfinite(vals)):
            raise ValueError("trace values must be finite")
        if self.kind == RSR_SIGNAL and np.any(np.abs(vals) > 1.0):
            raise ValueError("regulation signal values must lie in [-1, 1]")
        if self.kind == POWER_KW and np.any(vals < 0):
            raise ValueError("power values must be non-negative")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def slot_hours(self) -> float:
        return self.slot_seconds / 3600.0

    @property
    def duration_hours(self) -> float:
        return len(self.values) * self.slot_hours

    def window(self, start: int, stop: int) -> "Trace":
        """Slots ``start..stop-1`` (0-based) as a new trace."""
        return Trace(self.slot_seconds, self.values[start:stop].copy(), self.kind)

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.slot_seconds == other.slot_seconds
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


def gen_rsr_signal(
    T: int,
    slot_seconds: float = 4.0,
    tau: float = 200.0,
    mean_reversion: float = 0.001,
    seed: int = 0,
) -> Trace:
    """Bounded-increment random walk in [-1, 1] starting at zero.

    Each step decays the previous value by ``mean_reversion`` and adds an
    increment drawn uniformly from ``+-slot_seconds / tau``.  ``tau = inf``
    gives zero increments.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    if not tau > 0:
        raise ValueError("tau must be positive")
    if not 0 <= mean_reversion <= 1:
        raise ValueError("mean_reversion must be in [0, 1]")
    rng = np.random.default_rng(seed)
    step = slot_seconds / tau
    inc = rng.uniform(-step, step, size=T - 1) if step > 0 else np.zeros(T - 1)
    beta = np.empty(T)
    beta[0] = 0.0
    keep = 1.0 - mean_reversion
    b = 0.0
    for t in range(T - 1):
        b = min(1.0, max(-1.0, b * keep + inc[t]))
        beta[t + 1] = b
    return Trace(float(slot_seconds), beta, RSR_SIGNAL)


def gen_power_trace(
    T: int,
    slot_seconds: float = 900.0,
    peak_kw: float = 1000.0,
    base_fraction: float = 0.35,
    noise_fraction: float = 0.05,
    seed: int = 0,
) -> Trace:
    """Daily load profile: flat base with a half-sine daytime hump.

    The hump spans 06:00-18:00 of each day.  Multiplicative noise drawn
    from ``1 +- noise_fraction`` is applied, values are clipped to
    ``[0, peak_kw]`` and the trace is rescaled so its maximum equals
    ``peak_kw`` exactly.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    if not peak_kw > 0:
        raise ValueError("peak_kw must be positive")
    if not 0 <= base_fraction < 1:
        raise ValueError("base_fraction must be in [0, 1)")
    if not 0 <= noise_fraction < 1:
        raise ValueError("noise_fraction must be in [0, 1)")
    rng = np.random.default_rng(seed)
    hours = ((np.arange(T) + 0.5) * slot_seconds / 3600.0) % 24.0
    hump = np.where((hours >= 6) & (hours <= 18), np.sin(np.pi * (hours - 6) / 12.0), 0.0)
    base = base_fraction * peak_kw
    p = base + (peak_kw - base) * np.clip(hump, 0.0, None)
    p = p * (1.0 + rng.uniform(-noise_fraction, noise_fraction, size=T))
    p = np.clip(p, 0.0, peak_kw)
    top = p.max()
    if top > 0:
        p = p * (peak_kw / top)
    # exact peak despite rounding of the rescale
    p = np.minimum(p, peak_kw)
    p[int(np.argmax(p))] = peak_kw
    return Trace(float(slot_seconds), p, POWER_KW)


def save_csv(trace: Trace, path) -> None:
    lines = [f"t,{_COLUMN[trace.kind]}", f"# slot_seconds={trace.slot_seconds!r}"]
    lines.extend(f"{t + 1},{float(v)!r}" for t, v in enumerate(trace.values))
    Path(path).write_text("\n".join(lines) + "\n")


def load_csv(path, kind: str | None = None) -> Trace:
    """Parse a trace file; ``kind`` (if given) must match the header."""
    text = Path(path).read_text().splitlines()
    if not text:
        raise TraceParseError(path, 1, "missing header")
    header = text[0].strip().split(",")
    if len(header) != 2 or header[0] != "t" or header[1] not in _KIND_OF_COLUMN:
        raise TraceParseError(path, 1, "header must be 't,beta' or 't,power_kw'")
    file_kind = _KIND_OF_COLUMN[header[1]]
    if kind is not None and kind != file_kind:
        raise TraceParseError(path, 1, f"expected a {kind} trace, file holds {file_kind}")
    if len(text) < 2 or not text[1].startswith("# slot_seconds="):
        raise TraceParseError(path, 2, "missing '# slot_seconds=<number>' line")
    try:
        slot_seconds = float(text[1].split("=", 1)[1])
    except ValueError:
        raise TraceParseError(path, 2, "slot_seconds is not a number") from None
    if not slot_seconds > 0:
        raise TraceParseError(path, 2, "slot_seconds must be positive")
    values = []
    for lineno, line in enumerate(text[2:], start=3):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise TraceParseError(path, lineno, "expected two columns")
        try:
            t = int(parts[0])
            v = float(parts[1])
        except ValueError:
            raise TraceParseError(path, lineno, "malformed number") from None
        if t != len(values) + 1:
            raise TraceParseError(path, lineno, f"expected t={len(values) + 1}, got {t}")
        if not math.isfinite(v):
            raise TraceParseError(path, lineno, "value is not finite")
        if file_kind == RSR_SIGNAL and abs(v) > 1.0:
            raise TraceParseError(path, lineno, f"signal value {v} outside [-1, 1]")
        if file_kind == POWER_KW and v < 0:
            raise TraceParseError(path, lineno, f"negative power {v}")
        values.append(v)
    return Trace(slot_seconds, np.array(values), file_kind)


def downsample(trace: Trace, factor: int) -> Trace:
    """Block means over ``factor`` consecutive slots.

    A trailing partial block is dropped with a :class:`UserWarning`.
    """
    if factor < 1 or int(factor) != factor:
        raise ValueError("factor must be a positive integer")
    factor = int(factor)
    n = len(trace.values) // factor
    if n * factor != len(trace.values):
        warnings.warn(
            f"downsample: dropping {len(trace.values) - n * factor} trailing slots",
            UserWarning,
            stacklevel=2,
        )
    vals = trace.values[: n * factor].reshape(n, factor).mean(axis=1)
    if trace.kind == RSR_SIGNAL:
        vals = np.clip(vals, -1.0, 1.0)
    return Trace(trace.slot_seconds * factor, vals, trace.kind)


def estimate_cycles_per_day(trace: Trace) -> float:
    """Full charge/discharge cycles per day, one cycle per two sign changes.

    Zero samples carry no sign and are skipped.  The rate is taken over the
    ``T - 1`` slot transitions of the trace.
    """
    if trace.kind != RSR_SIGNAL:
        raise ValueError("cycle estimation needs a regulation signal trace")
    signs = np.sign(trace.values)
    signs = signs[signs != 0]
    changes = int(np.count_nonzero(signs[1:] != signs[:-1])) if len(signs) > 1 else 0
    days = (len(trace.values) - 1) * trace.slot_seconds / 86400.0
    return (changes / 2.0) / days if days > 0 else 0.0
