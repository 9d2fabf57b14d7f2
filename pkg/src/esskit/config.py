"""Run configuration: technologies, program prices, trace generators."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from .ess import Capacities, EssTechnology, technologies_from_mapping
from .programs import CrSpec, PsSpec, RsrSpec
from .traces import POWER_KW, RSR_SIGNAL, Trace, downsample, gen_power_trace, gen_rsr_signal, load_csv

DEFAULT_CONFIG_NAME = "defaults.json"
OUT_ENV = "ESSKIT_OUT"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    technologies: dict[str, EssTechnology]
    typical_caps: dict[str, Capacities] = field(default_factory=dict)
    programs: dict[str, dict] = field(default_factory=dict)
    traces: dict[str, dict] = field(default_factory=dict)
    online: dict = field(default_factory=dict)
    output_dir: Path = Path(".")

    def __post_init__(self):
        for name in self.typical_caps:
            if name not in self.technologies:
                raise ConfigError(f"typical_caps names unknown technology {name!r}")

    def tech(self, name: str) -> EssTechnology:
        try:
            return self.technologies[name]
        except KeyError:
            raise ConfigError(f"unknown technology {name!r}; known: {sorted(self.technologies)}") from None

    def caps(self, name: str) -> Capacities:
        try:
            return self.typical_caps[name]
        except KeyError:
            raise ConfigError(f"no typical capacities for {name!r}") from None

    # traces

    def rsr_signal(self, path=None) -> Trace:
        """Signal from ``path`` or the configured generator (downsampled)."""
        if path is not None:
            return load_csv(path, RSR_SIGNAL)
        g = dict(self.traces.get("rsr", {}))
        factor = int(g.pop("downsample", 1))
        sig = gen_rsr_signal(int(g.pop("slots", 21600)), **g)
        return downsample(sig, factor) if factor > 1 else sig

    def power_trace(self, path=None) -> Trace:
        if path is not None:
            return load_csv(path, POWER_KW)
        g = dict(self.traces.get("power", {}))
        return gen_power_trace(int(g.pop("slots", 96)), **g)

    # program specs

    def rsr_spec(self, signal: Trace, **overrides) -> RsrSpec:
        return RsrSpec(signal=signal, **{**self.programs.get("rsr", {}), **overrides})

    def cr_spec(self, **overrides) -> CrSpec:
        return CrSpec(**{**self.programs.get("cr", {}), **overrides})

    def ps_spec(self, power: Trace, **overrides) -> PsSpec:
        return PsSpec(power_trace=power, **{**self.programs.get("ps", {}), **overrides})


def packaged_defaults() -> Path:
    return Path(str(resources.files("esskit") / "data" / DEFAULT_CONFIG_NAME))


def resolve_config_path(path=None) -> Path:
    """Explicit path, else ``./defaults.json``, else the packaged copy."""
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        return p
    local = Path(DEFAULT_CONFIG_NAME)
    return local if local.is_file() else packaged_defaults()


def output_dir(default=".") -> Path:
    return Path(os.environ.get(OUT_ENV) or default)


def config_from_mapping(data: dict, out_dir: Optional[Path] = None) -> RunConfig:
    known = {"technologies", "typical_caps", "programs", "traces", "online"}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    if "technologies" not in data:
        raise ConfigError("config has no 'technologies' section")
    try:
        techs = technologies_from_mapping(data["technologies"])
        caps = {k: Capacities(float(v[0]), float(v[1])) for k, v in data.get("typical_caps", {}).items()}
    except (TypeError, KeyError, IndexError) as exc:
        raise ConfigError(f"malformed technology section: {exc}") from exc
    return RunConfig(
        technologies=techs,
        typical_caps=caps,
        programs=dict(data.get("programs", {})),
        traces=dict(data.get("traces", {})),
        online=dict(data.get("online", {})),
        output_dir=out_dir if out_dir is not None else output_dir(),
    )


def load_config(path=None) -> RunConfig:
    p = resolve_config_path(path)
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON: {exc}") from exc
    return config_from_mapping(data)
