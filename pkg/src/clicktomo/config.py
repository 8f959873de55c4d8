"""Run configuration read from TOML, with command-line overrides."""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .exceptions import TomographyError
from .povm_solver import SolverConfig
from .probe_states import CalibrationConstants


class ConfigError(TomographyError):
    """Invalid or inconsistent configuration."""


@dataclass
class SimulatorSettings:
    """Synthetic-detector settings. ``target_*`` values, when set, are tuned for."""

    n_pixels: int = 4
    efficiency: float = 0.63
    dark_prob: float = 0.0
    xtalk_prob: float = 0.0
    target_dark: float | None = None
    target_xtalk: float | None = None
    n_probes: int = 19
    trials_per_probe: int = 5_000_000


@dataclass
class MonteCarloSettings:
    samples: int = 100
    amplitude_rel_sigma: float = 0.05
    correlated: bool = False


@dataclass
class RunConfig:
    seed: int = 0
    truncation_sigma: float = 6.0
    calibration: CalibrationConstants = field(default_factory=CalibrationConstants)
    solver: SolverConfig = field(default_factory=SolverConfig)
    simulator: SimulatorSettings = field(default_factory=SimulatorSettings)
    mc: MonteCarloSettings = field(default_factory=MonteCarloSettings)
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        """Stable short hash of the effective configuration."""
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


_SECTIONS = {
    "calibration": CalibrationConstants,
    "solver": SolverConfig,
    "simulator": SimulatorSettings,
    "mc": MonteCarloSettings,
}


def _build(cls, values: dict, section: str):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"[{section}]: unknown key(s) {unknown}; allowed {sorted(known)}")
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}]: {exc}") from None


#: Top-level shorthands for the most used settings.
_ALIASES = {
    "epsilon": ("solver", "epsilon"),
    "mc_samples": ("mc", "samples"),
    "amplitude_rel_sigma": ("mc", "amplitude_rel_sigma"),
}


def config_from_dict(doc: dict) -> RunConfig:
    doc = {k: (dict(v) if isinstance(v, dict) else v) for k, v in doc.items()}
    for alias, (section, key) in _ALIASES.items():
        if alias in doc:
            table = doc.setdefault(section, {})
            if not isinstance(table, dict):
                raise ConfigError(f"[{section}] must be a table")
            if key in table:
                raise ConfigError(f"{alias} is given both at top level and in [{section}]")
            table[key] = doc.pop(alias)
    kwargs = {}
    for name, cls in _SECTIONS.items():
        section = doc.pop(name, {})
        if not isinstance(section, dict):
            raise ConfigError(f"[{name}] must be a table")
        if name == "solver" and "truncation_sigma" in section:
            section = dict(section)
            kwargs["truncation_sigma"] = section.pop("truncation_sigma")
        kwargs[name] = _build(cls, section, name)
    meta = doc.pop("metadata", {})
    if not isinstance(meta, dict):
        raise ConfigError("[metadata] must be a table")
    kwargs["metadata"] = meta
    for key in ("seed", "truncation_sigma"):
        if key in doc:
            kwargs[key] = doc.pop(key)
    if doc:
        raise ConfigError(f"unknown top-level key(s) {sorted(doc)}")
    cfg = RunConfig(**kwargs)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    if not isinstance(cfg.seed, int) or cfg.seed < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {cfg.seed!r}")
    if not cfg.truncation_sigma > 0:
        raise ConfigError(f"truncation_sigma must be > 0, got {cfg.truncation_sigma}")
    sim = cfg.simulator
    if sim.trials_per_probe < 1:
        raise ConfigError(f"trials_per_probe must be >= 1, got {sim.trials_per_probe}")
    if sim.n_probes < 1:
        raise ConfigError(f"n_probes must be >= 1, got {sim.n_probes}")
    if sim.n_pixels < 1:
        raise ConfigError(f"n_pixels must be >= 1, got {sim.n_pixels}")
    for name in ("efficiency", "dark_prob", "xtalk_prob"):
        v = getattr(sim, name)
        if not 0.0 <= v <= 1.0:
            raise ConfigError(f"simulator {name} must lie in [0, 1], got {v}")
    mc = cfg.mc
    if mc.samples < 2:
        raise ConfigError(f"mc samples must be >= 2, got {mc.samples}")
    if mc.amplitude_rel_sigma < 0:
        raise ConfigError(f"amplitude_rel_sigma must be >= 0, got {mc.amplitude_rel_sigma}")


def load_config(path: str | Path | None) -> RunConfig:
    """Read a TOML run configuration; ``None`` gives the defaults."""
    if path is None:
        return RunConfig()
    with open(path, "rb") as fh:
        try:
            doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(doc)


def with_overrides(cfg: RunConfig, **overrides) -> RunConfig:
    """Apply dotted overrides such as ``{"solver.epsilon": 0.2}``; ``None`` values are skipped."""
    doc = cfg.to_dict()
    for key, value in overrides.items():
        if value is None:
            continue
        *path, leaf = key.split(".")
        node = doc
        for part in path:
            node = node[part]
        node[leaf] = value
    return config_from_dict(doc)
