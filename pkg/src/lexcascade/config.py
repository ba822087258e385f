"""Run configuration: a flat key = value file with explicit defaults.

Every duration is in hours. The full effective configuration (defaults
included) is echoed into each output file, so a run is reproducible from
its echo plus the input files.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields

from .errors import ConfigError


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_opt_float(raw: str) -> float | None:
    low = raw.strip().lower()
    if low in ("", "none"):
        return None
    return float(raw)


def _parse_opt_int(raw: str) -> int | None:
    low = raw.strip().lower()
    if low in ("", "none"):
        return None
    return int(raw)


def _parse_tuple(raw: str) -> tuple[str, ...]:
    return tuple(s.strip() for s in raw.split(",") if s.strip())


def _parse_float_tuple(raw: str) -> tuple[float, ...]:
    return tuple(float(s) for s in raw.split(",") if s.strip())


@dataclass
class RunConfig:
    # input and output paths
    edges_path: str = ""
    events_path: str = ""
    cities_path: str = ""
    classes_path: str = ""
    out_dir: str = "out"
    # kernel
    decay_per_hour: float = 1.0
    kernel_cutoff_hours: float | None = 24.0
    # features
    tracked_cities: tuple[str, ...] = ()
    tie_percentile: float = 90.0
    aa_threshold: float | None = None
    fit_features: tuple[str, ...] = ("self", "reply", "strong", "local")
    base_features: tuple[str, ...] = ("self", "reply")
    compare_features: tuple[str, ...] = ("strong", "local")
    # estimation
    tol_abs: float = 1e-6
    max_iter: int = 500
    init_weight: float = 1e-4
    freeze_weights: bool = False
    horizon_hours: float | None = None
    # risk pipeline
    permutations: int = 1000
    alpha: float = 0.05
    # execution
    seed: int = 0
    workers: int = 1
    # simulation
    sim_mode: str = "hawkes"
    sim_graph: str = "erdos-renyi"
    sim_nodes: int = 200
    sim_edge_prob: float = 0.03
    sim_cities: tuple[str, ...] = ()
    sim_city_prob_in: float = 0.02
    sim_city_prob_out: float = 0.002
    sim_cores: int = 10
    sim_core_size: int = 4
    sim_periphery_prob: float = 0.001
    sim_city_coherence: float = 1.0
    sim_weights: tuple[float, ...] = (0.3, 0.2, 0.4, 0.1)
    sim_base_rate: float = 0.01
    sim_horizon_hours: float = 100.0
    sim_words: int = 1
    sim_max_events: int | None = None
    sim_stability: str = "per-user"
    sim_stability_factor: float = 0.95
    sim_adopt_prob: float = 0.1
    sim_boost: float = 4.0
    sim_threshold_k: int = 2
    sim_seed_rate: float = 0.001
    sim_delay_hours: float = 0.05

    def echo(self) -> dict:
        """Every field, defaults included, as JSON-ready values."""
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out

    def validate(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 < self.tie_percentile < 100.0:
            raise ConfigError(f"tie_percentile must lie in (0, 100), got {self.tie_percentile}")
        if self.permutations < 1:
            raise ConfigError("permutations must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.decay_per_hour <= 0:
            raise ConfigError("decay_per_hour must be positive")
        if self.kernel_cutoff_hours is not None and self.kernel_cutoff_hours <= 0:
            raise ConfigError("kernel_cutoff_hours must be positive or none")
        if self.sim_mode not in ("hawkes", "simple", "complex"):
            raise ConfigError(f"unknown sim_mode {self.sim_mode!r}")
        if self.sim_stability not in ("per-user", "spectral", "off"):
            raise ConfigError(f"unknown sim_stability {self.sim_stability!r}")
        if len(self.sim_weights) != len(self.fit_features):
            raise ConfigError(
                f"sim_weights has {len(self.sim_weights)} entries for "
                f"{len(self.fit_features)} fit_features"
            )


# annotations are strings here (postponed evaluation), so key on them
_PARSERS = {
    "float": float,
    "int": int,
    "str": lambda s: s,
    "bool": _parse_bool,
    "float | None": _parse_opt_float,
    "int | None": _parse_opt_int,
    "tuple[str, ...]": _parse_tuple,
    "tuple[float, ...]": _parse_float_tuple,
}


def _parser_for(field):
    try:
        return _PARSERS[field.type]
    except KeyError:
        raise ConfigError(f"no parser for config field {field.name!r}") from None


def parse_config(path) -> RunConfig:
    """Parse a flat ``key = value`` file; unknown keys are errors."""
    by_name = {f.name: f for f in fields(RunConfig)}
    values = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    with fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{line_no}: expected 'key = value', got {raw.strip()!r}")
            key, _, raw_value = line.partition("=")
            key = key.strip()
            raw_value = raw_value.strip()
            f = by_name.get(key)
            if f is None:
                raise ConfigError(f"{path}:{line_no}: unknown key {key!r}")
            parser = _parser_for(f)
            try:
                values[key] = parser(raw_value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{path}:{line_no}: bad value for {key!r}: {exc}") from exc
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg
