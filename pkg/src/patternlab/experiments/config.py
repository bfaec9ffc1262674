"""Flat, strictly validated experiment configuration.

Configs are one-level JSON objects.  Every key is known up front, every
unknown key is rejected, and the origin of each resolved value (user,
recipe default, or global default) is recorded for the run snapshot.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from typing import Any

__all__ = ["ExperimentConfig", "parse_config", "serialize_config", "RECIPE_DEFAULTS", "ConfigError"]


class ConfigError(ValueError):
    pass


_SQRT2 = math.sqrt(2.0)

# per-recipe default overrides on top of the dataclass defaults
RECIPE_DEFAULTS: dict[str, dict[str, Any]] = {
    "fig4a": {"test_sizes": [50.0, 75.0, 100.0, 125.0, 150.0]},
    "fig4b": {"test_sizes": [50.0, 75.0, 100.0, 125.0, 150.0]},
    "fig4c": {"train_max_sweep": [50.0, 100.0, 150.0], "test_sizes": [150.0]},
    "fig4d": {"test_ps": [round(0.05 * k, 2) for k in range(1, 11)], "test_sizes": [100.0]},
    "fig7": {
        "n_train_min": 10,
        "n_train_max": 50,
        "test_sizes": [50.0, 100.0, 200.0, 350.0, 500.0],
        "test_graphs": 10,
    },
    "table2": {
        "rho": 0.3,
        "test_sizes": [60.0],
        "rho_ratios": [1.0, _SQRT2],
        "max_epochs": 300,
    },
    "table3": {"test_sizes": [100.0], "test_ps": [0.15, 0.3]},
    "table4": {
        "train_ranges": [[90, 100], [140, 150], [190, 200]],
        "test_sizes": [50.0, 75.0],
    },
    "ssl_node": {"test_sizes": [100.0], "ssl_modes": ["none", "pretrain"]},
}


@dataclass
class ExperimentConfig:
    """Resolved settings for one recipe run.

    ``provenance`` maps each field to "user", "recipe", or "default" and is
    excluded from equality so round-tripped configs compare equal.
    """

    recipe: str
    seeds: int = 10
    seed_offset: int = 0
    depth: int = 3
    teacher_width: int = 32
    student_width: int = 64
    activation: str = "relu"
    lr: float = 1e-3
    weight_decay: float = 0.1
    max_epochs: int = 400
    batch_size: int = 32
    patience: int = 50
    train_graphs: int = 100
    val_graphs: int = 20
    test_graphs: int = 20
    n_train_min: int = 40
    n_train_max: int = 50
    p: float = 0.3
    m: int = 4
    rho: float = 0.3
    test_sizes: list[float] = field(default_factory=lambda: [100.0])
    test_ps: list[float] = field(default_factory=list)
    train_max_sweep: list[float] = field(default_factory=list)
    train_ranges: list[list[int]] = field(default_factory=list)
    rho_ratios: list[float] = field(default_factory=lambda: [1.0])
    ssl_modes: list[str] = field(default_factory=lambda: ["none"])
    ssl_alpha: float = 0.5
    ssl_depth: int = 3
    ssl_target_graphs: int = 100
    fewshot_k: list[int] = field(default_factory=list)
    timing: bool = False
    provenance: dict[str, str] = field(default_factory=dict, compare=False, repr=False)

    def validate(self) -> None:
        def bad(name, why):
            raise ConfigError(f"invalid config field {name!r}: {why}")

        if self.recipe not in RECIPE_DEFAULTS:
            raise ConfigError(
                f"unknown recipe {self.recipe!r}; known: {sorted(RECIPE_DEFAULTS)}"
            )
        if self.seeds < 1:
            bad("seeds", "must be at least 1")
        for name in ("depth", "teacher_width", "student_width", "max_epochs",
                     "batch_size", "patience", "train_graphs", "val_graphs",
                     "test_graphs", "ssl_depth", "ssl_target_graphs"):
            if getattr(self, name) < 1:
                bad(name, "must be at least 1")
        if not 0.0 <= self.p <= 1.0:
            bad("p", "must lie in [0, 1]")
        for v in self.test_ps:
            if not 0.0 <= v <= 1.0:
                bad("test_ps", f"probability {v} outside [0, 1]")
        if self.lr <= 0:
            bad("lr", "must be positive")
        if self.weight_decay < 0:
            bad("weight_decay", "must be non-negative")
        if self.rho <= 0:
            bad("rho", "must be positive")
        if self.m < 1:
            bad("m", "must be at least 1")
        if not 1 <= self.n_train_min <= self.n_train_max:
            bad("n_train_min", "need 1 <= n_train_min <= n_train_max")
        if self.activation not in ("relu", "tanh", "sigmoid"):
            bad("activation", f"unknown activation {self.activation!r}")
        if not 0.0 <= self.ssl_alpha <= 1.0:
            bad("ssl_alpha", "must lie in [0, 1]")
        for mode in self.ssl_modes:
            if mode not in ("none", "pretrain", "multitask"):
                bad("ssl_modes", f"unknown mode {mode!r}")
        for k in self.fewshot_k:
            if k < 0:
                bad("fewshot_k", "counts must be non-negative")
        for r in self.train_ranges:
            if len(r) != 2 or r[0] < 1 or r[1] < r[0]:
                bad("train_ranges", f"malformed range {r}")


_FIELDS = {f.name: f for f in fields(ExperimentConfig) if f.name != "provenance"}


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a flat JSON config, filling per-recipe defaults."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if "recipe" not in raw:
        raise ConfigError("missing required field 'recipe'")
    recipe = raw["recipe"]
    if recipe not in RECIPE_DEFAULTS:
        raise ConfigError(f"unknown recipe {recipe!r}; known: {sorted(RECIPE_DEFAULTS)}")
    for key, value in raw.items():
        if key not in _FIELDS:
            raise ConfigError(f"unknown config field {key!r}")
        if isinstance(value, dict):
            raise ConfigError(f"config must stay flat; field {key!r} is an object")
    values: dict[str, Any] = {}
    provenance: dict[str, str] = {}
    for name in _FIELDS:
        if name in raw:
            values[name] = raw[name]
            provenance[name] = "user"
        elif name in RECIPE_DEFAULTS[recipe]:
            values[name] = json.loads(json.dumps(RECIPE_DEFAULTS[recipe][name]))
            provenance[name] = "recipe"
        else:
            provenance[name] = "default"
    cfg = ExperimentConfig(**values, provenance=provenance)
    _coerce_types(cfg)
    cfg.validate()
    return cfg


def _coerce_types(cfg: ExperimentConfig) -> None:
    for name, f in _FIELDS.items():
        value = getattr(cfg, name)
        if f.type in ("int",) and isinstance(value, bool):
            raise ConfigError(f"invalid config field {name!r}: expected integer")
        if f.type == "int":
            if not isinstance(value, int):
                raise ConfigError(f"invalid config field {name!r}: expected integer")
        elif f.type == "float":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"invalid config field {name!r}: expected number")
            setattr(cfg, name, float(value))
        elif f.type == "str":
            if not isinstance(value, str):
                raise ConfigError(f"invalid config field {name!r}: expected string")
        elif f.type == "bool":
            if not isinstance(value, bool):
                raise ConfigError(f"invalid config field {name!r}: expected boolean")


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical JSON of the resolved config (sorted keys, no provenance)."""
    data = {name: getattr(cfg, name) for name in _FIELDS}
    return json.dumps(data, sort_keys=True, indent=2) + "\n"
