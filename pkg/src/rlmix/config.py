"""Experiment configuration: a JSON tree plus ``--set key=value`` overrides.

Blocks
------
lattice
    ``topology, n_lossy, v, phi | phi_pi, gamma, delta`` (``delta`` may be
    ``"balanced"``).
initial_state
    exactly one of ``node`` (1-based), ``rule`` (first, middle, last,
    opposite, dark), ``dark: true``, ``recipe_file`` or ``amplitudes``
    (list of reals or ``[re, im]`` pairs, normalized on use).
run
    ``epsilon, t_max, dt, max_extension, workers``.
sweep
    ``parameter`` plus either ``values`` or ``start, stop, steps``.
output
    ``dir, plot, raw_amplitudes, max_rows``.
recipe
    ``support | support_size, kill_modes | kill_count, dark_orthogonal``.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigError, RLMixError
from .lattice import LatticeSpec

STATE_KEYS = ("node", "rule", "dark", "recipe_file", "amplitudes")
SWEEPABLE = {
    "v": "lattice", "phi": "lattice", "phi_pi": "lattice", "gamma": "lattice",
    "n_lossy": "lattice", "delta": "lattice", "epsilon": "run",
}
RUN_DEFAULTS = {"epsilon": 1e-3, "t_max": None, "dt": 0.01, "max_extension": 64, "workers": None}
OUTPUT_DEFAULTS = {"dir": None, "plot": False, "raw_amplitudes": False, "max_rows": 5001}
BLOCKS = ("lattice", "initial_state", "run", "sweep", "output", "recipe", "scaling")


@dataclass
class ExperimentConfig:
    lattice: dict
    initial_state: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)
    sweep: dict | None = None
    output: dict = field(default_factory=dict)
    recipe: dict | None = None
    scaling: dict | None = None

    def __post_init__(self):
        self.run = {**RUN_DEFAULTS, **(self.run or {})}
        self.output = {**OUTPUT_DEFAULTS, **(self.output or {})}
        self.validate()

    # -- validation -------------------------------------------------------
    def validate(self) -> None:
        try:
            self.lattice_spec()
        except RLMixError as exc:
            raise ConfigError(f"lattice: {exc}") from exc
        unknown = set(self.run) - set(RUN_DEFAULTS)
        if unknown:
            raise ConfigError(f"run: unknown keys {sorted(unknown)}")
        unknown = set(self.output) - set(OUTPUT_DEFAULTS)
        if unknown:
            raise ConfigError(f"output: unknown keys {sorted(unknown)}")
        eps = self.run["epsilon"]
        if not isinstance(eps, (int, float)) or not eps > 0:
            raise ConfigError(f"run.epsilon must be positive, got {eps!r}")
        if not self.run["dt"] > 0:
            raise ConfigError("run.dt must be positive")
        if self.initial_state:
            given = [k for k in STATE_KEYS if k in self.initial_state]
            extra = set(self.initial_state) - set(STATE_KEYS)
            if extra:
                raise ConfigError(f"initial_state: unknown keys {sorted(extra)}")
            if len(given) != 1:
                raise ConfigError(f"initial_state needs exactly one source, got {given or 'none'}")
        if self.sweep is not None:
            self.sweep_values()

    def lattice_spec(self, **overrides) -> LatticeSpec:
        data = dict(self.lattice)
        if "phi" in overrides:
            data.pop("phi_pi", None)
        if "phi_pi" in overrides:
            data.pop("phi", None)
        data.update(overrides)
        return LatticeSpec.from_dict(data)

    def sweep_values(self) -> np.ndarray:
        sw = self.sweep or {}
        name = sw.get("parameter")
        if name not in SWEEPABLE:
            raise ConfigError(f"sweep.parameter must be one of {sorted(SWEEPABLE)}, got {name!r}")
        if "values" in sw:
            values = np.asarray(sw["values"], dtype=float)
        else:
            try:
                start, stop, steps = float(sw["start"]), float(sw["stop"]), int(sw["steps"])
            except KeyError as exc:
                raise ConfigError(f"sweep needs 'values' or start/stop/steps (missing {exc})") from None
            if steps < 1 or (steps > 1 and not stop > start):
                raise ConfigError("sweep range is empty")
            values = np.linspace(start, stop, steps)
        if values.ndim != 1 or len(values) == 0:
            raise ConfigError("sweep range is empty")
        if name == "n_lossy":
            values = values.astype(int)
        return values

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        out = {"lattice": dict(self.lattice)}
        for name in ("initial_state", "run", "sweep", "output", "recipe", "scaling"):
            value = getattr(self, name)
            if value:
                out[name] = copy.deepcopy(value)
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config root must be an object")
        unknown = set(data) - set(BLOCKS)
        if unknown:
            raise ConfigError(f"unknown config blocks {sorted(unknown)}")
        if "lattice" not in data:
            raise ConfigError("config needs a 'lattice' block")
        return cls(**copy.deepcopy(data))


def parse(text: str) -> ExperimentConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return ExperimentConfig.from_dict(data)


def load(path: str | Path, overrides: list[str] | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return ExperimentConfig.from_dict(apply_overrides(data, overrides or []))


def _coerce(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply ``block.key=value`` assignments; values are parsed as JSON when possible."""
    data = copy.deepcopy(data)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        if len(parts) < 2 or not all(parts):
            raise ConfigError(f"override key {key!r} must look like block.key")
        node = data
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a non-object")
        node[parts[-1]] = _coerce(value)
    return data


def finite_or_none(x) -> float | None:
    return None if x is None or not math.isfinite(x) else float(x)
