"""Flat key-value run configuration (JSON or YAML).

Every key has a type and bounds; unknown keys are rejected.  ``dump`` writes
the full normalized document, so loading a dumped file and dumping it again
gives the same bytes.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import yaml

from .errors import ConfigError, IoError

__all__ = ["Config", "FIELDS", "load_config", "dump_config"]


@dataclass(frozen=True)
class Field:
    kind: str  # float, int, str, path, floats, triple
    default: Any
    check: Callable[[Any], bool] | None = None
    rule: str = ""
    choices: tuple | None = None


def _pos(x):
    return x > 0


def _nonneg(x):
    return x >= 0


def _unit_open(x):
    return 0 < x < 1


FIELDS: dict[str, Field] = {
    # geometry (null = data-driven default)
    "t": Field("float?", None, _pos, "> 0"),
    "r_neighbor": Field("float?", None, _pos, "> 0"),
    "delta": Field("float?", None, _pos, "> 0"),
    "k_fallback": Field("int", 8, lambda k: k >= 3, ">= 3"),
    # transform / sampling
    "alpha": Field("float", 1.0),
    "bandwidth": Field("int", 8, lambda k: k >= 1, ">= 1"),
    "samples": Field("int", 12, lambda k: k >= 1, ">= 1"),
    # encryption key
    "alpha_fwd": Field("triple", [0.35, 0.72, 0.15]),
    "alpha_inv": Field("triple", [0.60, 0.20, 0.90]),
    "henon_a": Field("float", 1.4),
    "henon_b": Field("float", 0.3),
    "u0": Field("float", 0.12),
    "v0": Field("float", 0.1),
    "burn_in": Field("int", 100, _nonneg, ">= 0"),
    # filter protocol
    "range_cells": Field("int", 10, lambda k: k >= 2, ">= 2"),
    "pulses": Field("int", 251, lambda k: k >= 2, ">= 2"),
    "target_cell": Field("int", 4, _nonneg, ">= 0"),
    "velocity": Field("float", 2.58),
    "scr_db": Field("float", 0.0),
    "window": Field("int", 3, lambda k: k >= 1 and k % 2 == 1, "odd and >= 1"),
    "train_realizations": Field("int", 4, lambda k: k >= 1, ">= 1"),
    "method": Field("str", "auto", choices=("auto", "dense", "diagonal")),
    "pfa": Field("float", 1e-2, _unit_open, "in (0, 1)"),
    "calibration_trials": Field("int", 400, lambda k: k >= 1, ">= 1"),
    "trials": Field("int", 200, lambda k: k >= 1, ">= 1"),
    "scr_grid": Field("floats", [0.0, 5.0, 10.0, 15.0, 20.0]),
    "alpha_grid": Field("floats", [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]),
    "prf_hz": Field("float", 1075.0, _pos, "> 0"),
    "wavelength_m": Field("float", 0.03, _pos, "> 0"),
    # randomness
    "seed": Field("int", 0, _nonneg, ">= 0"),
    # inputs and outputs
    "model": Field("str", "blob", choices=("sphere", "random_sphere", "swiss_roll", "torus", "blob")),
    "n_points": Field("int", 400, lambda k: k >= 4, ">= 4"),
    "input": Field("path", None),
    "format": Field("str?", None, choices=("xyz", "ply-ascii")),
    "radar": Field("path", None),
    "geometry": Field("path", None),
    "reference": Field("path", None),
    "output": Field("path", None),
}


def _coerce(key: str, spec: Field, value):
    kind = spec.kind
    optional = kind.endswith("?") or kind == "path"
    base = kind.rstrip("?")
    if value is None:
        if optional:
            return None
        raise ConfigError(f"{key}: value is required")
    try:
        if base == "float":
            if isinstance(value, bool):
                raise TypeError
            out = float(value)
            if not math.isfinite(out):
                raise ConfigError(f"{key}: must be finite")
        elif base == "int":
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError
            out = int(value)
        elif base in ("str", "path"):
            if not isinstance(value, (str, Path)):
                raise TypeError
            out = str(value)
        elif base in ("floats", "triple"):
            if isinstance(value, str):
                value = [v for v in value.replace(",", " ").split()]
            out = [float(v) for v in value]
            if not all(math.isfinite(v) for v in out):
                raise ConfigError(f"{key}: entries must be finite")
            if base == "triple" and len(out) != 3:
                raise ConfigError(f"{key}: expected 3 values, got {len(out)}")
            if not out:
                raise ConfigError(f"{key}: must not be empty")
        else:  # pragma: no cover
            raise AssertionError(kind)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{key}: cannot interpret {value!r} as {base}") from None
    if spec.choices is not None and out not in spec.choices:
        raise ConfigError(f"{key}: {out!r} is not one of {', '.join(spec.choices)}")
    if spec.check is not None and not spec.check(out):
        raise ConfigError(f"{key}: {out!r} violates bound {spec.rule}")
    return out


class Config:
    """Validated settings; attribute access by key name."""

    def __init__(self, values: dict | None = None):
        data = {k: (list(f.default) if isinstance(f.default, list) else f.default) for k, f in FIELDS.items()}
        object.__setattr__(self, "_data", data)
        if values:
            self.update(values)

    def update(self, values: dict) -> "Config":
        unknown = sorted(set(values) - set(FIELDS))
        if unknown:
            raise ConfigError(f"unknown configuration key(s): {', '.join(unknown)}")
        for k, v in values.items():
            self._data[k] = _coerce(k, FIELDS[k], v)
        return self

    def merged(self, overrides: dict) -> "Config":
        """Copy with the non-None entries of ``overrides`` applied."""
        out = Config(self.to_dict())
        return out.update({k: v for k, v in overrides.items() if v is not None})

    def __getattr__(self, name):
        try:
            return self._data[name]
        except KeyError:
            raise AttributeError(name) from None

    def __setattr__(self, name, value):
        raise AttributeError("Config is immutable; use update() or merged()")

    def __eq__(self, other):
        return isinstance(other, Config) and self._data == other._data

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, list) else v) for k, v in self._data.items()}

    def __repr__(self):
        return f"Config({self._data!r})"


def _is_yaml(path) -> bool:
    return Path(path).suffix.lower() in (".yaml", ".yml")


def load_config(path) -> Config:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    try:
        doc = yaml.safe_load(text) if _is_yaml(path) else json.loads(text)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return Config(doc)


def dump_config(cfg: Config, path=None) -> str:
    """Serialize the normalized document (format by extension; JSON when no path)."""
    data = cfg.to_dict()
    if path is not None and _is_yaml(path):
        text = yaml.safe_dump(data, sort_keys=True, default_flow_style=None)
    else:
        text = json.dumps(data, indent=2, sort_keys=True) + "\n"
    if path is not None:
        try:
            Path(path).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise IoError(f"cannot write config {path}: {exc.strerror or exc}") from exc
    return text
