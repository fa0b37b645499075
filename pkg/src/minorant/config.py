"""Experiment configuration: a flat key = value text file."""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field, fields, replace
from typing import Optional

OUTPUT_DIR_ENV = "MINORANT_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "minorant_out"


class ConfigError(ValueError):
    pass


def default_output_dir() -> str:
    return os.environ.get(OUTPUT_DIR_ENV, DEFAULT_OUTPUT_DIR)


@dataclass(frozen=True)
class ExperimentConfig:
    master_seed: int = 42
    replicas: Optional[int] = None  # None: each check uses its own documented size
    grid_n: Optional[int] = None
    horizon: float = 1.0
    slope_window: tuple = (-2.0, 2.0)
    length_floor: float = 1e-3
    chain_length: int = 400
    workers: int = 1
    tolerances: dict = field(default_factory=dict)
    output_dir: str = field(default_factory=default_output_dir)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not isinstance(self.master_seed, int) or self.master_seed < 0:
            raise ConfigError("master_seed must be a non-negative integer")
        for name in ("replicas", "grid_n", "chain_length", "workers"):
            v = getattr(self, name)
            if v is not None and (not isinstance(v, int) or v <= 0):
                raise ConfigError(f"{name} must be a positive integer")
        for name in ("horizon", "length_floor"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and v > 0):
                raise ConfigError(f"{name} must be positive")
        lo, hi = self.slope_window
        if not lo < hi:
            raise ConfigError("slope_window needs lo < hi")
        for k, v in self.tolerances.items():
            if not (isinstance(v, (int, float)) and v > 0):
                raise ConfigError(f"tolerance {k} must be positive")

    def tol(self, name: str, default: float) -> float:
        return float(self.tolerances.get(name, default))

    def size(self, default: int) -> int:
        return int(self.replicas) if self.replicas is not None else int(default)

    def grid(self, default: int) -> int:
        return int(self.grid_n) if self.grid_n is not None else int(default)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        tols = dict(self.tolerances)
        tols.update(kw.pop("tolerances", {}) or {})
        return replace(self, tolerances=tols, **kw)

    # --- text format ---------------------------------------------------------------

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "tolerances":
                for k in sorted(v):
                    lines.append(f"tol.{k} = {float(v[k])!r}")
            elif v is None:
                continue
            elif f.name == "slope_window":
                lines.append(f"slope_window = {float(v[0])!r},{float(v[1])!r}")
            elif isinstance(v, float):
                lines.append(f"{f.name} = {v!r}")
            else:
                lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        kw: dict = {}
        tols: dict = {}
        known = {f.name for f in fields(cls)}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key.startswith("tol."):
                tols[key[4:]] = _number(val, key)
            elif key not in known or key == "tolerances":
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            else:
                kw[key] = _parse_field(key, val)
        return cls(tolerances=tols, **kw)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_text(fh.read())

    def config_hash(self) -> str:
        """Short sha256 of the canonical text, excluding the output directory."""
        text = "".join(l + "\n" for l in self.to_text().splitlines() if not l.startswith("output_dir"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def as_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["slope_window"] = list(self.slope_window)
        d["tolerances"] = dict(self.tolerances)
        return d


def _number(val: str, key: str) -> float:
    try:
        return float(val)
    except ValueError:
        raise ConfigError(f"{key}: not a number: {val!r}") from None


def _parse_field(key: str, val: str):
    if key in ("master_seed", "replicas", "grid_n", "chain_length", "workers"):
        try:
            return int(val)
        except ValueError:
            raise ConfigError(f"{key}: not an integer: {val!r}") from None
    if key == "slope_window":
        parts = val.split(",")
        if len(parts) != 2:
            raise ConfigError("slope_window must be 'lo,hi'")
        return (_number(parts[0], key), _number(parts[1], key))
    if key == "output_dir":
        return val
    return _number(val, key)
