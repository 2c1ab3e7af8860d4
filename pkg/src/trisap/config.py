"""Flat ``key = value`` configuration files.

One setting per line, ``#`` starts a comment. Keys use the same hyphenated
names as the command-line flags. Angles accept plain radians or multiples of
pi such as ``2pi/3`` or ``0.5pi``. Every file must declare
``format-version = trisap-config/1``.
"""
from __future__ import annotations

import dataclasses
import math
import os
import re
from dataclasses import dataclass, fields
from typing import Any

FORMAT_VERSION = "trisap-config/1"
CSV_VERSION = "trisap-csv/1"
OUTPUT_ENV = "TRISAP_OUTPUT_DIR"


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        where = ""
        if source is not None and line is not None:
            where = f"{source}:{line}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)
        self.line = line


_ANGLE = re.compile(r"^\s*([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?\s*\*?\s*pi\s*(?:/\s*(\d+(?:\.\d*)?))?\s*$")


def parse_angle(text: str) -> float:
    m = _ANGLE.match(text)
    if m:
        coef = float(m.group(1)) if m.group(1) else 1.0
        div = float(m.group(2)) if m.group(2) else 1.0
        return coef * math.pi / div
    return float(text)


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class SimulationConfig:
    """All schedule, grid, backend and sweep settings. Defaults are the reference campaign."""
    format_version: str = FORMAT_VERSION
    backend: str = "three_mode"
    beta: float = 2.0 * math.pi / 3.0
    total_time: float = 5000.0
    delay_frac: float = 0.2
    dmin: float = 3.0
    dmax: float = 10.0
    shake_amp: float = 0.0
    shake_freq: float = 0.0
    dt_model: float = 0.1
    dt: float = 0.05
    grid_n: int = 128
    grid_extent: float = 8.0
    nonlinearity_g: float = 0.0
    spectrum_samples: int = 501
    beta_min: float = 0.1 * math.pi
    beta_max: float = 0.8 * math.pi
    beta_points: int = 64
    grid_beta_points: int = 0
    phi_points: int = 17
    shake_amp_min: float = -0.5
    shake_amp_max: float = 0.5
    shake_amp_points: int = 11
    shake_freq_min: float = 0.0
    shake_freq_max: float = 0.5
    shake_freq_points: int = 11
    psi0: str = "A"
    output_dir: str = "out"

    def validate(self) -> "SimulationConfig":
        problems = []
        if self.format_version != FORMAT_VERSION:
            problems.append(("format-version", f"unsupported format version {self.format_version!r}"))
        if self.backend not in ("three_mode", "grid2d"):
            problems.append(("backend", "must be three_mode or grid2d"))
        if not 0.0 <= self.beta < math.pi:
            problems.append(("beta", "must lie in [0, pi)"))
        if self.total_time <= 0:
            problems.append(("total-time", "must be positive"))
        if not 0.0 <= self.delay_frac < 1.0:
            problems.append(("delay-frac", "must lie in [0, 1)"))
        if not 0.0 < self.dmin < self.dmax:
            problems.append(("dmin", "need 0 < dmin < dmax"))
        if self.dt_model <= 0 or self.dt <= 0:
            problems.append(("dt", "time steps must be positive"))
        if self.grid_n < 8 or self.grid_n & (self.grid_n - 1):
            problems.append(("grid-n", "must be a power of two >= 8"))
        if self.grid_extent < 6.0:
            problems.append(("grid-extent", "padding beyond the outermost trap must be at least 6"))
        if not 0.0 <= self.beta_min <= self.beta_max < math.pi:
            problems.append(("beta-min", "need 0 <= beta-min <= beta-max < pi"))
        for key in ("spectrum_samples", "beta_points", "phi_points", "shake_amp_points", "shake_freq_points"):
            if getattr(self, key) < 1:
                problems.append((key.replace("_", "-"), "must be at least 1"))
        if self.grid_beta_points < 0:
            problems.append(("grid-beta-points", "must be non-negative"))
        if self.psi0 not in ("A", "B", "C"):
            problems.append(("psi0", "must be A, B or C"))
        if problems:
            key, msg = problems[0]
            raise ConfigError(f"{key}: {msg}")
        return self

    def resolved_output_dir(self) -> str:
        return os.environ.get(OUTPUT_ENV) or self.output_dir

    def replace(self, **kw) -> "SimulationConfig":
        return dataclasses.replace(self, **kw)


_FIELDS = {f.name: f for f in fields(SimulationConfig)}
_ANGLE_KEYS = {"beta", "beta_min", "beta_max"}
KEYS = tuple(name.replace("_", "-") for name in _FIELDS)


def convert(name: str, text: str) -> Any:
    kind = _FIELDS[name].type
    if name in _ANGLE_KEYS:
        return parse_angle(text)
    if kind == "int":
        return int(text)
    if kind == "float":
        return float(text)
    if kind == "bool":
        return _bool(text)
    return text.strip()


def parse(text: str, source: str | None = None) -> SimulationConfig:
    values: dict[str, Any] = {}
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno, source)
        key, _, value = (s.strip() for s in line.partition("="))
        name = key.replace("-", "_")
        if name not in _FIELDS:
            raise ConfigError(f"unknown key {key!r}", lineno, source)
        if name in values:
            raise ConfigError(f"duplicate key {key!r} (first set on line {lines[name]})", lineno, source)
        try:
            values[name] = convert(name, value)
        except ValueError:
            raise ConfigError(f"bad value {value!r} for {key}", lineno, source) from None
        lines[name] = lineno
    if "format_version" not in values:
        raise ConfigError(f"missing 'format-version = {FORMAT_VERSION}'", None, source)
    cfg = SimulationConfig(**values)
    try:
        cfg.validate()
    except ConfigError as err:
        key = str(err).split(":", 1)[0].replace("-", "_")
        raise ConfigError(str(err), lines.get(key), source) from None
    return cfg


def load(path) -> SimulationConfig:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read(), source=str(path))


def serialize(cfg: SimulationConfig) -> str:
    out = []
    for name in _FIELDS:
        value = getattr(cfg, name)
        if isinstance(value, float):
            value = repr(value)
        out.append(f"{name.replace('_', '-')} = {value}")
    return "\n".join(out) + "\n"
