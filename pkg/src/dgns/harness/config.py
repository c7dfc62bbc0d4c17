"""Run configuration read from an INI-style file of [section] / key = value lines.

Example::

    [grid]
    n = 32
    box_length = 6.283185307179586

    [solver]
    dt = 0.002
    t_end = 2.0
    snapshot_stride = 5

    [initial_condition]
    kind = taylor_green
    amplitude = 1.0

    [diagnostics]
    levels = 6
    lambda = 0.5
    window = 0:2

    [output]
    dir = runs/tg32
"""

from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..grid import GridSpec, VelocityField, abc_flow, random_field, taylor_green

IC_KINDS = ("taylor_green", "abc", "random_div_free")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class InitialCondition:
    kind: str = "taylor_green"
    amplitude: float = 1.0
    seed: int = 0
    energy: float = 1.0
    spectrum_slope: float = -2.0

    def build(self, grid: GridSpec) -> VelocityField:
        if self.kind == "taylor_green":
            return taylor_green(grid, self.amplitude)
        if self.kind == "abc":
            return abc_flow(grid).scaled(self.amplitude)
        return random_field(grid, seed=self.seed, energy=self.energy, spectrum_slope=self.spectrum_slope)


@dataclass(frozen=True)
class RunConfig:
    n: int = 32
    box_length: float = 2 * math.pi
    dealias_fraction: float = 2.0 / 3.0
    dt: float = 2e-3
    t_end: float = 2.0
    snapshot_stride: int = 5
    viscosity: float = 1.0
    initial_condition: InitialCondition = field(default_factory=InitialCondition)
    levels: int = 6
    lam: float = 0.5
    window: tuple[float, float] | None = None  # defaults to [0, t_end]
    output_dir: str = "dgns-run"

    def __post_init__(self):
        if self.levels < 2:
            raise ConfigError(f"levels must be >= 2, got {self.levels}")
        if not 0 < self.lam < 2:
            raise ConfigError(f"lambda must lie in (0, 2), got {self.lam}")
        if self.initial_condition.kind not in IC_KINDS:
            raise ConfigError(f"unknown initial condition {self.initial_condition.kind!r}; choose from {IC_KINDS}")
        t_a, t_b = self.diagnostic_window
        if not t_b > t_a:
            raise ConfigError(f"window [{t_a}, {t_b}] is empty")
        if t_a < 0 or t_b > self.t_end + 1e-12:
            raise ConfigError(f"window [{t_a}, {t_b}] is outside [0, {self.t_end}]")
        try:
            self.grid
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.n, self.box_length, self.dealias_fraction)

    @property
    def diagnostic_window(self) -> tuple[float, float]:
        return self.window if self.window is not None else (0.0, self.t_end)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["window"] = list(self.diagnostic_window)
        return d


def parse_window(text: str) -> tuple[float, float]:
    try:
        a, b = text.split(":")
        return float(a), float(b)
    except ValueError as exc:
        raise ConfigError(f"window must look like a:b, got {text!r}") from exc


def _get(parser, section, key, conv, default):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    try:
        return conv(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from exc


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    d = RunConfig()
    ic_d = InitialCondition()
    ic = InitialCondition(
        kind=_get(parser, "initial_condition", "kind", str, ic_d.kind),
        amplitude=_get(parser, "initial_condition", "amplitude", float, ic_d.amplitude),
        seed=_get(parser, "initial_condition", "seed", int, ic_d.seed),
        energy=_get(parser, "initial_condition", "energy", float, ic_d.energy),
        spectrum_slope=_get(parser, "initial_condition", "spectrum_slope", float, ic_d.spectrum_slope),
    )
    return RunConfig(
        n=_get(parser, "grid", "n", int, d.n),
        box_length=_get(parser, "grid", "box_length", float, d.box_length),
        dealias_fraction=_get(parser, "grid", "dealias_fraction", float, d.dealias_fraction),
        dt=_get(parser, "solver", "dt", float, d.dt),
        t_end=_get(parser, "solver", "t_end", float, d.t_end),
        snapshot_stride=_get(parser, "solver", "snapshot_stride", int, d.snapshot_stride),
        viscosity=_get(parser, "solver", "viscosity", float, d.viscosity),
        initial_condition=ic,
        levels=_get(parser, "diagnostics", "levels", int, d.levels),
        lam=_get(parser, "diagnostics", "lambda", float, d.lam),
        window=_get(parser, "diagnostics", "window", parse_window, None),
        output_dir=_get(parser, "output", "dir", str, d.output_dir),
    )


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())
