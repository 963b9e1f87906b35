"""Scenario configuration, initial-data presets and the config file format.

A config file is INI-style text (``key = value`` grouped in sections)::

    [scenario]
    name = coupled_bump
    kind = gaussian_bump          ; riemann | gaussian_bump | beam | tabulated
    M0 = 1.0
    technical_viscosity = true

    [grid]
    x_min = -6
    x_max = 6
    v_min = -3
    v_max = 3
    nx = 128
    nv = 128
    epsilon = 0.02
    t_end = 2.0
    cfl_safety = 0.4

    [initial]
    u_amplitude = 0.5
    ...

    [output]
    snapshot_every = 0.05
    store_kinetic = true

Physical parameters have no defaults; only the ``[output]`` section and the
``technical_viscosity`` switch may be omitted.
"""

from __future__ import annotations

import configparser
import csv
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .core import GridSpec
from .errors import ConfigurationError

KINDS = ("riemann", "gaussian_bump", "beam", "tabulated")

FLUID_KEYS = {
    "riemann": ("u_left", "u_right", "x_jump"),
    "gaussian_bump": ("u_amplitude", "u_center", "u_width"),
    "beam": ("u_amplitude", "u_center", "u_width"),
    "tabulated": ("u_table",),
}
PARTICLE_KEYS = ("particle_x0", "particle_v0", "particle_sigma_x", "particle_sigma_v")


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to reproduce one run."""

    kind: str
    params: Mapping[str, object]
    M0: float
    grid: GridSpec
    snapshot_every: float = 0.0
    store_kinetic: bool = True
    technical_viscosity: bool = True
    name: str = ""
    base_dir: str = field(default=".", compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown initial-data kind {self.kind!r}; expected one of {KINDS}")
        if not (self.M0 > 0 and math.isfinite(self.M0)):
            raise ConfigurationError(f"M0 must be positive, got {self.M0}")
        if self.snapshot_every < 0:
            raise ConfigurationError("snapshot_every must be nonnegative")
        missing = [k for k in FLUID_KEYS[self.kind] if k not in self.params]
        if self.kind != "tabulated" and float(self.params.get("particle_weighted_mass", 0.0)) > 0:
            missing += [k for k in PARTICLE_KEYS if k not in self.params]
        if missing:
            raise ConfigurationError(f"[initial] missing keys for kind {self.kind!r}: {', '.join(missing)}")
        object.__setattr__(self, "params", dict(self.params))

    def with_grid(self, **changes) -> "ScenarioConfig":
        return replace(self, grid=self.grid.with_(**changes))

    def with_params(self, **changes) -> "ScenarioConfig":
        params = dict(self.params)
        params.update(changes)
        return replace(self, params=params)

    def initial_data(self) -> tuple[Callable, Callable]:
        """Raw (unmollified) initial data as vectorised callables ``u0(x)``, ``f0(x, v)``."""
        return build_initial_data(self)

    def measured_m0(self) -> float:
        """``max |u0| + sum (1 + v^2) f0 dx dv`` on the grid samples."""
        u0, f0 = self.initial_data()
        g = self.grid
        xx, vv = np.meshgrid(g.x, g.v, indexing="ij")
        weighted = float(np.sum((1.0 + vv * vv) * f0(xx, vv)) * g.dx * g.dv)
        return float(np.max(np.abs(u0(g.x)))) + weighted

    def check_m0(self) -> float:
        measured = self.measured_m0()
        if measured > self.M0 * (1.0 + 1e-12):
            raise ConfigurationError(
                f"declared M0={self.M0} is below the measured bound {measured:.12g}")
        return measured

    def to_ini(self) -> str:
        lines = ["[scenario]", f"name = {self.name}", f"kind = {self.kind}", f"M0 = {self.M0!r}",
                 f"technical_viscosity = {str(self.technical_viscosity).lower()}", "", "[grid]"]
        for key, value in self.grid.to_dict().items():
            lines.append(f"{key} = {value!r}")
        lines += ["", "[initial]"]
        for key in sorted(self.params):
            value = self.params[key]
            lines.append(f"{key} = {value!r}" if isinstance(value, float) else f"{key} = {value}")
        lines += ["", "[output]", f"snapshot_every = {self.snapshot_every!r}",
                  f"store_kinetic = {str(self.store_kinetic).lower()}", ""]
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "M0": self.M0,
            "technical_viscosity": self.technical_viscosity,
            "grid": self.grid.to_dict(),
            "initial": {k: self.params[k] for k in sorted(self.params)},
            "output": {"snapshot_every": self.snapshot_every, "store_kinetic": self.store_kinetic},
        }


# initial-data shapes

def _gaussian_particles(p) -> Callable:
    x0, v0 = float(p["particle_x0"]), float(p["particle_v0"])
    sx, sv = float(p["particle_sigma_x"]), float(p["particle_sigma_v"])
    return lambda x, v: np.exp(-0.5 * ((x - x0) / sx) ** 2 - 0.5 * ((v - v0) / sv) ** 2)


def _beam_particles(p) -> Callable:
    # compact (1 - r^2)^3 slab in x, Gaussian in v
    x0, v0 = float(p["particle_x0"]), float(p["particle_v0"])
    sx, sv = float(p["particle_sigma_x"]), float(p["particle_sigma_v"])

    def shape(x, v):
        r2 = ((x - x0) / sx) ** 2
        return np.where(r2 < 1.0, (1.0 - r2) ** 3, 0.0) * np.exp(-0.5 * ((v - v0) / sv) ** 2)

    return shape


def _read_table(path: Path, columns: tuple[str, ...]) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or any(c not in reader.fieldnames for c in columns):
            raise ConfigurationError(f"{path}: expected columns {columns}")
        rows = [[float(row[c]) for c in columns] for row in reader]
    if not rows:
        raise ConfigurationError(f"{path}: empty table")
    return np.asarray(rows)


def build_initial_data(cfg: ScenarioConfig) -> tuple[Callable, Callable]:
    p = cfg.params
    g = cfg.grid
    if cfg.kind == "riemann":
        ul, ur, xj = float(p["u_left"]), float(p["u_right"]), float(p["x_jump"])

        def u0(x):
            x = np.asarray(x, dtype=float)
            return np.where(x < xj, ul, ur).astype(float)
    elif cfg.kind in ("gaussian_bump", "beam"):
        amp, c, w = float(p["u_amplitude"]), float(p["u_center"]), float(p["u_width"])

        def u0(x):
            return amp * np.exp(-(((np.asarray(x, dtype=float) - c) / w) ** 2))
    else:
        table = _read_table(Path(cfg.base_dir) / str(p["u_table"]), ("x", "u"))
        order = np.argsort(table[:, 0])
        tx, tu = table[order, 0], table[order, 1]

        def u0(x):
            return np.interp(x, tx, tu)

    if cfg.kind == "tabulated":
        if "f_table" not in p:
            return u0, _zero_f
        from scipy.interpolate import RegularGridInterpolator

        table = _read_table(Path(cfg.base_dir) / str(p["f_table"]), ("x", "v", "f"))
        xs, vs = np.unique(table[:, 0]), np.unique(table[:, 1])
        if xs.size * vs.size != table.shape[0]:
            raise ConfigurationError("f_table must list a full tensor grid of (x, v) points")
        values = np.zeros((xs.size, vs.size))
        values[np.searchsorted(xs, table[:, 0]), np.searchsorted(vs, table[:, 1])] = table[:, 2]
        interp = RegularGridInterpolator((xs, vs), values, bounds_error=False, fill_value=0.0)

        def f0(x, v):
            x, v = np.broadcast_arrays(np.asarray(x, float), np.asarray(v, float))
            return interp(np.stack([x.ravel(), v.ravel()], axis=-1)).reshape(x.shape)

        return u0, f0

    target = float(p.get("particle_weighted_mass", 0.0))
    if target <= 0:
        return u0, _zero_f
    shape = _gaussian_particles(p) if cfg.kind != "beam" else _beam_particles(p)
    xx, vv = np.meshgrid(g.x, g.v, indexing="ij")
    norm = float(np.sum((1.0 + vv * vv) * shape(xx, vv)) * g.dx * g.dv)
    if norm <= 0:
        raise ConfigurationError("particle profile has no mass on the grid")
    amplitude = target / norm

    def f0(x, v):
        return amplitude * shape(np.asarray(x, dtype=float), np.asarray(v, dtype=float))

    return u0, f0


def _zero_f(x, v):
    x, v = np.broadcast_arrays(np.asarray(x, float), np.asarray(v, float))
    return np.zeros(x.shape)


# named presets

def _coupled_bump() -> ScenarioConfig:
    # u_center sits on a cell centre so the sampled max|u0| is exactly the amplitude
    grid = GridSpec(-6.0, 6.0, -3.0, 3.0, 128, 128, epsilon=0.02, t_end=2.0, cfl_safety=0.4)
    params = dict(u_amplitude=0.5, u_center=-0.984375, u_width=1.0, particle_weighted_mass=0.5,
                  particle_x0=0.0, particle_v0=0.5, particle_sigma_x=0.25, particle_sigma_v=0.15)
    return ScenarioConfig("gaussian_bump", params, 1.0, grid, snapshot_every=0.02,
                          name="coupled_bump")


def _riemann_pure_fluid() -> ScenarioConfig:
    grid = GridSpec(-2.0, 3.0, -1.0, 1.0, 512, 4, epsilon=0.005, t_end=1.0, cfl_safety=0.4)
    params = dict(u_left=1.0, u_right=0.0, x_jump=0.0)
    return ScenarioConfig("riemann", params, 1.0, grid, snapshot_every=0.01, store_kinetic=False,
                          name="riemann_pure_fluid")


def _expansion_pure_fluid() -> ScenarioConfig:
    cfg = _riemann_pure_fluid().with_params(u_left=0.0, u_right=1.0)
    return replace(cfg, name="expansion_pure_fluid")


def _riemann_particles() -> ScenarioConfig:
    grid = GridSpec(-2.0, 3.0, -2.0, 2.0, 100, 64, epsilon=0.04, t_end=1.0, cfl_safety=0.4)
    params = dict(u_left=1.0, u_right=0.0, x_jump=0.0, particle_weighted_mass=0.25,
                  particle_x0=0.5, particle_v0=0.2, particle_sigma_x=0.2, particle_sigma_v=0.2)
    return ScenarioConfig("riemann", params, 1.25, grid, snapshot_every=0.02,
                          store_kinetic=False, name="riemann_particles")


def _smooth_short_time() -> ScenarioConfig:
    grid = GridSpec(-4.0, 4.0, -2.0, 2.0, 64, 64, epsilon=0.02, t_end=0.05, cfl_safety=0.4)
    # steepens into a shock near t = 0.87, so t_end = 2 is long for this data
    params = dict(u_amplitude=1.0, u_center=0.0, u_width=0.75, particle_weighted_mass=0.3,
                  particle_x0=0.0, particle_v0=0.3, particle_sigma_x=0.4, particle_sigma_v=0.3)
    return ScenarioConfig("gaussian_bump", params, 1.3, grid, snapshot_every=0.0,
                          name="smooth_short_time")


def _smooth_long_time() -> ScenarioConfig:
    cfg = _smooth_short_time()
    return replace(cfg.with_grid(t_end=2.0), snapshot_every=0.05, name="smooth_long_time")


def _zero_data() -> ScenarioConfig:
    grid = GridSpec(-4.0, 4.0, -2.0, 2.0, 32, 32, epsilon=0.02, t_end=0.5, cfl_safety=0.4)
    params = dict(u_amplitude=0.0, u_center=0.0, u_width=1.0, particle_weighted_mass=0.0)
    return ScenarioConfig("gaussian_bump", params, 1.0, grid, name="zero_data")


PRESETS: dict[str, Callable[[], ScenarioConfig]] = {
    "coupled_bump": _coupled_bump,
    "riemann_pure_fluid": _riemann_pure_fluid,
    "expansion_pure_fluid": _expansion_pure_fluid,
    "riemann_particles": _riemann_particles,
    "smooth_short_time": _smooth_short_time,
    "smooth_long_time": _smooth_long_time,
    "zero_data": _zero_data,
}


def preset(name: str) -> ScenarioConfig:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigurationError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}") from None


# config file parsing

GRID_KEYS = ("x_min", "x_max", "v_min", "v_max", "nx", "nv", "epsilon", "t_end", "cfl_safety")
_BOOL = {"true": True, "yes": True, "1": True, "on": True,
         "false": False, "no": False, "0": False, "off": False}


def _key_line(text: str, section: str, key: str) -> int | None:
    current = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        m = re.match(r"\[(.+)\]$", stripped)
        if m:
            current = m.group(1).strip()
            continue
        if current == section and re.match(rf"{re.escape(key)}\s*[=:]", stripped, re.IGNORECASE):
            return lineno
    return None


def _where(text: str, source: str, section: str, key: str) -> str:
    line = _key_line(text, section, key)
    loc = f"{source}:{line}" if line else source
    return f"{loc}: [{section}] {key}"


def parse_config_text(text: str, source: str = "<config>", base_dir: str = ".") -> ScenarioConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigurationError(f"{source}: {exc}") from None

    def need(section: str, key: str) -> str:
        if not parser.has_section(section):
            raise ConfigurationError(f"{source}: missing section [{section}]")
        if not parser.has_option(section, key):
            raise ConfigurationError(f"{source}: [{section}] missing required key {key!r}")
        return parser.get(section, key).strip()

    def number(section: str, key: str, cast=float):
        raw = need(section, key)
        try:
            value = cast(raw)
        except ValueError:
            raise ConfigurationError(
                f"{_where(text, source, section, key)} = {raw!r} is not a valid {cast.__name__}") from None
        return value

    def boolean(section: str, key: str, default: bool) -> bool:
        if not parser.has_option(section, key):
            return default
        raw = parser.get(section, key).strip().lower()
        if raw not in _BOOL:
            raise ConfigurationError(f"{_where(text, source, section, key)} = {raw!r} is not a boolean")
        return _BOOL[raw]

    kind = need("scenario", "kind")
    name = parser.get("scenario", "name", fallback="").strip()
    M0 = number("scenario", "M0")
    grid_values = {}
    for key in GRID_KEYS:
        grid_values[key] = number("grid", key, int if key in ("nx", "nv") else float)
    try:
        grid = GridSpec(**grid_values)
    except ConfigurationError as exc:
        bad = next((k for k in GRID_KEYS if k in str(exc).split()[0]), None)
        prefix = _where(text, source, "grid", bad) if bad else source
        raise ConfigurationError(f"{prefix}: {exc}") from None

    params: dict[str, object] = {}
    if parser.has_section("initial"):
        for key, raw in parser.items("initial"):
            raw = raw.strip()
            if key.endswith("_table"):
                params[key] = raw
                continue
            try:
                params[key] = float(raw)
            except ValueError:
                raise ConfigurationError(
                    f"{_where(text, source, 'initial', key)} = {raw!r} is not a number") from None

    snapshot_every = 0.0
    if parser.has_option("output", "snapshot_every"):
        snapshot_every = number("output", "snapshot_every")
    try:
        return ScenarioConfig(
            kind=kind, params=params, M0=M0, grid=grid, snapshot_every=snapshot_every,
            store_kinetic=boolean("output", "store_kinetic", True),
            technical_viscosity=boolean("scenario", "technical_viscosity", True),
            name=name, base_dir=base_dir,
        )
    except ConfigurationError as exc:
        raise ConfigurationError(f"{source}: {exc}") from None


def load_config(path_or_preset: str | Path) -> ScenarioConfig:
    """Read a config file, or return the built-in preset of that name."""
    path = Path(path_or_preset)
    if path.is_file():
        text = path.read_text()
        return parse_config_text(text, source=str(path), base_dir=str(path.parent))
    if str(path_or_preset) in PRESETS:
        return preset(str(path_or_preset))
    raise ConfigurationError(f"{path_or_preset}: no such config file or preset")
