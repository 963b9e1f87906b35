"""Grids, field containers, quadrature and interpolation primitives.

Every field lives on a uniform cell-centred grid.  Position cell ``i`` has its
centre at ``x_min + (i + 1/2) dx`` and velocity cell ``k`` at
``v_min + (k + 1/2) dv``.  Field arrays are frozen (read-only) once wrapped so
the containers can be shared between workers without copying.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError


def _frozen(arr, dtype=float) -> np.ndarray:
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class GridSpec:
    """Truncated phase-space and time discretisation plus the viscosity."""

    x_min: float
    x_max: float
    v_min: float
    v_max: float
    nx: int
    nv: int
    epsilon: float
    t_end: float
    cfl_safety: float = 0.4

    def __post_init__(self):
        for name in ("x_min", "x_max", "v_min", "v_max", "epsilon", "t_end", "cfl_safety"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ConfigurationError(f"{name} must be finite, got {value!r}")
        if isinstance(self.nx, bool) or int(self.nx) != self.nx or isinstance(self.nv, bool) \
                or int(self.nv) != self.nv:
            raise ConfigurationError("nx and nv must be integers")
        if not self.x_max > self.x_min:
            raise ConfigurationError(f"x_max ({self.x_max}) must exceed x_min ({self.x_min})")
        if not self.v_max > self.v_min:
            raise ConfigurationError(f"v_max ({self.v_max}) must exceed v_min ({self.v_min})")
        if self.nx < 4:
            raise ConfigurationError(f"nx must be >= 4, got {self.nx}")
        if self.nv < 4:
            raise ConfigurationError(f"nv must be >= 4, got {self.nv}")
        if not self.epsilon > 0:
            raise ConfigurationError(f"epsilon must be strictly positive, got {self.epsilon}")
        if self.t_end < 0:
            raise ConfigurationError(f"t_end must be nonnegative, got {self.t_end}")
        if not 0 < self.cfl_safety <= 1:
            raise ConfigurationError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "nv", int(self.nv))

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def dv(self) -> float:
        return (self.v_max - self.v_min) / self.nv

    @property
    def x(self) -> np.ndarray:
        """Position cell centres."""
        return self.x_min + (np.arange(self.nx) + 0.5) * self.dx

    @property
    def v(self) -> np.ndarray:
        """Velocity cell centres."""
        return self.v_min + (np.arange(self.nv) + 0.5) * self.dv

    @property
    def x_length(self) -> float:
        return self.x_max - self.x_min

    @property
    def v_abs_max(self) -> float:
        return max(abs(self.v_min), abs(self.v_max))

    def same_mesh(self, other: "GridSpec") -> bool:
        """True when both grids discretise the same phase-space box identically."""
        return (self.x_min, self.x_max, self.v_min, self.v_max, self.nx, self.nv) == \
            (other.x_min, other.x_max, other.v_min, other.v_max, other.nx, other.nv)

    def with_(self, **changes) -> "GridSpec":
        params = {name: getattr(self, name) for name in self.__dataclass_fields__}
        params.update(changes)
        return GridSpec(**params)

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


@dataclass(frozen=True)
class FluidField:
    """Bulk fluid velocity on the position grid at one time level."""

    values: np.ndarray
    grid: GridSpec
    time: float = 0.0

    def __post_init__(self):
        values = _frozen(self.values)
        if values.shape != (self.grid.nx,):
            raise ConfigurationError(
                f"fluid field needs shape ({self.grid.nx},), got {values.shape}")
        object.__setattr__(self, "values", values)

    @property
    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))


@dataclass(frozen=True)
class KineticField:
    """Particle density on the (x, v) grid at one time level; never negative."""

    values: np.ndarray
    grid: GridSpec
    time: float = 0.0

    def __post_init__(self):
        values = _frozen(self.values)
        if values.shape != (self.grid.nx, self.grid.nv):
            raise ConfigurationError(
                f"kinetic field needs shape ({self.grid.nx}, {self.grid.nv}), got {values.shape}")
        object.__setattr__(self, "values", values)

    @property
    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def mass(self) -> float:
        return float(self.values.sum() * self.grid.dx * self.grid.dv)


@dataclass(frozen=True)
class MomentSet:
    """Velocity moments rho = int f dv, j = int v f dv, e2 = int v^2 f dv."""

    rho: np.ndarray
    j: np.ndarray
    e2: np.ndarray
    grid: GridSpec = field(repr=False, default=None)

    def __post_init__(self):
        for name in ("rho", "j", "e2"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "MomentSet":
        z = np.zeros(grid.nx)
        return cls(z, z, z, grid)


def quad_v(f_slice, grid: GridSpec, weight: Callable[[np.ndarray], np.ndarray] | None = None):
    """Midpoint rule for ``int weight(v) f dv`` over the last axis of ``f_slice``.

    ``weight=None`` means the unit weight.  Works on a single slice (returns a
    scalar) or on an ``(nx, nv)`` array (returns one value per position cell).
    """
    f_slice = np.asarray(f_slice, dtype=float)
    v = grid.v
    w = np.ones_like(v) if weight is None else np.broadcast_to(
        np.asarray(weight(v), dtype=float), v.shape)
    # matmul keeps a fixed reduction order for a given shape
    out = f_slice @ (w * grid.dv)
    return float(out) if np.ndim(out) == 0 else out


def interp2(f: KineticField, x, v):
    """Bilinear interpolation of a kinetic field, extended by zero.

    The field is padded by a ring of zero ghost cells; points outside the
    box ``[x_min, x_max] x [v_min, v_max]`` return exactly 0.  The result is
    clamped into ``[0, max of the four stencil values]``.  ``x`` and ``v``
    broadcast against each other; scalar inputs give a scalar.
    """
    g = f.grid
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    x, v = np.broadcast_arrays(x, v)
    padded = np.pad(f.values, 1)

    # fractional index into the padded array (ghost centre at index 0)
    sx = (x - g.x_min) / g.dx + 0.5
    sv = (v - g.v_min) / g.dv + 0.5
    inside = (x >= g.x_min) & (x <= g.x_max) & (v >= g.v_min) & (v <= g.v_max)
    sx = np.where(inside, sx, 0.0)
    sv = np.where(inside, sv, 0.0)
    i0 = np.clip(np.floor(sx).astype(np.intp), 0, g.nx)
    k0 = np.clip(np.floor(sv).astype(np.intp), 0, g.nv)
    ax = sx - i0
    av = sv - k0

    f00 = padded[i0, k0]
    f10 = padded[i0 + 1, k0]
    f01 = padded[i0, k0 + 1]
    f11 = padded[i0 + 1, k0 + 1]
    out = ((1 - ax) * (1 - av) * f00 + ax * (1 - av) * f10
           + (1 - ax) * av * f01 + ax * av * f11)
    upper = np.maximum(np.maximum(f00, f10), np.maximum(f01, f11))
    out = np.clip(out, 0.0, upper)
    out = np.where(inside, out, 0.0)
    return float(out) if out.ndim == 0 else out


def interp_x(u: FluidField, x):
    """Linear interpolation of ``u`` in x with constant extension past the ends."""
    return np.interp(x, u.grid.x, u.values)


def l1_distance(a: FluidField, b: FluidField) -> float:
    """Discrete L1 distance ``sum |a - b| dx`` between fields on one grid."""
    if not a.grid.same_mesh(b.grid):
        raise ConfigurationError("l1_distance needs both fields on the same grid")
    return float(np.abs(a.values - b.values).sum() * a.grid.dx)


def remap_cell_average(values: np.ndarray, x_min: float, x_max: float, n_target: int) -> np.ndarray:
    """Conservative remap of cell averages onto ``n_target`` uniform cells.

    Exact overlap integration of the piecewise-constant source; used to put
    fields from different resolutions on a common coarse grid.
    """
    values = np.asarray(values, dtype=float)
    src_edges = np.linspace(x_min, x_max, values.size + 1)
    dst_edges = np.linspace(x_min, x_max, n_target + 1)
    cumulative = np.concatenate([[0.0], np.cumsum(values * np.diff(src_edges))])
    integral_at = np.interp(dst_edges, src_edges, cumulative)
    return np.diff(integral_at) / np.diff(dst_edges)
