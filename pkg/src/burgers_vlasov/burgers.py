r"""Explicit step for the viscous Burgers equation with kinetic sources

.. math::

    u_t + (u^2/2)_x = \varepsilon u_{xx} + \varepsilon \rho_x + j - u \rho,

where ``rho`` and ``j`` are the zeroth and first velocity moments of the
particle density.  Also holds the entropy pairs and the control function
``psi(x) = int_x^inf rho dy`` used by the maximum-principle monitor.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import FluidField, GridSpec, KineticField, MomentSet, _frozen, quad_v
from .errors import CFLViolation, ConfigurationError

EPS_FLOOR = 1e-12


@dataclass(frozen=True)
class EntropyPair:
    """Convex entropy ``eta`` with Burgers flux ``q`` (``q' = u eta'``).

    ``c`` is the Kruzkov constant, or ``None`` for the square entropy.
    """

    eta: Callable[[np.ndarray], np.ndarray]
    q: Callable[[np.ndarray], np.ndarray]
    deta: Callable[[np.ndarray], np.ndarray]
    c: float | None = None
    name: str = ""

    @classmethod
    def kruzkov(cls, c: float) -> "EntropyPair":
        c = float(c)
        return cls(
            eta=lambda u: np.abs(u - c),
            q=lambda u: np.sign(u - c) * (u * u - c * c) / 2.0,
            deta=lambda u: np.sign(u - c),
            c=c,
            name=f"kruzkov(c={c:g})",
        )

    @classmethod
    def square(cls) -> "EntropyPair":
        return cls(
            eta=lambda u: u * u / 2.0,
            q=lambda u: u ** 3 / 3.0,
            deta=lambda u: u,
            c=None,
            name="square",
        )


def kruzkov_constants(M0: float, count: int = 8) -> np.ndarray:
    """Equispaced Kruzkov constants across ``[-3 M0, 3 M0]``."""
    return np.linspace(-3.0 * M0, 3.0 * M0, count)


def entropy_pair_eval(pair: EntropyPair, u: FluidField) -> tuple[np.ndarray, np.ndarray]:
    return pair.eta(u.values), pair.q(u.values)


@dataclass(frozen=True)
class ControlField:
    psi: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "psi", _frozen(self.psi))


def control_from_rho(rho: np.ndarray, dx: float) -> np.ndarray:
    """Midpoint tail sum ``psi_i = sum_{i' > i} rho_i' dx + rho_i dx / 2``."""
    rho = np.asarray(rho, dtype=float)
    cells = rho * dx
    tail = np.cumsum(cells[::-1])[::-1]
    return tail - 0.5 * cells


def control_function(f: KineticField) -> ControlField:
    """Mass of particles to the right of each cell centre."""
    rho = quad_v(f.values, f.grid)
    return ControlField(control_from_rho(rho, f.grid.dx), f.time)


def cfl_dt(u: FluidField, grid: GridSpec) -> float:
    """Largest admissible explicit step.

    ``cfl_safety * min(dx / a, dx^2 / (2 eps), dv / (a + max|v|))`` with
    ``a = max|u|`` (plus a 1e-12 floor).
    """
    a = float(np.max(np.abs(u.values))) if u.values.size else 0.0
    limits = (
        grid.dx / (a + EPS_FLOOR),
        grid.dx ** 2 / (2.0 * grid.epsilon),
        grid.dv / (a + grid.v_abs_max + EPS_FLOOR),
    )
    return grid.cfl_safety * min(limits)


def godunov_flux(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Exact Riemann flux for ``u^2 / 2`` (convex, minimum at zero)."""
    return np.maximum(np.maximum(left, 0.0) ** 2, np.minimum(right, 0.0) ** 2) / 2.0


def burgers_step(u: FluidField, m: MomentSet, grid: GridSpec, dt: float,
                 technical_viscosity: bool = True, check_cfl: bool = True) -> FluidField:
    """One forward-Euler step of the coupled viscous Burgers equation.

    Godunov flux for the convection, centred differences for ``eps u_xx``
    and ``eps rho_x``, pointwise drag ``j - u rho``.  Boundary cells use
    copied ghost values (zero gradient).
    """
    if not u.grid.same_mesh(grid):
        raise ConfigurationError("fluid field and grid disagree")
    if m.rho.shape != (grid.nx,):
        raise ConfigurationError("moment arrays do not match the grid")
    if check_cfl:
        admissible = cfl_dt(u, grid)
        if dt > admissible * (1.0 + 1e-12):
            raise CFLViolation(dt, admissible)

    dx = grid.dx
    eps = grid.epsilon
    up = np.pad(u.values, 1, mode="edge")
    flux = godunov_flux(up[:-1], up[1:])
    du = -(flux[1:] - flux[:-1]) / dx
    du += eps * (up[2:] - 2.0 * up[1:-1] + up[:-2]) / dx ** 2
    if technical_viscosity:
        rp = np.pad(m.rho, 1, mode="edge")
        du += eps * (rp[2:] - rp[:-2]) / (2.0 * dx)
    du += m.j - u.values * m.rho
    return FluidField(u.values + dt * du, grid, u.time + dt)


def entropy_dissipation_increment(u_old: FluidField, u_new: FluidField, grid: GridSpec,
                                  dt: float) -> float:
    """``eps * sum ((u_{i+1} - u_i) / dx)^2 dx dt`` on the new level."""
    if not u_old.grid.same_mesh(u_new.grid):
        raise ConfigurationError("fields on different grids")
    grad = np.diff(u_new.values) / grid.dx
    return float(grid.epsilon * np.sum(grad * grad) * grid.dx * dt)
