r"""Heat-kernel fixed-point iteration for the regularised system on short times.

Each iterate solves the linear problems obtained by freezing the previous one:

.. math::

    u_k(t) = G(t) * u_0 + \int_0^t G(t-s) * (j - u\rho)\,ds
             + \int_0^t G_x(t-s) * (\varepsilon\rho - u^2/2)\,ds,

with sources taken from iterate ``k-1``, and ``f_k = f_0(X(0), V(0)) e^t`` along
characteristics driven by ``u_{k-1}``.  ``G`` is the heat kernel of
``u_t = eps u_xx``.  Used to cross-check the time stepper on smooth data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import FluidField, GridSpec, KineticField, interp2
from .errors import PicardNoConvergence, SingularKernelError

TRUNCATION_SIGMAS = 8.0
DEFAULT_NODES = 16
STALL_COUNT = 3


def _kernel_halfwidth(sigma: float, dx: float) -> int:
    return int(math.ceil(TRUNCATION_SIGMAS * sigma / dx))


def _apply(values: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``out_i = sum_k w_k g_{i-k}`` for ``k = -n..n`` with edge extension."""
    n = w.size // 2
    if n == 0:
        return values * w[0]
    padded = np.pad(values, n, mode="edge")
    return np.convolve(padded, w, mode="valid")


def heat_weights(t: float, epsilon: float, dx: float) -> np.ndarray:
    """Unit-sum Gaussian weights of variance ``2 eps t`` at offsets ``-n..n``."""
    sigma = math.sqrt(2.0 * epsilon * t)
    n = _kernel_halfwidth(sigma, dx)
    if n == 0 or sigma == 0:
        return np.ones(1)
    k = np.arange(-n, n + 1)
    w = np.exp(-0.5 * (k * dx / sigma) ** 2)
    return w / w.sum()


def heat_dx_weights(t: float, epsilon: float, dx: float) -> np.ndarray:
    """Weights of the x-derivative kernel ``G_x`` at offsets ``-n..n``.

    Samples ``-y exp(-y^2 / (4 eps t))`` (up to a constant) and rescales so the
    discrete operator differentiates affine data exactly.  For a kernel much
    narrower than a cell this is the centred difference.
    """
    if not t > 0:
        raise SingularKernelError(f"derivative heat kernel is singular at t={t}")
    sigma = math.sqrt(2.0 * epsilon * t)
    n = max(1, _kernel_halfwidth(sigma, dx))
    k = np.arange(-n, n + 1)
    # shape relative to k = 1 so nothing underflows for tiny sigma
    shape = np.zeros(k.size)
    off = k != 0  # the centre weight is zero and its exponent would overflow
    shape[off] = k[off] * np.exp(-0.5 * (k[off] ** 2 - 1.0) * (dx / sigma) ** 2)
    first_moment = float(np.sum(k * shape))
    return -shape / (dx * first_moment)


def heat_convolve(g: FluidField, t: float, epsilon: float) -> FluidField:
    """Discrete heat semigroup ``G(t) * g`` (edge-extended data)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return FluidField(g.values, g.grid, g.time)
    w = heat_weights(t, epsilon, g.grid.dx)
    return FluidField(_apply(np.asarray(g.values, dtype=float), w), g.grid, g.time)


def heat_convolve_dx(g: FluidField, t: float, epsilon: float) -> FluidField:
    """``G_x(t) * g``, which equals ``d/dx (G(t) * g)``."""
    w = heat_dx_weights(t, epsilon, g.grid.dx)
    return FluidField(_apply(np.asarray(g.values, dtype=float), w), g.grid, g.time)


@dataclass
class IterationState:
    """Iterate ``k`` sampled at the nodes of ``t_grid``.

    ``u_k`` has shape ``(len(t_grid), nx)`` and ``f_k`` shape
    ``(len(t_grid), nx, nv)``.  ``differences[i]`` is the sup-norm change of
    ``u`` produced by iteration ``i + 1``.
    """

    k: int
    t_grid: np.ndarray
    u_k: np.ndarray
    f_k: np.ndarray
    contraction_ratios: list[float] = field(default_factory=list)
    differences: list[float] = field(default_factory=list)

    @classmethod
    def initial(cls, u0: FluidField, f0: KineticField, t_grid) -> "IterationState":
        """Iterate 0: the initial data held constant in time."""
        t_grid = np.asarray(t_grid, dtype=float)
        u = np.broadcast_to(np.asarray(u0.values, dtype=float), (t_grid.size, u0.grid.nx)).copy()
        f = np.broadcast_to(np.asarray(f0.values, dtype=float),
                            (t_grid.size, f0.grid.nx, f0.grid.nv)).copy()
        return cls(0, t_grid, u, f)

    def fluid(self, index: int, grid: GridSpec) -> FluidField:
        return FluidField(self.u_k[index], grid, float(self.t_grid[index]))

    def kinetic(self, index: int, grid: GridSpec) -> KineticField:
        return KineticField(self.f_k[index], grid, float(self.t_grid[index]))


def _moments_series(f_k: np.ndarray, grid: GridSpec):
    w = grid.dv
    v = grid.v
    rho = f_k.sum(axis=2) * w
    j = f_k @ (v * w)
    return rho, j


def _u_at(u_nodes: np.ndarray, t_grid: np.ndarray, grid: GridSpec, x: np.ndarray, s: float):
    """``u(x, s)`` from node values, linear in time and in x (constant outside)."""
    m = int(np.clip(np.searchsorted(t_grid, s, side="right") - 1, 0, t_grid.size - 2))
    span = t_grid[m + 1] - t_grid[m]
    theta = 0.0 if span == 0 else min(max((s - t_grid[m]) / span, 0.0), 1.0)
    row = (1.0 - theta) * u_nodes[m] + theta * u_nodes[m + 1]
    return np.interp(x, grid.x, row)


def trace_to_origin(x, v, t: float, u_nodes: np.ndarray, t_grid: np.ndarray, grid: GridSpec,
                    substeps: int = 2):
    """Follow characteristics from ``(x, v)`` at time ``t`` back to time 0.

    The velocity field is ``u_nodes`` interpolated in time.  Uses RK2 midpoint
    steps, ``substeps`` per ``t_grid`` interval.
    """
    X = np.array(x, dtype=float)
    V = np.array(v, dtype=float)
    if t <= 0:
        return X, V
    marks = t_grid[t_grid < t - 1e-14 * max(1.0, t)]
    stops = np.concatenate([[t], marks[::-1]])
    if stops[-1] > 0:
        stops = np.concatenate([stops, [0.0]])
    for s_hi, s_lo in zip(stops[:-1], stops[1:]):
        h = (s_lo - s_hi) / substeps
        s = s_hi
        for _ in range(substeps):
            k1v = _u_at(u_nodes, t_grid, grid, X, s) - V
            xm = X + 0.5 * h * V
            vm = V + 0.5 * h * k1v
            X = X + h * vm
            V = V + h * (_u_at(u_nodes, t_grid, grid, xm, s + 0.5 * h) - vm)
            s += h
    return X, V


def picard_iterate(state: IterationState, u0: FluidField, f0: KineticField, grid: GridSpec,
                   t_grid=None) -> IterationState:
    """One Picard sweep: ``(u_{k-1}, f_{k-1}) -> (u_k, f_k)`` on ``t_grid``.

    Time integrals use the midpoint of each ``t_grid`` interval, with sources
    averaged from the two adjacent nodes, so the singular ``G_x`` kernel is
    never evaluated at zero elapsed time.
    """
    t_grid = state.t_grid if t_grid is None else np.asarray(t_grid, dtype=float)
    if not np.array_equal(t_grid, state.t_grid):
        raise ValueError("t_grid must match the stored iterate")
    eps = grid.epsilon
    u_prev, f_prev = state.u_k, state.f_k
    rho, j = _moments_series(f_prev, grid)
    source = j - u_prev * rho
    flux_like = eps * rho - 0.5 * u_prev * u_prev
    mid_t = 0.5 * (t_grid[:-1] + t_grid[1:])
    widths = np.diff(t_grid)
    mid_source = 0.5 * (source[:-1] + source[1:])
    mid_flux = 0.5 * (flux_like[:-1] + flux_like[1:])

    u_new = np.empty_like(u_prev)
    f_new = np.empty_like(f_prev)
    xx, vv = np.meshgrid(grid.x, grid.v, indexing="ij")
    for n, tn in enumerate(t_grid):
        acc = heat_convolve(u0, tn, eps).values.copy()
        for m in range(n):
            lag = tn - mid_t[m]
            acc += widths[m] * heat_convolve(FluidField(mid_source[m], grid), lag, eps).values
            acc += widths[m] * heat_convolve_dx(FluidField(mid_flux[m], grid), lag, eps).values
        u_new[n] = acc
        if tn == 0:
            f_new[n] = f0.values
        else:
            X0, V0 = trace_to_origin(xx, vv, tn, u_prev, t_grid, grid)
            f_new[n] = interp2(f0, X0, V0) * math.exp(tn)

    diff = float(np.max(np.abs(u_new - u_prev))) if u_new.size else 0.0
    diffs = state.differences + [diff]
    ratios = list(state.contraction_ratios)
    if len(diffs) >= 2:
        prev = diffs[-2]
        if prev > 0:
            ratios.append(diff / prev)
        elif diff == 0:
            ratios.append(0.0)
        else:
            ratios.append(math.inf)
    return IterationState(state.k + 1, t_grid, u_new, f_new, ratios, diffs)


def _as_fields(u0, f0, grid: GridSpec) -> tuple[FluidField, KineticField]:
    if isinstance(u0, FluidField) and isinstance(f0, KineticField):
        return u0, f0
    if callable(u0) and callable(f0):
        from .driver import mollified_initial_data

        return mollified_initial_data(u0, f0, grid.epsilon, grid)
    u = u0 if isinstance(u0, FluidField) else FluidField(np.asarray(u0, dtype=float), grid)
    f = f0 if isinstance(f0, KineticField) else KineticField(np.asarray(f0, dtype=float), grid)
    return u, f


def picard_run(u0, f0, grid: GridSpec, t_end: float, tol: float = 1e-10, max_iter: int = 60,
               n_nodes: int = DEFAULT_NODES,
               callback: Callable[[IterationState], None] | None = None) -> IterationState:
    """Iterate until the sup-norm update drops below ``tol``; return the last state.

    ``u0``/``f0`` may be callables (they are then sampled and mollified as in
    the time stepper) or fields on ``grid``.  Raises
    :class:`PicardNoConvergence` once the update ratio is at least 1 for
    :data:`STALL_COUNT` consecutive iterations or turns non-finite.
    """
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    if n_nodes < 1:
        raise ValueError("n_nodes must be at least 1")
    u_init, f_init = _as_fields(u0, f0, grid)
    t_grid = np.linspace(0.0, t_end, n_nodes + 1)
    state = IterationState.initial(u_init, f_init, t_grid)
    for _ in range(max_iter):
        state = picard_iterate(state, u_init, f_init, grid, t_grid)
        if callback is not None:
            callback(state)
        diff = state.differences[-1]
        if not math.isfinite(diff) or not np.all(np.isfinite(state.u_k)):
            raise PicardNoConvergence(
                f"iterates became non-finite at k={state.k}; try a smaller t_end",
                state.contraction_ratios)
        if diff < tol:
            return state
        tail = state.contraction_ratios[-STALL_COUNT:]
        if len(tail) == STALL_COUNT and all(r >= 1.0 for r in tail):
            raise PicardNoConvergence(
                f"no contraction on [0, {t_end:g}]: last ratios "
                f"{', '.join(f'{r:.3g}' for r in tail)}; try a smaller t_end",
                state.contraction_ratios)
    return state


def picard_solve(u0, f0, grid: GridSpec, t_end: float, tol: float = 1e-10,
                 max_iter: int = 60, n_nodes: int = DEFAULT_NODES) -> tuple[FluidField, KineticField]:
    """Fixed point of the Duhamel iteration at ``t_end``."""
    state = picard_run(u0, f0, grid, t_end, tol=tol, max_iter=max_iter, n_nodes=n_nodes)
    return state.fluid(-1, grid), state.kinetic(-1, grid)
