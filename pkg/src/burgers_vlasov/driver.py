"""Initial-data preparation, the coupled time loop and epsilon sweeps.

One step of :func:`run` is a Lie splitting: the Burgers equation is advanced
first with moments of the current density, then the kinetic equation is
advanced with the updated fluid velocity frozen over the step.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .burgers import burgers_step, cfl_dt, control_from_rho, entropy_dissipation_increment
from .core import FluidField, GridSpec, KineticField, MomentSet, remap_cell_average
from .errors import AbortedRun, InvalidDataError, PreconditionError, SweepError
from .scenarios import ScenarioConfig
from .vlasov import moments, support_box, vlasov_step

log = logging.getLogger(__name__)

DT_COLLAPSE = 1e-12
BOUNDARY_CELLS = 5


def mollifier_weights(radius: float, h: float) -> np.ndarray:
    """Normalised raised-cosine bump of the given radius sampled at spacing ``h``.

    Collapses to the identity ``[1.0]`` when the radius is below one cell.
    """
    n = int(math.floor(radius / h))
    if n < 1:
        return np.ones(1)
    k = np.arange(-n, n + 1)
    w = 0.5 * (1.0 + np.cos(np.pi * k * h / radius))
    w[np.abs(k * h) >= radius] = 0.0
    return w / w.sum()


def _convolve_axis(arr: np.ndarray, w: np.ndarray, axis: int, mode: str) -> np.ndarray:
    if w.size == 1:
        return arr.copy()
    half = w.size // 2
    pad = [(0, 0)] * arr.ndim
    pad[axis] = (half, half)
    padded = np.pad(arr, pad, mode=mode)
    out = np.zeros_like(arr, dtype=float)
    n = arr.shape[axis]
    for offset, weight in enumerate(w[::-1]):
        out += weight * np.take(padded, np.arange(offset, offset + n), axis=axis)
    return out


def mollified_initial_data(u0: Callable, f0: Callable, epsilon: float,
                           grid: GridSpec) -> tuple[FluidField, KineticField]:
    """Sample, cap, truncate and mollify the initial data.

    The density is capped at ``eps^(-1/6)``, cut to the diamond
    ``|x| + |v| <= eps^(-1/6)`` and then smoothed in x and v; the velocity is
    smoothed in x only.  Smoothing uses :func:`mollifier_weights` of radius
    ``eps`` (zero extension for f, edge extension for u).
    """
    if not epsilon > 0:
        raise InvalidDataError("epsilon must be positive")
    xx, vv = np.meshgrid(grid.x, grid.v, indexing="ij")
    f_raw = np.asarray(f0(xx, vv), dtype=float) * np.ones(xx.shape)
    if not np.all(np.isfinite(f_raw)):
        raise InvalidDataError("f0 has non-finite samples")
    if np.any(f_raw < 0):
        raise InvalidDataError(f"f0 is negative at {int(np.sum(f_raw < 0))} grid samples")
    u_raw = np.asarray(u0(grid.x), dtype=float) * np.ones(grid.nx)
    if not np.all(np.isfinite(u_raw)):
        raise InvalidDataError("u0 has non-finite samples")

    cap = epsilon ** (-1.0 / 6.0)
    f_cut = np.minimum(cap, np.where(np.abs(xx) + np.abs(vv) <= cap, f_raw, 0.0))
    wx = mollifier_weights(epsilon, grid.dx)
    wv = mollifier_weights(epsilon, grid.dv)
    f_smooth = _convolve_axis(_convolve_axis(f_cut, wx, 0, "constant"), wv, 1, "constant")
    u_smooth = _convolve_axis(u_raw, wx, 0, "edge")
    return FluidField(u_smooth, grid, 0.0), KineticField(np.maximum(f_smooth, 0.0), grid, 0.0)


@dataclass
class Trajectory:
    """Snapshots and per-step diagnostics of one run.

    ``u`` has shape ``(n_snap, nx)``; ``f`` is ``(n_snap, nx, nv)`` or
    ``None`` when only moments are kept.  Per-step series start with the
    initial state.
    """

    grid: GridSpec
    times: np.ndarray
    u: np.ndarray
    rho: np.ndarray
    j: np.ndarray
    e2: np.ndarray
    f: np.ndarray | None = None
    dissipation: float = 0.0
    step_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    step_dt: np.ndarray = field(default_factory=lambda: np.zeros(0))
    mass: np.ndarray = field(default_factory=lambda: np.zeros(0))
    energy: np.ndarray = field(default_factory=lambda: np.zeros(0))
    max_u: np.ndarray = field(default_factory=lambda: np.zeros(0))
    max_u_minus_psi: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dissipation_series: np.ndarray = field(default_factory=lambda: np.zeros(0))
    boundary_flags: list[str] = field(default_factory=list)
    config: ScenarioConfig | None = None

    @property
    def n_snapshots(self) -> int:
        return int(self.times.size)

    @property
    def dt_max(self) -> float:
        if self.step_dt.size:
            return float(self.step_dt.max())
        return float(np.max(np.diff(self.times))) if self.times.size > 1 else 0.0

    def fluid(self, index: int) -> FluidField:
        return FluidField(self.u[index], self.grid, float(self.times[index]))

    def kinetic(self, index: int) -> KineticField:
        if self.f is None:
            raise ValueError("trajectory stores moments only")
        return KineticField(self.f[index], self.grid, float(self.times[index]))

    def moment_set(self, index: int) -> MomentSet:
        return MomentSet(self.rho[index], self.j[index], self.e2[index], self.grid)

    @property
    def final_u(self) -> FluidField:
        return self.fluid(-1)

    @classmethod
    def from_fields(cls, grid: GridSpec, times: Sequence[float], u_fields: Sequence[np.ndarray],
                    f_fields: Sequence[np.ndarray] | None) -> "Trajectory":
        """Wrap externally produced fields (e.g. exact solutions) as a trajectory."""
        times = np.asarray(times, dtype=float)
        u = np.asarray([np.asarray(a, dtype=float) for a in u_fields])
        if f_fields is None:
            f = None
            rho = j = e2 = np.zeros_like(u)
        else:
            f = np.asarray([np.asarray(a, dtype=float) for a in f_fields])
            ms = [moments(KineticField(fi, grid)) for fi in f]
            rho = np.asarray([m.rho for m in ms])
            j = np.asarray([m.j for m in ms])
            e2 = np.asarray([m.e2 for m in ms])
        traj = cls(grid=grid, times=times, u=u, rho=rho, j=j, e2=e2, f=f)
        traj.step_times = times.copy()
        traj.step_dt = np.diff(times)
        traj.mass = rho.sum(axis=1) * grid.dx
        traj.energy = e2.sum(axis=1) * grid.dx
        traj.max_u = np.abs(u).max(axis=1)
        traj.max_u_minus_psi = np.asarray(
            [np.abs(ui - control_from_rho(ri, grid.dx)).max() for ui, ri in zip(u, rho)])
        traj.dissipation_series = np.zeros(times.size)
        return traj


def _near_boundary(f: KineticField, threshold: float) -> bool:
    box = support_box(f, threshold)
    if box is None:
        return False
    g = f.grid
    m = BOUNDARY_CELLS
    return box.i_lo < m or box.i_hi >= g.nx - m or box.k_lo < m or box.k_hi >= g.nv - m


def _u_wave_at_boundary(u: np.ndarray, scale: float) -> bool:
    m = BOUNDARY_CELLS
    tol = 1e-6 * max(scale, 1e-300)
    return bool(np.ptp(u[:m]) > tol or np.ptp(u[-m:]) > tol)


def run(config: ScenarioConfig, dt_max: float | None = None,
        kinetic_step: Callable = vlasov_step) -> Trajectory:
    """Integrate the regularised system from the configured initial data to ``t_end``.

    ``dt_max`` caps the CFL step (used by splitting studies); ``kinetic_step``
    swaps the density update, e.g. for the pointwise reference scheme.
    """
    config.check_m0()
    grid = config.grid
    u0_fn, f0_fn = config.initial_data()
    u, f = mollified_initial_data(u0_fn, f0_fn, grid.epsilon, grid)
    t_end = grid.t_end
    support_threshold = 1e-12 * float(f.values.max()) if f.values.size else 0.0
    u_scale = float(np.max(np.abs(u.values))) if u.values.size else 0.0

    snaps_t, snaps_u, snaps_f, snaps_m = [], [], [], []
    series = {"t": [], "dt": [], "mass": [], "energy": [], "max_u": [], "max_u_minus_psi": [],
              "dissipation": []}
    flags: list[str] = []
    dissipation = 0.0

    def record_step(uf: FluidField, ff: KineticField, m: MomentSet, dt: float):
        series["t"].append(uf.time)
        series["dt"].append(dt)
        series["mass"].append(float(m.rho.sum() * grid.dx))
        series["energy"].append(float(m.e2.sum() * grid.dx))
        series["max_u"].append(float(np.max(np.abs(uf.values))))
        psi = control_from_rho(m.rho, grid.dx)
        series["max_u_minus_psi"].append(float(np.max(np.abs(uf.values - psi))))
        series["dissipation"].append(dissipation)

    def snapshot(uf: FluidField, ff: KineticField, m: MomentSet):
        snaps_t.append(uf.time)
        snaps_u.append(uf.values)
        snaps_m.append(m)
        if config.store_kinetic:
            snaps_f.append(ff.values)
        if "f-support" not in flags and support_threshold > 0 and _near_boundary(ff, support_threshold):
            flags.append("f-support")
            log.warning("particle support within %d cells of the box at t=%.4g", BOUNDARY_CELLS, uf.time)
        if "u-boundary" not in flags and _u_wave_at_boundary(uf.values, u_scale):
            flags.append("u-boundary")
            log.warning("fluid velocity varies within %d cells of the boundary at t=%.4g",
                        BOUNDARY_CELLS, uf.time)

    m = moments(f)
    record_step(u, f, m, 0.0)
    snapshot(u, f, m)

    cadence = config.snapshot_every
    next_mark = cadence
    t = 0.0
    step = 0
    tiny = 1e-12 * max(1.0, t_end)
    while t < t_end - tiny:
        dt = cfl_dt(u, grid)
        if dt_max is not None:
            dt = min(dt, dt_max)
        if dt < DT_COLLAPSE:
            raise AbortedRun(f"time step collapsed to {dt:.3g} at t={t:.6g}", step=step, time=t,
                             diagnostics={k: v[-1] for k, v in series.items()})
        last = t + dt >= t_end - tiny
        if last:
            dt = t_end - t
        u_new = burgers_step(u, m, grid, dt, technical_viscosity=config.technical_viscosity,
                             check_cfl=False)
        if not u_new.is_finite:
            raise AbortedRun(f"non-finite fluid velocity at step {step + 1}", step=step + 1,
                             time=t + dt, field="u", diagnostics={k: v[-1] for k, v in series.items()})
        dissipation += entropy_dissipation_increment(u, u_new, grid, dt)
        f_new = kinetic_step(f, u_new, dt)
        if not f_new.is_finite:
            raise AbortedRun(f"non-finite particle density at step {step + 1}", step=step + 1,
                             time=t + dt, field="f", diagnostics={k: v[-1] for k, v in series.items()})
        step += 1
        t = t_end if last else t + dt
        u = FluidField(u_new.values, grid, t)
        f = KineticField(f_new.values, grid, t)
        m = moments(f)
        record_step(u, f, m, dt)
        if last or cadence == 0 or t >= next_mark - tiny:
            snapshot(u, f, m)
            if cadence > 0:
                while next_mark <= t + tiny:
                    next_mark += cadence

    return Trajectory(
        grid=grid,
        times=np.asarray(snaps_t),
        u=np.asarray(snaps_u),
        rho=np.asarray([s.rho for s in snaps_m]),
        j=np.asarray([s.j for s in snaps_m]),
        e2=np.asarray([s.e2 for s in snaps_m]),
        f=np.asarray(snaps_f) if config.store_kinetic else None,
        dissipation=dissipation,
        step_times=np.asarray(series["t"]),
        step_dt=np.asarray(series["dt"][1:]),
        mass=np.asarray(series["mass"]),
        energy=np.asarray(series["energy"]),
        max_u=np.asarray(series["max_u"]),
        max_u_minus_psi=np.asarray(series["max_u_minus_psi"]),
        dissipation_series=np.asarray(series["dissipation"]),
        boundary_flags=flags,
        config=config,
    )


@dataclass
class ConvergenceReport:
    epsilons: list[float]
    nx: list[int]
    common_nx: int
    u_distances: list[float]
    rho_distances: list[float]
    dissipation: list[float]
    verdict: str
    slack: float = 0.10

    @property
    def consistent(self) -> bool:
        return self.verdict == "consistent-with-convergence"

    def to_dict(self) -> dict:
        return {
            "epsilons": self.epsilons,
            "nx": self.nx,
            "common_nx": self.common_nx,
            "u_l1_distances": self.u_distances,
            "rho_l1_distances": self.rho_distances,
            "dissipation": self.dissipation,
            "verdict": self.verdict,
            "slack": self.slack,
        }


def tandem_config(config: ScenarioConfig, epsilon: float) -> ScenarioConfig:
    """Copy of ``config`` at viscosity ``epsilon`` with ``dx`` scaled like ``sqrt(eps)``."""
    ref = config.grid
    nx = max(4, int(round(ref.nx * math.sqrt(ref.epsilon / epsilon))))
    return replace(config, grid=ref.with_(epsilon=epsilon, nx=nx))


def nonincreasing_within(values: Sequence[float], slack: float) -> bool:
    return all(b <= a * (1.0 + slack) for a, b in zip(values, values[1:]))


def epsilon_sweep(config: ScenarioConfig, eps_list: Sequence[float], *, tandem: bool = True,
                  workers: int = 1, slack: float = 0.10) -> ConvergenceReport:
    """Run the scenario for each viscosity and compare consecutive final states.

    Final velocities and densities are averaged onto the coarsest grid of the
    sweep before taking L1 distances.
    """
    eps = [float(e) for e in eps_list]
    if len(eps) < 2:
        raise PreconditionError("epsilon sweep needs at least two values")
    if any(not e > 0 for e in eps):
        raise PreconditionError("epsilon values must be positive")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise PreconditionError(f"epsilon list must be strictly decreasing, got {eps}")

    members = [tandem_config(config, e) if tandem else replace(config, grid=config.grid.with_(epsilon=e))
               for e in eps]

    def one(cfg: ScenarioConfig) -> Trajectory:
        try:
            return run(cfg)
        except Exception as exc:  # noqa: BLE001 - wrapped with the member's epsilon
            raise SweepError(cfg.grid.epsilon, exc) from exc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trajs = list(pool.map(one, members))
    else:
        trajs = [one(cfg) for cfg in members]

    common = min(t.grid.nx for t in trajs)
    g0 = config.grid
    dx_common = (g0.x_max - g0.x_min) / common
    u_final = [remap_cell_average(t.u[-1], g0.x_min, g0.x_max, common) for t in trajs]
    rho_final = [remap_cell_average(t.rho[-1], g0.x_min, g0.x_max, common) for t in trajs]
    u_dist = [float(np.abs(a - b).sum() * dx_common) for a, b in zip(u_final, u_final[1:])]
    rho_dist = [float(np.abs(a - b).sum() * dx_common) for a, b in zip(rho_final, rho_final[1:])]
    verdict = "consistent-with-convergence" if nonincreasing_within(u_dist, slack) else "not-consistent"
    return ConvergenceReport(
        epsilons=eps,
        nx=[t.grid.nx for t in trajs],
        common_nx=common,
        u_distances=u_dist,
        rho_distances=rho_dist,
        dissipation=[t.dissipation for t in trajs],
        verdict=verdict,
        slack=slack,
    )
