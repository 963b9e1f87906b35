"""Executable versions of the a-priori bounds and the weak formulations.

Every check consumes stored :class:`~burgers_vlasov.driver.Trajectory` data
only, so trajectories assembled from exact solutions can be checked the same
way as solver output.  Results are :class:`CheckRecord` entries collected in a
:class:`DiagnosticsReport`, which serialises to JSON and CSV.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .burgers import EntropyPair, control_from_rho, kruzkov_constants
from .driver import Trajectory
from .errors import InvalidTestFunction

SCHEMA = "burgers-vlasov-diagnostics/1"
DEFAULT_SLACK = 0.05
# sup of s (1 - s^2)^2 on [0, 1], reached at s = 1/sqrt(5)
_BUMP_SLOPE = 16.0 / (25.0 * math.sqrt(5.0))
# snapshots needed per temporal radius of a test function
SAMPLES_PER_RADIUS = 4


@dataclass
class CheckRecord:
    """One measured quantity against its bound.

    A ``skipped`` record could not be evaluated (the reason is in
    ``details``); it does not count as a failure.
    """

    name: str
    measured: float
    bound: float
    formula: str
    passed: bool
    details: dict = field(default_factory=dict)
    series: dict[str, list[float]] | None = None
    skipped: bool = False

    @property
    def verdict(self) -> str:
        if self.skipped:
            return "skipped"
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "measured": _finite_or_str(self.measured),
            "bound": _finite_or_str(self.bound),
            "formula": self.formula,
            "verdict": self.verdict,
            "details": _jsonable(self.details),
        }
        if self.series is not None:
            out["series"] = _jsonable(self.series)
        return out


@dataclass
class DiagnosticsReport:
    """Records from one run plus its per-step time series."""

    scenario: str = ""
    records: list[CheckRecord] = field(default_factory=list)
    series: dict[str, list[float]] = field(default_factory=dict)

    def add(self, record: CheckRecord) -> CheckRecord:
        self.records.append(record)
        return record

    def __getitem__(self, name: str) -> CheckRecord:
        for rec in self.records:
            if rec.name == name:
                return rec
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(rec.name == name for rec in self.records)

    @property
    def passed(self) -> bool:
        return all(rec.passed for rec in self.records)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "scenario": self.scenario,
            "passed": self.passed,
            "records": [rec.to_dict() for rec in self.records],
            "series": _jsonable(self.series),
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=False, allow_nan=False)

    def to_csv(self) -> str:
        """Per-step time series as flat CSV (shortest round-trip floats)."""
        if not self.series:
            return ""
        keys = list(self.series)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(keys)
        for row in zip(*(self.series[k] for k in keys)):
            writer.writerow([repr(float(x)) for x in row])
        return buf.getvalue()


def _finite_or_str(x):
    x = float(x)
    return x if math.isfinite(x) else repr(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _finite_or_str(obj)
    return obj


# test functions

@dataclass(frozen=True)
class TestFunction:
    """Polynomial bump ``A (1 - r^2)^3`` on an ellipsoid, zero outside.

    ``kind`` is ``"x-t"`` (coordinates ``(x, t)``) or ``"x-v-t"``
    (coordinates ``(x, v, t)``); ``center`` and ``radius`` follow the same
    order and ``r^2 = sum ((y - c) / R)^2``.
    """

    __test__ = False  # not a pytest class

    kind: str
    center: tuple[float, ...]
    radius: tuple[float, ...]
    amplitude: float = 1.0

    def __post_init__(self):
        dims = {"x-t": 2, "x-v-t": 3}
        if self.kind not in dims:
            raise InvalidTestFunction(f"unknown test-function kind {self.kind!r}")
        n = dims[self.kind]
        if len(self.center) != n or len(self.radius) != n:
            raise InvalidTestFunction(f"{self.kind} bumps need {n} centre and radius entries")
        if any(not (r > 0 and math.isfinite(r)) for r in self.radius):
            raise InvalidTestFunction("radii must be positive and finite")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "radius", tuple(float(r) for r in self.radius))

    @property
    def ndim(self) -> int:
        return len(self.center)

    def scaled(self, factor: float) -> "TestFunction":
        return TestFunction(self.kind, self.center, self.radius, self.amplitude * factor)

    def _r2(self, coords):
        return sum(((np.asarray(y, dtype=float) - c) / r) ** 2
                   for y, c, r in zip(coords, self.center, self.radius))

    def value(self, *coords) -> np.ndarray:
        r2 = self._r2(coords)
        return np.where(r2 < 1.0, self.amplitude * (1.0 - np.minimum(r2, 1.0)) ** 3, 0.0)

    def gradient(self, *coords) -> tuple[np.ndarray, ...]:
        """Partial derivatives in coordinate order."""
        r2 = self._r2(coords)
        inside = r2 < 1.0
        common = np.where(inside, -6.0 * self.amplitude * (1.0 - np.minimum(r2, 1.0)) ** 2, 0.0)
        return tuple(common * (np.asarray(y, dtype=float) - c) / (r * r)
                     for y, c, r in zip(coords, self.center, self.radius))

    @property
    def c1_norm(self) -> float:
        """``sup |phi| + sum_i sup |d_i phi|`` (analytic)."""
        a = abs(self.amplitude)
        return a + sum(6.0 * a * _BUMP_SLOPE / r for r in self.radius)

    def bounds(self, axis: int) -> tuple[float, float]:
        return self.center[axis] - self.radius[axis], self.center[axis] + self.radius[axis]


def _validate_support(traj: Trajectory, phi: TestFunction, kind: str, *, interior_time: bool):
    if phi.kind != kind:
        raise InvalidTestFunction(f"expected a {kind} test function, got {phi.kind}")
    g = traj.grid
    x_lo, x_hi = phi.bounds(0)
    if x_lo < g.x_min or x_hi > g.x_max:
        raise InvalidTestFunction(
            f"x-support [{x_lo:g}, {x_hi:g}] leaves the domain [{g.x_min:g}, {g.x_max:g}]")
    if kind == "x-v-t":
        v_lo, v_hi = phi.bounds(1)
        if v_lo < g.v_min or v_hi > g.v_max:
            raise InvalidTestFunction(
                f"v-support [{v_lo:g}, {v_hi:g}] leaves the domain [{g.v_min:g}, {g.v_max:g}]")
    t_lo, t_hi = phi.bounds(phi.ndim - 1)
    t_end = float(traj.times[-1])
    if t_hi > t_end * (1.0 + 1e-12):
        raise InvalidTestFunction(f"time support reaches {t_hi:g} beyond the stored t_end={t_end:g}")
    if interior_time and t_lo < 0:
        raise InvalidTestFunction(f"time support starts at {t_lo:g} < 0")
    if traj.times[0] != 0.0:
        raise InvalidTestFunction("trajectory must start at t = 0")
    r_t = phi.radius[-1]
    gaps = np.diff(traj.times)
    lo, hi = max(t_lo, 0.0), t_hi
    inside = (traj.times[1:] > lo) & (traj.times[:-1] < hi)
    widest = float(gaps[inside].max()) if np.any(inside) else 0.0
    if widest > r_t / SAMPLES_PER_RADIUS:
        raise InvalidTestFunction(
            f"snapshot spacing {widest:g} does not resolve temporal radius {r_t:g} "
            f"(need at most {r_t / SAMPLES_PER_RADIUS:g})")


def _trapezoid_weights(times: np.ndarray) -> np.ndarray:
    w = np.zeros(times.size)
    gaps = np.diff(times)
    w[:-1] += 0.5 * gaps
    w[1:] += 0.5 * gaps
    return w


def _active_snapshots(traj: Trajectory, phi: TestFunction):
    """Indices with nonzero trapezoid weight overlapping the temporal support."""
    t_lo, t_hi = phi.bounds(phi.ndim - 1)
    w = _trapezoid_weights(traj.times)
    times = traj.times
    idx = []
    for n, t in enumerate(times):
        left = times[n - 1] if n > 0 else t
        right = times[n + 1] if n + 1 < times.size else t
        if right > t_lo and left < t_hi:
            idx.append(n)
    return idx, w


def weak_residual_burgers(traj: Trajectory, phi: TestFunction) -> float:
    """``int phi(x,0) u0 dx + int int (u phi_t + u^2/2 phi_x + phi (j - u rho)) dx dt``.

    Trapezoid rule over snapshots in time, midpoint rule in x.
    """
    _validate_support(traj, phi, "x-t", interior_time=False)
    g = traj.grid
    x = g.x
    total = 0.0
    phi0 = phi.value(x, 0.0)
    total += float(np.sum(phi0 * traj.u[0]) * g.dx)
    idx, w = _active_snapshots(traj, phi)
    for n in idx:
        t = traj.times[n]
        u = traj.u[n]
        val = phi.value(x, t)
        px, pt = phi.gradient(x, t)
        integrand = u * pt + 0.5 * u * u * px + val * (traj.j[n] - u * traj.rho[n])
        total += w[n] * float(np.sum(integrand) * g.dx)
    return total


def weak_residual_vlasov(traj: Trajectory, psi_test: TestFunction) -> float:
    """``int int psi(x,v,0) f0 + int int int (f psi_t + v f psi_x + psi_v f (u - v))``.

    Trapezoid rule over snapshots in time, midpoint rule in x and v.
    """
    _validate_support(traj, psi_test, "x-v-t", interior_time=False)
    if traj.f is None:
        raise InvalidTestFunction("trajectory does not store the kinetic field")
    g = traj.grid
    x_lo, x_hi = psi_test.bounds(0)
    v_lo, v_hi = psi_test.bounds(1)
    ix = np.flatnonzero((g.x > x_lo) & (g.x < x_hi))
    iv = np.flatnonzero((g.v > v_lo) & (g.v < v_hi))
    if ix.size == 0 or iv.size == 0:
        return 0.0
    xs = g.x[ix][:, None]
    vs = g.v[iv][None, :]
    cell = g.dx * g.dv
    total = 0.0
    f0 = traj.f[0][np.ix_(ix, iv)]
    total += float(np.sum(psi_test.value(xs, vs, 0.0) * f0) * cell)
    idx, w = _active_snapshots(traj, psi_test)
    for n in idx:
        t = traj.times[n]
        f = traj.f[n][np.ix_(ix, iv)]
        u = traj.u[n][ix][:, None]
        px, pv, pt = psi_test.gradient(xs, vs, t)
        integrand = f * (pt + vs * px + pv * (u - vs))
        total += w[n] * float(np.sum(integrand) * cell)
    return total


def entropy_inequality_residual(traj: Trajectory, pair: EntropyPair, phi: TestFunction) -> float:
    """``int eta(u0) phi(x,0) + int int (eta phi_t + q phi_x - phi eta'(u) (u rho - j))``.

    Nonnegative for an entropy solution and nonnegative ``phi``.
    """
    _validate_support(traj, phi, "x-t", interior_time=False)
    g = traj.grid
    x = g.x
    probe = phi.value(x[:, None], np.linspace(*phi.bounds(1), 9)[None, :])
    if phi.amplitude < 0 or np.any(probe < 0):
        raise InvalidTestFunction("entropy inequality needs a nonnegative test function")
    total = float(np.sum(pair.eta(traj.u[0]) * phi.value(x, 0.0)) * g.dx)
    idx, w = _active_snapshots(traj, phi)
    for n in idx:
        t = traj.times[n]
        u = traj.u[n]
        val = phi.value(x, t)
        px, pt = phi.gradient(x, t)
        drag = u * traj.rho[n] - traj.j[n]
        integrand = pair.eta(u) * pt + pair.q(u) * px - val * pair.deta(u) * drag
        total += w[n] * float(np.sum(integrand) * g.dx)
    return total


def default_family(traj_or_grid, t_end: float | None = None, kind: str = "x-t") -> list[TestFunction]:
    """Five centres times three radii spread over the interior of the domain.

    Centres sit at 30%..70% of the x-range (and mid-range in v), at half the
    final time; spatial radii are 8/12/16% of the x-range (10/15/20% of the
    v-range) and temporal radii 20/30/40% of ``t_end``.  Given a trajectory,
    temporal radii are raised to cover at least ``SAMPLES_PER_RADIUS``
    snapshot gaps, with the centre moved back so the support still ends by
    ``t_end`` (it may then reach below ``t = 0``).
    """
    grid = getattr(traj_or_grid, "grid", traj_or_grid)
    times = getattr(traj_or_grid, "times", None)
    if t_end is None:
        t_end = float(times[-1])
    min_rt = 0.0
    if times is not None and len(times) > 1:
        min_rt = SAMPLES_PER_RADIUS * float(np.max(np.diff(times)))
    L = grid.x_max - grid.x_min
    V = grid.v_max - grid.v_min
    v_mid = 0.5 * (grid.v_min + grid.v_max)
    out = []
    for frac in (0.3, 0.4, 0.5, 0.6, 0.7):
        xc = grid.x_min + frac * L
        for scale in (0.08, 0.12, 0.16):
            rt = max(2.5 * scale * t_end, min_rt)
            tc = min(0.5 * t_end, t_end - rt)
            if kind == "x-t":
                out.append(TestFunction("x-t", (xc, tc), (scale * L, rt)))
            elif kind == "x-v-t":
                out.append(TestFunction("x-v-t", (xc, v_mid, tc), (scale * L, 1.25 * scale * V, rt)))
            else:
                raise InvalidTestFunction(f"unknown test-function kind {kind!r}")
    return out


# bound checks

def _snapshot_mass(traj: Trajectory) -> np.ndarray:
    return traj.rho.sum(axis=1) * traj.grid.dx


def check_mass(traj: Trajectory, tol_rel: float = 1e-3) -> CheckRecord:
    """Largest relative change of the total particle mass over the snapshots."""
    mass = _snapshot_mass(traj)
    m0 = float(mass[0])
    formula = "max_t |M(t) - M(0)| / M(0), M(t) = sum f dx dv"
    if m0 <= 0:
        return CheckRecord("mass", 0.0, tol_rel, formula, True,
                           {"note": "no particles; passes trivially"},
                           {"t": traj.times.tolist(), "mass": mass.tolist()})
    drift = float(np.max(np.abs(mass - m0)) / m0)
    return CheckRecord("mass", drift, tol_rel, formula, drift <= tol_rel, {"mass0": m0},
                       {"t": traj.times.tolist(), "mass": mass.tolist()})


def energy_envelope(t, E0: float, M0: float) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return np.exp(-t) * E0 + 9.0 * M0 ** 3 * (1.0 - np.exp(-t))


def check_kinetic_energy(traj: Trajectory, M0: float, slack: float = DEFAULT_SLACK) -> CheckRecord:
    """Second velocity moment against its Gronwall envelope and the uniform cap."""
    energy = traj.e2.sum(axis=1) * traj.grid.dx
    env = energy_envelope(traj.times, float(energy[0]), M0)
    cap = M0 + 9.0 * M0 ** 3
    ratio = float(np.max(energy / np.where(env > 0, env, np.inf))) if energy.size else 0.0
    if not np.all(env > 0):
        ratio = max(ratio, 0.0 if np.all(energy[env <= 0] <= 0) else math.inf)
    within_env = bool(np.all(energy <= env * (1.0 + slack)))
    within_cap = bool(np.all(energy <= cap))
    return CheckRecord(
        "kinetic_energy", ratio, 1.0 + slack,
        "max_t E(t) / (e^-t E(0) + 9 M0^3 (1 - e^-t)), E = sum v^2 f dx dv; cap M0 + 9 M0^3",
        within_env and within_cap,
        {"M0": M0, "cap": cap, "max_energy": float(energy.max()), "within_cap": within_cap,
         "slack": slack},
        {"t": traj.times.tolist(), "energy": energy.tolist(), "envelope": env.tolist()},
    )


def check_max_principle(traj: Trajectory, M0: float, slack: float = DEFAULT_SLACK,
                        monotone_factor: float = 1.0) -> CheckRecord:
    """Uniform bounds on ``u - psi`` and ``u`` plus the decay of ``max|u - psi|``.

    Between consecutive snapshots ``max|u - psi|`` may grow by at most
    ``monotone_factor * M0 * (dx + dt_max)``.
    """
    g = traj.grid
    psi = np.asarray([control_from_rho(r, g.dx) for r in traj.rho])
    dev = np.abs(traj.u - psi).max(axis=1)
    umax = np.abs(traj.u).max(axis=1)
    step_slack = monotone_factor * M0 * (g.dx + traj.dt_max)
    growth = float(np.max(np.diff(dev))) if dev.size > 1 else 0.0
    ok_dev = bool(dev.max() <= 2.0 * M0 * (1.0 + slack))
    ok_u = bool(umax.max() <= 3.0 * M0 * (1.0 + slack))
    ok_mono = growth <= step_slack
    return CheckRecord(
        "max_principle", float(umax.max()), 3.0 * M0 * (1.0 + slack),
        "max|u| <= 3 M0 (1+slack); max|u - psi| <= 2 M0 (1+slack), psi = int_x^inf rho; "
        "max|u - psi| nonincreasing up to M0 (dx + dt) per snapshot",
        ok_dev and ok_u and ok_mono,
        {"max_u_minus_psi": float(dev.max()), "bound_u_minus_psi": 2.0 * M0 * (1.0 + slack),
         "largest_increase": growth, "allowed_increase": step_slack,
         "bounds_ok": ok_dev and ok_u, "monotone_ok": ok_mono, "slack": slack},
        {"t": traj.times.tolist(), "max_u": umax.tolist(), "max_u_minus_psi": dev.tolist()},
    )


def moment_continuity_residual(traj: Trajectory) -> float:
    """Largest L1 norm of ``(rho^{n+1} - rho^n)/dt + D_x j^n`` over snapshot pairs.

    ``D_x`` is the centred difference (one-sided at the two end cells).
    """
    if traj.times.size < 2:
        return 0.0
    dx = traj.grid.dx
    worst = 0.0
    for n in range(traj.times.size - 1):
        h = traj.times[n + 1] - traj.times[n]
        if h <= 0:
            continue
        res = (traj.rho[n + 1] - traj.rho[n]) / h + np.gradient(traj.j[n], dx)
        worst = max(worst, float(np.sum(np.abs(res)) * dx))
    return worst


def _mean_gap(traj: Trajectory) -> float:
    return float(np.mean(np.diff(traj.times))) if traj.times.size > 1 else 0.0


def continuity_constant_estimate(traj: Trajectory) -> float:
    """Modified-equation size of the first-order truncation error.

    ``max_n int int |v| |f_xx| dx dv + max_n int |rho_tt| dx`` from stored
    data (second differences), i.e. twice the leading coefficients of
    ``dx/2 (|v| f_x)_x`` and ``dt/2 rho_tt``.  Without stored densities the
    spatial term uses ``int |j_xx| dx``.
    """
    g = traj.grid
    if traj.f is not None and traj.f.shape[1] >= 3:
        fxx = np.diff(traj.f, n=2, axis=1) / g.dx ** 2
        space = float(np.max(np.sum(np.abs(fxx) * np.abs(g.v)[None, None, :], axis=(1, 2)))
                      * g.dx * g.dv)
    else:
        jxx = np.diff(traj.j, n=2, axis=1) / g.dx ** 2
        space = float(np.max(np.sum(np.abs(jxx), axis=1)) * g.dx) if jxx.size else 0.0
    time_term = 0.0
    t = traj.times
    if t.size >= 3:
        for n in range(1, t.size - 1):
            h0, h1 = t[n] - t[n - 1], t[n + 1] - t[n]
            if h0 <= 0 or h1 <= 0:
                continue
            rtt = 2.0 * ((traj.rho[n + 1] - traj.rho[n]) / h1 - (traj.rho[n] - traj.rho[n - 1]) / h0) \
                / (h0 + h1)
            time_term = max(time_term, float(np.sum(np.abs(rtt)) * g.dx))
    return space + time_term


def check_moment_continuity(traj: Trajectory, reference: Trajectory | None = None,
                            constant: float | None = None, slack: float = 0.10) -> CheckRecord:
    """Discrete continuity equation residual against ``C (dx + dt)``.

    ``C`` is fitted from a ``reference`` run on a coarser grid when given
    (``C = residual_ref / (dx_ref + dt_ref)``, enlarged by ``slack``);
    otherwise ``constant`` is used, defaulting to
    :func:`continuity_constant_estimate`.  ``dt`` is the mean snapshot gap.
    """
    measured = moment_continuity_residual(traj)
    h = traj.grid.dx + _mean_gap(traj)
    source = "given"
    if reference is not None:
        h_ref = reference.grid.dx + _mean_gap(reference)
        constant = moment_continuity_residual(reference) / h_ref * (1.0 + slack)
        source = "fitted"
    elif constant is None:
        constant = continuity_constant_estimate(traj)
        source = "estimated"
    bound = constant * h
    return CheckRecord(
        "moment_continuity", measured, bound,
        "max_n || (rho^{n+1} - rho^n)/dt + D_x j^n ||_L1 <= C (dx + dt)",
        measured <= bound, {"C": constant, "C_source": source, "dx_plus_dt": h},
    )


def dissipation_budget(traj: Trajectory) -> CheckRecord:
    """Accumulated ``int int eps u_x^2 dx dt``; the bound is finiteness here.

    Uniformity in ``eps`` is checked across runs by :func:`dissipation_band`.
    """
    value = float(traj.dissipation)
    series = None
    if traj.dissipation_series.size:
        series = {"t": traj.step_times.tolist(), "dissipation": traj.dissipation_series.tolist()}
    return CheckRecord("dissipation", value, math.inf, "int int eps (u_x)^2 dx dt",
                       math.isfinite(value) and value >= 0, {}, series)


def dissipation_band(values: Sequence[float], factor: float = 2.0) -> CheckRecord:
    """All dissipation totals of a sweep within a band ``max <= factor * min``."""
    vals = np.asarray(values, dtype=float)
    lo, hi = float(vals.min()), float(vals.max())
    spread = hi / lo if lo > 0 else (1.0 if hi == 0 else math.inf)
    return CheckRecord("dissipation_band", spread, factor, "max_eps D / min_eps D",
                       spread <= factor, {"values": vals.tolist()})


# Riemann oracles

def riemann_exact(x, t: float, u_left: float, u_right: float, x_jump: float = 0.0) -> np.ndarray:
    """Entropy solution of inviscid Burgers for a single jump."""
    x = np.asarray(x, dtype=float) - x_jump
    if t <= 0:
        return np.where(x < 0, u_left, u_right).astype(float)
    if u_left > u_right:
        s = 0.5 * (u_left + u_right)
        return np.where(x < s * t, u_left, u_right).astype(float)
    return np.clip(x / t, u_left, u_right)


def half_max_position(x: np.ndarray, u: np.ndarray, level: float) -> float:
    """First crossing of ``level`` by ``u`` (linear interpolation between centres)."""
    s = np.asarray(u, dtype=float) - level
    cross = np.flatnonzero(np.sign(s[:-1]) * np.sign(s[1:]) <= 0)
    if cross.size == 0:
        return math.nan
    i = int(cross[0])
    if s[i] == s[i + 1]:
        return float(x[i])
    return float(x[i] + (x[i + 1] - x[i]) * s[i] / (s[i] - s[i + 1]))


def shock_position_record(traj: Trajectory, u_left: float, u_right: float,
                          x_jump: float = 0.0) -> CheckRecord:
    """Half-max point of the final velocity against ``x_jump + t (u_L + u_R)/2``."""
    g = traj.grid
    t = float(traj.times[-1])
    expected = x_jump + 0.5 * (u_left + u_right) * t
    found = half_max_position(g.x, traj.u[-1], 0.5 * (u_left + u_right))
    err = abs(found - expected) if math.isfinite(found) else math.inf
    bound = 2.0 * g.dx + 3.0 * math.sqrt(g.epsilon)
    return CheckRecord("shock_position", err, bound,
                       "|x_half(t_end) - (x_jump + t_end (u_L + u_R)/2)| <= 2 dx + 3 sqrt(eps)",
                       err <= bound, {"x_half": found, "x_expected": expected})


def rarefaction_record(traj: Trajectory, u_left: float, u_right: float, x_jump: float = 0.0,
                       tol: float = 0.05) -> CheckRecord:
    """L1 distance of the final velocity to the self-similar rarefaction."""
    g = traj.grid
    t = float(traj.times[-1])
    exact = riemann_exact(g.x, t, u_left, u_right, x_jump)
    err = float(np.sum(np.abs(traj.u[-1] - exact)) * g.dx)
    return CheckRecord("rarefaction_l1", err, tol, "sum |u(t_end) - clip((x - x_jump)/t, u_L, u_R)| dx",
                       err <= tol)


# residual summaries

def weak_residual_record(traj: Trajectory, family: Iterable[TestFunction] | None = None,
                         tol_factor: float = 1.0) -> list[CheckRecord]:
    """Burgers (and, with kinetic data, Vlasov) residuals over a test family.

    The verdict compares ``max |R(phi)| / ||phi||_C1`` against
    ``tol_factor * (dx + dv + dt + eps)``.
    """
    g = traj.grid
    bound = tol_factor * (g.dx + g.dv + traj.dt_max + g.epsilon)
    out = []
    fam = list(family) if family is not None else default_family(traj, kind="x-t")
    vals = [weak_residual_burgers(traj, phi) for phi in fam]
    scaled = [abs(v) / phi.c1_norm for v, phi in zip(vals, fam)]
    worst = max(scaled) if scaled else 0.0
    out.append(CheckRecord("weak_residual_burgers", worst, bound,
                           "max_phi |R_u(phi)| / ||phi||_C1 <= dx + dv + dt + eps",
                           worst <= bound, {"residuals": vals}))
    if traj.f is not None:
        famv = default_family(traj, kind="x-v-t")
        vals = [weak_residual_vlasov(traj, phi) for phi in famv]
        scaled = [abs(v) / phi.c1_norm for v, phi in zip(vals, famv)]
        worst = max(scaled) if scaled else 0.0
        out.append(CheckRecord("weak_residual_vlasov", worst, bound,
                               "max_psi |R_f(psi)| / ||psi||_C1 <= dx + dv + dt + eps",
                               worst <= bound, {"residuals": vals}))
    return out


def entropy_record(traj: Trajectory, M0: float, family: Iterable[TestFunction] | None = None,
                   tol_factor: float = 0.02) -> CheckRecord:
    """Kruzkov entropy inequality ``R >= -tol_factor ||phi||_C1`` over constants and bumps."""
    fam = list(family) if family is not None else default_family(traj, kind="x-t")
    worst = math.inf
    values = {}
    for c in kruzkov_constants(M0):
        pair = EntropyPair.kruzkov(c)
        row = []
        for phi in fam:
            r = entropy_inequality_residual(traj, pair, phi)
            row.append(r)
            worst = min(worst, r / phi.c1_norm)
        values[f"{c:.6g}"] = row
    if not fam:
        worst = 0.0
    return CheckRecord("entropy_inequality", worst, -tol_factor,
                       "min_{c, phi} R_eta(phi) / ||phi||_C1 >= -0.02, eta = |u - c|",
                       worst >= -tol_factor, {"residuals": values})


def skipped_residuals(reason: str) -> CheckRecord:
    return CheckRecord("weak_residuals", math.nan, math.nan, "default test family", True,
                       {"reason": reason}, skipped=True)


def evaluate(traj: Trajectory, M0: float, *, mass_tol: float = 1e-3,
             slack: float = DEFAULT_SLACK, residuals: bool = True,
             reference: Trajectory | None = None) -> DiagnosticsReport:
    """Run every single-trajectory check and collect the time series.

    ``reference`` (a coarser run of the same scenario) fits the constant of
    the moment-continuity check.
    """
    name = traj.config.name if traj.config is not None else ""
    report = DiagnosticsReport(scenario=name)
    report.add(check_mass(traj, mass_tol))
    report.add(check_kinetic_energy(traj, M0, slack))
    report.add(check_max_principle(traj, M0, slack))
    report.add(check_moment_continuity(traj, reference))
    report.add(dissipation_budget(traj))
    cfg = traj.config
    if cfg is not None and cfg.kind == "riemann":
        ul, ur, xj = (float(cfg.params[k]) for k in ("u_left", "u_right", "x_jump"))
        if ul > ur:
            report.add(shock_position_record(traj, ul, ur, xj))
        elif ul < ur:
            report.add(rarefaction_record(traj, ul, ur, xj))
    if residuals and traj.times.size > 1:
        try:
            for rec in weak_residual_record(traj):
                report.add(rec)
            report.add(entropy_record(traj, M0))
        except InvalidTestFunction as exc:
            report.add(skipped_residuals(str(exc)))
    report.series = {
        "t": traj.step_times.tolist(),
        "mass": traj.mass.tolist(),
        "energy": traj.energy.tolist(),
        "max_u": traj.max_u.tolist(),
        "max_u_minus_psi": traj.max_u_minus_psi.tolist(),
    }
    if traj.dissipation_series.size == traj.step_times.size:
        report.series["dissipation"] = traj.dissipation_series.tolist()
    return report
