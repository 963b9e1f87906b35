"""Command-line front end.

``burgers-vlasov run <config>``, ``sweep <config> --eps ...``, ``verify <config>``
and ``presets``.  ``<config>`` is an INI file or the name of a built-in preset.
Exit codes: 0 when every check passes, 1 on errors, 2 when a diagnostic fails.
The worker count for sweeps comes from ``BURGERS_VLASOV_WORKERS``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import platform
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .core import FluidField, KineticField, l1_distance
from .diagnostics import (CheckRecord, DiagnosticsReport, check_mass, dissipation_band, evaluate,
                          skipped_residuals, weak_residual_record)
from .driver import Trajectory, epsilon_sweep, mollified_initial_data, run
from .errors import BurgersVlasovError, InvalidTestFunction, PicardNoConvergence
from .picard import picard_run
from .scenarios import PRESETS, ScenarioConfig, load_config, preset
from .vlasov import exact_const_u, free_transport

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2
WORKERS_ENV = "BURGERS_VLASOV_WORKERS"
SMOOTH_KINDS = ("gaussian_bump", "beam")

log = logging.getLogger("burgers_vlasov.cli")


# output helpers

def _fmt(x) -> str:
    return repr(float(x))


def write_fluid_csv(path: Path, traj: Trajectory) -> None:
    x = traj.grid.x
    with open(path, "w", newline="") as fh:
        fh.write("t,x,u\n")
        for t, row in zip(traj.times, traj.u):
            ts = _fmt(t)
            fh.write("".join(f"{ts},{_fmt(xi)},{_fmt(ui)}\n" for xi, ui in zip(x, row)))


def write_kinetic_csv(path: Path, traj: Trajectory, stride: int = 1) -> None:
    g = traj.grid
    xs = [_fmt(v) for v in g.x]
    vs = [_fmt(v) for v in g.v]
    with open(path, "w", newline="") as fh:
        fh.write("t,x,v,f\n")
        for n in range(0, traj.times.size, stride):
            ts = _fmt(traj.times[n])
            block = traj.f[n]
            for i, xi in enumerate(xs):
                fh.write("".join(f"{ts},{xi},{vk},{_fmt(fv)}\n" for vk, fv in zip(vs, block[i])))


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir: Path, command: str, config: ScenarioConfig | None, files: Sequence[Path],
                   started: float, extra: dict | None = None) -> Path:
    """Config echo, versions, timing and checksummed inventory of ``files``."""
    import scipy

    manifest = {
        "command": command,
        "config": config.to_dict() if config is not None else None,
        "versions": {
            "burgers_vlasov": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "timing": {"wall_seconds": round(time.perf_counter() - started, 3)},
        "files": [{"path": p.name, "bytes": p.stat().st_size, "sha256": _sha256(p)} for p in files],
    }
    if extra:
        manifest.update(extra)
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def _write_text(path: Path, text: str) -> Path:
    path.write_text(text)
    return path


def _out_dir(args, config: ScenarioConfig, sub: str) -> Path:
    base = Path(args.out) if args.out else Path("output") / (config.name or "scenario") / sub
    base.mkdir(parents=True, exist_ok=True)
    return base


def _workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        value = int(raw)
    except ValueError:
        raise BurgersVlasovError(f"{WORKERS_ENV}={raw!r} is not an integer") from None
    if value < 1:
        raise BurgersVlasovError(f"{WORKERS_ENV} must be at least 1")
    return value


def _coarse_reference(config: ScenarioConfig) -> Trajectory | None:
    """Half-resolution companion run used to fit the continuity constant."""
    g = config.grid
    if g.nx < 8 or g.nv < 8:
        return None
    coarse = replace(config, grid=g.with_(nx=g.nx // 2, nv=g.nv // 2), store_kinetic=False)
    return run(coarse)


# subcommands

def cmd_run(args) -> int:
    started = time.perf_counter()
    config = load_config(args.config)
    traj = run(config)
    reference = None if args.no_reference else _coarse_reference(config)
    report = evaluate(traj, config.M0, reference=reference)
    out = _out_dir(args, config, "run")
    files = [out / "fluid.csv"]
    write_fluid_csv(files[0], traj)
    if traj.f is not None and not args.no_kinetic_csv:
        files.append(out / "kinetic.csv")
        write_kinetic_csv(files[-1], traj, args.kinetic_stride)
    files.append(_write_text(out / "diagnostics.json", report.to_json() + "\n"))
    files.append(_write_text(out / "timeseries.csv", report.to_csv()))
    write_manifest(out, "run", config, files, started,
                   {"boundary_flags": traj.boundary_flags})
    _summarise(report)
    return EXIT_OK if report.passed else EXIT_FAIL


def _parse_eps(text: str) -> list[float]:
    try:
        values = [float(tok) for tok in text.replace(",", " ").split()]
    except ValueError:
        raise BurgersVlasovError(f"--eps expects numbers, got {text!r}") from None
    return values


def cmd_sweep(args) -> int:
    started = time.perf_counter()
    config = load_config(args.config)
    eps = _parse_eps(args.eps)
    report = epsilon_sweep(config, eps, tandem=not args.no_tandem, workers=_workers())
    band = dissipation_band(report.dissipation)
    out = _out_dir(args, config, "sweep")
    payload = report.to_dict()
    payload["dissipation_band"] = band.to_dict()
    files = [_write_text(out / "convergence.json", json.dumps(payload, indent=2) + "\n")]
    rows = ["eps_coarse,eps_fine,u_l1,rho_l1"]
    for a, b, du, dr in zip(eps, eps[1:], report.u_distances, report.rho_distances):
        rows.append(f"{_fmt(a)},{_fmt(b)},{_fmt(du)},{_fmt(dr)}")
    files.append(_write_text(out / "distances.csv", "\n".join(rows) + "\n"))
    write_manifest(out, "sweep", config, files, started, {"epsilons": eps})
    print(f"verdict: {report.verdict}; u distances {', '.join(f'{d:.4g}' for d in report.u_distances)}")
    print(f"dissipation: {', '.join(f'{d:.4g}' for d in report.dissipation)} ({band.verdict} band)")
    return EXIT_OK if report.consistent else EXIT_FAIL


def vlasov_oracle_records(config: ScenarioConfig) -> list[CheckRecord]:
    """Free transport (u = 0) of the scenario density against the closed form."""
    g = config.grid
    _, f0 = config.initial_data()
    xx, vv = np.meshgrid(g.x, g.v, indexing="ij")
    start = KineticField(f0(xx, vv), g, 0.0)
    t = g.t_end
    exact = exact_const_u(f0, 0.0, t, g)
    dt = g.cfl_safety * g.dv / (g.v_abs_max + 1e-12)
    numeric = free_transport(start, FluidField(np.zeros(g.nx), g), t, dt)
    cell = g.dx * g.dv
    ref = float(exact.values.sum() * cell)
    err = float(np.abs(numeric.values - exact.values).sum() * cell)
    rel = err / ref if ref > 0 else err
    bound = g.dx + g.dv + dt
    m0 = float(start.values.sum() * cell)
    drift_exact = abs(ref - m0) / m0 if m0 > 0 else 0.0
    return [
        CheckRecord("vlasov_oracle_l1", rel, bound,
                    "||f_num - f_exact||_L1 / ||f_exact||_L1 <= dx + dv + dt (u = 0)", rel <= bound,
                    {"dt": dt}),
        CheckRecord("vlasov_oracle_mass", drift_exact, 1e-6,
                    "|M_exact(t_end) - M(0)| / M(0) (quadrature only)", drift_exact <= 1e-6),
    ]


def cmd_verify(args) -> int:
    started = time.perf_counter()
    config = load_config(args.config)
    if config.kind not in SMOOTH_KINDS:
        raise BurgersVlasovError(
            f"verify needs smooth initial data ({', '.join(SMOOTH_KINDS)}), got kind {config.kind!r}")
    g = config.grid
    out = _out_dir(args, config, "verify")
    report = DiagnosticsReport(scenario=config.name)
    u0, f0 = config.initial_data()
    u_e, f_e = mollified_initial_data(u0, f0, g.epsilon, g)
    code = EXIT_OK
    try:
        state = picard_run(u_e, f_e, g, g.t_end, tol=args.tol, max_iter=args.max_iter)
    except PicardNoConvergence as exc:
        report.add(CheckRecord("picard_contraction", exc.ratios[-1] if exc.ratios else math.nan, 1.0,
                               "||u_k - u_{k-1}|| / ||u_{k-1} - u_{k-2}|| < 1", False,
                               {"ratios": exc.ratios, "message": str(exc)}))
        print(f"picard: {exc}", file=sys.stderr)
        code = EXIT_FAIL
    else:
        traj = run(config)
        u_p = FluidField(state.u_k[-1], g, g.t_end)
        dist = l1_distance(u_p, traj.final_u)
        tol = 10.0 * (g.dx ** 2 + traj.dt_max)
        last = state.contraction_ratios[-1] if state.contraction_ratios else 0.0
        report.add(CheckRecord("picard_contraction", last, 1.0,
                               "||u_k - u_{k-1}|| / ||u_{k-1} - u_{k-2}|| < 1", last < 1.0,
                               {"iterations": state.k, "ratios": state.contraction_ratios}))
        report.add(CheckRecord("picard_vs_driver_l1", dist, tol,
                               "||u_picard(t_end) - u_run(t_end)||_L1 <= 10 (dx^2 + dt)", dist <= tol))
        report.add(check_mass(traj))
        try:
            for rec in weak_residual_record(traj):
                report.add(rec)
        except InvalidTestFunction as exc:
            report.add(skipped_residuals(str(exc)))
    for rec in vlasov_oracle_records(config):
        report.add(rec)
    files = [_write_text(out / "verify.json", report.to_json() + "\n")]
    write_manifest(out, "verify", config, files, started)
    _summarise(report)
    if code == EXIT_OK and not report.passed:
        code = EXIT_FAIL
    return code


def cmd_presets(args) -> int:
    if args.name:
        sys.stdout.write(preset(args.name).to_ini())
    else:
        for name in PRESETS:
            print(name)
    return EXIT_OK


def _summarise(report: DiagnosticsReport) -> None:
    for rec in report.records:
        if rec.skipped:
            print(f"SKIP {rec.name}: {rec.details.get('reason', '')}")
        else:
            print(f"{rec.verdict.upper():4s} {rec.name}: measured {rec.measured:.6g} (bound {rec.bound:.6g})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="burgers-vlasov",
                                     description="Vanishing-viscosity Burgers-Vlasov simulator")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario and write snapshots plus diagnostics")
    p.add_argument("config", help="INI config file or preset name")
    p.add_argument("--out", help="output directory (default output/<name>/run)")
    p.add_argument("--no-kinetic-csv", action="store_true", help="skip the t,x,v,f snapshot file")
    p.add_argument("--kinetic-stride", type=int, default=1, help="write every n-th kinetic snapshot")
    p.add_argument("--no-reference", action="store_true",
                   help="skip the half-resolution run that fits the continuity constant")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="epsilon convergence study")
    p.add_argument("config")
    p.add_argument("--eps", required=True, help="strictly decreasing list, e.g. 0.04,0.02,0.01")
    p.add_argument("--out")
    p.add_argument("--no-tandem", action="store_true", help="keep nx fixed instead of dx ~ sqrt(eps)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="cross-check against the Picard and free-transport oracles")
    p.add_argument("config")
    p.add_argument("--out")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=60)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("presets", help="list presets or print one as a config file")
    p.add_argument("name", nargs="?")
    p.set_defaults(func=cmd_presets)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "kinetic_stride", 1) < 1:
        print("error: --kinetic-stride must be at least 1", file=sys.stderr)
        return EXIT_ERROR
    try:
        return args.func(args)
    except BurgersVlasovError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
