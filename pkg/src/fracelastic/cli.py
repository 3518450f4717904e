"""Command-line front end.

Each command reads one JSON config (``--config``), lets flags override it,
writes CSV tables plus a JSON sidecar into ``--out`` and exits with

* 0 on success,
* 2 when the config or inputs are invalid,
* 3 when a numerical procedure cannot certify its result.

Errors are reported on stderr as a single JSON object.  The sidecar holds
the effective config (plus a ``results`` block that is ignored on input),
so it can be fed back with ``--config``.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import io
from .compare import fit_power_law, static_convergence_study
from .dispersion import (
    DispersionLaw,
    LatticeKernel,
    LatticeSpec,
    eval_lattice_dispersion,
    eval_target_dispersion,
    synthesize_kernel,
    tail_exponent,
)
from .errors import ConvergenceError, NumericalDiagnostic, StabilityError, ValidationError
from .green import (
    ContinuumParams,
    QuadratureConfig,
    farfield_coefficients,
    farfield_series,
    green_radial_results,
    nearfield_gradient,
)
from .lattice import (
    ExternalForce,
    LatticeState,
    integrate,
    interaction_force,
    omega_max,
    solve_static,
    total_energy,
)

COMMANDS = ("dispersion", "simulate", "static", "green", "asymptote", "compare")
# keys that never change numerical output and so stay out of the config hash
_UNHASHED = ("out", "threads", "results")


def _require(cfg: dict, key: str, where: str = "config"):
    if key not in cfg:
        raise ValidationError(f"{where} is missing required key {key!r}")
    return cfg[key]


def _mapping(cfg: dict, key: str) -> dict:
    value = _require(cfg, key)
    if not isinstance(value, dict):
        raise ValidationError(f"{key!r} must be an object")
    return value


def _grid(spec, default: dict) -> np.ndarray:
    """Grid from ``{"values": [...]}`` or ``{"min", "max", "count", "spacing": "log"|"linear"}``."""
    spec = default if spec is None else spec
    if isinstance(spec, list):
        spec = {"values": spec}
    if "values" in spec:
        values = np.asarray(spec["values"], dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValidationError("grid values must be a non-empty list")
        return values
    lo, hi, count = float(spec["min"]), float(spec["max"]), int(spec["count"])
    if count < 1 or not hi >= lo:
        raise ValidationError("grid needs count >= 1 and max >= min")
    if spec.get("spacing", "log") == "log":
        if not lo > 0:
            raise ValidationError("log grid needs min > 0")
        return np.geomspace(lo, hi, count)
    return np.linspace(lo, hi, count)


def _kernel(cfg: dict, spacing: float, tol: float | None) -> tuple[LatticeKernel, DispersionLaw | None]:
    law = DispersionLaw.from_dict(cfg["law"]) if "law" in cfg else None
    if "kernel" in cfg:
        kernel_cfg = cfg["kernel"]
        if "nearest_neighbor" in kernel_cfg:
            return LatticeKernel.nearest_neighbor(float(kernel_cfg["nearest_neighbor"]), spacing), law
        return LatticeKernel(_require(kernel_cfg, "coefficients", "kernel"), spacing), law
    if law is None:
        raise ValidationError("config needs either 'kernel' or 'law'")
    kw = {"max_error_band": float(cfg.get("max_error_band", 0.5))}
    if tol is not None:
        kw["tol"] = tol
    return synthesize_kernel(law, spacing, int(cfg.get("n_max", 1000)), **kw), law


def _lattice(cfg: dict, tol: float | None) -> tuple[LatticeSpec, DispersionLaw | None]:
    lat = _mapping(cfg, "lattice")
    spacing = float(lat.get("spacing", 1.0))
    kernel, law = _kernel(lat, spacing, tol)
    spec = LatticeSpec(kernel, float(_require(lat, "mass", "lattice")), float(_require(lat, "coupling", "lattice")), int(_require(lat, "particle_count", "lattice")))
    return spec, law


def _force(cfg: dict | None, n: int) -> ExternalForce | None:
    if cfg is None:
        return None
    if "values" in cfg:
        force = ExternalForce(cfg["values"])
        if force.values.size != n:
            raise ValidationError(f"force has {force.values.size} entries, lattice has {n}")
        return force
    points = _require(cfg, "point", "force")
    values = {}
    for site, value in points:
        if not 0 <= int(site) < n:
            raise ValidationError(f"force site {site} outside the chain")
        values[int(site)] = values.get(int(site), 0.0) + float(value)
    return ExternalForce.point(n, values)


def _continuum(cfg: dict) -> ContinuumParams:
    return ContinuumParams.from_dict(_mapping(cfg, "params"))


def _quadrature(cfg: dict) -> QuadratureConfig:
    q = dict(cfg.get("quadrature", {}))
    if cfg.get("tol") is not None:
        q["rel_tol"] = float(cfg["tol"])
    try:
        return QuadratureConfig(**q)
    except TypeError as exc:
        raise ValidationError(f"bad quadrature settings: {exc}") from exc


class _Outputs:
    """Tracks written files so a failed run leaves nothing behind."""

    def __init__(self, out: Path, config: dict):
        self.out = out
        self.config = config
        self.paths: list[Path] = []

    def path(self, name: str) -> Path:
        p = self.out / name
        self.paths.append(p)
        return p

    def csv(self, name: str, columns: dict) -> Path:
        return io.write_columns(self.path(name), columns, self.config)

    def discard(self) -> None:
        for p in self.paths:
            p.unlink(missing_ok=True)


# --- commands -----------------------------------------------------------------


def cmd_dispersion(cfg: dict, out: _Outputs) -> dict:
    spacing = float(cfg.get("spacing", 1.0))
    law = DispersionLaw.from_dict(_mapping(cfg, "law"))
    kernel, _ = _kernel(cfg, spacing, cfg.get("tol"))
    theta = _grid(cfg.get("theta"), {"min": 0.01, "max": 0.5, "count": 64})
    k = theta / spacing
    target = -np.asarray(eval_target_dispersion(law, theta))
    lattice = np.asarray(eval_lattice_dispersion(kernel, k))
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(target != 0, np.abs(lattice - target) / np.abs(target), np.abs(lattice - target))
    out.csv("dispersion.csv", {"k": k, "target": target, "lattice": lattice, "rel_err": rel})
    out.csv("kernel.csv", {"n": np.arange(1, kernel.n_max + 1), "K": kernel.coefficients})
    results = {"max_rel_err": float(rel.max()), "error_band": kernel.error_band, "n_max": kernel.n_max}
    if kernel.n_max >= 1000:
        results["tail_exponent"] = tail_exponent(kernel)
    return results


def cmd_simulate(cfg: dict, out: _Outputs) -> dict:
    spec, _ = _lattice(cfg, None)
    n = spec.particle_count
    boundary = cfg.get("boundary", "periodic")
    w = omega_max(spec, boundary)
    if "dt" in cfg:
        dt = float(cfg["dt"])
    else:
        dt = float(cfg.get("dt_factor", 0.1)) / w
    steps = int(_require(cfg, "steps"))
    every = int(cfg.get("record_every", 1))
    if steps < 0 or every < 1:
        raise ValidationError("steps must be >= 0 and record_every >= 1")
    init = cfg.get("initial", {"mode": 1, "amplitude": 1.0})
    if "displacements" in init:
        state = LatticeState(init["displacements"], init.get("velocities", np.zeros(len(init["displacements"]))))
    else:
        sites = np.arange(n)
        state = LatticeState.at_rest(float(init.get("amplitude", 1.0)) * np.cos(2 * np.pi * int(init.get("mode", 1)) * sites / n))
    if state.displacements.size != n:
        raise ValidationError(f"initial state has {state.displacements.size} sites, lattice has {n}")
    force = _force(cfg.get("force"), n)
    fmt = cfg.get("format", "csv")
    if fmt not in ("csv", "binary"):
        raise ValidationError(f"format must be 'csv' or 'binary', got {fmt!r}")
    if dt * w >= 2.0:
        raise StabilityError(f"dt*omega_max = {dt * w:.4g} >= 2; velocity Verlet is unstable")
    interaction_force(spec, state.displacements, boundary)  # validates the kernel against the boundary

    if fmt == "csv":
        writer = io.TrajectoryCsvWriter(out.path("trajectory.csv"), out.config)
    else:
        writer = io.TrajectoryBinaryWriter(out.path("trajectory.bin"))
    times, energies = [state.time], [total_energy(spec, state, boundary)]
    with writer:
        writer.write(state.time, state.displacements, state.velocities)
        frames = 1
        for i, current in enumerate(integrate(spec, state, force, dt, steps, boundary), start=1):
            if i % every == 0:
                writer.write(current.time, current.displacements, current.velocities)
                times.append(current.time)
                energies.append(total_energy(spec, current, boundary))
                frames += 1
    out.csv("energy.csv", {"t": np.array(times), "E": np.array(energies)})
    e0 = energies[0]
    drift = max(abs(e - e0) for e in energies) / abs(e0) if e0 else max(abs(e) for e in energies)
    return {"dt": dt, "omega_max": w, "frames": frames, "particle_count": n, "energy_drift": drift}


def cmd_static(cfg: dict, out: _Outputs) -> dict:
    spec, _ = _lattice(cfg, None)
    boundary = cfg.get("boundary", "periodic")
    force = _force(_mapping(cfg, "force"), spec.particle_count)
    kwargs = {"boundary": boundary}
    if "pin" in cfg:
        kwargs["pin"] = None if cfg["pin"] is None else int(cfg["pin"])
    if cfg.get("tol") is not None:
        kwargs["rtol"] = float(cfg["tol"])
    u = solve_static(spec, force, **kwargs)
    residual = interaction_force(spec, u, boundary) + force.values
    io.write_static(out.path("static.csv"), u, spec.spacing, out.config)
    return {"residual_norm": float(np.linalg.norm(residual)), "particle_count": spec.particle_count}


def _green_rows(params, r, qcfg, threads):
    chunks = np.array_split(r, max(1, min(threads, r.size)))
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        parts = list(pool.map(lambda c: _green_chunk(params, c, qcfg), chunks))
    values = np.concatenate([p[0] for p in parts])
    rems = np.concatenate([p[1] for p in parts])
    failed = [x for p in parts for x in p[2]]
    if failed:
        err = ConvergenceError(f"Green integral not converged at {len(failed)} radii", where=failed)
        raise err
    return values, rems


def _green_chunk(params, r, qcfg):
    try:
        res = green_radial_results(params, r, qcfg)
        return np.array([x.value for x in res]), np.array([x.remainder for x in res]), []
    except ConvergenceError:
        values, rems, failed = np.full(r.size, np.nan), np.full(r.size, np.nan), []
        for i, ri in enumerate(r):
            try:
                (res,) = green_radial_results(params, float(ri), qcfg)
                values[i], rems[i] = res.value, res.remainder
            except ConvergenceError:
                failed.append(float(ri))
        return values, rems, failed


def cmd_green(cfg: dict, out: _Outputs) -> dict:
    params = _continuum(cfg)
    qcfg = _quadrature(cfg)
    r = _grid(cfg.get("r"), {"min": 0.1, "max": 10.0, "count": 25})
    factor = params.force_magnitude / params.density
    if factor == 0:
        u, rem = np.zeros(r.size), np.zeros(r.size)
    else:
        g, grem = _green_rows(params, r, qcfg, cfg["threads"])
        u, rem = factor * g, abs(factor) * grem
    out.csv("green.csv", {"r": r, "u": u, "remainder_estimate": rem})
    return {"max_remainder": float(rem.max()), "points": int(r.size)}


def cmd_asymptote(cfg: dict, out: _Outputs) -> dict:
    params = _continuum(cfg)
    qcfg = _quadrature(cfg)
    orders = params.orders
    branch = cfg.get("branch")
    if branch is None:
        branch = "far" if orders.min() < 2 else "near"
    if branch == "far":
        r = _grid(cfg.get("r"), {"min": 1e2, "max": 1e4, "count": 9})
        k_max = int(cfg.get("k_max", 0))
        convention = cfg.get("sign_convention", "alternating")
        coeffs, powers, flagged = farfield_coefficients(params, k_max, convention)
        asym = np.array([farfield_series(params, ri, k_max, sign_convention=convention).value for ri in r])
        expected = -powers[0]
        summary = {"leading_coefficient": coeffs[0], "flagged_terms": flagged, "k_max": k_max, "sign_convention": convention}
    elif branch == "near":
        r = _grid(cfg.get("r"), {"min": 1e-4, "max": 1e-2, "count": 9})
        variant = cfg.get("variant", "published")
        asym = np.asarray(nearfield_gradient(params, r, variant), dtype=float)
        alpha = float(orders[orders != 2.0][0]) if len(orders) == 2 else float("nan")
        expected = alpha - 3.0 if alpha < 3 else 0.0
        summary = {"variant": variant}
    else:
        raise ValidationError(f"branch must be 'far' or 'near', got {branch!r}")
    g, _ = _green_rows(params, r, qcfg, cfg["threads"])
    u = params.force_magnitude / params.density * g
    rel = np.abs(u - asym) / np.abs(u)
    out.csv("asymptote.csv", {"r": r, "u_quad": u, "u_asym": asym, "rel_dev": rel})
    summary.update({"branch": branch, "expected_exponent": expected, "max_rel_dev": float(rel.max())})
    if r.size >= 3 and np.all(u > 0):
        fit = fit_power_law(r, u)
        summary.update({"fitted_exponent": fit.exponent, "prefactor": fit.prefactor, "r_squared": fit.r_squared})
    return summary


def cmd_compare(cfg: dict, out: _Outputs) -> dict:
    law = DispersionLaw.from_dict(_mapping(cfg, "law"))
    continuum = ContinuumParams.from_dict(_mapping(cfg, "continuum"))
    kwargs = {k: cfg[k] for k in ("length", "kernel_range", "margin", "tail_correction") if k in cfg}
    if "sources" in cfg:
        kwargs["sources"] = [tuple(s) for s in cfg["sources"]]
    kwargs["truncation_ranges"] = cfg.get("truncation_ranges", ())
    report = static_convergence_study(law, continuum, _require(cfg, "dx"), **kwargs)
    rows = report.rows
    out.csv(
        "convergence.csv",
        {
            "dx": np.array([r.dx for r in rows]),
            "N": np.array([r.n for r in rows]),
            "err_max": np.array([r.err_max for r in rows]),
            "err_l2": np.array([r.err_l2 for r in rows]),
            "order": np.array([r.order for r in rows]),
        },
    )
    if not report.monotone:
        print(json.dumps({"warning": "non-monotone error sequence", "err_max": report.errors.tolist()}), file=sys.stderr)
    return {
        "monotone": report.monotone,
        "kernel_sites": [r.n_max for r in rows],
        "truncation_rows": [vars(r) for r in report.truncation_rows],
        "metadata": report.metadata,
    }


_HANDLERS = {
    "dispersion": cmd_dispersion,
    "simulate": cmd_simulate,
    "static": cmd_static,
    "green": cmd_green,
    "asymptote": cmd_asymptote,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracelastic", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fracelastic {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=_HANDLERS[name].__name__.replace("cmd_", "") + " run")
        p.add_argument("--config", type=Path, help="JSON config file")
        p.add_argument("--out", type=Path, help="output directory (default: current directory)")
        p.add_argument("--threads", type=int, help="worker threads, 0 = auto")
        p.add_argument("--tol", type=float, help="numerical tolerance override")
    return parser


def _report(kind: str, exc: Exception, command: str) -> None:
    payload = {"status": "error", "kind": kind, "type": type(exc).__name__, "message": str(exc), "command": command}
    where = getattr(exc, "where", None)
    if where is not None:
        payload["where"] = where
        if command in ("green", "asymptote"):
            payload["failed_r"] = where if isinstance(where, list) else [where]
    print(json.dumps(io._jsonable(payload), sort_keys=True), file=sys.stderr)


def run(command: str, config: dict) -> tuple[dict, dict]:
    """Execute ``command`` with an effective config; returns ``(config, results)``."""
    out = _Outputs(Path(config["out"]), {k: v for k, v in config.items() if k not in _UNHASHED})
    out.out.mkdir(parents=True, exist_ok=True)
    try:
        results = _HANDLERS[command](config, out)
        sidecar = dict(config)
        sidecar["out"] = str(config["out"])
        sidecar["results"] = results
        sidecar["version"] = __version__
        io.write_json(out.path(f"{command}.json"), sidecar)
    except BaseException:
        out.discard()
        raise
    return config, results


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    command = args.command
    try:
        config = io.read_json(args.config) if args.config else {}
        config.pop("results", None)
        config.pop("version", None)
        if config.get("command", command) != command:
            raise ValidationError(f"config is for command {config['command']!r}, not {command!r}")
        config["command"] = command
        if args.out is not None:
            config["out"] = str(args.out)
        config.setdefault("out", ".")
        if args.tol is not None:
            config["tol"] = args.tol
        if args.threads is not None:
            config["threads"] = args.threads
        threads = int(config.get("threads", 0))
        if threads < 0:
            raise ValidationError("threads must be >= 0")
        config["threads"] = threads or (os.cpu_count() or 1)
        if config.get("tol") is not None and not float(config["tol"]) > 0:
            raise ValidationError("tol must be positive")
        run(command, config)
    except ValidationError as exc:
        _report("validation", exc, command)
        return 2
    except (KeyError, TypeError, ValueError) as exc:
        _report("validation", ValidationError(f"malformed config: {exc!r}"), command)
        return 2
    except NumericalDiagnostic as exc:
        _report("numerical", exc, command)
        return 3
    except OSError as exc:
        _report("io", exc, command)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
