"""Batch front-end.

    doublerev <command> --config run.ini [--out DIR] [--override section.key=value]...

Commands: solve, eigs, hardy, sweep-thin-annulus, sweep-multiplicity, certify.
The config grammar is documented in README.md. Exit status: 0 converged (or
certified), 2 not converged, 1 configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .analysis import multiplicity_sweep, perturbed_init, radial_init, symmetry_report
from .discretization import build_grid
from .eigen import angular_eigen, hardy_closed_form, hardy_constant, thin_annulus_sweep
from .geometry import (
    Decomposition,
    check_condition_A,
    constant_coefficient,
    henon_coefficient,
    make_annulus,
    make_ellipsoidal,
    make_torus,
    s_profile_coefficient,
    tabulated_coefficient,
)
from .radial import shoot_radial
from .solver import ProblemSpec, invariance_certify, mountain_pass, nonradiality

log = logging.getLogger("doublerev")

COMMANDS = ("solve", "eigs", "hardy", "sweep-thin-annulus", "sweep-multiplicity", "certify")
EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERGED = 0, 1, 2

DEFAULTS = {
    "run": {"seed": "0", "plot": "false"},
    "grid": {"n_theta": "64", "n_rho": "256"},
    "solver": {
        "solver_tol": "1e-8",
        "max_iter": "5000",
        "armijo": "1e-4",
        "backtrack": "0.5",
        "init": "auto",
        "delta": "0.2",
        "init_noise": "0",
        "symmetry": "auto",
    },
    "eigs": {"n_theta": "512"},
    "hardy": {"n_r": "2048"},
}


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"[{key}] {message}")
        self.key = key


@dataclass
class RunConfig:
    command: str
    parser: configparser.ConfigParser
    out: Path

    def get(self, section: str, key: str, conv=str, default=None):
        name = f"{section}.{key}"
        if not self.parser.has_option(section, key):
            if default is not None:
                return default
            raise ConfigError(name, "missing required key")
        raw = self.parser.get(section, key).strip()
        try:
            if conv is bool:
                return self.parser.getboolean(section, key)
            return conv(raw)
        except ValueError as exc:
            raise ConfigError(name, f"cannot parse {raw!r}: {exc}") from None

    def floats(self, section: str, key: str):
        raw = self.get(section, key)
        try:
            return [float(x) for x in raw.replace(";", ",").split(",") if x.strip()]
        except ValueError:
            raise ConfigError(f"{section}.{key}", f"expected comma-separated numbers, got {raw!r}") from None

    def resolved(self) -> dict:
        return {s: dict(self.parser.items(s)) for s in self.parser.sections()}


def load_config(path, command: str, out=None, overrides=()) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.read_dict(DEFAULTS)
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config", f"file not found: {path}")
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError("config", str(exc)) from None
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, option = key.strip().partition(".")
        if not sep or not dot or not option:
            raise ConfigError(item, "override must look like section.key=value")
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, option, value.strip())
    if command not in COMMANDS:
        raise ConfigError("command", f"unknown command {command!r}; choose from {', '.join(COMMANDS)}")
    if parser.has_option("run", "command") and parser.get("run", "command") != command:
        log.warning("config says command=%s; running %s", parser.get("run", "command"), command)
    if out is None:
        out = parser.get("run", "out", fallback=None) or "out"
    return RunConfig(command, parser, Path(out))


# -- builders -----------------------------------------------------------------


def build_decomp(cfg: RunConfig) -> Decomposition:
    m = cfg.get("domain", "m", int)
    n = cfg.get("domain", "n", int)
    if m < 1 or n < 1:
        raise ConfigError("domain.m", f"m and n must be at least 1, got m={m}, n={n}")
    return Decomposition(m, n)


def build_profile(cfg: RunConfig, decomp: Decomposition):
    kind = cfg.get("domain", "kind", default="annulus").lower()
    try:
        if kind == "annulus":
            return make_annulus(decomp, cfg.get("domain", "R1", float), cfg.get("domain", "R2", float))
        if kind in ("ellipsoid", "ellipsoidal"):
            return make_ellipsoidal(
                decomp,
                cfg.get("domain", "a", float),
                cfg.get("domain", "b", float),
                cfg.get("domain", "c", float),
                cfg.get("domain", "d", float),
            )
        if kind == "torus":
            return make_torus(decomp, cfg.get("domain", "a", float), cfg.get("domain", "b", float))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("domain", str(exc)) from None
    raise ConfigError("domain.kind", f"unknown domain kind {kind!r} (annulus, ellipsoidal, torus)")


def _read_table(path):
    """Tabulated a: CSV with columns s, t, value on a full tensor grid."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError("problem.table", f"file not found: {path}")
    data = np.genfromtxt(path, delimiter=",", names=True)
    try:
        s, t, v = data["s"], data["t"], data["value"]
    except ValueError:
        raise ConfigError("problem.table", "table needs columns s, t, value") from None
    s_nodes, t_nodes = np.unique(s), np.unique(t)
    if s_nodes.size * t_nodes.size != v.size:
        raise ConfigError("problem.table", "table is not a full tensor grid in (s, t)")
    table = np.empty((s_nodes.size, t_nodes.size))
    table[np.searchsorted(s_nodes, s), np.searchsorted(t_nodes, t)] = v
    return s_nodes, t_nodes, table


def build_coefficient(cfg: RunConfig, profile):
    kind = cfg.get("problem", "coefficient", default="const").lower()
    if kind == "const":
        coef = constant_coefficient(cfg.get("problem", "value", float, 1.0))
    elif kind in ("power", "henon"):
        coef = henon_coefficient(cfg.get("problem", "alpha", float), cfg.get("problem", "scale", float, 1.0))
    elif kind == "s-profile":
        beta = cfg.get("problem", "beta", float)
        if beta < 0:
            raise ConfigError("problem.beta", "s-profile h(s) = s^beta needs beta >= 0")
        coef = s_profile_coefficient(
            lambda s: np.asarray(s, dtype=float) ** beta,
            lambda s: beta * np.asarray(s, dtype=float) ** (beta - 1) if beta else np.zeros_like(s),
            name=f"s^{beta:g}",
        )
    elif kind == "tabulated":
        coef = tabulated_coefficient(*_read_table(cfg.get("problem", "table")))
    else:
        raise ConfigError("problem.coefficient", f"unknown coefficient {kind!r} (const, power, s-profile, tabulated)")
    try:
        return check_condition_A(coef, profile)
    except ValueError as exc:
        raise ConfigError("problem.coefficient", str(exc)) from None


def build_spec(cfg: RunConfig):
    decomp = build_decomp(cfg)
    profile = build_profile(cfg, decomp)
    coef = build_coefficient(cfg, profile)
    p = cfg.get("problem", "p", float)
    if not p > 2:
        raise ConfigError("problem.p", f"p must exceed 2, got {p}")
    return ProblemSpec(decomp, profile, coef, p)


def build_grid_from(cfg: RunConfig, spec: ProblemSpec, section="grid"):
    try:
        return build_grid(spec.decomp, spec.profile, cfg.get(section, "n_theta", int), cfg.get(section, "n_rho", int))
    except ValueError as exc:
        raise ConfigError(section, str(exc)) from None


def solver_options(cfg: RunConfig) -> dict:
    opts = {
        "solver_tol": cfg.get("solver", "solver_tol", float),
        "max_iter": cfg.get("solver", "max_iter", int),
        "armijo": cfg.get("solver", "armijo", float),
        "backtrack": cfg.get("solver", "backtrack", float),
        "symmetry": cfg.get("solver", "symmetry"),
    }
    if opts["symmetry"] not in ("auto", "radial", "none"):
        raise ConfigError("solver.symmetry", "must be auto, radial or none")
    if not 0 < opts["backtrack"] < 1:
        raise ConfigError("solver.backtrack", "must lie in (0, 1)")
    if opts["max_iter"] < 1:
        raise ConfigError("solver.max_iter", "must be positive")
    return opts


def _radial_solution(spec: ProblemSpec):
    if "R1" not in spec.profile.params or spec.coefficient.radial is None:
        return None
    R1, R2 = spec.profile.params["R1"], spec.profile.params["R2"]
    return shoot_radial(spec.decomp.N, R1, R2, spec.p, spec.coefficient.radial)


def build_init(cfg: RunConfig, spec: ProblemSpec, grid, radial):
    kind = cfg.get("solver", "init").lower()
    if kind == "auto":
        kind = "perturbed" if radial is not None else "bump"
    if kind in ("radial", "perturbed"):
        if radial is None:
            raise ConfigError("solver.init", f"init={kind} needs an annulus and a radial coefficient")
        init = radial_init(grid, radial) if kind == "radial" else perturbed_init(grid, radial, cfg.get("solver", "delta", float))
    elif kind == "bump":
        th = grid.theta[:, None] / grid.profile.theta_max
        init = grid.field((1.5 - 0.5 * th) * np.sin(np.pi * grid.rho[None, 1:-1]))
    elif kind == "file":
        init = io.read_field_csv(cfg.get("solver", "init_file"), grid)
    else:
        raise ConfigError("solver.init", f"unknown init {kind!r} (auto, radial, perturbed, bump, file)")
    noise = cfg.get("solver", "init_noise", float)
    if noise > 0:
        rng = np.random.default_rng(cfg.get("run", "seed", int))
        init = grid.field(init.values * (1.0 + noise * rng.standard_normal(grid.shape)))
    return init, kind


# -- commands -------------------------------------------------------------------


def _base_report(cfg: RunConfig) -> dict:
    return {"command": cfg.command, "config": cfg.resolved()}


def _plot(cfg: RunConfig) -> bool:
    return cfg.get("run", "plot", bool)


def _echo_gates(spec: ProblemSpec):
    g = spec.gates
    log.info(
        "gates: case=%s bound=%s within_proven_range=%s supercritical=%s condition_A=%s",
        g.case,
        g.bound,
        g.within_proven_range,
        g.supercritical,
        spec.coefficient.satisfies_A,
    )
    if g.outside_proven_range:
        log.warning("p=%g lies outside the proven existence range; running anyway", spec.p)


def cmd_solve(cfg: RunConfig) -> int:
    spec = build_spec(cfg)
    _echo_gates(spec)
    grid = build_grid_from(cfg, spec)
    opts = solver_options(cfg)
    report = _base_report(cfg)
    report["gates"] = spec.gates.as_dict()
    report["condition_A"] = spec.coefficient.satisfies_A
    report["tolerances"] = {**opts, "source": "config [solver] with package defaults"}
    report["grid"] = grid.describe()
    out = cfg.out
    radial = None
    try:
        radial = _radial_solution(spec)
    except Exception as exc:  # the radial oracle is optional for a solve
        log.warning("radial shooting failed: %s", exc)
        report["radial_error"] = str(exc)
    init, init_kind = build_init(cfg, spec, grid, radial)
    report["init"] = init_kind
    rep = mountain_pass(spec, grid, init, **opts)
    report["result"] = rep.scalars()
    report["symmetry_mode"] = rep.history.get("symmetry")
    io.write_field_csv(out / "solution.csv", rep.solution)
    io.write_grid_json(out / "grid.json", grid)
    hist = rep.history
    io.write_rows_csv(
        out / "history.csv",
        ("iteration", "energy", "el_residual"),
        zip(range(len(hist["energy"])), hist["energy"], hist["el_residual"]),
    )
    if radial is not None:
        io.write_radial_csv(out / "radial.csv", radial.r, radial.profile)
        ref = grid.sample_radial(radial)
        report["radial"] = {
            "shoot_param": radial.shoot_param,
            "sup_distance_to_solution": float(np.max(np.abs(ref.values - rep.solution.values))),
            "nonradiality_of_interpolant": nonradiality(ref),
        }
        try:
            report["symmetry"] = symmetry_report(spec, rep, radial).as_dict()
        except Exception as exc:
            report["symmetry_error"] = str(exc)
    if _plot(cfg):
        from . import plotting

        plotting.plot_field(out / "solution.png", rep.solution)
        plotting.plot_history(out / "history.png", hist)
        if radial is not None:
            plotting.plot_radial(out / "radial.png", radial.r, radial.profile)
    io.write_json(out / "run_report.json", report)
    log.info("solve: %s (el_residual %.3e, %d iterations)", rep.message, rep.el_residual, rep.iterations)
    return EXIT_OK if rep.converged else EXIT_NOT_CONVERGED


def cmd_certify(cfg: RunConfig) -> int:
    spec = build_spec(cfg)
    _echo_gates(spec)
    grid = build_grid_from(cfg, spec)
    path = cfg.get("certify", "field")
    try:
        u = io.read_field_csv(path, grid)
    except (OSError, ValueError) as exc:
        raise ConfigError("certify.field", str(exc)) from None
    tol = cfg.get("solver", "solver_tol", float)
    cert = invariance_certify(spec, grid, u)
    io.write_field_csv(cfg.out / "v.csv", cert.v)
    ok = cert.gap <= tol and cert.v_in_cone
    report = _base_report(cfg)
    report["gates"] = spec.gates.as_dict()
    report["result"] = {
        "invariance_gap": cert.gap,
        "v_in_cone": cert.v_in_cone,
        "v_max_theta_slope": cert.cone.max_theta_slope,
        "v_min_value": cert.cone.min_value,
        "certified": ok,
        "tolerance": tol,
    }
    io.write_json(cfg.out / "run_report.json", report)
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


def cmd_eigs(cfg: RunConfig) -> int:
    decomp = build_decomp(cfg)
    n_theta = cfg.get("eigs", "n_theta", int)
    eig = angular_eigen(decomp, n_theta)
    N = decomp.N
    closed = (decomp.m - decomp.n) / N - np.cos(2 * eig.theta)
    closed = closed / math.sqrt(eig.inner(closed, closed))
    report = _base_report(cfg)
    report["result"] = {
        "mu0": eig.mu0,
        "mu1": eig.mu1,
        "mu1_closed_form": 2.0 * N,
        "mu1_relative_error": abs(eig.mu1 - 2.0 * N) / (2.0 * N),
        "psi1_max_nodal_error": float(np.max(np.abs(eig.psi1 - closed))),
        "iterations": eig.iterations,
        "residual": eig.residual,
    }
    io.write_rows_csv(cfg.out / "psi1.csv", ("theta", "psi1", "closed_form"), zip(eig.theta, eig.psi1, closed))
    if _plot(cfg):
        from . import plotting

        plotting.plot_angular(cfg.out / "psi1.png", eig)
    io.write_json(cfg.out / "run_report.json", report)
    return EXIT_OK


def _hardy_N(cfg: RunConfig) -> int:
    if cfg.parser.has_option("hardy", "N"):
        return cfg.get("hardy", "N", int)
    return build_decomp(cfg).N


def cmd_hardy(cfg: RunConfig) -> int:
    N = _hardy_N(cfg)
    R1 = cfg.get("hardy", "R1", float, None) if cfg.parser.has_option("hardy", "R1") else cfg.get("domain", "R1", float)
    R2 = cfg.get("hardy", "R2", float, None) if cfg.parser.has_option("hardy", "R2") else cfg.get("domain", "R2", float)
    try:
        res = hardy_constant(N, R1, R2, cfg.get("hardy", "n_r", int))
    except ValueError as exc:
        raise ConfigError("hardy", str(exc)) from None
    exact = hardy_closed_form(N, R1, R2)
    report = _base_report(cfg)
    report["result"] = {
        "N": N,
        "R1": R1,
        "R2": R2,
        "lambda1": res.lambda1,
        "lambda1_closed_form": exact,
        "relative_error": abs(res.lambda1 - exact) / exact,
        "lower_bound_(N-2)^2/4": ((N - 2) / 2) ** 2,
        "iterations": res.iterations,
        "residual": res.residual,
    }
    io.write_rows_csv(cfg.out / "hardy_eigenfunction.csv", ("r", "w"), zip(res.r, res.eigenfunction))
    io.write_json(cfg.out / "run_report.json", report)
    return EXIT_OK


def cmd_sweep_thin(cfg: RunConfig) -> int:
    N = _hardy_N(cfg)
    R_list = cfg.floats("sweep", "R_list")
    offset = cfg.get("sweep", "gamma_offset", float, 1.0)
    ratio = cfg.get("sweep", "gamma_ratio", float, 1.0)
    if not R_list:
        raise ConfigError("sweep.R_list", "empty list")
    try:
        sweep = thin_annulus_sweep(N, R_list, lambda R: ratio * R + offset, cfg.get("hardy", "n_r", int))
    except ValueError as exc:
        raise ConfigError("sweep", str(exc)) from None
    rows = [(r.R, r.gammaR, r.lam, r.lambda_over_R2, r.deviation_from_pi2) for r in sweep.rows]
    io.write_rows_csv(cfg.out / "thin_annulus.csv", io.THIN_ANNULUS_COLUMNS, rows)
    if _plot(cfg):
        from . import plotting

        plotting.plot_thin_annulus(cfg.out / "thin_annulus.png", sweep.rows)
    report = _base_report(cfg)
    report["result"] = {
        "N": N,
        "gamma": f"{ratio:g}*R + {offset:g}",
        "deviation_decreasing": sweep.deviation_decreasing,
        "rows": [dict(zip(io.THIN_ANNULUS_COLUMNS, r)) for r in rows],
    }
    io.write_json(cfg.out / "run_report.json", report)
    return EXIT_OK


def cmd_sweep_multiplicity(cfg: RunConfig) -> int:
    N = cfg.get("sweep", "N", int) if cfg.parser.has_option("sweep", "N") else build_decomp(cfg).N
    R1, R2 = cfg.get("domain", "R1", float), cfg.get("domain", "R2", float)
    p = cfg.get("problem", "p", float)
    k = cfg.get("sweep", "k", int)
    if not 1 <= k <= N // 2:
        raise ConfigError("sweep.k", f"k must lie in 1..{N // 2} for N={N}")
    kind = cfg.get("problem", "coefficient", default="const").lower()
    if kind == "const":
        a = constant_coefficient(cfg.get("problem", "value", float, 1.0))
    elif kind in ("power", "henon"):
        a = henon_coefficient(cfg.get("problem", "alpha", float), cfg.get("problem", "scale", float, 1.0))
    else:
        raise ConfigError("problem.coefficient", "the multiplicity sweep needs a radial coefficient (const or power)")
    opts = solver_options(cfg)
    sweep = multiplicity_sweep(
        N,
        R1,
        R2,
        p,
        a,
        k,
        n_theta=cfg.get("grid", "n_theta", int),
        n_rho=cfg.get("grid", "n_rho", int),
        delta=cfg.get("solver", "delta", float),
        **opts,
    )
    io.write_rows_csv(cfg.out / "sweep.csv", io.SWEEP_COLUMNS, sweep.rows())
    for e in sweep.entries:
        if e.solve is not None:
            io.write_field_csv(cfg.out / f"solution_m{e.decomp.m}_n{e.decomp.n}.csv", e.solve.solution)
    report = _base_report(cfg)
    report["result"] = {
        "N": N,
        "p": p,
        "k": k,
        "window": list(sweep.window),
        "in_window": sweep.in_window,
        "entries": [
            {
                "m": e.decomp.m,
                "n": e.decomp.n,
                "error": e.error,
                "solve": e.solve.scalars() if e.solve else None,
                "symmetry": e.symmetry.as_dict() if e.symmetry else None,
            }
            for e in sweep.entries
        ],
        "distinct": {f"{i},{j}": flag for (i, j), flag in sorted(sweep.distinct.items())},
    }
    io.write_json(cfg.out / "run_report.json", report)
    ok = all(e.solve is not None and e.solve.converged for e in sweep.entries)
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


HANDLERS = {
    "solve": cmd_solve,
    "eigs": cmd_eigs,
    "hardy": cmd_hardy,
    "sweep-thin-annulus": cmd_sweep_thin,
    "sweep-multiplicity": cmd_sweep_multiplicity,
    "certify": cmd_certify,
}


def run(cfg: RunConfig) -> int:
    cfg.out.mkdir(parents=True, exist_ok=True)
    try:
        return HANDLERS[cfg.command](cfg)
    except ConfigError:
        raise
    except Exception as exc:
        # numerical failure: keep whatever was written and add a failure record
        log.exception("run failed")
        io.write_json(cfg.out / "failure.json", {"command": cfg.command, "error": f"{type(exc).__name__}: {exc}"})
        return EXIT_NOT_CONVERGED


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="doublerev", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="INI run configuration")
    ap.add_argument("--out", default=None, help="output directory (default: [run] out or ./out)")
    ap.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.command, args.out, args.override)
        return run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
