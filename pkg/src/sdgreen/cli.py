"""Command-line front end: ``sdgreen {mesh-info,solve,green,check,sweep}``.

Exit codes: 0 success, 1 a check failed, 2 usage error.
Configuration precedence: command-line flags > ``--config`` file > defaults.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from .assembly import assemble_system, dump_matrix, l2_error, sd_norm
from .config import AssumptionWarning, ConfigError, ProblemConfig
from .diagnostics import (K_GRID, SEED, coercivity_check, green_identity_check, lemma1_check,
                          lemma2_check, lemma3_check, manufactured,
                          orthogonality_and_convergence_check, solve_problem, theorem_instance_check,
                          theorem_scaling)
from .expr import ExpressionError, parse
from .green import (Directions, compute_green, node_region, omega0_prime, region_norms,
                    resolve_node, weighted_norm)
from .mesh import REGIONS, build_mesh, write_mesh
from .sweep import SweepError, SweepSpec, run_sweep, summary_table, write_checks, write_outputs

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

_FLOAT_KEYS = {"eps": "epsilon", "b1": "b1", "b2": "b2", "c": "c", "cstar": "c_star", "k": "k",
               "big_k": "script_k", "rho": "rho"}


class UsageError(Exception):
    pass


def read_config_file(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment.  Keys are the long flag names."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value.split()
    return out


def _merged(args, name, cast, default, multi=False):
    value = getattr(args, name, None)
    if value is None and name in args.file_config:
        value = [cast(v) for v in args.file_config[name]]
    if value is None:
        return default
    if isinstance(value, list) and not multi:
        if len(value) != 1:
            raise UsageError(f"--{name.replace('_', '-')} takes a single value for this command")
        return value[0]
    return value


def build_config(args, N=None, eps=None) -> ProblemConfig:
    kw = {}
    for flag, field_name in _FLOAT_KEYS.items():
        value = eps if (flag == "eps" and eps is not None) else _merged(args, flag, float, None)
        if value is not None:
            kw[field_name] = value
    kw["N"] = N if N is not None else _merged(args, "n", int, 32)
    try:
        return ProblemConfig(**kw)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None


def _out_dir(args) -> Path:
    out = Path(_merged(args, "out", str, "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(line=""):
    print(line)


# -- commands -----------------------------------------------------------------------

def cmd_mesh_info(args) -> int:
    cfg = build_config(args)
    mesh = build_mesh(cfg)
    _emit(f"N = {cfg.N}, epsilon = {cfg.epsilon:g}, b = ({cfg.b1:g}, {cfg.b2:g}), rho = {cfg.rho:g}")
    _emit(f"lambda_x = {mesh.lambda_x!r}")
    _emit(f"lambda_y = {mesh.lambda_y!r}")
    _emit(f"H_x = {mesh.H_x!r}  h_x = {mesh.h_x!r}")
    _emit(f"H_y = {mesh.H_y!r}  h_y = {mesh.h_y!r}")
    counts = {r: int(np.sum(mesh.region_mask(r))) // 2 for r in REGIONS}
    _emit("cells per region: " + ", ".join(f"{r}={n}" for r, n in counts.items()))
    if args.dump is not None:
        path = Path(args.dump)
        if args.out is not None and not path.is_absolute():
            path = _out_dir(args) / path
        write_mesh(mesh, path)
        _emit(f"mesh written to {path}")
    if args.dump_matrix is not None:
        dump_matrix(assemble_system(mesh, cfg), args.dump_matrix)
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = build_config(args)
    mesh = build_mesh(cfg)
    exact = None
    if args.manufactured:
        exact, _, _, f = manufactured(cfg)
    else:
        try:
            f = parse(args.f)
        except ExpressionError as exc:
            raise UsageError(str(exc)) from None
    uh, residual = solve_problem(mesh, cfg, f)
    out = _out_dir(args)
    path = out / "solution.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "x", "y", "u"])
        for idx, (x, y) in enumerate(mesh.nodes):
            j, i = divmod(idx, cfg.N + 1)
            w.writerow([i, j, repr(float(x)), repr(float(y)), repr(float(uh.coeffs[idx]))])
    if args.grid:
        grid = uh.coeffs.reshape(cfg.N + 1, cfg.N + 1)
        np.savetxt(out / "solution_grid.tsv", grid, delimiter="\t", fmt="%.17g")
    _emit(f"solution written to {path}")
    _emit(f"relative residual = {residual:.3e}")
    _emit(f"|||u_N||| = {sd_norm(uh, cfg):.10g}")
    if exact is not None:
        _emit(f"L2 error = {l2_error(uh, exact):.6e}")
    return EXIT_OK


def _xstar(args, mesh):
    selector = _merged(args, "xstar", str, "center-S")
    try:
        node = resolve_node(mesh, selector)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if mesh.boundary_mask[node]:
        raise UsageError(f"x* selector {selector!r} is a boundary node")
    region = node_region(mesh, node)
    if region == "XY" and not args.allow_xy:
        raise UsageError("x* lies in the corner layer Omega_xy; pass --allow-xy to override")
    return selector, node


def cmd_green(args) -> int:
    cfg = build_config(args)
    mesh = build_mesh(cfg)
    selector, node = _xstar(args, mesh)
    system = assemble_system(mesh, cfg)
    green = compute_green(system, node)
    dirs = Directions.from_config(cfg)
    wp = green.weight_params
    ident = green_identity_check(system, green, seed=_merged(args, "seed", int, SEED))
    out = _out_dir(args)
    with open(out / "green.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "x", "y", "G"])
        for idx, (x, y) in enumerate(mesh.nodes):
            j, i = divmod(idx, cfg.N + 1)
            w.writerow([i, j, repr(float(x)), repr(float(y)), repr(float(green.G.coeffs[idx]))])
    _, measure = omega0_prime(mesh, wp, dirs)
    energy = sd_norm(green.G, cfg)
    wnorm = weighted_norm(green.G, wp, dirs, cfg)
    report = {
        "xstar": selector, "node": node, "x_star": list(green.x_star), "region": green.region,
        "energy_norm": energy, "weighted_norm": wnorm,
        "weighted_norm_by_region": region_norms(green.G, wp, dirs, cfg),
        "sigma_beta": wp.sigma_beta, "sigma_eta": wp.sigma_eta, "k": wp.k,
        "omega0_prime_measure": measure, "omega0_ratio": measure / (wp.sigma_eta * math.log(cfg.N)),
        "identity_max_error": ident.lhs, "identity_tolerance": ident.rhs, "identity_pass": ident.passed,
    }
    with open(out / "green.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
        fh.write("\n")
    _emit(f"x* = {green.x_star} (node {node}, region {green.region})")
    _emit(f"defining identity: max |a_SD(v,G) - v(x*)| = {ident.lhs:.3e} "
          f"({'ok' if ident.passed else 'FAILED'})")
    _emit(f"|||G||| = {energy:.10g}")
    _emit(f"|||G|||_omega = {wnorm:.10g}  (k = {wp.k:g})")
    for r, v in report["weighted_norm_by_region"].items():
        _emit(f"  |||G|||_omega,{r} = {v:.10g}")
    _emit(f"meas(Omega'_0) = {measure:.6g}, ratio to sigma_eta ln N = {report['omega0_ratio']:.4g}")
    return EXIT_OK if ident.passed else EXIT_FAIL


CHECKS = ("all", "coercivity", "lemma1", "lemma2", "lemma3", "theorem", "convergence")


def cmd_check(args) -> int:
    which = args.which
    Ns = _merged(args, "n", int, [32], multi=True)
    if which == "theorem" and len(Ns) < 3:
        raise UsageError("insufficient sweep: `check theorem` needs at least 3 values of --n")
    k_grid = _merged(args, "k_grid", float, list(K_GRID), multi=True)
    seed = _merged(args, "seed", int, SEED)
    reports = []
    norms = {}
    for N in Ns:
        cfg = build_config(args, N=N)
        mesh = build_mesh(cfg)
        system = assemble_system(mesh, cfg)
        if which in ("all", "coercivity"):
            reports.append(coercivity_check(system, seed=seed))
        if which in ("all", "lemma1", "lemma2", "lemma3", "theorem"):
            selector, node = _xstar(args, mesh)
            green = compute_green(system, node)
            if which == "all":
                reports.append(green_identity_check(system, green, seed=seed))
            if which in ("all", "lemma1"):
                reports.append(lemma1_check(green, k_grid))
            if which in ("all", "lemma2"):
                rep = lemma2_check(green)
                if rep is None:
                    _emit("lemma2: x* in Omega_xy, skipped")
                else:
                    reports.append(rep)
            if which in ("all", "lemma3"):
                reports.append(lemma3_check(green, k_grid))
            if which in ("all", "theorem"):
                rep = theorem_instance_check(green)
                reports.append(rep)
                norms[N] = rep.extra["weighted_norm"]
            for rep in reports:
                rep.params.setdefault("xstar", selector)
    if which in ("all", "theorem"):
        if len(norms) >= 3:
            baseline = 32 if 32 in norms else min(norms)
            reports.append(theorem_scaling(norms, baseline=baseline))
        elif which == "all":
            _emit("theorem scaling: skipped (fewer than 3 values of N)")
    if which in ("all", "convergence"):
        reports.append(orthogonality_and_convergence_check(build_config(args, N=Ns[0])))
    out = _out_dir(args)
    write_checks(reports, out / "checks.csv", out / "checks.json")
    failed = False
    for rep in reports:
        status = "n/a" if rep.passed is None else ("pass" if rep.passed else "FAIL")
        failed |= rep.passed is False
        extra = f" min_k={rep.extra['min_k']}" if "min_k" in rep.extra else ""
        _emit(f"{rep.name:<16} N={rep.params.get('N')} lhs={rep.lhs:.6g} rhs={rep.rhs:.6g} "
              f"ratio={rep.ratio:.6g}{extra} {status}")
    return EXIT_FAIL if failed else EXIT_OK


def cmd_sweep(args) -> int:
    xstars = _merged(args, "xstar", str, ["center-S", "mid-X", "mid-Y"], multi=True)
    if "mid-XY" in xstars and not args.allow_xy:
        raise UsageError("x* selector mid-XY lies in Omega_xy; pass --allow-xy to override")
    base = build_config(args, N=_merged(args, "n", int, [32], multi=True)[0])
    try:
        spec = SweepSpec(
            Ns=_merged(args, "n", int, [16, 32, 64, 128], multi=True),
            epsilons=_merged(args, "eps", float, [1e-4, 1e-6, 1e-8], multi=True),
            xstars=xstars,
            k_grid=_merged(args, "k_grid", float, list(K_GRID), multi=True),
            base=base.with_(warn=False),
            seed=_merged(args, "seed", int, SEED),
            allow_xy=args.allow_xy,
        )
    except SweepError as exc:
        raise UsageError(str(exc)) from None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AssumptionWarning)
        try:
            result = run_sweep(spec)
        except SweepError as exc:
            raise UsageError(str(exc)) from None
    paths = write_outputs(result, _out_dir(args))
    sys.stdout.write(summary_table(result))
    _emit(f"rows written to {paths['sweep']}")
    failed = any(c.passed is False for c in result.checks) or any(r["status"] != "ok" for r in result.rows)
    return EXIT_FAIL if failed else EXIT_OK


# -- parser -------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, multi: bool = False):
    nargs = "+" if multi else 1
    p.add_argument("--config", help="flat key=value configuration file")
    p.add_argument("--n", type=int, nargs=nargs, help="mesh parameter N (even, >= 4)")
    p.add_argument("--eps", type=float, nargs=nargs, help="diffusion coefficient")
    p.add_argument("--b1", type=float, nargs=1)
    p.add_argument("--b2", type=float, nargs=1)
    p.add_argument("--c", type=float, nargs=1)
    p.add_argument("--cstar", type=float, nargs=1, help="stabilisation constant C* (default 0.25/|b|^2)")
    p.add_argument("--k", type=float, nargs=1, help="weight scale constant k (default 4)")
    p.add_argument("--big-k", dest="big_k", type=float, nargs=1, help="influence-region constant (default 1)")
    p.add_argument("--rho", type=float, nargs=1, help="Shishkin constant rho (default 2.5)")
    p.add_argument("--out", type=str, nargs=1, help="output directory")
    p.add_argument("--seed", type=int, nargs=1)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sdgreen", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh-info", help="print Shishkin mesh parameters")
    _common(p)
    p.add_argument("--dump", nargs="?", const="mesh.txt", help="write the mesh in text format")
    p.add_argument("--dump-matrix", help="write the SDFEM matrix as 'i j value' lines")
    p.set_defaults(func=cmd_mesh_info)

    p = sub.add_parser("solve", help="solve the SDFEM problem for a given f")
    _common(p)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--f", default="1", help="right-hand side expression in x, y (default 1)")
    g.add_argument("--manufactured", action="store_true", help="use the manufactured solution")
    p.add_argument("--grid", action="store_true", help="also write the nodal values as a grid")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("green", help="compute the discrete Green's function")
    _common(p)
    p.add_argument("--xstar", nargs=1, help="center-S | mid-X | mid-Y | mid-XY | i,j | node index")
    p.add_argument("--allow-xy", action="store_true")
    p.set_defaults(func=cmd_green)

    p = sub.add_parser("check", help="run numerical checks")
    _common(p, multi=True)
    p.add_argument("which", nargs="?", default="all", choices=CHECKS)
    p.add_argument("--xstar", nargs=1)
    p.add_argument("--k-grid", dest="k_grid", type=float, nargs="+")
    p.add_argument("--allow-xy", action="store_true")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("sweep", help="full parameter sweep")
    _common(p, multi=True)
    p.add_argument("--xstar", nargs="+")
    p.add_argument("--k-grid", dest="k_grid", type=float, nargs="+")
    p.add_argument("--allow-xy", action="store_true")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        args.file_config = read_config_file(args.config) if args.config else {}
        return args.func(args)
    except UsageError as exc:
        print(f"sdgreen: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"sdgreen: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
