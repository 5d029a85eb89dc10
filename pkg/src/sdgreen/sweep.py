"""Parameter sweeps over (N, eps, x*) with deterministic CSV/JSON output."""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .assembly import assemble_system, sd_norm
from .config import ProblemConfig
from .diagnostics import (K_GRID, SEED, CheckReport, coercivity_check, green_identity_check,
                          lemma1_check, lemma2_check, lemma3_check, theorem_instance_check,
                          theorem_scaling)
from .green import Directions, compute_green, node_region, omega0_prime, region_norms, resolve_node
from .mesh import build_mesh

VERSION = f"sdgreen-{__version__}"

COLUMNS = [
    "version", "N", "epsilon", "b1", "b2", "c", "c_star", "k", "script_k", "rho", "seed",
    "xstar", "node", "x_star", "y_star", "region", "lambda_x", "lambda_y", "status", "error",
    "solve_residual", "coercivity_min_ratio", "coercivity_pass",
    "identity_max_error", "identity_ratio", "identity_pass",
    "energy_norm", "weighted_norm", "weighted_norm_S", "weighted_norm_X", "weighted_norm_Y",
    "weighted_norm_XY", "sqrt8_pass", "r_N",
    "lemma1_min_k", "lemma1_pass", "lemma1_ratio", "lemma3_min_k", "lemma3_pass", "lemma3_ratio",
    "lemma2_branch", "lemma2_C", "omega0_measure", "omega0_ratio",
]


class SweepError(ValueError):
    pass


@dataclass
class SweepSpec:
    Ns: Sequence[int] = (16, 32, 64, 128)
    epsilons: Sequence[float] = (1e-4, 1e-6, 1e-8)
    xstars: Sequence[str] = ("center-S", "mid-X", "mid-Y")
    k_grid: Sequence[float] = K_GRID
    base: ProblemConfig = field(default_factory=lambda: ProblemConfig(warn=False))
    seed: int = SEED
    coercivity_trials: int = 100
    identity_trials: int = 20
    allow_xy: bool = False
    scaling_baseline: int = 32
    scaling_threshold: float = 1.5

    def __post_init__(self):
        self.Ns = tuple(sorted(set(int(n) for n in self.Ns)))
        self.epsilons = tuple(sorted(set(float(e) for e in self.epsilons), reverse=True))
        self.xstars = tuple(dict.fromkeys(str(x) for x in self.xstars))
        for n in self.Ns:
            if n < 4 or n % 2:
                raise SweepError(f"all N must be even and >= 4, got {n}")


@dataclass
class SweepResult:
    rows: list[dict]
    checks: list[CheckReport]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _point_rows(spec: SweepSpec, N: int, eps: float):
    cfg = spec.base.with_(N=N, epsilon=eps, warn=False)
    base_row = {"version": VERSION, "N": N, "epsilon": eps, "b1": cfg.b1, "b2": cfg.b2, "c": cfg.c,
                "c_star": cfg.stab_constant, "k": cfg.k, "script_k": cfg.script_k, "rho": cfg.rho,
                "seed": spec.seed}
    rows, checks = [], []
    try:
        mesh = build_mesh(cfg)
        system = assemble_system(mesh, cfg)
        coer = coercivity_check(system, spec.coercivity_trials, spec.seed)
        checks.append(coer)
    except Exception as exc:  # recorded per row, sweep continues
        for xs in spec.xstars:
            rows.append({**base_row, "xstar": xs, "status": "error", "error": f"{type(exc).__name__}: {exc}"})
        return rows, checks
    base_row.update(lambda_x=mesh.lambda_x, lambda_y=mesh.lambda_y,
                    coercivity_min_ratio=coer.ratio, coercivity_pass=coer.passed)
    dirs = Directions.from_config(cfg)
    for xs in spec.xstars:
        row = {**base_row, "xstar": xs}
        try:
            node = resolve_node(mesh, xs)
            region = node_region(mesh, node)
            row.update(node=node, x_star=float(mesh.nodes[node, 0]), y_star=float(mesh.nodes[node, 1]),
                       region=region)
            if region == "XY" and not spec.allow_xy:
                raise SweepError("x* in the corner layer; pass allow_xy to include it")
            green = compute_green(system, node)
            e = np.zeros(system.n)
            e[mesh.interior_number[node]] = 1.0
            row["solve_residual"] = system.factorization.relative_residual(green.G.interior, e, transpose=True)
            ident = green_identity_check(system, green, spec.identity_trials, spec.seed)
            thm = theorem_instance_check(green)
            l1 = lemma1_check(green, spec.k_grid)
            l3 = lemma3_check(green, spec.k_grid)
            l2 = lemma2_check(green)
            wp = green.weight_params
            regions = region_norms(green.G, wp, dirs, cfg)
            _, measure = omega0_prime(mesh, wp, dirs)
            for c in (ident, thm, l1, l2, l3):
                if c is not None:
                    c.params["xstar"] = xs
                    checks.append(c)
            row.update(
                status="ok", identity_max_error=ident.lhs, identity_ratio=ident.ratio,
                identity_pass=ident.passed, energy_norm=sd_norm(green.G, cfg),
                weighted_norm=thm.extra["weighted_norm"],
                **{f"weighted_norm_{r}": v for r, v in regions.items()},
                sqrt8_pass=thm.passed,
                r_N=thm.extra["weighted_norm"] / math.sqrt(N * math.log(N)),
                lemma1_min_k=l1.extra["min_k"], lemma1_pass=l1.passed, lemma1_ratio=l1.ratio,
                lemma3_min_k=l3.extra["min_k"], lemma3_pass=l3.passed, lemma3_ratio=l3.ratio,
                lemma2_branch=l2.extra["branch"] if l2 else "excluded",
                lemma2_C=l2.ratio if l2 else None,
                omega0_measure=measure,
                omega0_ratio=measure / (wp.sigma_eta * math.log(N)),
            )
        except Exception as exc:
            row.update(status="error", error=f"{type(exc).__name__}: {exc}")
        rows.append(row)
    return rows, checks


def _workers() -> int:
    env = os.environ.get("SDFEM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise SweepError(f"SDFEM_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def run_sweep(spec: SweepSpec, workers: int | None = None) -> SweepResult:
    jobs = [(N, eps) for eps in spec.epsilons for N in spec.Ns]
    workers = workers or _workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda job: _point_rows(spec, *job), jobs))
    else:
        results = [_point_rows(spec, *job) for job in jobs]
    rows = [r for rs, _ in results for r in rs]
    checks = [c for _, cs in results for c in cs]
    order = {x: i for i, x in enumerate(spec.xstars)}
    rows.sort(key=lambda r: (-r["epsilon"], r["N"], order[r["xstar"]]))
    checks += scaling_checks(rows, spec)
    checks.sort(key=lambda c: _check_key(c, order))
    return SweepResult(rows, checks)


def _check_key(c: CheckReport, order):
    p = c.params
    N = p.get("N")
    return (-p.get("epsilon", 0.0), N if isinstance(N, int) else 0, c.name, p.get("node", -1),
            order.get(p.get("xstar"), -1))


def scaling_checks(rows: list[dict], spec: SweepSpec) -> list[CheckReport]:
    out = []
    for eps in spec.epsilons:
        for xs in spec.xstars:
            series = {r["N"]: r["weighted_norm"] for r in rows
                      if r["epsilon"] == eps and r["xstar"] == xs and r.get("status") == "ok"}
            try:
                rep = theorem_scaling(series, spec.scaling_baseline, spec.scaling_threshold)
            except ValueError:
                continue
            rep.params.update(epsilon=eps, xstar=xs)
            out.append(rep)
    return out


def write_outputs(result: SweepResult, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    (out / "plot").mkdir(parents=True, exist_ok=True)
    paths = {"sweep": out / "sweep.csv", "checks": out / "checks.csv", "json": out / "checks.json",
             "summary": out / "summary.txt"}
    with open(paths["sweep"], "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in result.rows:
            writer.writerow({k: _fmt(row.get(k)) for k in COLUMNS})
    write_checks(result.checks, paths["checks"], paths["json"])
    with open(paths["summary"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write(summary_table(result))
    for rep in (c for c in result.checks if c.name == "theorem_scaling"):
        eps, xs = rep.params["epsilon"], rep.params["xstar"]
        tag = f"eps={_fmt(eps)}__{xs}"
        series = [r for r in result.rows if r["epsilon"] == eps and r["xstar"] == xs and r["status"] == "ok"]
        for name, key in (("energy_norm", "energy_norm"), ("weighted_norm", "weighted_norm"), ("ratio", "r_N")):
            with open(out / "plot" / f"{name}__{tag}.tsv", "w", encoding="utf-8", newline="\n") as fh:
                fh.write(f"N\t{key}\n")
                for r in series:
                    fh.write(f"{r['N']}\t{_fmt(r[key])}\n")
    return paths


CHECK_COLUMNS = ["name", "N", "epsilon", "xstar", "node", "region", "k", "c_star", "lhs", "rhs",
                 "passed", "ratio", "min_k", "version"]


def write_checks(checks: list[CheckReport], csv_path, json_path=None) -> None:
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, CHECK_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for c in checks:
            p = c.params
            writer.writerow({
                "name": c.name, "N": _fmt(p.get("N")) if not isinstance(p.get("N"), list)
                else " ".join(map(str, p["N"])),
                "epsilon": _fmt(p.get("epsilon")), "xstar": _fmt(p.get("xstar")),
                "node": _fmt(p.get("node")), "region": _fmt(p.get("region")), "k": _fmt(p.get("k")),
                "c_star": _fmt(p.get("c_star")), "lhs": _fmt(c.lhs), "rhs": _fmt(c.rhs),
                "passed": "n/a" if c.passed is None else _fmt(c.passed), "ratio": _fmt(c.ratio),
                "min_k": _fmt(c.extra.get("min_k")), "version": VERSION,
            })
    if json_path is not None:
        with open(json_path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump([{**c.as_dict(), "version": VERSION} for c in checks], fh, indent=1,
                      sort_keys=True, default=_json_default)
            fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(type(obj).__name__)


def summary_table(result: SweepResult) -> str:
    lines = [f"{'epsilon':>10} {'xstar':>9} {'N':>5} {'|||G|||':>10} {'|||G|||_w':>10} {'r(N)':>8} "
             f"{'coer k':>6} {'intp k':>6} {'point C':>9}"]
    for r in result.rows:
        if r.get("status") != "ok":
            lines.append(f"{r['epsilon']:>10.1e} {r['xstar']:>9} {r['N']:>5}  ERROR {r.get('error', '')}")
            continue
        l2 = "-" if r["lemma2_C"] is None else f"{r['lemma2_C']:.3e}"
        lines.append(f"{r['epsilon']:>10.1e} {r['xstar']:>9} {r['N']:>5} {r['energy_norm']:>10.4f} "
                     f"{r['weighted_norm']:>10.4f} {r['r_N']:>8.4f} {_fmt(r['lemma1_min_k']):>6} "
                     f"{_fmt(r['lemma3_min_k']):>6} {l2:>9}")
    for c in result.checks:
        if c.name == "theorem_scaling":
            lines.append(f"scaling eps={c.params['epsilon']:.1e} x*={c.params['xstar']}: "
                         f"max r(N)/r({c.params['baseline']}) = {c.ratio:.4f} "
                         f"({'pass' if c.passed else 'FAIL'})")
    return "\n".join(lines) + "\n"
