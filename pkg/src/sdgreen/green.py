"""Discrete Green's function, the exponential weight and weighted norms.

The weight centred at a node ``x*`` is

    omega(p) = g(r_b) g(r_e) g(-r_e),   g(r) = 2 / (1 + e^r),

with ``r_b = (p - x*) . beta / sigma_b`` (streamline) and
``r_e = (p - x*) . eta / sigma_e`` (crosswind).  Everything is evaluated
through ``log(1/omega)``; the derivative ratios of ``1/g`` are logistic
functions, so nothing overflows before ``1/omega`` itself does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import expit

from .assembly import FemFunction, SdfemSystem, triangle_deltas
from .config import ProblemConfig
from .mesh import REGIONS, ShishkinMesh, classify_region
from .quadrature import TriangleRule, triangle_rule

_LOG2 = math.log(2.0)


@dataclass(frozen=True)
class Directions:
    b_mag: float
    beta: np.ndarray
    eta: np.ndarray

    @classmethod
    def from_config(cls, cfg: ProblemConfig) -> "Directions":
        b = math.hypot(cfg.b1, cfg.b2)
        return cls(b, np.array([cfg.b1, cfg.b2]) / b, np.array([-cfg.b2, cfg.b1]) / b)


@dataclass(frozen=True)
class WeightParams:
    x_star: tuple[float, float]
    sigma_beta: float
    sigma_eta: float
    k: float
    script_k: float
    N: int

    @classmethod
    def standard(cls, x_star, cfg: ProblemConfig, k: float | None = None) -> "WeightParams":
        """sigma_beta = k ln N / N and sigma_eta = k / sqrt(N)."""
        k = cfg.k if k is None else k
        N = cfg.N
        return cls((float(x_star[0]), float(x_star[1])),
                   k * math.log(N) / N, k / math.sqrt(N), k, cfg.script_k, N)

    @classmethod
    def flat(cls, x_star, cfg: ProblemConfig) -> "WeightParams":
        """The sigma -> infinity limit, in which omega == 1."""
        return cls((float(x_star[0]), float(x_star[1])), math.inf, math.inf, math.inf, cfg.script_k, cfg.N)

    @property
    def is_flat(self) -> bool:
        return math.isinf(self.sigma_beta) and math.isinf(self.sigma_eta)


@dataclass(frozen=True, eq=False)
class WeightValues:
    """Weight and derivatives at a set of points.

    ``omega_inv_b`` etc. are derivatives of ``1/omega`` along beta / eta.
    """

    log_omega_inv: np.ndarray
    omega: np.ndarray
    omega_b: np.ndarray
    omega_e: np.ndarray
    omega_bb: np.ndarray
    omega_ee: np.ndarray
    omega_be: np.ndarray
    omega_inv: np.ndarray
    omega_inv_b: np.ndarray
    omega_inv_e: np.ndarray
    omega_inv_bb: np.ndarray
    omega_inv_ee: np.ndarray
    omega_inv_be: np.ndarray

    def omega_inv_grad(self, dirs: Directions) -> np.ndarray:
        """Cartesian gradient of 1/omega, shape (..., 2)."""
        return self.omega_inv_b[..., None] * dirs.beta + self.omega_inv_e[..., None] * dirs.eta

    @property
    def omega_inv_laplacian(self) -> np.ndarray:
        return self.omega_inv_bb + self.omega_inv_ee


def _log_h(r):
    # log(1/g(r)) = log((1 + e^r) / 2)
    return np.logaddexp(0.0, r) - _LOG2


def weight(p, wp: WeightParams, dirs: Directions) -> WeightValues:
    p = np.asarray(p, dtype=float)
    d = p - np.asarray(wp.x_star)
    rb = (d @ dirs.beta) / wp.sigma_beta
    re = (d @ dirs.eta) / wp.sigma_eta
    log_inv = _log_h(rb) + _log_h(re) + _log_h(-re)
    inv = np.exp(log_inv)
    om = np.exp(-log_inv)
    sb = expit(rb)
    te = np.tanh(0.5 * re)  # expit(re) - expit(-re)
    see = expit(re) * expit(-re)
    # logarithmic derivatives of 1/omega
    qb, qe = sb / wp.sigma_beta, te / wp.sigma_eta
    qbb, qee, qbe = sb / wp.sigma_beta**2, (1.0 - 2.0 * see) / wp.sigma_eta**2, qb * qe
    return WeightValues(
        log_omega_inv=log_inv,
        omega=om,
        omega_b=-om * qb,
        omega_e=-om * qe,
        # omega_ij = omega (2 q_i q_j - q_ij), simplified to avoid cancellation
        omega_bb=om * qb * np.tanh(0.5 * rb) / wp.sigma_beta,
        omega_ee=om * (1.0 - 6.0 * see) / wp.sigma_eta**2,
        omega_be=om * qbe,
        omega_inv=inv,
        omega_inv_b=inv * qb,
        omega_inv_e=inv * qe,
        omega_inv_bb=inv * qbb,
        omega_inv_ee=inv * qee,
        omega_inv_be=inv * qbe,
    )


def g(r):
    return 2.0 / (1.0 + np.exp(r))


# -- Green's function ---------------------------------------------------------

NAMED_NODES = ("center-S", "mid-X", "mid-Y", "mid-XY")


def resolve_node(mesh: ShishkinMesh, selector) -> int:
    """Global node index from a named position, an ``"i,j"`` string, an (i, j) pair or an index."""
    N = mesh.N
    q = N // 4
    named = {
        "center-S": (q, q),
        "mid-X": (N // 2 + q, q),
        "mid-Y": (q, N // 2 + q),
        "mid-XY": (N // 2 + q, N // 2 + q),
    }
    if isinstance(selector, str):
        if selector in named:
            i, j = named[selector]
        elif "," in selector:
            i, j = (int(s) for s in selector.split(","))
        else:
            return resolve_node(mesh, int(selector))
    elif np.ndim(selector) == 1:
        i, j = (int(s) for s in selector)
    else:
        idx = int(selector)
        if not 0 <= idx < mesh.n_nodes:
            raise ValueError(f"node index {idx} out of range")
        return idx
    if not (0 <= i <= N and 0 <= j <= N):
        raise ValueError(f"node ({i}, {j}) outside the mesh")
    return int(mesh.node_index(i, j))


def node_region(mesh: ShishkinMesh, node: int) -> str:
    x, y = mesh.nodes[node]
    return classify_region(mesh, (x, y))


@dataclass(eq=False)
class GreenFunction:
    G: FemFunction
    node: int
    cfg: ProblemConfig

    @property
    def mesh(self) -> ShishkinMesh:
        return self.G.mesh

    @property
    def x_star(self) -> tuple[float, float]:
        x, y = self.mesh.nodes[self.node]
        return float(x), float(y)

    @property
    def region(self) -> str:
        return node_region(self.mesh, self.node)

    @cached_property
    def weight_params(self) -> WeightParams:
        return WeightParams.standard(self.x_star, self.cfg)

    def params_for(self, k: float) -> WeightParams:
        return WeightParams.standard(self.x_star, self.cfg, k)


def compute_green(system: SdfemSystem, node) -> GreenFunction:
    """Solve A^T g = e_{x*}, i.e. a_SD(v, G) = v(x*) for every v in V^N."""
    mesh = system.mesh
    node = resolve_node(mesh, node)
    if mesh.boundary_mask[node]:
        raise ValueError(f"x* = node {node} lies on the boundary")
    e = np.zeros(system.n)
    e[mesh.interior_number[node]] = 1.0
    g_hat = system.factorization.solve_transpose(e)
    return GreenFunction(FemFunction.from_interior(mesh, g_hat), node, system.cfg)


# -- weighted energy norm -------------------------------------------------------

WEIGHTED_TERMS = ("eps_beta", "eps_eta", "convective", "reaction", "streamline")


def weighted_norm_terms(G: FemFunction, wp: WeightParams, dirs: Directions, cfg: ProblemConfig,
                        rule: TriangleRule | None = None) -> dict[str, np.ndarray]:
    """Per-triangle integrals of the five terms of the squared weighted norm."""
    rule = rule or triangle_rule(5)
    mesh = G.mesh
    geom = mesh.geometry
    pts = geom.map_points(rule.bary)
    w = weight(pts, wp, dirs)
    grad = G.gradients()
    g_b = grad @ dirs.beta
    g_e = grad @ dirs.eta
    gq = G.at_quadrature(rule)
    area = geom.area

    def integral(vals):
        return area * (vals @ rule.weights)

    inv_int = integral(w.omega_inv)
    delta = triangle_deltas(mesh, cfg)
    return {
        "eps_beta": cfg.epsilon * g_b**2 * inv_int,
        "eps_eta": cfg.epsilon * g_e**2 * inv_int,
        "convective": 0.5 * dirs.b_mag * integral(w.omega_inv_b * gq**2),
        "reaction": cfg.c * integral(w.omega_inv * gq**2),
        "streamline": dirs.b_mag**2 * delta * g_b**2 * inv_int,
    }


def _mask(mesh: ShishkinMesh, domain) -> np.ndarray:
    if domain is None:
        return np.ones(mesh.n_triangles, dtype=bool)
    if isinstance(domain, str):
        return mesh.region_mask(domain)
    domain = np.asarray(domain)
    if domain.dtype == bool:
        return domain
    if domain.dtype.kind in "US":
        return mesh.region_mask(*domain.tolist())
    mask = np.zeros(mesh.n_triangles, dtype=bool)
    mask[domain] = True
    return mask


def weighted_norm(G: FemFunction, wp: WeightParams, dirs: Directions, cfg: ProblemConfig,
                  domain=None, rule: TriangleRule | None = None, squared: bool = False) -> float:
    """Weighted energy norm of ``G``, optionally restricted to a set of triangles.

    ``domain`` may be a region tag, a list of tags, a boolean triangle mask or
    triangle indices.
    """
    terms = weighted_norm_terms(G, wp, dirs, cfg, rule)
    mask = _mask(G.mesh, domain)
    total = float(sum(np.sum(t[mask]) for t in terms.values()))
    return total if squared else math.sqrt(total)


def region_norms(G: FemFunction, wp: WeightParams, dirs: Directions, cfg: ProblemConfig) -> dict[str, float]:
    terms = weighted_norm_terms(G, wp, dirs, cfg)
    per_tri = sum(terms.values())
    return {name: math.sqrt(float(np.sum(per_tri[G.mesh.region_mask(name)]))) for name in REGIONS}


# -- influence region ---------------------------------------------------------------

def _halfplanes(wp: WeightParams, dirs: Directions):
    """Omega_0 as three half-planes ``a . p <= c``."""
    log_n = math.log(wp.N)
    xs = np.asarray(wp.x_star)
    cb = wp.script_k * wp.sigma_beta * log_n
    ce = wp.script_k * wp.sigma_eta * log_n
    return [(dirs.beta, dirs.beta @ xs + cb), (dirs.eta, dirs.eta @ xs + ce), (-dirs.eta, -dirs.eta @ xs + ce)]


def omega0_membership(p, wp: WeightParams, dirs: Directions) -> np.ndarray | bool:
    p = np.asarray(p, dtype=float)
    inside = np.ones(p.shape[:-1], dtype=bool)
    for a, c in _halfplanes(wp, dirs):
        inside &= p @ a <= c
    return inside if inside.ndim else bool(inside)


def _clip(poly: list, a: np.ndarray, c: float) -> list:
    out = []
    n = len(poly)
    for idx in range(n):
        p, q = poly[idx], poly[(idx + 1) % n]
        fp, fq = p @ a - c, q @ a - c
        if fp <= 0:
            out.append(p)
        if (fp < 0 < fq) or (fq < 0 < fp):
            out.append(p + fp / (fp - fq) * (q - p))
    return out


def _polygon_area(poly: list) -> float:
    if len(poly) < 3:
        return 0.0
    pts = np.array(poly)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def omega0_prime(mesh: ShishkinMesh, wp: WeightParams, dirs: Directions, rel_tol: float = 1e-12):
    """Triangles meeting Omega_0 in a set of positive measure, and their total area."""
    planes = _halfplanes(wp, dirs)
    verts = mesh.geometry.vertices
    area = mesh.geometry.area
    vals = np.stack([verts @ a - c for a, c in planes])  # (3 planes, nt, 3 verts)
    inside = np.all(vals <= 0, axis=(0, 2))
    outside = np.any(np.all(vals >= 0, axis=2), axis=0)
    selected = inside.copy()
    for t in np.flatnonzero(~inside & ~outside):
        poly = list(verts[t])
        for a, c in planes:
            poly = _clip(poly, a, c)
            if not poly:
                break
        if _polygon_area(poly) > rel_tol * area[t]:
            selected[t] = True
    return np.flatnonzero(selected), float(np.sum(area[selected]))
