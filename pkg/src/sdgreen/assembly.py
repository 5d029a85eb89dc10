"""SDFEM bilinear form, load vector and P1 function utilities.

All entries of the discrete operator are polynomial on each triangle and
are integrated in closed form; only the load vector (arbitrary ``f``) uses
quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .config import ProblemConfig
from .mesh import REGION_CODE, ShishkinMesh, TriangleGeometry
from .quadrature import TriangleRule, triangle_rule

ScalarField = Callable[[np.ndarray, np.ndarray], np.ndarray]

_MASS_PATTERN = (np.ones((3, 3)) + np.eye(3)) / 12.0


@dataclass(eq=False)
class FemFunction:
    """Continuous piecewise-linear function given by its nodal values."""

    mesh: ShishkinMesh
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.mesh.n_nodes,):
            raise ValueError(f"expected {self.mesh.n_nodes} coefficients, got {self.coeffs.shape}")

    @classmethod
    def zeros(cls, mesh: ShishkinMesh) -> "FemFunction":
        return cls(mesh, np.zeros(mesh.n_nodes))

    @classmethod
    def from_interior(cls, mesh: ShishkinMesh, values: np.ndarray) -> "FemFunction":
        coeffs = np.zeros(mesh.n_nodes)
        coeffs[mesh.interior_nodes] = values
        return cls(mesh, coeffs)

    @property
    def interior(self) -> np.ndarray:
        return self.coeffs[self.mesh.interior_nodes]

    def in_vn(self) -> bool:
        return not np.any(self.coeffs[self.mesh.boundary_mask])

    def local(self) -> np.ndarray:
        """(nt, 3) vertex values per triangle."""
        return self.coeffs[self.mesh.triangles]

    def gradients(self) -> np.ndarray:
        """(nt, 2) constant gradient per triangle."""
        return np.einsum("ta,tad->td", self.local(), self.mesh.geometry.grads)

    def at_quadrature(self, rule: TriangleRule) -> np.ndarray:
        return self.local() @ rule.bary.T

    def __call__(self, x, y):
        return evaluate(self, x, y)

    def __add__(self, other: "FemFunction") -> "FemFunction":
        return FemFunction(self.mesh, self.coeffs + other.coeffs)

    def __sub__(self, other: "FemFunction") -> "FemFunction":
        return FemFunction(self.mesh, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "FemFunction":
        return FemFunction(self.mesh, scalar * self.coeffs)

    __rmul__ = __mul__


def delta_on_triangle(region, cfg: ProblemConfig):
    """Stabilisation parameter: C*/N on the coarse block, zero in the layers.

    ``region`` is a tag ("S", "X", ...) or an array of region codes.
    """
    if isinstance(region, str):
        return cfg.stab_constant / cfg.N if region == "S" else 0.0
    region = np.asarray(region)
    return np.where(region == REGION_CODE["S"], cfg.stab_constant / cfg.N, 0.0)


def triangle_deltas(mesh: ShishkinMesh, cfg: ProblemConfig) -> np.ndarray:
    return delta_on_triangle(mesh.triangle_region, cfg)


def element_matrices(geom: TriangleGeometry, delta: np.ndarray, cfg: ProblemConfig):
    """Galerkin and streamline-diffusion element matrices, shape (nt, 3, 3).

    Entry ``[t, a, b]`` is the contribution of trial function ``b`` tested
    with ``a`` on triangle ``t``.  The ``-eps * Laplace`` part of the
    stabilisation vanishes identically for P1 trial functions.
    """
    area = geom.area[:, None, None]
    g = geom.grads
    bvec = np.array([cfg.b1, cfg.b2])
    bg = g @ bvec  # (nt, 3)
    stiff = cfg.epsilon * area * np.einsum("tad,tbd->tab", g, g)
    conv = area / 3.0 * np.broadcast_to(bg[:, None, :], stiff.shape)
    mass = cfg.c * area * _MASS_PATTERN
    galerkin = stiff + conv + mass
    d = np.asarray(delta, dtype=float)[:, None, None]
    stab = d * area * (bg[:, :, None] * bg[:, None, :] + cfg.c / 3.0 * bg[:, :, None])
    return galerkin, stab


def local_matrices(vertices, cfg: ProblemConfig, delta: float = 0.0):
    """Element matrices of one triangle given as a (3, 2) vertex array."""
    geom = TriangleGeometry.from_vertices(np.asarray(vertices, dtype=float)[None])
    galerkin, stab = element_matrices(geom, np.array([delta]), cfg)
    return galerkin[0], stab[0]


@dataclass(eq=False)
class SdfemSystem:
    """Interior-node SDFEM matrix with ``A[i, j] = a_SD(phi_j, phi_i)``."""

    mesh: ShishkinMesh
    cfg: ProblemConfig
    matrix: sp.csr_matrix
    rhs: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def bandwidth(self) -> int:
        coo = self.matrix.tocoo()
        return int(np.max(np.abs(coo.row - coo.col)))

    @cached_property
    def factorization(self):
        from .solver import factorize

        return factorize(self)

    def norm_inf(self) -> float:
        return float(abs(self.matrix).sum(axis=1).max())

    def form(self, v: FemFunction, w: FemFunction) -> float:
        """a_SD(v, w) for v, w in V^N through the assembled matrix."""
        return float(w.interior @ (self.matrix @ v.interior))


def assemble_system(mesh: ShishkinMesh, cfg: ProblemConfig, stabilized: bool = True) -> SdfemSystem:
    galerkin, stab = element_matrices(mesh.geometry, triangle_deltas(mesh, cfg), cfg)
    local = galerkin + stab if stabilized else galerkin
    return SdfemSystem(mesh, cfg, _scatter(mesh, local))


def _scatter(mesh: ShishkinMesh, local: np.ndarray) -> sp.csr_matrix:
    num = mesh.interior_number[mesh.triangles]  # (nt, 3)
    rows = np.broadcast_to(num[:, :, None], local.shape).ravel()
    cols = np.broadcast_to(num[:, None, :], local.shape).ravel()
    vals = local.ravel()
    keep = (rows >= 0) & (cols >= 0)
    n = mesh.interior_nodes.size
    # coo -> csr sums duplicates in a fixed order
    mat = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n)).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def assemble_rhs(mesh: ShishkinMesh, cfg: ProblemConfig, f: ScalarField,
                 rule: TriangleRule | None = None) -> np.ndarray:
    """(f, phi_i) + sum_K delta_K (f, b . grad phi_i)_K over interior nodes."""
    rule = rule or triangle_rule(5)
    geom = mesh.geometry
    pts = geom.map_points(rule.bary)
    fq = np.broadcast_to(np.asarray(f(pts[..., 0], pts[..., 1]), dtype=float), pts.shape[:2])
    weighted = fq * rule.weights * geom.area[:, None]  # (nt, nq)
    galerkin = weighted @ rule.bary  # (nt, 3)
    bg = geom.grads @ np.array([cfg.b1, cfg.b2])
    stab = (triangle_deltas(mesh, cfg) * weighted.sum(axis=1))[:, None] * bg
    local = galerkin + stab
    out = np.zeros(mesh.n_nodes)
    np.add.at(out, mesh.triangles.ravel(), local.ravel())
    return out[mesh.interior_nodes]


def asd_p1(v: FemFunction, w: FemFunction, cfg: ProblemConfig) -> float:
    """a_SD(v, w) for arbitrary P1 functions (boundary values allowed), element by element."""
    mesh = v.mesh
    galerkin, stab = element_matrices(mesh.geometry, triangle_deltas(mesh, cfg), cfg)
    return float(np.einsum("ta,tab,tb->", w.local(), galerkin + stab, v.local()))


def evaluate(u: FemFunction, x, y):
    """Point values of a P1 function; the containing cell is found analytically."""
    mesh = u.mesh
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any((x < 0) | (x > 1) | (y < 0) | (y > 1)):
        raise ValueError("evaluation point outside the unit square")
    i, j = mesh.locate(x, y)
    xc, yc = mesh.x_coords, mesh.y_coords
    s = (x - xc[i]) / (xc[i + 1] - xc[i])
    t = (y - yc[j]) / (yc[j + 1] - yc[j])
    c = u.coeffs
    u00 = c[mesh.node_index(i, j)]
    u10 = c[mesh.node_index(i + 1, j)]
    u01 = c[mesh.node_index(i, j + 1)]
    u11 = c[mesh.node_index(i + 1, j + 1)]
    lower = u00 + s * (u10 - u00) + t * (u01 - u00)
    upper = u11 + (1.0 - s) * (u01 - u11) + (1.0 - t) * (u10 - u11)
    out = np.where(s + t <= 1.0, lower, upper)
    return out if out.ndim else float(out)


def nodal_interpolant(f: ScalarField, mesh: ShishkinMesh) -> FemFunction:
    nodes = mesh.nodes
    values = np.broadcast_to(np.asarray(f(nodes[:, 0], nodes[:, 1]), dtype=float), (mesh.n_nodes,))
    return FemFunction(mesh, values.copy())


def sd_norm_squared_terms(u: FemFunction, cfg: ProblemConfig) -> dict:
    mesh = u.mesh
    area = mesh.geometry.area
    loc = u.local()
    grad = u.gradients()
    bg = grad @ np.array([cfg.b1, cfg.b2])
    return {
        "h1": float(np.sum(area * np.sum(grad**2, axis=1))),
        "l2": float(np.sum(area / 12.0 * (np.sum(loc**2, axis=1) + np.sum(loc, axis=1) ** 2))),
        "streamline": float(np.sum(triangle_deltas(mesh, cfg) * area * bg**2)),
    }


def sd_norm(u: FemFunction, cfg: ProblemConfig, squared: bool = False) -> float:
    """eps |u|_1^2 + ||u||^2 + sum_K delta_K ||b . grad u||_K^2, exact for P1."""
    t = sd_norm_squared_terms(u, cfg)
    value = cfg.epsilon * t["h1"] + t["l2"] + t["streamline"]
    return value if squared else float(np.sqrt(value))


def l2_error(u: FemFunction, exact: ScalarField, rule: TriangleRule | None = None) -> float:
    rule = rule or triangle_rule(5)
    geom = u.mesh.geometry
    pts = geom.map_points(rule.bary)
    diff = exact(pts[..., 0], pts[..., 1]) - u.at_quadrature(rule)
    return float(np.sqrt(np.sum(geom.area * ((diff**2) @ rule.weights))))


def dump_matrix(system: SdfemSystem, path) -> None:
    """Coordinate text dump ``i j value`` (interior numbering)."""
    coo = system.matrix.tocoo()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {float(v)!r}\n")


__all__ = [
    "FemFunction", "SdfemSystem", "assemble_rhs", "assemble_system", "asd_p1",
    "delta_on_triangle", "dump_matrix", "element_matrices", "evaluate",
    "l2_error", "local_matrices", "nodal_interpolant", "sd_norm", "triangle_deltas",
]
