"""Piecewise-uniform Shishkin triangulation of the unit square.

Nodes are numbered row-major, ``index = j * (N + 1) + i``.  Cell ``(i, j)``
is split along the diagonal from ``(x_i, y_{j+1})`` to ``(x_{i+1}, y_j)``
into the lower-left triangle K1 and the upper-right triangle K2; they are
stored at positions ``2 * (j * N + i)`` and ``2 * (j * N + i) + 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .config import ConfigError, ProblemConfig

K1, K2 = 1, 2
REGIONS = ("S", "X", "Y", "XY")
REGION_CODE = {name: code for code, name in enumerate(REGIONS)}


def transition_parameters(cfg: ProblemConfig) -> tuple[float, float]:
    """Distances from the outflow sides x=1, y=1 where the mesh turns fine."""
    log_n = math.log(cfg.N)
    lam_x = min(0.5, cfg.rho * cfg.epsilon * log_n / cfg.b1)
    lam_y = min(0.5, cfg.rho * cfg.epsilon * log_n / cfg.b2)
    return lam_x, lam_y


def shishkin_coordinates(N: int, lam: float) -> np.ndarray:
    if N < 4 or N % 2:
        raise ConfigError(f"N must be an even integer >= 4, got {N!r}")
    if not 0.0 < lam <= 0.5:
        raise ConfigError(f"transition parameter must lie in (0, 1/2], got {lam!r}")
    half = N // 2
    i = np.arange(N + 1, dtype=float)
    coarse = 2.0 * i[: half + 1] * (1.0 - lam) / N
    coarse[half] = 1.0 - lam
    fine = 1.0 - 2.0 * (N - i[half + 1 :]) * lam / N
    return np.concatenate([coarse, fine])


@dataclass(frozen=True, eq=False)
class ShishkinMesh:
    N: int
    lambda_x: float
    lambda_y: float
    x_coords: np.ndarray
    y_coords: np.ndarray

    def __post_init__(self):
        self.x_coords.setflags(write=False)
        self.y_coords.setflags(write=False)

    @classmethod
    def from_transition(cls, N: int, lambda_x: float, lambda_y: float) -> "ShishkinMesh":
        return cls(N, lambda_x, lambda_y,
                   shishkin_coordinates(N, lambda_x), shishkin_coordinates(N, lambda_y))

    # -- sizes -------------------------------------------------------------
    @property
    def H_x(self) -> float:
        return (1.0 - self.lambda_x) / (self.N // 2)

    @property
    def h_x(self) -> float:
        return self.lambda_x / (self.N // 2)

    @property
    def H_y(self) -> float:
        return (1.0 - self.lambda_y) / (self.N // 2)

    @property
    def h_y(self) -> float:
        return self.lambda_y / (self.N // 2)

    # -- nodes -------------------------------------------------------------
    @property
    def n_nodes(self) -> int:
        return (self.N + 1) ** 2

    def node_index(self, i, j):
        return np.asarray(j) * (self.N + 1) + np.asarray(i)

    @cached_property
    def nodes(self) -> np.ndarray:
        """(n_nodes, 2) node coordinates."""
        X, Y = np.meshgrid(self.x_coords, self.y_coords, indexing="xy")
        out = np.column_stack([X.ravel(), Y.ravel()])
        out.setflags(write=False)
        return out

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        I, J = np.meshgrid(np.arange(self.N + 1), np.arange(self.N + 1), indexing="xy")
        mask = ((I == 0) | (I == self.N) | (J == 0) | (J == self.N)).ravel()
        mask.setflags(write=False)
        return mask

    @cached_property
    def interior_nodes(self) -> np.ndarray:
        """Global indices of interior nodes, in increasing order."""
        out = np.flatnonzero(~self.boundary_mask)
        out.setflags(write=False)
        return out

    @cached_property
    def interior_number(self) -> np.ndarray:
        """Map global node index -> interior unknown number (-1 on the boundary)."""
        out = np.full(self.n_nodes, -1, dtype=np.int64)
        out[self.interior_nodes] = np.arange(self.interior_nodes.size)
        out.setflags(write=False)
        return out

    # -- triangles ---------------------------------------------------------
    @cached_property
    def _triangle_data(self):
        N = self.N
        J, I = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
        I, J = I.ravel(), J.ravel()
        n00 = self.node_index(I, J)
        n10 = self.node_index(I + 1, J)
        n01 = self.node_index(I, J + 1)
        n11 = self.node_index(I + 1, J + 1)
        tris = np.empty((2 * N * N, 3), dtype=np.int64)
        tris[0::2] = np.column_stack([n00, n10, n01])
        tris[1::2] = np.column_stack([n01, n10, n11])
        kind = np.tile(np.array([K1, K2]), N * N)
        cells = np.repeat(np.column_stack([I, J]), 2, axis=0)
        in_x = cells[:, 0] >= N // 2
        in_y = cells[:, 1] >= N // 2
        region = np.where(in_x & in_y, REGION_CODE["XY"],
                          np.where(in_x, REGION_CODE["X"],
                                   np.where(in_y, REGION_CODE["Y"], REGION_CODE["S"])))
        for arr in (tris, kind, cells, region):
            arr.setflags(write=False)
        return tris, kind, cells, region

    @property
    def triangles(self) -> np.ndarray:
        """(2N^2, 3) vertex indices, ordered as in the module docstring."""
        return self._triangle_data[0]

    @property
    def triangle_kind(self) -> np.ndarray:
        return self._triangle_data[1]

    @property
    def triangle_cells(self) -> np.ndarray:
        return self._triangle_data[2]

    @property
    def triangle_region(self) -> np.ndarray:
        """Region code per triangle, indices into ``REGIONS``."""
        return self._triangle_data[3]

    @property
    def n_triangles(self) -> int:
        return 2 * self.N * self.N

    @cached_property
    def geometry(self) -> "TriangleGeometry":
        return TriangleGeometry.from_vertices(self.nodes[self.triangles])

    def region_mask(self, *names: str) -> np.ndarray:
        codes = [REGION_CODE[n] for n in names]
        return np.isin(self.triangle_region, codes)

    # -- queries -----------------------------------------------------------
    def locate(self, x, y):
        """Cell indices ``(i, j)`` containing the points; points on cell lines go to the upper cell
        except on x=1 / y=1."""
        return (_locate_1d(np.asarray(x, dtype=float), self.N, self.lambda_x),
                _locate_1d(np.asarray(y, dtype=float), self.N, self.lambda_y))

    def classify_point(self, x: float, y: float) -> str:
        return classify_region(self, (x, y))


def _locate_1d(t, N, lam):
    half = N // 2
    H = (1.0 - lam) / half
    h = lam / half
    coarse = np.floor(t / H)
    fine = half + np.floor((t - (1.0 - lam)) / h)
    idx = np.where(t < 1.0 - lam, np.minimum(coarse, half - 1), fine)
    return np.clip(idx, 0, N - 1).astype(np.int64)


@dataclass(frozen=True, eq=False)
class TriangleGeometry:
    """Per-triangle affine data: vertices (nt,3,2), area (nt,), P1 basis gradients (nt,3,2)."""

    vertices: np.ndarray
    area: np.ndarray
    grads: np.ndarray

    @classmethod
    def from_vertices(cls, verts: np.ndarray) -> "TriangleGeometry":
        verts = np.asarray(verts, dtype=float)
        p0, p1, p2 = verts[:, 0], verts[:, 1], verts[:, 2]
        det = (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1])
        if np.any(det == 0.0):
            raise ValueError("degenerate (zero-area) triangle")
        bx = np.column_stack([p1[:, 1] - p2[:, 1], p2[:, 1] - p0[:, 1], p0[:, 1] - p1[:, 1]])
        by = np.column_stack([p2[:, 0] - p1[:, 0], p0[:, 0] - p2[:, 0], p1[:, 0] - p0[:, 0]])
        grads = np.stack([bx, by], axis=-1) / det[:, None, None]
        return cls(verts, 0.5 * np.abs(det), grads)

    def map_points(self, bary: np.ndarray) -> np.ndarray:
        """Physical coordinates (nt, nq, 2) of barycentric points (nq, 3)."""
        return np.einsum("qa,tad->tqd", bary, self.vertices)


def build_mesh(cfg: ProblemConfig) -> ShishkinMesh:
    lam_x, lam_y = transition_parameters(cfg)
    return ShishkinMesh.from_transition(cfg.N, lam_x, lam_y)


def classify_region(mesh: ShishkinMesh, where) -> str:
    """Region tag of a point ``(x, y)`` or of a triangle index.

    Points on an interface between regions belong to both closed rectangles;
    they get the layer tag (X over S, XY over X and Y).
    """
    if np.ndim(where) == 0:
        return REGIONS[int(mesh.triangle_region[int(where)])]
    x, y = map(float, where)
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise ValueError(f"point {(x, y)} outside the unit square")
    in_x = x >= 1.0 - mesh.lambda_x
    in_y = y >= 1.0 - mesh.lambda_y
    if in_x and in_y:
        return "XY"
    if in_x:
        return "X"
    if in_y:
        return "Y"
    return "S"


def mesh_sizes(mesh: ShishkinMesh) -> tuple[float, float, float, float]:
    return mesh.H_x, mesh.h_x, mesh.H_y, mesh.h_y


def write_mesh(mesh: ShishkinMesh, path) -> None:
    """Plain-text export: header ``N lambda_x lambda_y``, node lines, triangle lines."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{mesh.N} {float(mesh.lambda_x)!r} {float(mesh.lambda_y)!r}\n")
        for idx, (x, y) in enumerate(mesh.nodes):
            fh.write(f"{idx} {float(x)!r} {float(y)!r}\n")
        for idx, (tri, kind, reg) in enumerate(zip(mesh.triangles, mesh.triangle_kind, mesh.triangle_region)):
            fh.write(f"{idx} {tri[0]} {tri[1]} {tri[2]} K{kind} {REGIONS[reg]}\n")


def read_mesh(path) -> ShishkinMesh:
    with open(path, encoding="utf-8") as fh:
        N, lam_x, lam_y = fh.readline().split()
    return ShishkinMesh.from_transition(int(N), float(lam_x), float(lam_y))
