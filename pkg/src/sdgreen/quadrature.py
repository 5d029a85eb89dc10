"""Symmetric Gauss rules on triangles in barycentric form.

Weights are normalised to sum to one, so ``sum(w * f) * area`` integrates
``f`` over a triangle.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class TriangleRule:
    degree: int
    bary: np.ndarray  # (nq, 3)
    weights: np.ndarray  # (nq,)

    @property
    def n_points(self) -> int:
        return self.weights.size


def _orbit3(a, w):
    b = 1.0 - 2.0 * a
    return [(b, a, a), (a, b, a), (a, a, b)], [w] * 3


def _orbit6(a, b, w):
    c = 1.0 - a - b
    pts = [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]
    return pts, [w] * 6


def _assemble(degree, centroid_w, orbits3=(), orbits6=()):
    pts, ws = [], []
    if centroid_w is not None:
        pts.append((1 / 3, 1 / 3, 1 / 3))
        ws.append(centroid_w)
    for a, w in orbits3:
        p, q = _orbit3(a, w)
        pts += p
        ws += q
    for a, b, w in orbits6:
        p, q = _orbit6(a, b, w)
        pts += p
        ws += q
    bary = np.array(pts)
    weights = np.array(ws)
    bary.setflags(write=False)
    weights.setflags(write=False)
    return TriangleRule(degree, bary, weights)


@lru_cache(maxsize=None)
def triangle_rule(degree: int = 5) -> TriangleRule:
    """Rule exact for polynomials up to ``degree`` (1, 2, 5 or 8)."""
    if degree == 1:
        return _assemble(1, 1.0)
    if degree == 2:
        return _assemble(2, None, [(1 / 6, 1 / 3)])
    if degree == 5:
        r15 = np.sqrt(15.0)
        return _assemble(5, 9 / 40, [
            ((6 - r15) / 21, (155 - r15) / 1200),
            ((6 + r15) / 21, (155 + r15) / 1200),
        ])
    if degree == 8:
        # Dunavant, 16 points
        return _assemble(8, 0.144315607677787, [
            (0.459292588292723, 0.095091634267285),
            (0.170569307751760, 0.103217370534718),
            (0.050547228317031, 0.032458497623198),
        ], [
            (0.263112829634638, 0.008394777409958, 0.027230314174435),
        ])
    raise ValueError(f"no triangle rule of degree {degree}")


def integrate(values: np.ndarray, area: np.ndarray, rule: TriangleRule) -> np.ndarray:
    """Per-triangle integrals from point values of shape (nt, nq)."""
    return area * (values @ rule.weights)
