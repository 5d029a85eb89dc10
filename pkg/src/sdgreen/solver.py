"""Banded LU with row partial pivoting (LAPACK ``dgbtrf`` / ``dgbtrs``).

One factorisation serves both ``A x = r`` and ``A^T x = r``; the latter is
what the discrete Green's function needs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import lapack

RESIDUAL_TOL = 1e-10


class SingularMatrixError(np.linalg.LinAlgError):
    def __init__(self, pivot: int):
        super().__init__(f"exactly zero pivot U[{pivot}, {pivot}]: matrix is singular")
        self.pivot = pivot


class ResidualError(RuntimeError):
    pass


def _bandwidths(mat: sp.spmatrix) -> tuple[int, int]:
    coo = mat.tocoo()
    if coo.nnz == 0:
        return 0, 0
    d = coo.row - coo.col
    return int(max(d.max(), 0)), int(max(-d.min(), 0))


def to_lapack_band(mat, kl: int, ku: int) -> np.ndarray:
    """Pack into LAPACK general-band layout with ``kl`` extra rows of pivot fill."""
    coo = sp.coo_matrix(mat)
    n = coo.shape[1]
    ab = np.zeros((2 * kl + ku + 1, n), order="F")
    ab[kl + ku + coo.row - coo.col, coo.col] = coo.data
    return ab


@dataclass(frozen=True, eq=False)
class BandedFactorization:
    lu: np.ndarray
    ipiv: np.ndarray  # zero-based row interchanges, LAPACK order
    kl: int
    ku: int
    n: int
    matrix: sp.csr_matrix | None = None
    check_residual: bool = True

    def _solve(self, rhs, trans: int) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.n:
            raise ValueError(f"right-hand side has length {rhs.shape[0]}, expected {self.n}")
        b = rhs.reshape(self.n, -1)
        x, info = lapack.dgbtrs(self.lu, self.kl, self.ku, b, self.ipiv, trans=trans)
        if info != 0:
            raise ValueError(f"dgbtrs: illegal argument {-info}")
        x = x.reshape(rhs.shape)
        if self.check_residual and self.matrix is not None:
            op = self.matrix.T if trans else self.matrix
            res = op @ x - rhs
            rel = np.linalg.norm(res) / max(np.linalg.norm(rhs), np.finfo(float).tiny)
            if np.linalg.norm(rhs) > 0 and rel > RESIDUAL_TOL:
                raise ResidualError(f"relative residual {rel:.3e} exceeds {RESIDUAL_TOL:g}")
        return x

    def solve(self, rhs) -> np.ndarray:
        return self._solve(rhs, 0)

    def solve_transpose(self, rhs) -> np.ndarray:
        return self._solve(rhs, 1)

    def relative_residual(self, x, rhs, transpose: bool = False) -> float:
        op = self.matrix.T if transpose else self.matrix
        return float(np.linalg.norm(op @ x - rhs) / np.linalg.norm(rhs))

    def dense_factors(self):
        """Dense ``(P, L, U)`` with ``P @ A = L @ U``; meant for small instances."""
        n, kl, ku = self.n, self.kl, self.ku
        U = np.zeros((n, n))
        for j in range(n):
            lo = max(0, j - kl - ku)
            U[lo : j + 1, j] = self.lu[kl + ku + np.arange(lo, j + 1) - j, j]
        # LAPACK stores multipliers of step j unpermuted by later swaps
        M = np.zeros((n, n))
        for j in range(n):
            hi = min(n, j + kl + 1)
            M[j + 1 : hi, j] = self.lu[kl + ku + 1 : kl + ku + hi - j, j]
        perm = np.arange(n)
        L = np.eye(n)
        for j in range(n):
            p = self.ipiv[j]
            if p != j:
                perm[[j, p]] = perm[[p, j]]
                L[[j, p], :j] = L[[p, j], :j]
            L[j + 1 :, j] = M[j + 1 :, j]
        P = np.eye(n)[perm]
        return P, L, U


def factorize(system_or_matrix, check_residual: bool = True) -> BandedFactorization:
    mat = getattr(system_or_matrix, "matrix", system_or_matrix)
    mat = sp.csr_matrix(mat, dtype=float)
    n, m = mat.shape
    if n != m:
        raise ValueError(f"matrix must be square, got {mat.shape}")
    kl, ku = _bandwidths(mat)
    ab = to_lapack_band(mat, kl, ku)
    lu, ipiv, info = lapack.dgbtrf(ab, kl, ku)
    if info < 0:
        raise ValueError(f"dgbtrf: illegal argument {-info}")
    if info > 0:
        raise SingularMatrixError(info - 1)
    return BandedFactorization(lu, ipiv, kl, ku, n, mat, check_residual)


def solve(fact: BandedFactorization, rhs) -> np.ndarray:
    return fact.solve(rhs)


def solve_transpose(fact: BandedFactorization, rhs) -> np.ndarray:
    return fact.solve_transpose(rhs)
