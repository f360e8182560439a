"""Sparse symmetric storage and the small set of direct-solver kernels.

Everything here is deterministic: factorizations use a fixed fill-reducing
ordering (minimum degree on A + A^T) so repeated runs produce identical
results.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.linalg
from scipy.sparse.linalg import splu


class NotSpdError(ValueError):
    """Raised when a factorization meets a nonpositive pivot."""


class UnderconstrainedError(ValueError):
    """Raised when a saddle system is singular (floating subdomain underconstrained)."""


class SparseSym:
    """Symmetric sparse matrix storing each entry once, in its upper triangle.

    The mirrored lower triangle is materialized lazily for matvecs and
    submatrix extraction; symmetry is therefore exact by construction.
    """

    def __init__(self, upper: sp.csr_matrix):
        n, m = upper.shape
        if n != m:
            raise ValueError("matrix must be square")
        coo = upper.tocoo()
        if np.any(coo.row > coo.col):
            raise ValueError("upper-triangle storage contains lower entries")
        self.n = n
        self.upper = upper.tocsr()
        self.upper.sum_duplicates()
        self._full = None

    @classmethod
    def from_upper_triplets(cls, n, rows, cols, data) -> "SparseSym":
        """Build from COO triplets restricted to i <= j; duplicates are summed."""
        upper = sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()
        return cls(upper)

    @classmethod
    def from_dense(cls, dense) -> "SparseSym":
        dense = np.asarray(dense, dtype=float)
        if not np.array_equal(dense, dense.T):
            raise ValueError("dense input is not symmetric")
        return cls(sp.triu(sp.csr_matrix(dense), format="csr"))

    @property
    def shape(self):
        return (self.n, self.n)

    @property
    def nnz(self) -> int:
        return self.upper.nnz

    def diagonal(self) -> np.ndarray:
        return self.upper.diagonal()

    def tocsr(self) -> sp.csr_matrix:
        """Full (mirrored) CSR form."""
        if self._full is None:
            strict = sp.triu(self.upper, k=1)
            self._full = (self.upper + strict.T).tocsr()
        return self._full

    def tocsc(self) -> sp.csc_matrix:
        return self.tocsr().tocsc()

    def todense(self) -> np.ndarray:
        return self.tocsr().toarray()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.tocsr() @ x

    def restrict(self, idx: np.ndarray) -> "SparseSym":
        """Symmetric restriction to the (ascending) index set idx."""
        idx = np.asarray(idx)
        sub = self.tocsr()[idx][:, idx]
        return SparseSym(sp.triu(sub, format="csr"))

    def scaled(self, factor: float) -> "SparseSym":
        return SparseSym(self.upper * factor)


def _as_csc(matrix) -> sp.csc_matrix:
    if isinstance(matrix, SparseSym):
        return matrix.tocsc()
    if sp.issparse(matrix):
        return matrix.tocsc()
    return sp.csc_matrix(np.asarray(matrix, dtype=float))


class SpdFactorization:
    """Cholesky-like factorization of an SPD sparse matrix.

    Backed by SuperLU with symmetric mode and no off-diagonal pivoting; the
    column permutation is the fill-reducing ordering.
    """

    def __init__(self, lu, n: int):
        self._lu = lu
        self.n = n
        self.permutation = lu.perm_c

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return self._lu.solve(np.asarray(rhs, dtype=float))


def spd_factor(matrix) -> SpdFactorization:
    """Factor a symmetric positive definite sparse matrix for repeated solves."""
    A = _as_csc(matrix)
    n = A.shape[0]
    if n == 0:
        raise ValueError("cannot factor an empty matrix")
    try:
        lu = splu(
            A,
            permc_spec="MMD_AT_PLUS_A",
            diag_pivot_thresh=0.0,
            options=dict(SymmetricMode=True),
        )
    except RuntimeError as err:
        raise NotSpdError(f"matrix not SPD: {err}") from err
    pivots = lu.U.diagonal()
    bad = np.where(pivots <= 0.0)[0]
    if bad.size:
        k = int(bad[0])
        orig = int(lu.perm_r[k]) if k < len(lu.perm_r) else k
        raise NotSpdError(f"matrix not SPD: nonpositive pivot at index {orig}")
    return SpdFactorization(lu, n)


def spd_solve(fact: SpdFactorization, rhs: np.ndarray) -> np.ndarray:
    return fact.solve(rhs)


class SaddleFactorization:
    """LU factorization of the KKT block system [[A, C^T], [C, 0]].

    The constraint block is scaled by a diagonal-based factor before
    factoring so that pivot magnitudes stay balanced for high-contrast A.
    """

    def __init__(self, lu, n: int, m: int, scale: float):
        self._lu = lu
        self.n = n
        self.m = m
        self._scale = scale

    def solve(self, f: np.ndarray, g: np.ndarray):
        """Return (u, lam) with A u + C^T lam = f and C u = g."""
        f = np.asarray(f, dtype=float)
        g = np.asarray(g, dtype=float)
        if f.shape[0] != self.n or g.shape[0] != self.m:
            raise ValueError("right-hand side dimensions do not match factorization")
        if self.m == 0:
            u = self._lu.solve(f)
            lam = np.zeros((0,) + f.shape[1:])
            return u, lam
        rhs = np.concatenate([f, self._scale * g], axis=0)
        sol = self._lu.solve(rhs)
        u = sol[: self.n]
        lam = self._scale * sol[self.n :]
        return u, lam


def saddle_factor(A, C) -> SaddleFactorization:
    """Factor the symmetric indefinite system [[A, C^T], [C, 0]].

    A must be symmetric positive semidefinite and the constraints must remove
    its kernel; otherwise the factorization is reported as underconstrained.
    """
    A = _as_csc(A)
    n = A.shape[0]
    C = sp.csr_matrix(C) if C is not None else sp.csr_matrix((0, n))
    m = C.shape[0]
    if C.shape[1] != n:
        raise ValueError("constraint matrix column count does not match A")

    if m == 0:
        scale = 1.0
        K = A
    else:
        diag = np.abs(A.diagonal())
        scale = float(np.mean(diag)) or 1.0
        Cs = C * scale
        K = sp.bmat([[A, Cs.T], [Cs, None]], format="csc")
    try:
        lu = splu(K)
    except RuntimeError as err:
        raise UnderconstrainedError(
            f"saddle system singular, floating subdomain underconstrained: {err}"
        ) from err
    pivots = np.abs(lu.U.diagonal())
    if pivots.size and pivots.min() < 1e-13 * pivots.max():
        raise UnderconstrainedError(
            "saddle system numerically singular (floating subdomain underconstrained "
            "or rank-deficient constraints)"
        )
    return SaddleFactorization(lu, n, m, 1.0 / scale if m else 1.0)


def saddle_solve(fact: SaddleFactorization, f: np.ndarray, g: np.ndarray):
    return fact.solve(f, g)


def dense_sym_eig(matrix) -> np.ndarray:
    """Eigenvalues (ascending) of a dense symmetric matrix."""
    M = np.asarray(matrix, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    scale = np.abs(M).max() or 1.0
    if np.abs(M - M.T).max() > 1e-12 * scale:
        raise ValueError("matrix is not symmetric")
    return np.linalg.eigvalsh(0.5 * (M + M.T))


def tridiag_eig(alphas, betas):
    """Extreme eigenvalues (min, max) of a symmetric tridiagonal matrix."""
    d = np.asarray(alphas, dtype=float)
    e = np.asarray(betas, dtype=float)
    if d.size == 0:
        raise ValueError("empty tridiagonal matrix")
    if e.size != d.size - 1:
        raise ValueError("off-diagonal length must be len(diagonal) - 1")
    if d.size == 1:
        return float(d[0]), float(d[0])
    vals = scipy.linalg.eigvalsh_tridiagonal(d, e)
    return float(vals[0]), float(vals[-1])
