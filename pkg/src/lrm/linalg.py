"""Dense linear-algebra kernels shared by every other module.

Matrices are plain two-dimensional ``float64`` numpy arrays in C (row-major)
order. :func:`as_matrix` is the single validation point.
"""

from __future__ import annotations

from dataclasses import dataclass
from os import PathLike

import numpy as np
import scipy.linalg

RANK_TOLERANCE = 1e-9
SYMMETRY_TOLERANCE = 1e-10


class LinAlgFailure(RuntimeError):
    """Raised when a factorization cannot be computed."""


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a finite 2-D float64 C-contiguous array."""
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and column")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return arr


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``w = u @ diag(sigma) @ v``.

    ``u`` is m x s with orthonormal columns, ``v`` is s x n with orthonormal
    rows, and ``sigma`` is non-ascending, with s = min(m, n).
    """

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray
    rank: int

    def truncated(self, k: int) -> "SvdResult":
        k = min(k, self.sigma.size)
        return SvdResult(self.u[:, :k], self.sigma[:k], self.v[:k], min(self.rank, k))


def numerical_rank(sigma: np.ndarray, tol: float = RANK_TOLERANCE) -> int:
    if sigma.size == 0 or sigma[0] <= 0.0:
        return 0
    return int(np.count_nonzero(sigma > tol * sigma[0]))


def svd(w, tol: float = RANK_TOLERANCE) -> SvdResult:
    w = as_matrix(w, "w")
    try:
        u, sigma, v = np.linalg.svd(w, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise LinAlgFailure(f"SVD did not converge for {w.shape} input: {exc}") from exc
    return SvdResult(u, sigma, v, numerical_rank(sigma, tol))


def rank(w, tol: float = RANK_TOLERANCE) -> int:
    return svd(w, tol).rank


def frobenius_norm(w) -> float:
    return float(np.sqrt(np.sum(np.square(as_matrix(w)))))


def trace(a) -> float:
    a = as_matrix(a, "a")
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"trace needs a square matrix, got {a.shape}")
    return float(np.trace(a))


def solve_spd(a, rhs) -> np.ndarray:
    """Solve ``a @ x = rhs`` for symmetric positive definite ``a`` (Cholesky)."""
    a = as_matrix(a, "a")
    rhs = np.asarray(rhs, dtype=np.float64)
    if a.shape[0] != a.shape[1] or rhs.shape[0] != a.shape[0]:
        raise ValueError(f"incompatible shapes {a.shape} and {rhs.shape}")
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise LinAlgFailure(f"matrix is not positive definite: {exc}") from exc
    return scipy.linalg.cho_solve(factor, rhs, check_finite=False)


def sym_eig(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric matrix.

    Returns
    -------
    eigenvalues : ndarray
        In non-ascending order.
    eigenvectors : ndarray
        Orthonormal columns; column ``i`` pairs with ``eigenvalues[i]``.
    """
    m = as_matrix(m, "m")
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"sym_eig needs a square matrix, got {m.shape}")
    if np.max(np.abs(m - m.T)) > SYMMETRY_TOLERANCE:
        raise ValueError("sym_eig input is not symmetric")
    vals, vecs = np.linalg.eigh(m)
    return vals[::-1].copy(), np.ascontiguousarray(vecs[:, ::-1])


def pinv(a, tol: float = RANK_TOLERANCE) -> np.ndarray:
    """Moore-Penrose pseudo-inverse using the shared rank tolerance."""
    res = svd(a, tol)
    k = res.rank
    if k == 0:
        return np.zeros((a.shape[1], a.shape[0]))
    return (res.v[:k].T / res.sigma[:k]) @ res.u[:, :k].T


# Matrix text format: "rows cols" header, then one space-separated row per line.

def format_matrix(a) -> str:
    a = as_matrix(a)
    lines = [f"{a.shape[0]} {a.shape[1]}"]
    lines.extend(" ".join(f"{x:.17g}" for x in row) for row in a)
    return "\n".join(lines) + "\n"


def parse_matrix(text: str, source: str = "<string>") -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{source}: empty matrix file")
    try:
        rows, cols = (int(tok) for tok in lines[0].split())
    except ValueError as exc:
        raise ValueError(f"{source}: line 1: expected 'rows cols' header") from exc
    if len(lines) - 1 != rows:
        raise ValueError(f"{source}: header declares {rows} rows, found {len(lines) - 1}")
    out = np.empty((rows, cols))
    for i, line in enumerate(lines[1:]):
        toks = line.split()
        if len(toks) != cols:
            raise ValueError(f"{source}: line {i + 2}: expected {cols} values, found {len(toks)}")
        try:
            out[i] = [float(t) for t in toks]
        except ValueError as exc:
            raise ValueError(f"{source}: line {i + 2}: {exc}") from exc
    return as_matrix(out, source)


def save_matrix(a, path: str | PathLike) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(format_matrix(a))


def load_matrix(path: str | PathLike) -> np.ndarray:
    with open(path, encoding="ascii") as fh:
        return parse_matrix(fh.read(), str(path))
