"""Dense float64 kernels shared by the rest of the package.

Matrices are plain 2-D ``np.float64`` arrays. Nothing here broadcasts: a
shape mismatch raises :class:`ShapeMismatch`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    ConstantInput,
    DegenerateInput,
    NonFiniteValue,
    NotPositiveDefinite,
    NotSymmetric,
    ShapeMismatch,
)
from .rng import SplitMix64

MAX_JACOBI_DIM = 512


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeMismatch(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFiniteValue(f"{name} has non-finite entries")
    return m


def as_vector(a, name: str = "vector") -> np.ndarray:
    v = np.asarray(a, dtype=np.float64)
    if v.ndim != 1:
        raise ShapeMismatch(f"{name} must be 1-D, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NonFiniteValue(f"{name} has non-finite entries")
    return v


def _check_symmetric(a: np.ndarray, rtol: float = 1e-10) -> None:
    if a.shape[0] != a.shape[1]:
        raise ShapeMismatch(f"expected a square matrix, got {a.shape}")
    scale = max(np.abs(a).max(initial=0.0), np.finfo(float).tiny)
    if np.abs(a - a.T).max(initial=0.0) > rtol * scale:
        raise NotSymmetric("matrix is not symmetric")


def cholesky_solve(A, B) -> np.ndarray:
    """Solve ``A X = B`` for symmetric positive-definite ``A``."""
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    _check_symmetric(A)
    if B.shape[0] != A.shape[0]:
        raise ShapeMismatch(f"A is {A.shape} but B has {B.shape[0]} rows")
    try:
        factor = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    if np.any(np.diag(factor[0]) <= 0):
        raise NotPositiveDefinite("non-positive pivot")
    return scipy.linalg.cho_solve(factor, B, check_finite=False)


def polar_orthogonalize(M, steps: int = 15, tol: float = 1e-10, max_steps: int = 200) -> np.ndarray:
    """Orthogonal polar factor ``U V^T`` of ``M`` by cubic Newton-Schulz.

    Runs ``steps`` iterations of ``X <- 1.5 X - 0.5 X X^T X`` from
    ``X = M / ||M||_F``. Ill-conditioned inputs keep iterating until the update
    is below ``tol`` (at most ``max_steps``); small singular values only grow by
    a factor 1.5 per step, so a fixed count cannot certify orthogonality.
    """
    X = as_matrix(M, "M")
    norm = np.linalg.norm(X)
    if norm == 0.0:
        raise DegenerateInput("cannot orthogonalize a zero matrix")
    X = X / norm
    tall = X.shape[0] > X.shape[1]
    for k in range(max_steps):
        if tall:
            X_next = X @ (1.5 * np.eye(X.shape[1]) - 0.5 * (X.T @ X))
        else:
            X_next = (1.5 * np.eye(X.shape[0]) - 0.5 * (X @ X.T)) @ X
        delta = np.linalg.norm(X_next - X)
        X = X_next
        if k + 1 >= steps and delta <= tol:
            break
    return X


@dataclass(frozen=True)
class EigenDecomp:
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # orthonormal columns

    def reconstruct(self) -> np.ndarray:
        Q = self.eigenvectors
        return (Q * self.eigenvalues) @ Q.T


def jacobi_eigen_sym(A, tol: float = 1e-14, max_sweeps: int = 60) -> EigenDecomp:
    """Cyclic Jacobi eigensolver for small symmetric matrices."""
    A = as_matrix(A, "A")
    _check_symmetric(A)
    n = A.shape[0]
    if n > MAX_JACOBI_DIM:
        raise ShapeMismatch(f"jacobi_eigen_sym is capped at dim {MAX_JACOBI_DIM}, got {n}")
    a = 0.5 * (A + A.T)
    V = np.eye(n)
    total = np.linalg.norm(a)
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0))
        if off <= tol * max(total, np.finfo(float).tiny):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(apq) < 1e-150 * max(abs(diff), 1.0):
                    t = apq / diff  # tiny rotation; theta^2 would overflow
                else:
                    theta = diff / (2.0 * apq)
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return EigenDecomp(w[order], V[:, order])


def eigh_desc(A) -> EigenDecomp:
    """LAPACK-backed symmetric eigensolve, eigenvalues descending."""
    A = as_matrix(A, "A")
    _check_symmetric(A, rtol=1e-8)
    w, V = np.linalg.eigh(0.5 * (A + A.T))
    return EigenDecomp(w[::-1].copy(), V[:, ::-1].copy())


def operator_norm(A, max_iter: int = 200, rtol: float = 1e-10, seed: int = 0) -> float:
    """Largest singular value by power iteration on ``A^T A``."""
    A = as_matrix(A, "A")
    if not np.any(A):
        return 0.0
    v = SplitMix64(seed).normal(A.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = A.T @ (A @ v)
        lam_next = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if lam > 0 and abs(lam_next - lam) <= rtol * lam_next:
            lam = lam_next
            break
        lam = lam_next
    return float(np.sqrt(max(lam, 0.0)))


def pearson(x, y) -> float:
    x = as_vector(x, "x")
    y = as_vector(y, "y")
    if x.shape != y.shape:
        raise ShapeMismatch(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    if x.shape[0] < 2:
        raise ShapeMismatch("pearson needs at least two points")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = np.sqrt(xc @ xc)
    sy = np.sqrt(yc @ yc)
    if sx == 0.0 or sy == 0.0:
        raise ConstantInput("pearson is undefined for a constant input")
    return float(np.clip((xc @ yc) / (sx * sy), -1.0, 1.0))


@dataclass(frozen=True)
class PCAResult:
    scores: np.ndarray  # N x k'
    components: np.ndarray  # d x k'
    variances: np.ndarray  # k', non-increasing
    mean: np.ndarray
    rank_deficient: bool


def pca_project(X, k: int, rtol: float = 1e-12) -> PCAResult:
    """Project rows of ``X`` (N x d) onto the top-``k`` principal directions.

    If fewer than ``k`` eigenvalues are nonzero, only those components are
    returned and ``rank_deficient`` is set.
    """
    X = as_matrix(X, "X")
    N, d = X.shape
    if N < 2:
        raise ShapeMismatch("pca_project needs N >= 2")
    if not 1 <= k <= min(N, d):
        raise ShapeMismatch(f"k={k} must lie in [1, min(N, d)={min(N, d)}]")
    mean = X.mean(axis=0)
    Xc = X - mean
    if d <= MAX_JACOBI_DIM:
        eig = eigh_desc(Xc.T @ Xc / (N - 1))
        w, V = eig.eigenvalues[:k], eig.eigenvectors[:, :k]
    else:
        _, s, Vt = np.linalg.svd(Xc, full_matrices=False)
        w, V = s[:k] ** 2 / (N - 1), Vt[:k].T
    w = np.maximum(w, 0.0)
    keep = w > rtol * max(w[0], np.finfo(float).tiny)
    deficient = bool(keep.sum() < k)
    V = V[:, keep]
    return PCAResult(Xc @ V, V, w[keep], mean, deficient)
