"""Target linearity (ridge R^2), its Gram surrogate, and the bounds tying them together."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import AssumptionViolated, ConstantInput, DegenerateGram, NotHomogeneous, NotPositiveDefinite, ShapeMismatch
from ..linalg import as_matrix, cholesky_solve, eigh_desc
from ..nn import Network, backward, forward, loss_and_seed, output_gradients

JITTER = 1e-8


def _targets(Y, N: int) -> np.ndarray:
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    Y = as_matrix(Y, "Y")
    if Y.shape[0] != N:
        raise ShapeMismatch(f"Y has {Y.shape[0]} rows but H has {N} columns")
    return Y


def ridge_fit(H, Y, lam: float) -> np.ndarray:
    """Fitted values ``H^T (H H^T + lam I)^{-1} H Y`` via the d x d primal system.

    ``lam = 0`` adds a jitter of ``1e-8 * tr(H H^T) / d``.
    """
    H = as_matrix(H, "H")
    d, N = H.shape
    Y = _targets(Y, N)
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    A = H @ H.T
    reg = lam if lam > 0 else JITTER * max(np.trace(A) / d, np.finfo(float).tiny)
    A[np.diag_indices(d)] += reg
    try:
        coef = cholesky_solve(A, H @ Y)
    except NotPositiveDefinite as exc:
        raise DegenerateGram(str(exc)) from None
    return H.T @ coef


def target_linearity(H, Y, lam: float = 0.0) -> float:
    """Pooled ridge R^2 of regressing ``Y`` (N x C) on the columns of ``H`` (d x N)."""
    H = as_matrix(H, "H")
    Y = _targets(Y, H.shape[1])
    centered = Y - Y.mean(axis=0)
    if np.any(np.sum(centered**2, axis=0) == 0):
        raise ConstantInput("every target column must vary")
    resid = Y - ridge_fit(H, Y, lam)
    return float(1.0 - np.sum(resid**2) / np.sum(centered**2))


def target_linearity_columns(H, Y, lam: float = 0.0) -> np.ndarray:
    """Per-column R^2 (auxiliary to the pooled value)."""
    H = as_matrix(H, "H")
    Y = _targets(Y, H.shape[1])
    centered = Y - Y.mean(axis=0)
    resid = Y - ridge_fit(H, Y, lam)
    return 1.0 - np.sum(resid**2, axis=0) / np.sum(centered**2, axis=0)


def woodbury_error_check(H, Y, lam: float) -> float:
    """Relative gap between ``||Y - Y_hat||^2`` and ``lam^2 Y^T (lam I + H^T H)^{-2} Y``.

    The right side is built from the explicit N x N matrix.
    """
    H = as_matrix(H, "H")
    d, N = H.shape
    if lam <= 0:
        raise ValueError("woodbury_error_check needs lambda > 0")
    if N > 256:
        raise ShapeMismatch("woodbury_error_check builds N x N matrices; N must be <= 256")
    Y = _targets(Y, N)
    lhs = float(np.sum((Y - ridge_fit(H, Y, lam)) ** 2))
    K = H.T @ H
    K[np.diag_indices(N)] += lam
    Z = cholesky_solve(K, Y)
    rhs = float(lam**2 * np.sum(Z * Z))
    return abs(lhs - rhs) / max(abs(rhs), np.finfo(float).tiny)


def surrogate(G, Y) -> float:
    """``tr(Y^T G Y)`` for an explicit N x N Gram."""
    G = as_matrix(G, "G")
    Y = _targets(Y, G.shape[0])
    return float(np.sum(Y * (G @ Y)))


def surrogate_id(H, W, Y) -> float:
    """Surrogate of the linearised Gram ``H^T W^T W H`` without forming it: ``||W H Y||_F^2``."""
    H = as_matrix(H, "H")
    W = as_matrix(W, "W")
    Y = _targets(Y, H.shape[1])
    if W.shape[1] != H.shape[0]:
        raise ShapeMismatch(f"W {W.shape} cannot act on H {H.shape}")
    WHY = W @ (H @ Y)
    return float(np.sum(WHY * WHY))


@dataclass(frozen=True)
class Thm2Result:
    tl: float
    bound: float
    constant: float
    surrogate: float

    @property
    def holds(self) -> bool:
        return self.tl >= self.bound


def thm2_constant(Y, lam: float, c0: float, c1: float) -> float:
    """``||Y - mean||^-2 * ||Y||^4 * c0^2 * (2 lam + c1^2)^2 / (4 lam)``."""
    y = np.asarray(Y, dtype=np.float64).ravel()
    e0 = float(np.sum((y - y.mean()) ** 2))
    e1 = float(y @ y)
    return e1**2 * c0**2 * (2 * lam + c1**2) ** 2 / (4 * lam * e0)


def thm2_bound_check(H, Y, W, lam: float, c0: float, c1: float) -> Thm2Result:
    """Ridge TL of ``H`` against the lower bound ``1 - C / S(G_id)``.

    ``W`` is the weight matrix acting on ``H``; the surrogate uses
    ``G_id = H^T W^T W H``. Raises :class:`AssumptionViolated` unless
    ``||W||_op <= c0``, ``||H||_F <= c1``, ``N > d`` and ``lam > 0``.
    """
    H = as_matrix(H, "H")
    W = as_matrix(W, "W")
    d, N = H.shape
    y = _targets(Y, N)
    if y.shape[1] != 1:
        raise ShapeMismatch("thm2_bound_check takes a single target column")
    failed = []
    if not lam > 0:
        failed.append(f"lambda={lam} must be > 0")
    if N <= d:
        failed.append(f"N={N} must exceed d={d}")
    op = float(np.linalg.norm(W, 2))
    if op > c0:
        failed.append(f"||W||_op={op:.6g} exceeds c0={c0}")
    fro = float(np.linalg.norm(H))
    if fro > c1:
        failed.append(f"||H||_F={fro:.6g} exceeds c1={c1}")
    if failed:
        raise AssumptionViolated(failed)
    tl = target_linearity(H, y, lam)
    s = surrogate_id(H, W, y)
    C = thm2_constant(y, lam, c0, c1)
    bound = 1.0 - C / s if s > 0 else -np.inf
    return Thm2Result(tl, bound, C, s)


def kantorovich_check(G, Y, lam: float) -> tuple[float, float]:
    """``Y^T (lam I + G)^-2 Y`` against ``kappa ||Y||^4 / Y^T (lam I + G) Y``."""
    G = as_matrix(G, "G")
    N = G.shape[0]
    if N > 128:
        raise ShapeMismatch("kantorovich_check is limited to dim <= 128")
    if not lam > 0:
        raise ValueError("lambda must be > 0")
    y = _targets(Y, N).ravel()
    eig = eigh_desc(G)
    lmax, lmin = float(eig.eigenvalues[0]), float(max(eig.eigenvalues[-1], 0.0))
    A = G.copy()
    A[np.diag_indices(N)] += lam
    z = np.linalg.solve(A, y)
    lhs = float(z @ z)
    kappa = (2 * lam + lmax + lmin) ** 2 / (4 * (lam + lmin) ** 3)
    rhs = kappa * float(y @ y) ** 2 / float(y @ A @ y)
    return lhs, rhs


@dataclass(frozen=True)
class Thm3Result:
    actual: float
    predicted: float
    fy: float  # f^T y
    yKg: float  # y^T K g

    @property
    def relative_gap(self) -> float:
        return abs(self.actual - self.predicted) / max(abs(self.actual), np.finfo(float).tiny)


def euler_gap(net: Network, X, layer: int) -> float:
    """Max relative gap of ``h^T grad_h f = f`` over the batch (f = readout logit)."""
    trace = forward(net, X)
    G = output_gradients(net, trace, wrt="logits").dh[layer]
    f = trace.logits.ravel()
    lhs = np.sum(G * trace.hs[layer], axis=0)
    return float(np.max(np.abs(lhs - f)) / max(np.abs(f).max(), np.finfo(float).tiny))


def thm3_prediction(net: Network, X, y, gamma: float, loss: str = "mse", layer: int = 0, homogeneity_tol: float = 1e-6) -> Thm3Result:
    """Actual and predicted one-step change of the layer surrogate ``S(G_id)``.

    The actual value recomputes ``||W H y||^2`` after a plain GD step on
    ``W = W_layer``; the prediction is ``2 gamma (f^T y)(y^T K g)`` with
    ``K = H^T H``, ``f`` the readout logits and ``g = -dLoss/df``.
    """
    if net.dims[-1] != 1:
        raise ShapeMismatch("thm3_prediction needs a single real output")
    X = as_matrix(X, "X")
    if euler_gap(net, X, layer) > homogeneity_tol:
        raise NotHomogeneous("network output is not 1-homogeneous in the layer input")
    y = np.asarray(y, dtype=np.float64).ravel()
    trace = forward(net, X)
    _, dz = loss_and_seed(net, trace, loss, y[None, :])
    _, grads = backward(net, trace, loss, y[None, :])
    H = trace.hs[layer]
    W = net.layers[layer].W
    before = surrogate_id(H, W, y)
    after = surrogate_id(H, W - gamma * grads.dW[layer], y)
    f = trace.logits.ravel()
    g = -dz.ravel()
    fy = float(f @ y)
    yKg = float((H @ y) @ (H @ g))
    return Thm3Result(after - before, 2 * gamma * fy * yKg, fy, yKg)


@dataclass(frozen=True)
class MovingTargetDecomp:
    target_gap: float  # ||y - y_ols||
    fit_gap: float  # ||y_hat - y_ols||
    loss_gap: float  # ||y - y_hat||

    @property
    def triangle_ok(self) -> bool:
        return self.loss_gap <= self.target_gap + self.fit_gap + 1e-12 * max(1.0, self.loss_gap)


def ols_projection(H, y, eps: float) -> np.ndarray:
    """``H^T (H H^T + eps I)^{-1} H y`` using whichever of the d x d / N x N systems is smaller."""
    H = as_matrix(H, "H")
    d, N = H.shape
    Y = _targets(y, N)
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if d <= N:
        A = H @ H.T
        A[np.diag_indices(d)] += eps
        out = H.T @ cholesky_solve(A, H @ Y)
    else:
        K = H.T @ H
        A = K.copy()
        A[np.diag_indices(N)] += eps
        out = K @ cholesky_solve(A, Y)
    return out.reshape(np.shape(y)) if np.ndim(y) == 1 else out


def moving_target_decomp(H, y, y_hat, eps: float) -> MovingTargetDecomp:
    y = np.asarray(y, dtype=np.float64).ravel()
    y_hat = np.asarray(y_hat, dtype=np.float64).ravel()
    y_ols = ols_projection(H, y, eps)
    return MovingTargetDecomp(
        float(np.linalg.norm(y - y_ols)),
        float(np.linalg.norm(y_hat - y_ols)),
        float(np.linalg.norm(y - y_hat)),
    )


@dataclass(frozen=True)
class InterpolationGap:
    alphas: np.ndarray
    lhs: np.ndarray
    rhs: float

    @property
    def holds(self) -> bool:
        return bool(np.all(self.lhs <= self.rhs + 1e-10))


def ols_decoder(Z, X) -> np.ndarray:
    """Coefficients of ``g(z) = z^T (Z^T Z)^{-1} Z^T X`` (jittered if singular)."""
    Z = as_matrix(Z, "Z")
    X = as_matrix(X, "X")
    A = Z.T @ Z
    try:
        return cholesky_solve(A, Z.T @ X)
    except NotPositiveDefinite:
        A[np.diag_indices(A.shape[0])] += JITTER * max(np.trace(A) / A.shape[0], np.finfo(float).tiny)
        return cholesky_solve(A, Z.T @ X)


def ols_interpolation_gap(Z, X, alphas=(0.0, 0.25, 0.5, 0.75, 1.0)) -> InterpolationGap:
    """Mean pairwise error of the OLS decoder on interpolated latents vs its reconstruction error.

    ``Z`` is N x k, ``X`` is N x d. The pairwise term decodes every
    interpolated latent ``a z_i + (1 - a) z_j`` explicitly.
    """
    Z = as_matrix(Z, "Z")
    X = as_matrix(X, "X")
    if Z.shape[0] != X.shape[0]:
        raise ShapeMismatch("Z and X need the same number of rows")
    N = Z.shape[0]
    chunk = max(1, 4_000_000 // (N * max(X.shape[1], Z.shape[1])))
    coef = ols_decoder(Z, X)
    rhs = float(np.mean(np.linalg.norm(Z @ coef - X, axis=1)))
    alphas = np.asarray(alphas, dtype=np.float64)
    lhs = np.zeros_like(alphas)
    for a_idx, a in enumerate(alphas):
        total = 0.0
        for start in range(0, N, chunk):
            zi = Z[start:start + chunk]
            xi = X[start:start + chunk]
            zmix = a * zi[:, None, :] + (1 - a) * Z[None, :, :]
            xmix = a * xi[:, None, :] + (1 - a) * X[None, :, :]
            total += np.linalg.norm(zmix @ coef - xmix, axis=2).sum()
        lhs[a_idx] = total / N**2
    return InterpolationGap(alphas, lhs, rhs)
