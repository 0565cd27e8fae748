"""Neural-collapse geometry and its relation to the classification surrogate."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateLabels, ShapeMismatch
from ..linalg import as_matrix
from ..rng import SplitMix64


def one_hot_centered(labels, C: int) -> np.ndarray:
    """N x C one-hot rows shifted by ``-1/C`` so each row sums to zero."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1:
        raise ShapeMismatch("labels must be 1-D")
    if labels.size and (labels.min() < 0 or labels.max() >= C):
        raise ShapeMismatch(f"labels must lie in [0, {C})")
    Y = np.full((labels.size, C), -1.0 / C)
    Y[np.arange(labels.size), labels] += 1.0
    return Y


@dataclass(frozen=True)
class NCReport:
    nc1: float  # tr(Sigma_W) / tr(Sigma_B)
    etf_deviation: float  # max |cos(mu_a, mu_b) + 1/(C-1)|
    gram_distance: float  # ||G_id - Y Y^T||_F / ||Y Y^T||_F
    surrogate: float  # tr(Y^T G_id Y)
    surrogate_max: float  # ||G_id||_F * ||Y Y^T||_F
    sigma_w: float  # tr(Sigma_W), within-class spread

    @property
    def maximality_gap(self) -> float:
        return self.surrogate_max - self.surrogate


def nc_probe(H, labels, W) -> NCReport:
    """Collapse metrics for features ``H`` (D x N) under readout ``W`` (C x D).

    All N x N quantities are evaluated through their C x C equivalents:
    ``G_id = (W H)^T (W H)``, so ``||G_id||_F = ||(W H)(W H)^T||_F`` and
    ``tr(Y^T G Y) = ||W H Y||_F^2``.
    """
    H = as_matrix(H, "H")
    W = as_matrix(W, "W")
    labels = np.asarray(labels, dtype=np.int64)
    D, N = H.shape
    C = W.shape[0]
    if labels.shape != (N,):
        raise ShapeMismatch("need one label per column of H")
    if W.shape[1] != D:
        raise ShapeMismatch(f"W {W.shape} cannot act on H {H.shape}")
    present = np.unique(labels)
    if present.size < 2:
        raise DegenerateLabels("nc_probe needs at least two classes")
    Y = one_hot_centered(labels, C)
    global_mean = H.mean(axis=1, keepdims=True)
    means = np.stack([H[:, labels == c].mean(axis=1) for c in present], axis=1)
    within = sum(np.sum((H[:, labels == c] - means[:, [i]]) ** 2) for i, c in enumerate(present)) / N
    centered_means = means - global_mean
    between = np.sum(centered_means**2) / present.size
    nc1 = float(within / between) if between > 0 else np.inf
    unit = centered_means / np.maximum(np.linalg.norm(centered_means, axis=0), np.finfo(float).tiny)
    cos = unit.T @ unit
    off = ~np.eye(present.size, dtype=bool)
    etf_dev = float(np.abs(cos[off] + 1.0 / (present.size - 1)).max())
    F = W @ H  # C x N
    FFt = F @ F.T
    YtY = Y.T @ Y
    FY = F @ Y
    s = float(np.sum(FY * FY))
    g_norm = float(np.linalg.norm(FFt))
    yy_norm = float(np.linalg.norm(YtY))
    # G - Y Y^T = A S A^T with A = [F^T, Y], S = diag(I, -I); with A = Q R the
    # norm equals ||R S R^T||_F, which avoids cancelling squared norms.
    R = np.linalg.qr(np.hstack([F.T, Y]), mode="r")
    S = np.concatenate([np.ones(C), -np.ones(C)])
    dist = float(np.linalg.norm((R * S) @ R.T))
    return NCReport(
        nc1=nc1,
        etf_deviation=etf_dev,
        gram_distance=dist / yy_norm,
        surrogate=s,
        surrogate_max=g_norm * yy_norm,
        sigma_w=float(within),
    )


def construct_etf(C: int, D: int, n_per_class: int, seed: int = 0, scale: float = 1.0):
    """Collapsed features whose class means form a simplex ETF in R^D.

    Returns ``(H, labels, W)`` with ``H`` D x (C n), zero within-class spread,
    and ``W = M^+`` the pseudoinverse of the class-mean matrix, so that
    ``W H`` equals the transposed centered one-hot matrix.
    """
    if C < 2 or D < C or n_per_class < 1:
        raise ShapeMismatch("need C >= 2, D >= C and n_per_class >= 1")
    rng = SplitMix64(seed)
    U, _ = np.linalg.qr(rng.normal((D, C)))
    P = np.eye(C) - np.ones((C, C)) / C
    M = scale * U @ P  # D x C, columns sum to zero
    labels = np.repeat(np.arange(C), n_per_class)
    H = M[:, labels]
    W = np.linalg.pinv(M)
    return H, labels, W
