"""Weight-space / feature-space identities around the weight Gram matrix."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateInput, ShapeMismatch
from ..linalg import as_matrix
from ..nn import GradientBundle, Network, activate, backward, forward, output_gradients, ForwardTrace

_TINY = 1e-300


def fle_residual(net: Network, trace: ForwardTrace, grads: GradientBundle, layer: int) -> float:
    """Relative gap between ``W^T dW`` and ``sum_i dh_i h_i^T`` for one layer."""
    W = net.layers[layer].W
    lhs = W.T @ grads.dW[layer]
    rhs = grads.dh[layer] @ trace.hs[layer].T
    return float(np.linalg.norm(lhs - rhs) / max(np.linalg.norm(lhs), _TINY))


def gram_shift(W, W_plus) -> np.ndarray:
    W = as_matrix(W, "W")
    W_plus = as_matrix(W_plus, "W_plus")
    if W.shape != W_plus.shape:
        raise ShapeMismatch(f"{W.shape} vs {W_plus.shape}")
    return W_plus.T @ W_plus - W.T @ W


def vcs(H, dH, gamma: float) -> np.ndarray:
    """Virtual covariance shift ``sum_i h+_i h+_i^T - h_i h_i^T`` with ``h+ = h - gamma dh``.

    ``H`` and ``dH`` are ``d x B``; the batch sum is taken over columns. No
    centering is applied.
    """
    H = as_matrix(H, "H")
    dH = as_matrix(dH, "dH")
    if H.shape != dH.shape:
        raise ShapeMismatch(f"{H.shape} vs {dH.shape}")
    cross = dH @ H.T
    return -gamma * (cross + cross.T) + gamma**2 * (dH @ dH.T)


def vcs_first_order(H, dH, gamma: float) -> np.ndarray:
    cross = as_matrix(dH, "dH") @ as_matrix(H, "H").T
    return -gamma * (cross + cross.T)


def gram_vcs_residual(net: Network, trace: ForwardTrace, grads: GradientBundle, layer: int, gamma: float) -> float:
    """``||gram_shift(W, W - gamma dW) - first-order VCS||_F`` for one layer."""
    W = net.layers[layer].W
    shift = gram_shift(W, W - gamma * grads.dW[layer])
    return float(np.linalg.norm(shift - vcs_first_order(trace.hs[layer], grads.dh[layer], gamma)))


def thm1_residual_scaling(net: Network, X, Y, loss: str, gamma: float, layer: int = 0) -> tuple[float, float]:
    """Gram-shift vs first-order VCS residual at ``gamma`` and ``gamma / 2``.

    The residual is second order in the step, so the ratio of the two values
    should be close to 4.
    """
    trace = forward(net, X)
    _, grads = backward(net, trace, loss, Y)
    return (
        gram_vcs_residual(net, trace, grads, layer, gamma),
        gram_vcs_residual(net, trace, grads, layer, gamma / 2),
    )


def agop(net: Network, trace: ForwardTrace, layer: int) -> np.ndarray:
    """Average outer product of per-sample gradients of the output w.r.t. ``h_layer``.

    Multi-output networks use the gradient of the summed outputs.
    """
    G = output_gradients(net, trace, wrt="output").dh[layer]
    return G @ G.T / G.shape[1]


def per_sample_input_gradients(net: Network, X, Y, loss: str) -> np.ndarray:
    """Gradient of each sample's own loss w.r.t. its input (``d x N``)."""
    trace = forward(net, X)
    _, grads = backward(net, trace, loss, Y)
    return grads.dh[0] * trace.batch_size


def virtual_trajectory(checkpoints, X0, Y, gamma: float, loss: str = "mse") -> list[np.ndarray]:
    """Inputs moved by ``x <- x - gamma * grad_x loss`` under successive checkpoints.

    Step ``t`` evaluates the gradient at the current virtual point under
    ``checkpoints[t]``; the networks themselves are never touched. Each
    sample follows the gradient of its own loss. Returns ``len(checkpoints)+1``
    matrices, starting with ``X0``.
    """
    Xt = as_matrix(X0, "X0").copy()
    out = [Xt.copy()]
    for net in checkpoints:
        if gamma != 0.0:
            Xt = Xt - gamma * per_sample_input_gradients(net, Xt, Y, loss)
        out.append(Xt.copy())
    return out


@dataclass(frozen=True)
class AlignmentReport:
    actual: np.ndarray  # sigma(W+ h) - sigma(W h)
    virtual: np.ndarray  # h+ - h
    magnitude_ok: np.ndarray
    sign_ok: np.ndarray
    h_norm: float

    @property
    def all_pass(self) -> bool:
        return bool(self.magnitude_ok.all() and self.sign_ok.all())


_LIPSCHITZ = {"relu": 1.0, "identity": 1.0, "sigmoid": 0.25, "gelu": 1.13}


def normalize_sample_for_layer(net: Network, x: np.ndarray, layer: int) -> np.ndarray:
    """Rescale ``x`` so that ``||h_{layer-1}|| = 1`` (exact for homogeneous prefixes)."""
    x = np.asarray(x, dtype=np.float64).reshape(-1, 1)
    if layer - 1 > 0 and not all(
        l.b is None and l.activation in ("relu", "identity") for l in net.layers[: layer - 1]
    ):
        raise ShapeMismatch("input rescaling needs a bias-free relu/identity prefix")
    h = forward(net, x).hs[layer - 1]
    n = np.linalg.norm(h)
    if n == 0.0:
        raise DegenerateInput("hidden state is zero; cannot normalise")
    return x / n


def prop1_alignment(net: Network, layer: int, x, y, gamma: float, loss: str = "mse", atol: float = 1e-12) -> AlignmentReport:
    """Compare the actual change of ``h_layer`` after one step on ``W_{layer-1}``
    with the virtual update ``-gamma * grad_h loss``, coordinate by coordinate.

    The caller supplies a sample already scaled so that ``||h_{layer-1}|| = 1``
    (see :func:`normalize_sample_for_layer`). Signs are compared with the
    convention that zero is compatible with either sign.
    """
    if not 1 <= layer < net.depth:
        raise ShapeMismatch(f"layer must be in [1, {net.depth - 1}]")
    x = np.asarray(x, dtype=np.float64).reshape(-1, 1)
    y = np.asarray(y, dtype=np.float64).reshape(-1, 1)
    trace = forward(net, x)
    _, grads = backward(net, trace, loss, y)
    prev = net.layers[layer - 1]
    h_prev = trace.hs[layer - 1]
    W_plus = prev.W - gamma * grads.dW[layer - 1]
    z_plus = W_plus @ h_prev + (0 if prev.b is None else prev.b[:, None])
    actual = (activate(prev.activation, z_plus) - trace.hs[layer]).ravel()
    virtual = (-gamma * grads.dh[layer]).ravel()
    lip = _LIPSCHITZ[prev.activation]
    scale = atol * max(1.0, float(np.abs(trace.hs[layer]).max()))
    magnitude_ok = np.abs(actual) <= lip**2 * np.abs(virtual) + scale
    sa = np.where(np.abs(actual) <= scale, 0.0, np.sign(actual))
    sv = np.where(np.abs(virtual) <= scale, 0.0, np.sign(virtual))
    sign_ok = (sa == 0) | (sv == 0) | (sa == sv)
    return AlignmentReport(actual, virtual, magnitude_ok, sign_ok, float(np.linalg.norm(h_prev)))


def pairwise_taylor_sum(net: Network, X, m: float = 1.0, centered_tol: float = 1e-12) -> tuple[float, float]:
    """Sum over all ordered pairs of first-order Taylor errors, and ``m N sum_j f(x_j)``.

    The double sum is built explicitly as an ``N x N`` matrix.
    """
    X = as_matrix(X, "X")
    if net.dims[-1] != 1:
        raise ShapeMismatch("pairwise_taylor_sum needs a scalar-output network")
    mean = X.mean(axis=1)
    if np.abs(mean).max() > centered_tol * max(1.0, np.abs(X).max()):
        raise ShapeMismatch("X must have zero column mean")
    trace = forward(net, X)
    f = trace.output.ravel()
    G = output_gradients(net, trace, wrt="output").dh[0]  # d x N
    N = f.shape[0]
    proj = X.T @ G  # proj[i, j] = x_i . grad f(x_j)
    diag = np.diag(proj)
    errors = f[:, None] - f[None, :] - (proj - diag[None, :])
    return float(errors.sum()), float(m * N * f.sum())
