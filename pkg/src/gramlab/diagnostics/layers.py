"""Per-layer bundle of TL, surrogate and Gram-shift quantities."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nn import ForwardTrace, GradientBundle, Network
from .gram import gram_shift, vcs, vcs_first_order
from .linearity import surrogate_id, target_linearity


@dataclass(frozen=True)
class LayerDiagnostics:
    layer: int
    tl: float
    surrogate: float
    gram_shift: np.ndarray | None = None
    vcs: np.ndarray | None = None
    vcs_residual: float | None = None  # ||gram_shift - first-order VCS||_F
    fle_residual: float | None = None

    def as_row(self) -> dict:
        row = {"layer": self.layer, "tl": self.tl, "surrogate": self.surrogate}
        if self.vcs_residual is not None:
            row["vcs_residual"] = self.vcs_residual
        if self.fle_residual is not None:
            row["fle_residual"] = self.fle_residual
        return row


def layer_diagnostics(
    net: Network,
    trace: ForwardTrace,
    Y,
    layer: int,
    lam: float = 0.0,
    grads: GradientBundle | None = None,
    gamma: float | None = None,
) -> LayerDiagnostics:
    """TL and surrogate of ``h_layer`` against ``Y`` (N x C); the surrogate uses ``W_layer``.

    With ``grads`` and ``gamma`` the Gram shift of a plain step and the
    virtual covariance shift are included.
    """
    H = trace.hs[layer]
    W = net.layers[layer].W
    tl = target_linearity(H, Y, lam)
    s = surrogate_id(H, W, Y)
    if grads is None or gamma is None:
        return LayerDiagnostics(layer, tl, s)
    dW, dH = grads.dW[layer], grads.dh[layer]
    shift = gram_shift(W, W - gamma * dW)
    v = vcs(H, dH, gamma)
    resid = float(np.linalg.norm(shift - vcs_first_order(H, dH, gamma)))
    lhs = W.T @ dW
    fle = float(np.linalg.norm(lhs - dH @ H.T) / max(np.linalg.norm(lhs), 1e-300))
    return LayerDiagnostics(layer, tl, s, shift, v, resid, fle)
