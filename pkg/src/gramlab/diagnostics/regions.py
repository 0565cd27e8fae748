"""Linear-region accounting for depth-2 bias-free relu networks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeMismatch
from ..nn import Network


@dataclass(frozen=True)
class RegionCrossing:
    crossings: int  # M
    delta: float  # largest gradient jump across a crossed boundary
    radius: float  # B = max(||a||, ||b||)
    error: float  # f(b) - b . grad f(a)
    bound: float  # 2 M B delta

    @property
    def holds(self) -> bool:
        if self.crossings == 0:
            return abs(self.error) <= 1e-10 * max(1.0, self.radius)
        return abs(self.error) <= self.bound


def _check_depth2(net: Network) -> None:
    if net.depth != 2 or net.dims[-1] != 1:
        raise ShapeMismatch("expected a depth-2 scalar-output network")
    if not net.is_homogeneous or net.layers[0].activation != "relu" or net.layers[1].activation != "identity":
        raise ShapeMismatch("expected a bias-free relu hidden layer with identity readout")


def region_crossings_depth2(net: Network, a, b) -> RegionCrossing:
    """Count boundaries crossed on the segment ``[a, b]`` and evaluate the Taylor error bound.

    Neuron ``i`` switches where ``w_i . (a + t (b - a)) = 0``; crossings are
    the roots with ``t`` in (0, 1). Crossing neuron ``i`` changes the gradient
    by ``r_i w_i``.
    """
    _check_depth2(net)
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    W = net.layers[0].W
    r = net.layers[1].W.ravel()
    pa = W @ a
    slope = W @ (b - a)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(slope != 0, -pa / slope, np.nan)
    crossed = (t > 0) & (t < 1)
    M = int(crossed.sum())
    jumps = np.abs(r) * np.linalg.norm(W, axis=1)
    delta = float(jumps[crossed].max()) if M else 0.0
    B = float(max(np.linalg.norm(a), np.linalg.norm(b)))
    grad_a = W.T @ (r * (pa > 0))
    f_b = float(r @ np.maximum(W @ b, 0.0))
    err = f_b - float(b @ grad_a)
    return RegionCrossing(M, delta, B, err, 2.0 * M * B * delta)
