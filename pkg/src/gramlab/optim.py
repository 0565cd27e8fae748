"""Parameter updates: SGD with momentum, Adam/AdamW and the Gram-whitened step.

All steps mutate the network in place and return it.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatch
from .linalg import polar_orthogonalize
from .nn import GradientBundle, Network

RULES = ("sgd", "adam", "adamw", "whitened_sgd")


@dataclass
class OptimizerState:
    rule: str
    lr: float
    momentum: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    step: int = 0
    buffers: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"unknown optimizer rule {self.rule!r}")
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if self.weight_decay < 0 or not 0 <= self.momentum < 1:
            raise ValueError("weight decay must be >= 0 and momentum in [0, 1)")


def _check(net: Network, grads: GradientBundle) -> None:
    if len(grads.dW) != net.depth:
        raise ShapeMismatch("gradient bundle does not match network depth")
    for l, layer in enumerate(net.layers):
        if grads.dW[l].shape != layer.W.shape:
            raise ShapeMismatch(f"layer {l}: gradient {grads.dW[l].shape} vs weight {layer.W.shape}")


def _params(net: Network, grads: GradientBundle):
    """Yield (key, parameter array, gradient) for weights and biases."""
    for l, layer in enumerate(net.layers):
        yield ("W", l), layer.W, grads.dW[l]
        if layer.b is not None:
            db = grads.db[l] if grads.db and grads.db[l] is not None else np.zeros_like(layer.b)
            yield ("b", l), layer.b, db


def _sgd_direction(state: OptimizerState, key, p: np.ndarray, g: np.ndarray) -> np.ndarray:
    if state.momentum > 0:
        v = state.buffers.get(key)
        v = g.copy() if v is None else state.momentum * v + g
        state.buffers[key] = v
        g = v
    if state.weight_decay > 0:
        g = g + state.weight_decay * p
    return g


def sgd_step(net: Network, grads: GradientBundle, state: OptimizerState) -> Network:
    """``W <- W - lr * (momentum-accumulated grad + weight_decay * W)``."""
    _check(net, grads)
    state.step += 1
    for key, p, g in _params(net, grads):
        p -= state.lr * _sgd_direction(state, key, p, g)
    return net


def adam_step(net: Network, grads: GradientBundle, state: OptimizerState) -> Network:
    """Bias-corrected Adam; ``adamw`` applies weight decay outside the moments."""
    _check(net, grads)
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    for key, p, g in _params(net, grads):
        if state.rule != "adamw" and state.weight_decay > 0:
            g = g + state.weight_decay * p
        m, v = state.buffers.get(key, (np.zeros_like(p), np.zeros_like(p)))
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        state.buffers[key] = (m, v)
        update = (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + state.eps)
        if state.rule == "adamw" and state.weight_decay > 0:
            update = update + state.weight_decay * p
        p -= state.lr * update
    return net


def whiten_layer(W: np.ndarray, W_hat: np.ndarray, return_rotation: bool = False):
    """Closest matrix to ``W`` with the same Gram as ``W_hat``: ``polar(W W_hat^T) W_hat``."""
    Q = polar_orthogonalize(W @ W_hat.T)
    return (Q @ W_hat, Q) if return_rotation else Q @ W_hat


def gram_deviation(Q: np.ndarray, W_hat: np.ndarray) -> float:
    """``||(Q W_hat)^T (Q W_hat) - W_hat^T W_hat||_F / ||W_hat^T W_hat||_F``.

    With ``E = Q^T Q - I`` and ``A = W_hat W_hat^T`` the squared numerator is
    ``tr(E A E A)``, so no input-side Gram is formed.
    """
    E = Q.T @ Q - np.eye(Q.shape[1])
    A = W_hat @ W_hat.T
    EA = E @ A
    ref = float(np.sum(A * A))
    return float(np.sqrt(max(float(np.sum(EA * EA.T)), 0.0) / ref)) if ref > 0 else 0.0


def whitened_step(net: Network, grads: GradientBundle, state: OptimizerState) -> Network:
    """SGD step whose hidden-layer weights are rotated back towards ``W``.

    Each hidden weight gets the plain SGD target ``W_hat``, then the orthogonal
    Procrustes rotation that brings ``W_hat`` closest to ``W``. The rotation
    leaves the Gram ``W_hat^T W_hat`` unchanged, so only the Gram-changing part
    of the gradient moves the layer. The readout layer and all biases take
    plain SGD steps.
    """
    _check(net, grads)
    state.step += 1
    last = net.depth - 1
    deviations = {}
    for key, p, g in _params(net, grads):
        W_hat = p - state.lr * _sgd_direction(state, key, p, g)
        if key[0] == "W" and key[1] != last:
            W_plus, Q = whiten_layer(p, W_hat, return_rotation=True)
            deviations[key[1]] = gram_deviation(Q, W_hat)
            W_hat = W_plus
        p[...] = W_hat
    # relative Gram deviation of each whitened layer for the latest step
    state.buffers["gram_deviation"] = deviations
    return net


_STEPS = {"sgd": sgd_step, "adam": adam_step, "adamw": adam_step, "whitened_sgd": whitened_step}


def step(net: Network, grads: GradientBundle, state: OptimizerState) -> Network:
    return _STEPS[state.rule](net, grads, state)
