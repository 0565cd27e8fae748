"""Dense feed-forward networks with exact reverse-mode gradients.

Column convention: a batch is a ``d x B`` matrix, one sample per column.
Layer ``l`` maps ``h_l`` to ``z_l = W_l h_l (+ b_l)`` and ``h_{l+1} = act_l(z_l)``;
the last layer is the readout. ``backward`` returns weight gradients together
with the gradient of the loss w.r.t. every hidden state ``h_l`` (``h_0`` is the
input), which is what the diagnostics consume.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteValue, ShapeMismatch
from .linalg import as_matrix
from .rng import SplitMix64

ACTIVATIONS = ("relu", "gelu", "identity", "sigmoid")
LOSSES = ("mse", "bce", "softmax_ce")
_GELU_C = np.sqrt(2.0 / np.pi)


def activate(tag: str, z: np.ndarray) -> np.ndarray:
    if tag == "relu":
        return np.maximum(z, 0.0)
    if tag == "gelu":
        return 0.5 * z * (1.0 + np.tanh(_GELU_C * (z + 0.044715 * z**3)))
    if tag == "identity":
        return z.copy()
    if tag == "sigmoid":
        return 0.5 * (1.0 + np.tanh(0.5 * z))
    raise ValueError(f"unknown activation {tag!r}")


def activate_grad(tag: str, z: np.ndarray) -> np.ndarray:
    if tag == "relu":
        return (z > 0).astype(np.float64)
    if tag == "gelu":
        u = _GELU_C * (z + 0.044715 * z**3)
        t = np.tanh(u)
        du = _GELU_C * (1.0 + 3 * 0.044715 * z**2)
        return 0.5 * (1.0 + t) + 0.5 * z * (1.0 - t * t) * du
    if tag == "identity":
        return np.ones_like(z)
    if tag == "sigmoid":
        s = 0.5 * (1.0 + np.tanh(0.5 * z))
        return s * (1.0 - s)
    raise ValueError(f"unknown activation {tag!r}")


@dataclass
class Layer:
    W: np.ndarray
    activation: str
    b: np.ndarray | None = None

    def __post_init__(self):
        self.W = as_matrix(self.W, "W")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.b is not None:
            self.b = np.asarray(self.b, dtype=np.float64)
            if self.b.shape != (self.W.shape[0],):
                raise ShapeMismatch(f"bias shape {self.b.shape} does not match W {self.W.shape}")


@dataclass
class Network:
    layers: list[Layer]

    def __post_init__(self):
        if not self.layers:
            raise ShapeMismatch("a network needs at least one layer")
        for l in range(1, len(self.layers)):
            if self.layers[l].W.shape[1] != self.layers[l - 1].W.shape[0]:
                raise ShapeMismatch(
                    f"layer {l} expects {self.layers[l].W.shape[1]} inputs, "
                    f"layer {l - 1} produces {self.layers[l - 1].W.shape[0]}"
                )

    @property
    def dims(self) -> list[int]:
        return [self.layers[0].W.shape[1]] + [layer.W.shape[0] for layer in self.layers]

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def readout(self) -> str:
        return self.layers[-1].activation

    @property
    def is_homogeneous(self) -> bool:
        """True for bias-free relu/identity networks (1-positively homogeneous)."""
        return all(layer.b is None and layer.activation in ("relu", "identity") for layer in self.layers)

    def n_params(self) -> int:
        return sum(layer.W.size + (0 if layer.b is None else layer.b.size) for layer in self.layers)

    def copy(self) -> "Network":
        return copy.deepcopy(self)

    def __call__(self, X) -> np.ndarray:
        return forward(self, X).output


@dataclass
class ForwardTrace:
    hs: list[np.ndarray]  # h_0 .. h_L, each d_l x B
    zs: list[np.ndarray]  # z_0 .. z_{L-1}

    @property
    def output(self) -> np.ndarray:
        return self.hs[-1]

    @property
    def logits(self) -> np.ndarray:
        return self.zs[-1]

    @property
    def batch_size(self) -> int:
        return self.hs[0].shape[1]


@dataclass
class GradientBundle:
    dW: list[np.ndarray]
    dh: list[np.ndarray]  # gradient w.r.t. h_0 .. h_{L-1}
    db: list[np.ndarray | None] = field(default_factory=list)


def init_network(
    dims,
    activation: str = "relu",
    bias: bool = False,
    scale_mode: str = "he",
    seed: int = 0,
    readout: str = "identity",
) -> Network:
    """Gaussian initialisation: ``he`` uses variance 2/fan_in, ``ntk`` 1/fan_in.

    Hidden layers use ``activation``; the last layer uses ``readout``. Biases,
    when requested, start at zero.
    """
    dims = [int(d) for d in dims]
    if len(dims) < 2 or min(dims) < 1:
        raise ShapeMismatch(f"invalid layer dims {dims}")
    if scale_mode not in ("he", "ntk"):
        raise ValueError(f"unknown scale_mode {scale_mode!r}")
    gain = 2.0 if scale_mode == "he" else 1.0
    rng = SplitMix64(seed)
    layers = []
    for l in range(len(dims) - 1):
        fan_in, fan_out = dims[l], dims[l + 1]
        W = rng.normal((fan_out, fan_in)) * np.sqrt(gain / fan_in)
        act = readout if l == len(dims) - 2 else activation
        layers.append(Layer(W, act, np.zeros(fan_out) if bias else None))
    return Network(layers)


def forward(net: Network, X) -> ForwardTrace:
    X = as_matrix(X, "X")
    if X.shape[0] != net.dims[0]:
        raise ShapeMismatch(f"input has {X.shape[0]} rows, network expects {net.dims[0]}")
    if X.shape[1] < 1:
        raise ShapeMismatch("empty batch")
    hs, zs = [X], []
    h = X
    for layer in net.layers:
        z = layer.W @ h
        if layer.b is not None:
            z = z + layer.b[:, None]
        h = activate(layer.activation, z)
        zs.append(z)
        hs.append(h)
    return ForwardTrace(hs, zs)


def _softplus(z):
    return np.logaddexp(0.0, z)


def loss_and_seed(net: Network, trace: ForwardTrace, loss: str, Y) -> tuple[float, np.ndarray]:
    """Batch-mean loss and its gradient w.r.t. the readout pre-activation."""
    Y = as_matrix(Y, "Y")
    f, z = trace.output, trace.logits
    if Y.shape != f.shape:
        raise ShapeMismatch(f"targets {Y.shape} do not match outputs {f.shape}")
    B = f.shape[1]
    if loss == "mse":
        r = f - Y
        value = float(np.sum(r * r) / B)
        dz = (2.0 / B) * r * activate_grad(net.readout, z)
    elif loss == "bce":
        if net.readout != "sigmoid":
            raise ShapeMismatch("bce requires a sigmoid readout")
        value = float(np.sum(_softplus(z) - Y * z) / B)
        dz = (f - Y) / B
    elif loss == "softmax_ce":
        if net.readout != "identity":
            raise ShapeMismatch("softmax_ce expects identity (logit) readout")
        zmax = z.max(axis=0, keepdims=True)
        logp = z - zmax - np.log(np.sum(np.exp(z - zmax), axis=0, keepdims=True))
        value = float(-np.sum(Y * logp) / B)
        dz = (np.exp(logp) * Y.sum(axis=0, keepdims=True) - Y) / B
    else:
        raise ValueError(f"unknown loss {loss!r}")
    if not np.isfinite(value):
        raise NonFiniteValue("loss is not finite")
    return value, dz


def backprop(net: Network, trace: ForwardTrace, dz_last: np.ndarray) -> GradientBundle:
    """Propagate a gradient given at the last pre-activation back to the input."""
    L = net.depth
    dW: list = [None] * L
    db: list = [None] * L
    dh: list = [None] * L
    dz = dz_last
    for l in range(L - 1, -1, -1):
        layer = net.layers[l]
        dW[l] = dz @ trace.hs[l].T
        if layer.b is not None:
            db[l] = dz.sum(axis=1)
        dh[l] = layer.W.T @ dz
        if l > 0:
            dz = dh[l] * activate_grad(net.layers[l - 1].activation, trace.zs[l - 1])
    return GradientBundle(dW, dh, db)


def backward(net: Network, trace: ForwardTrace, loss: str, Y) -> tuple[float, GradientBundle]:
    value, dz = loss_and_seed(net, trace, loss, Y)
    return value, backprop(net, trace, dz)


def output_gradients(net: Network, trace: ForwardTrace, wrt: str = "output") -> GradientBundle:
    """Per-sample gradients of the (class-summed) network output.

    ``wrt="output"`` differentiates the post-readout output, ``wrt="logits"``
    the readout pre-activation. Column ``i`` of ``dh[l]`` is the gradient for
    sample ``i`` because samples do not interact in the forward pass.
    """
    z = trace.logits
    if wrt == "output":
        seed = activate_grad(net.readout, z)
    elif wrt == "logits":
        seed = np.ones_like(z)
    else:
        raise ValueError(f"unknown wrt {wrt!r}")
    return backprop(net, trace, seed)


# --------------------------------------------------------------------------- VAE


@dataclass
class VaeModel:
    encoder: Network  # d -> ... -> 2k (mean, log-variance)
    decoder: Network  # k -> ... -> d
    beta: float = 1.0

    def __post_init__(self):
        if self.encoder.dims[-1] != 2 * self.latent_dim:
            raise ShapeMismatch("encoder output must be twice the decoder input (mean, log-variance)")
        if self.decoder.dims[-1] != self.encoder.dims[0]:
            raise ShapeMismatch("decoder output must match encoder input")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")

    @property
    def latent_dim(self) -> int:
        return self.decoder.dims[0]

    def encode(self, X) -> tuple[np.ndarray, np.ndarray]:
        out = forward(self.encoder, X).output
        k = self.latent_dim
        return out[:k], out[k:]


@dataclass(frozen=True)
class VaeLoss:
    reconstruction: float
    kl: float
    beta: float

    @property
    def total(self) -> float:
        return self.reconstruction + self.beta * self.kl


def init_vae(d: int, hidden: int, latent: int, beta: float, seed: int = 0, decoder_readout: str = "sigmoid") -> VaeModel:
    enc = init_network([d, hidden, 2 * latent], "relu", bias=True, seed=seed)
    dec = init_network([latent, hidden, d], "relu", bias=True, seed=seed + 1, readout=decoder_readout)
    # start the log-variance head near zero so the first samples stay close to the mean
    enc.layers[-1].W[latent:] *= 0.01
    return VaeModel(enc, dec, beta)


def vae_step(model: VaeModel, X, noise) -> tuple[VaeLoss, GradientBundle, GradientBundle]:
    """Loss parts and gradients for one batch with externally supplied noise.

    Reconstruction is the batch-mean squared error; the KL term is the closed
    form ``0.5 * sum(mu^2 + s^2 - log s^2 - 1)`` averaged over the batch.
    """
    X = as_matrix(X, "X")
    noise = as_matrix(noise, "noise")
    k = model.latent_dim
    B = X.shape[1]
    if noise.shape != (k, B):
        raise ShapeMismatch(f"noise must be {(k, B)}, got {noise.shape}")
    enc_trace = forward(model.encoder, X)
    mu, logvar = enc_trace.output[:k], enc_trace.output[k:]
    std = np.exp(0.5 * logvar)
    z = mu + std * noise
    dec_trace = forward(model.decoder, z)
    recon, dec_grads = backward(model.decoder, dec_trace, "mse", X)
    var = std * std
    kl = float(0.5 * np.sum(mu * mu + var - logvar - 1.0) / B)
    dz = dec_grads.dh[0]
    beta = model.beta
    d_mu = dz + beta * mu / B
    d_logvar = dz * noise * 0.5 * std + beta * 0.5 * (var - 1.0) / B
    d_out = np.vstack([d_mu, d_logvar]) * activate_grad(model.encoder.readout, enc_trace.logits)
    enc_grads = backprop(model.encoder, enc_trace, d_out)
    return VaeLoss(recon, kl, beta), enc_grads, dec_grads
