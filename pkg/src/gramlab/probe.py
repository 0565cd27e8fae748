"""Layer-wise TL on activations dumped by an external model."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .diagnostics import surrogate_id, target_linearity
from .io import read_activation_dump, read_targets
from .linalg import pca_project
from .errors import ShapeMismatch


@dataclass(frozen=True)
class ProbeRow:
    layer: int
    dim: int
    tl: float
    surrogate: float  # ||H Y||_F^2, i.e. the surrogate with W = I
    pca_rank_deficient: bool = False


def probe_layers(layers, Y, lam: float = 0.0, pca_k: int | None = None) -> list[ProbeRow]:
    Y = np.asarray(Y, dtype=np.float64)
    rows = []
    for l, H in enumerate(layers):
        if H.shape[1] != Y.shape[0]:
            raise ShapeMismatch(f"layer {l} has N={H.shape[1]}, targets have N={Y.shape[0]}")
        deficient = False
        if pca_k is not None and pca_k < H.shape[0]:
            res = pca_project(H.T, min(pca_k, H.shape[1]))
            H, deficient = res.scores.T, res.rank_deficient
        rows.append(ProbeRow(l, H.shape[0], target_linearity(H, Y, lam), surrogate_id(H, np.eye(H.shape[0]), Y), deficient))
    return rows


def probe_dump(activations_path, targets_path, lam: float = 0.0, pca_k: int | None = None) -> str:
    """CSV text with one (layer, dim, tl, surrogate) row per dumped layer."""
    rows = probe_layers(read_activation_dump(activations_path), read_targets(targets_path), lam, pca_k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["layer", "dim", "tl", "surrogate", "pca_rank_deficient"])
    for r in rows:
        w.writerow([r.layer, r.dim, repr(r.tl), repr(r.surrogate), int(r.pca_rank_deficient)])
    return buf.getvalue()
