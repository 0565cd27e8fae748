"""Synthetic generators, IDX / CIFAR binary readers and label transforms.

Every dataset stores inputs as ``d x N`` (one sample per column) and targets
as ``N x C``.
"""
from __future__ import annotations

import gzip
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .diagnostics.collapse import one_hot_centered
from .errors import BadMagic, CountMismatch, DatasetMissing, ShapeMismatch, TruncatedFile
from .rng import SplitMix64

IDX_IMAGES = 0x00000803
IDX_LABELS = 0x00000801
CIFAR_PIXELS = 3072


@dataclass
class Dataset:
    X: np.ndarray  # d x N
    Y: np.ndarray  # N x C
    labels: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.Y = np.asarray(self.Y, dtype=np.float64)
        if self.Y.ndim == 1:
            self.Y = self.Y[:, None]
        if self.X.ndim != 2 or self.Y.shape[0] != self.X.shape[1]:
            raise ShapeMismatch(f"X {self.X.shape} and Y {self.Y.shape} disagree on N")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.X.shape[1],):
                raise ShapeMismatch("labels must have one entry per sample")

    @property
    def n(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.meta.get("classes", self.Y.shape[1]))

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        labels = None if self.labels is None else self.labels[idx]
        return Dataset(self.X[:, idx], self.Y[idx], labels, dict(self.meta))


# ------------------------------------------------------------------ generators


def swiss_roll(n: int, noise: float = 0.05, seed: int = 0, scale: float | None = None) -> Dataset:
    """2-D spiral ``(t cos t, t sin t) / scale`` with ``t ~ U[1.5 pi, 4.5 pi]``.

    The target is ``t`` standardised. ``scale`` defaults to the largest radius
    so the cloud fits in the unit disc.
    """
    rng = SplitMix64(seed)
    lo, hi = 1.5 * np.pi, 4.5 * np.pi
    t = lo + (hi - lo) * rng.uniform(n)
    scale = hi if scale is None else scale
    X = np.vstack([t * np.cos(t), t * np.sin(t)]) / scale
    if noise > 0:
        X = X + noise * rng.normal((2, n))
    target = (t - t.mean()) / t.std()
    return Dataset(X, target[:, None], None, {"name": "swiss_roll", "classes": 1, "seed": seed, "angle": t, "scale": scale})


def staircase_target(X: np.ndarray) -> np.ndarray:
    x1, x2, x3, x4 = X[0], X[1], X[2], X[3]
    return x1 * x2 * x3 * x4 + x1 * x2 * x3 + x1 * x2 + x1


def staircase(n: int = 1000, d: int = 10, seed: int = 0) -> Dataset:
    """Gaussian inputs with ``y = x1 x2 x3 x4 + x1 x2 x3 + x1 x2 + x1``."""
    if d < 4:
        raise ShapeMismatch("staircase needs d >= 4")
    X = SplitMix64(seed).normal((d, n))
    return Dataset(X, staircase_target(X)[:, None], None, {"name": "staircase", "classes": 1, "seed": seed})


def mod_add(p: int = 61, train_frac: float = 0.5, seed: int = 0, centered: bool = False) -> tuple[Dataset, Dataset]:
    """All pairs ``(a, b)`` as concatenated one-hots, labelled ``(a + b) mod p``."""
    if p < 2 or not 0 < train_frac < 1:
        raise ShapeMismatch("need p >= 2 and 0 < train_frac < 1")
    a, b = np.divmod(np.arange(p * p), p)
    X = np.zeros((2 * p, p * p))
    cols = np.arange(p * p)
    X[a, cols] = 1.0
    X[p + b, cols] = 1.0
    labels = (a + b) % p
    Y = one_hot_centered(labels, p) if centered else np.eye(p)[labels]
    full = Dataset(X, Y, labels, {"name": f"mod_add_{p}", "classes": p, "seed": seed, "centered": centered})
    perm = SplitMix64(seed).permutation(p * p)
    cut = int(round(train_frac * p * p))
    return full.take(np.sort(perm[:cut])), full.take(np.sort(perm[cut:]))


# --------------------------------------------------------------------- readers


def _read_bytes(path) -> bytes:
    path = Path(path)
    if not path.exists():
        gz = path.with_name(path.name + ".gz")
        if gz.exists():
            path = gz
        else:
            raise DatasetMissing(f"{path} not found")
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return fh.read()


def _idx_header(raw: bytes, magic: int, ndim: int, path) -> tuple[int, ...]:
    if len(raw) < 4:
        raise TruncatedFile(f"{path}: header is {len(raw)} bytes")
    got = int.from_bytes(raw[:4], "big")
    if got != magic:
        raise BadMagic(f"{path}: magic 0x{got:08x}, expected 0x{magic:08x}")
    if len(raw) < 4 + 4 * ndim:
        raise TruncatedFile(f"{path}: header truncated")
    dims = tuple(int(v) for v in np.frombuffer(raw, dtype=">u4", count=ndim, offset=4))
    need = 4 + 4 * ndim + int(np.prod(dims))
    if len(raw) < need:
        raise TruncatedFile(f"{path}: {len(raw)} bytes, header promises {need}")
    return dims


def parse_idx_images(raw: bytes, path="<bytes>") -> np.ndarray:
    n, rows, cols = _idx_header(raw, IDX_IMAGES, 3, path)
    return np.frombuffer(raw, dtype=np.uint8, count=n * rows * cols, offset=16).reshape(n, rows, cols)


def parse_idx_labels(raw: bytes, path="<bytes>") -> np.ndarray:
    (n,) = _idx_header(raw, IDX_LABELS, 1, path)
    return np.frombuffer(raw, dtype=np.uint8, count=n, offset=8)


def load_idx(images_path, labels_path, classes: int = 10, centered: bool = True) -> Dataset:
    """IDX image/label pair as a 784 x N dataset with pixels in [0, 1]."""
    images = parse_idx_images(_read_bytes(images_path), images_path)
    labels = parse_idx_labels(_read_bytes(labels_path), labels_path).astype(np.int64)
    if images.shape[0] != labels.shape[0]:
        raise CountMismatch(f"{images.shape[0]} images but {labels.shape[0]} labels")
    if labels.size and labels.max() >= classes:
        raise CountMismatch(f"label {labels.max()} outside [0, {classes})")
    X = images.reshape(images.shape[0], -1).T.astype(np.float64) / 255.0
    Y = one_hot_centered(labels, classes) if centered else np.eye(classes)[labels]
    return Dataset(X, Y, labels, {"name": Path(images_path).name, "classes": classes, "centered": centered})


def load_cifar_binary(paths, classes: int = 10, centered: bool = True) -> Dataset:
    """CIFAR binary batches: 3073-byte records for 10 classes, 3074 (coarse, fine) for 100.

    CIFAR-100 uses the fine label.
    """
    if isinstance(paths, (str, os.PathLike)):
        paths = [paths]
    header = 1 if classes == 10 else 2
    rec = header + CIFAR_PIXELS
    chunks, labels = [], []
    for path in paths:
        raw = _read_bytes(path)
        if len(raw) == 0 or len(raw) % rec:
            raise TruncatedFile(f"{path}: {len(raw)} bytes is not a whole number of {rec}-byte records")
        arr = np.frombuffer(raw, dtype=np.uint8).reshape(-1, rec)
        lab = arr[:, header - 1].astype(np.int64)
        if lab.max() >= classes:
            raise CountMismatch(f"{path}: label {lab.max()} outside [0, {classes})")
        labels.append(lab)
        chunks.append(arr[:, header:])
    pixels = np.concatenate(chunks)
    lab = np.concatenate(labels)
    X = pixels.T.astype(np.float64) / 255.0
    Y = one_hot_centered(lab, classes) if centered else np.eye(classes)[lab]
    return Dataset(X, Y, lab, {"name": f"cifar{classes}", "classes": classes, "centered": centered})


def write_idx(images: np.ndarray, labels: np.ndarray, images_path, labels_path) -> None:
    """Write uint8 images (N x rows x cols) and labels in IDX format; ``.gz`` paths are compressed."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    img = IDX_IMAGES.to_bytes(4, "big") + np.array(images.shape, dtype=">u4").tobytes() + images.tobytes()
    lab = IDX_LABELS.to_bytes(4, "big") + np.array([labels.size], dtype=">u4").tobytes() + labels.tobytes()
    for path, payload in ((images_path, img), (labels_path, lab)):
        opener = gzip.open if str(path).endswith(".gz") else open
        with opener(path, "wb") as fh:
            fh.write(payload)


# ------------------------------------------------------------ named datasets


def resolve_data_dir(data_dir=None) -> Path:
    """``data_dir`` argument, then ``$DATA_DIR``, then the repository's ``data/`` folder."""
    if data_dir:
        return Path(data_dir)
    if os.environ.get("DATA_DIR"):
        return Path(os.environ["DATA_DIR"])
    return Path(__file__).resolve().parents[2] / "data"


def load_mnist(data_dir=None, split: str = "train") -> Dataset:
    root = resolve_data_dir(data_dir) / "mnist"
    prefix = "train" if split == "train" else "t10k"
    return load_idx(root / f"{prefix}-images-idx3-ubyte", root / f"{prefix}-labels-idx1-ubyte")


def load_cifar(data_dir=None, classes: int = 10, split: str = "train") -> Dataset:
    root = resolve_data_dir(data_dir)
    if classes == 10:
        base = root / "cifar-10-batches-bin"
        names = [f"data_batch_{i}.bin" for i in range(1, 6)] if split == "train" else ["test_batch.bin"]
    elif classes == 100:
        base = root / "cifar-100-binary"
        names = ["train.bin" if split == "train" else "test.bin"]
    else:
        raise ShapeMismatch("CIFAR comes in 10 or 100 classes")
    paths = [base / name for name in names]
    missing = [str(p) for p in paths if not p.exists() and not p.with_name(p.name + ".gz").exists()]
    if missing:
        raise DatasetMissing(f"CIFAR-{classes} files missing: {', '.join(missing)}")
    return load_cifar_binary(paths, classes)


# ------------------------------------------------------------------ transforms


def subsample(ds: Dataset, n: int, seed: int = 0) -> Dataset:
    if n >= ds.n:
        return ds
    idx = np.sort(SplitMix64(seed).permutation(ds.n)[:n])
    out = ds.take(idx)
    out.meta["subsample"] = {"n": n, "seed": seed}
    return out


def corrupt_labels(ds: Dataset, p: float, seed: int = 0) -> Dataset:
    """Resample the label of a Bernoulli(p) subset uniformly over the classes."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    if ds.labels is None:
        raise ShapeMismatch("corrupt_labels needs class labels")
    C = ds.n_classes
    rng = SplitMix64(seed)
    mask = rng.uniform(ds.n) < p
    fresh = rng.integers(C, ds.n)
    labels = np.where(mask, fresh, ds.labels)
    centered = bool(ds.meta.get("centered", True))
    Y = one_hot_centered(labels, C) if centered else np.eye(C)[labels]
    meta = dict(ds.meta, corrupt_p=p, corrupt_seed=seed)
    return Dataset(ds.X, Y, labels, meta)


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray  # 1 where a feature is (numerically) constant

    def apply(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean[:, None]) / self.std[:, None]

    def invert(self, X) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) * self.std[:, None] + self.mean[:, None]


def fit_standardizer(X, min_std: float = 1e-12) -> Standardizer:
    X = np.asarray(X, dtype=np.float64)
    mean = X.mean(axis=1)
    std = X.std(axis=1)
    return Standardizer(mean, np.where(std < min_std, 1.0, std))


def standardize(X, min_std: float = 1e-12) -> tuple[np.ndarray, Standardizer]:
    """Per-feature (row) zero mean, unit std; near-constant features are only centered."""
    stats = fit_standardizer(X, min_std)
    return stats.apply(X), stats


def standardize_pair(train: Dataset, test: Dataset | None = None):
    """Standardise with training statistics and flag it in ``meta``."""
    Xtr, stats = standardize(train.X)
    train = replace(train, X=Xtr, meta=dict(train.meta, standardized=True))
    if test is None:
        return train, None
    return train, replace(test, X=stats.apply(test.X), meta=dict(test.meta, standardized=True))
