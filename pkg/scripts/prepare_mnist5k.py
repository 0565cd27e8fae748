"""Build the desk-scale MNIST split under data/mnist from the 5000-digit sample
shipped inside the mlxtend wheel.

    python3 scripts/prepare_mnist5k.py [--wheel path/to/mlxtend.whl] [--out data/mnist]

Without --wheel the script uses an installed mlxtend, or downloads the wheel
with pip. The output is gzipped IDX (4000 train / 1000 test, seeded split).
"""
from __future__ import annotations

import argparse
import gzip
import io
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))
from gramlab.data import write_idx  # noqa: E402
from gramlab.rng import SplitMix64  # noqa: E402

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def _csv_bytes(wheel: str | None) -> bytes:
    if wheel is None:
        try:
            import mlxtend

            return (Path(mlxtend.__file__).parent / "data" / "data" / "mnist_5k.csv.gz").read_bytes()
        except (ImportError, FileNotFoundError):
            tmp = tempfile.mkdtemp()
            subprocess.run([sys.executable, "-m", "pip", "download", "mlxtend", "--no-deps", "-d", tmp], check=True)
            wheel = str(next(Path(tmp).glob("mlxtend-*.whl")))
    with zipfile.ZipFile(wheel) as zf:
        return zf.read(MEMBER)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--wheel")
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "data" / "mnist"))
    ap.add_argument("--n-test", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    raw = gzip.decompress(_csv_bytes(args.wheel))
    table = np.loadtxt(io.BytesIO(raw), delimiter=",", dtype=np.int64)
    pixels, labels = table[:, :-1], table[:, -1]
    if pixels.shape[1] != 784:
        raise SystemExit(f"unexpected column count {table.shape[1]}")
    images = pixels.reshape(-1, 28, 28).astype(np.uint8)
    perm = SplitMix64(args.seed).permutation(len(labels))
    test, train = np.sort(perm[: args.n_test]), np.sort(perm[args.n_test:])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_idx(images[train], labels[train], out / "train-images-idx3-ubyte.gz", out / "train-labels-idx1-ubyte.gz")
    write_idx(images[test], labels[test], out / "t10k-images-idx3-ubyte.gz", out / "t10k-labels-idx1-ubyte.gz")
    print(f"wrote {len(train)} train / {len(test)} test digits to {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
