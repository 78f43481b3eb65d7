"""Write the 5000-digit MNIST subset bundled with mlxtend as IDX files.

Usage: python scripts/make_mnist_subset.py data/mnist5k

Produces train (4000) / test (1000) image and label files, split per digit
with a fixed seed so the output is byte-identical on every run.
"""

import gzip
import io
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from infoviews.bitdata import write_idx


def main(out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    raw = resources.files("mlxtend.data").joinpath("data/mnist_5k.csv.gz").read_bytes()
    table = np.loadtxt(io.StringIO(gzip.decompress(raw).decode()), delimiter=",",
                       dtype=np.int64)
    images, labels = table[:, :-1].astype(np.uint8), table[:, -1].astype(np.uint8)

    rng = np.random.default_rng(20120101)
    test = np.zeros(labels.size, dtype=bool)
    for d in range(10):
        rows = np.flatnonzero(labels == d)
        test[rng.permutation(rows)[: rows.size // 5]] = True

    for name, mask in (("train", ~test), ("t10k", test)):
        write_idx(out / f"{name}-images-idx3-ubyte.gz", images[mask].reshape(-1, 28, 28))
        write_idx(out / f"{name}-labels-idx1-ubyte.gz", labels[mask])
        print(f"{name}: {mask.sum()} samples")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/mnist5k")
