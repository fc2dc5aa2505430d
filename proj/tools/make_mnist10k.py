#!/usr/bin/env python3
"""Build the bundled 10k MNIST subset as IDX files.

The source is the `mnist` npm package (MIT, Juan Cazala), which ships 10,000
MNIST digits as per-class JSON arrays of pixel intensities scaled to [0, 1]
and rounded to three decimals. Rounding back to the nearest multiple of 1/255
recovers the original 8-bit pixels exactly.

Samples are interleaved with a fixed permutation so that any prefix is
roughly class balanced. Usage:

    npm pack mnist && tar xzf mnist-1.1.0.tgz
    python3 tools/make_mnist10k.py package/src/digits data/
"""
import json
import pathlib
import struct
import sys
import tarfile

import numpy as np


def main(src: str, dst: str) -> None:
    images, labels = [], []
    for digit in range(10):
        flat = json.loads(pathlib.Path(src, f"{digit}.json").read_text())["data"]
        arr = np.rint(np.asarray(flat, dtype=np.float64) * 255.0).astype(np.uint8)
        arr = arr.reshape(-1, 28, 28)
        images.append(arr)
        labels.append(np.full(len(arr), digit, dtype=np.uint8))
    images = np.concatenate(images)
    labels = np.concatenate(labels)
    order = np.random.RandomState(20221011).permutation(len(labels))
    images, labels = images[order], labels[order]

    out = pathlib.Path(dst)
    out.mkdir(parents=True, exist_ok=True)
    img_path = out / "mnist10k-images-idx3-ubyte"
    lbl_path = out / "mnist10k-labels-idx1-ubyte"
    with open(img_path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        f.write(images.tobytes())
    with open(lbl_path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.tobytes())
    with tarfile.open(out / "mnist10k.tar.gz", "w:gz") as tar:
        tar.add(img_path, arcname=img_path.name)
        tar.add(lbl_path, arcname=lbl_path.name)
    img_path.unlink()
    lbl_path.unlink()
    print(f"wrote {len(labels)} samples, class counts {np.bincount(labels).tolist()}")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
