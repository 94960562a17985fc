#!/usr/bin/env python3
"""Build a 10,000-image MNIST subset in IDX format.

The images come from the `mnist` npm package (cazala/mnist), which ships
10k digits as per-class JSON arrays of 784 intensities scaled to [0, 1].
They are rescaled to bytes and written, in a fixed shuffled order, to

    data/mnist/mnist10k-images-idx3-ubyte
    data/mnist/mnist10k-labels-idx1-ubyte

Usage: python3 scripts/fetch_mnist.py [--out data/mnist]
"""
import argparse
import json
import random
import struct
import subprocess
import tarfile
import tempfile
from pathlib import Path


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data" / "mnist"))
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(["npm", "pack", "mnist@1.1.0"], cwd=tmp, check=True, capture_output=True)
        tgz = next(Path(tmp).glob("mnist-*.tgz"))
        with tarfile.open(tgz) as tf:
            tf.extractall(tmp)
        samples = []
        for digit in range(10):
            raw = json.loads((Path(tmp) / "package" / "src" / "digits" / f"{digit}.json").read_text())["data"]
            assert len(raw) % 784 == 0
            for i in range(len(raw) // 784):
                px = bytes(min(255, max(0, round(v * 255))) for v in raw[i * 784:(i + 1) * 784])
                samples.append((px, digit))

    random.Random(0).shuffle(samples)
    n = len(samples)
    with open(out / "mnist10k-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, 28, 28))
        for px, _ in samples:
            f.write(px)
    with open(out / "mnist10k-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, n))
        f.write(bytes(label for _, label in samples))
    print(f"wrote {n} images to {out}")


if __name__ == "__main__":
    main()
