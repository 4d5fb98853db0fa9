#!/usr/bin/env python3
"""Fetch MNIST as gzip-compressed IDX files.

Tries the canonical MNIST mirror first (full 60k/10k split). When that is not
reachable, falls back to the 10k-digit subset shipped in the `mnist` npm
package (https://github.com/cazala/mnist), which stores real MNIST digits as
pixel/255 rounded to three decimals. Rounding back to bytes is exact. The
subset is shuffled with a fixed seed and split 8000 train / 2000 test.

Usage: tools/fetch_mnist.py [OUT_DIR]   (default: data/mnist)
"""
import gzip
import json
import os
import random
import struct
import subprocess
import sys
import tarfile
import tempfile
import urllib.request

FILES = [
    "train-images-idx3-ubyte.gz",
    "train-labels-idx1-ubyte.gz",
    "t10k-images-idx3-ubyte.gz",
    "t10k-labels-idx1-ubyte.gz",
]
MIRROR = "https://storage.googleapis.com/cvdf-datasets/mnist/"


def try_mirror(out_dir):
    try:
        for name in FILES:
            with urllib.request.urlopen(MIRROR + name, timeout=20) as r:
                blob = r.read()
            with open(os.path.join(out_dir, name), "wb") as f:
                f.write(blob)
        return True
    except Exception as exc:  # noqa: BLE001
        print(f"mirror unavailable ({exc}); using npm subset", file=sys.stderr)
        return False


def write_idx(out_dir, prefix, images, labels):
    with gzip.GzipFile(os.path.join(out_dir, f"{prefix}-images-idx3-ubyte.gz"),
                       "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 2051, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))
    with gzip.GzipFile(os.path.join(out_dir, f"{prefix}-labels-idx1-ubyte.gz"),
                       "wb", mtime=0) as f:
        f.write(struct.pack(">II", 2049, len(labels)))
        f.write(bytes(labels))


def from_npm(out_dir):
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(["npm", "pack", "mnist@1.1.0"], cwd=tmp, check=True,
                       stdout=subprocess.DEVNULL)
        with tarfile.open(os.path.join(tmp, "mnist-1.1.0.tgz")) as tar:
            tar.extractall(tmp)
        samples = []
        for digit in range(10):
            path = os.path.join(tmp, "package", "src", "digits", f"{digit}.json")
            with open(path) as f:
                data = json.load(f)["data"]
            for k in range(len(data) // 784):
                px = [int(round(v * 255)) for v in data[k * 784:(k + 1) * 784]]
                samples.append((px, digit))
    random.Random(20240601).shuffle(samples)
    train, test = samples[:8000], samples[8000:]
    write_idx(out_dir, "train", [s[0] for s in train], [s[1] for s in train])
    write_idx(out_dir, "t10k", [s[0] for s in test], [s[1] for s in test])


def main():
    out_dir = sys.argv[1] if len(sys.argv) > 1 else "data/mnist"
    os.makedirs(out_dir, exist_ok=True)
    if not try_mirror(out_dir):
        from_npm(out_dir)
    print(f"wrote MNIST IDX files to {out_dir}")


if __name__ == "__main__":
    main()
