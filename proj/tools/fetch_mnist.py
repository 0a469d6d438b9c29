#!/usr/bin/env python3
"""Writes an MNIST subset as IDX files for the p-mnist / r-mnist datasets.

Source: the `mnist` npm package (10,010 digits, about 1,000 per class, pixel
values in [0, 1] with three decimals). The first 80% of each class go to the
training files, the rest to the t10k files; the order inside each split
interleaves classes deterministically.

    python3 tools/fetch_mnist.py --out data/mnist [--package mnist-1.1.0.tgz]

Without --package the tarball is fetched with `npm pack mnist@1.1.0`.
"""

import argparse
import json
import struct
import subprocess
import tarfile
import tempfile
from pathlib import Path

PIXELS = 28 * 28


def load_digits(tgz: Path):
    digits = {}
    with tarfile.open(tgz) as tar:
        for d in range(10):
            member = tar.extractfile(f"package/src/digits/{d}.json")
            values = json.load(member)["data"]
            n = len(values) // PIXELS
            digits[d] = [
                bytes(min(255, round(v * 255)) for v in values[i * PIXELS:(i + 1) * PIXELS])
                for i in range(n)
            ]
    return digits


def interleave(per_class):
    out = []
    longest = max(len(v) for v in per_class.values())
    for i in range(longest):
        for d in range(10):
            if i < len(per_class[d]):
                out.append((per_class[d][i], d))
    return out


def write_idx(prefix: Path, rows):
    with open(f"{prefix}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(rows), 28, 28))
        for img, _ in rows:
            f.write(img)
    with open(f"{prefix}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(rows)))
        f.write(bytes(label for _, label in rows))


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", type=Path, default=Path("data/mnist"))
    ap.add_argument("--package", type=Path, help="local mnist npm tarball")
    ap.add_argument("--train-fraction", type=float, default=0.8)
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        tgz = args.package
        if tgz is None:
            subprocess.run(["npm", "pack", "mnist@1.1.0", "--silent"], cwd=tmp, check=True,
                           stdout=subprocess.DEVNULL)
            tgz = Path(tmp) / "mnist-1.1.0.tgz"
        digits = load_digits(tgz)

    train = {d: v[:int(len(v) * args.train_fraction)] for d, v in digits.items()}
    test = {d: v[int(len(v) * args.train_fraction):] for d, v in digits.items()}
    args.out.mkdir(parents=True, exist_ok=True)
    write_idx(args.out / "train", interleave(train))
    write_idx(args.out / "t10k", interleave(test))
    print(f"train {sum(map(len, train.values()))}, test {sum(map(len, test.values()))} -> {args.out}")


if __name__ == "__main__":
    main()
