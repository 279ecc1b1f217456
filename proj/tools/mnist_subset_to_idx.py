#!/usr/bin/env python3
"""Write a two-digit MNIST subset as IDX train/test files.

Input is a CSV (optionally gzipped) with 784 pixel columns followed by the
digit label, e.g. the 5000-image MNIST sample bundled with mlxtend
(mlxtend/data/data/mnist_5k.csv.gz). The original IDX files from the MNIST
site work too: point --images/--labels at them instead of --csv.
"""

import argparse
import gzip
import random
import struct
from pathlib import Path


def read_csv(path):
    opener = gzip.open if str(path).endswith(".gz") else open
    rows = []
    with opener(path, "rt") as f:
        for line in f:
            vals = [int(float(v)) for v in line.strip().split(",") if v]
            if len(vals) != 785:
                raise SystemExit(f"{path}: expected 785 columns, got {len(vals)}")
            rows.append((bytes(vals[:784]), vals[784]))
    return rows


def read_idx(images, labels):
    with open(images, "rb") as f:
        magic, n, r, c = struct.unpack(">IIII", f.read(16))
        if magic != 0x803:
            raise SystemExit(f"{images}: bad magic {magic:#x}")
        pix = f.read(n * r * c)
    with open(labels, "rb") as f:
        magic, m = struct.unpack(">II", f.read(8))
        if magic != 0x801 or m != n:
            raise SystemExit(f"{labels}: bad header")
        lab = f.read(m)
    return [(pix[i * r * c:(i + 1) * r * c], lab[i]) for i in range(n)]


def write_idx(prefix, rows):
    with open(f"{prefix}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(rows), 28, 28))
        for pix, _ in rows:
            f.write(pix)
    with open(f"{prefix}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(rows)))
        f.write(bytes(label for _, label in rows))


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--csv", type=Path)
    ap.add_argument("--images", type=Path)
    ap.add_argument("--labels", type=Path)
    ap.add_argument("--digits", type=int, nargs="+", default=[0, 1])
    ap.add_argument("--per-class", type=int, default=250, help="images per digit in each split")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("data/mnist01"))
    args = ap.parse_args()

    if args.csv:
        rows = read_csv(args.csv)
    elif args.images and args.labels:
        rows = read_idx(args.images, args.labels)
    else:
        raise SystemExit("give --csv or both --images and --labels")

    rng = random.Random(args.seed)
    train, test = [], []
    for d in args.digits:
        mine = [r for r in rows if r[1] == d]
        rng.shuffle(mine)
        if len(mine) < 2 * args.per_class:
            raise SystemExit(f"digit {d}: only {len(mine)} images, need {2 * args.per_class}")
        train += mine[:args.per_class]
        test += mine[args.per_class:2 * args.per_class]
    rng.shuffle(train)
    rng.shuffle(test)
    args.out.mkdir(parents=True, exist_ok=True)
    write_idx(args.out / "train", train)
    write_idx(args.out / "test", test)
    print(f"wrote {len(train)} train / {len(test)} test images to {args.out}")


if __name__ == "__main__":
    main()
