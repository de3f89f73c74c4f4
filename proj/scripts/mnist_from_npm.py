#!/usr/bin/env python3
"""Build a small MNIST subset in IDX format from the `mnist` npm package.

    npm pack mnist@1.1.0 && tar xzf mnist-1.1.0.tgz
    python3 scripts/mnist_from_npm.py package/src/digits tests/data/mnist

The package stores each digit class as a JSON file of 784-float rows scaled
to [0, 1]; pixels are restored with round(v * 255).
"""
import argparse
import json
import random
import struct
from pathlib import Path

PIXELS = 28 * 28


def load_digit(path):
    data = json.loads(Path(path).read_text())["data"]
    assert len(data) % PIXELS == 0, path
    return [
        bytes(min(255, max(0, round(v * 255))) for v in data[i : i + PIXELS])
        for i in range(0, len(data), PIXELS)
    ]


def write_idx(prefix, rows):
    images = Path(f"{prefix}-images-idx3-ubyte")
    labels = Path(f"{prefix}-labels-idx1-ubyte")
    with images.open("wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(rows), 28, 28))
        for _, img in rows:
            f.write(img)
    with labels.open("wb") as f:
        f.write(struct.pack(">II", 0x801, len(rows)))
        f.write(bytes(label for label, _ in rows))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("digits_dir")
    ap.add_argument("out_dir")
    ap.add_argument("--train-per-class", type=int, default=200)
    ap.add_argument("--test-per-class", type=int, default=100)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    train, test = [], []
    for d in range(10):
        imgs = load_digit(Path(args.digits_dir) / f"{d}.json")
        need = args.train_per_class + args.test_per_class
        assert len(imgs) >= need, f"digit {d}: only {len(imgs)} images"
        train += [(d, im) for im in imgs[: args.train_per_class]]
        test += [(d, im) for im in imgs[args.train_per_class : need]]
    rng = random.Random(args.seed)
    rng.shuffle(train)
    rng.shuffle(test)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_idx(out / "train", train)
    write_idx(out / "t10k", test)
    print(f"wrote {len(train)} train and {len(test)} test images to {out}")


if __name__ == "__main__":
    main()
