#!/usr/bin/env python3
"""Write a digit-interleaved MNIST subset in IDX format.

Source: the `mnist` npm package (src/digits/<d>.json, 784 floats per image
in [0,1] with three decimals). Obtain it with `npm pack mnist` and unpack.

usage: make_mnist_subset.py <package/src/digits> <out_dir> [count]
"""
import json
import struct
import sys
from pathlib import Path


def main():
    digits_dir = Path(sys.argv[1])
    out_dir = Path(sys.argv[2])
    count = int(sys.argv[3]) if len(sys.argv) > 3 else 2000

    per_digit = []
    for d in range(10):
        flat = json.loads((digits_dir / f"{d}.json").read_text())["data"]
        per_digit.append([flat[i:i + 784] for i in range(0, len(flat), 784)])

    images, labels = bytearray(), bytearray()
    for k in range(count):
        d, idx = k % 10, k // 10
        img = per_digit[d][idx]
        images.extend(min(255, max(0, round(v * 255))) for v in img)
        labels.append(d)

    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, count, 28, 28))
        f.write(images)
    with open(out_dir / "labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, count))
        f.write(labels)


if __name__ == "__main__":
    main()
