#!/usr/bin/env python3
"""Convert the digit JSON files of the `mnist` npm package into gzipped IDX files.

Usage: mnist_from_npm.py <package>/src/digits <out_dir>

Each JSON file holds {"data": [...]} with flattened 28x28 images stored as
round(pixel / 255, 3). Pixels are recovered exactly with round(v * 255).
Images are written in digit order (all 0s, then all 1s, ...).
"""
import gzip
import json
import struct
import sys
from pathlib import Path


def main():
    src, out = Path(sys.argv[1]), Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    pixels = bytearray()
    labels = bytearray()
    for digit in range(10):
        data = json.loads((src / f"{digit}.json").read_text())["data"]
        assert len(data) % 784 == 0
        for v in data:
            p = round(v * 255)
            assert 0 <= p <= 255
            pixels.append(p)
        labels.extend([digit] * (len(data) // 784))
    count = len(labels)
    with gzip.GzipFile(out / "images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, count, 28, 28))
        f.write(bytes(pixels))
    with gzip.GzipFile(out / "labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, count))
        f.write(bytes(labels))
    print(f"wrote {count} images to {out}")


if __name__ == "__main__":
    main()
