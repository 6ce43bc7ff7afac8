#!/usr/bin/env python3
"""Convert the per-class JSON files of the `fashion-mnist` npm package to IDX.

The package ships src/clothes/<label>.json, each {"data": [[784 ints 0..255], ...]}
with 7000 images per class and no train/test split. Images 0..5999 of every
class become training data and 6000..6999 test data; classes are interleaved
so neither file is sorted by label.

    python3 tools/fashion_json_to_idx.py path/to/package/src/clothes out_dir
"""

import argparse
import gzip
import json
import pathlib
import struct
import sys

import numpy as np

PIXELS = 28 * 28


def load_class(path: pathlib.Path) -> np.ndarray:
    rows = [r for r in json.loads(path.read_text())["data"] if len(r) == PIXELS]
    return np.asarray(rows, dtype=np.uint8)


def interleave(blocks: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    n = min(len(b) for b in blocks)
    images = np.stack([b[:n] for b in blocks], axis=1).reshape(-1, PIXELS)
    labels = np.tile(np.arange(len(blocks), dtype=np.uint8), n)
    return images, labels


def write_idx(path: pathlib.Path, array: np.ndarray, compress: bool) -> None:
    header = struct.pack(">BBBB", 0, 0, 0x08, array.ndim) + struct.pack(f">{array.ndim}I", *array.shape)
    payload = header + array.astype(np.uint8).tobytes()
    if compress:
        with gzip.open(path.with_name(path.name + ".gz"), "wb") as f:
            f.write(payload)
    else:
        path.write_bytes(payload)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("clothes_dir", type=pathlib.Path)
    ap.add_argument("out_dir", type=pathlib.Path)
    ap.add_argument("--train-per-class", type=int, default=6000)
    ap.add_argument("--gzip", action="store_true")
    args = ap.parse_args()

    classes = [load_class(args.clothes_dir / f"{label}.json") for label in range(10)]
    short = [(i, len(c)) for i, c in enumerate(classes) if len(c) <= args.train_per_class]
    if short:
        print(f"classes with too few images: {short}", file=sys.stderr)
        return 1

    args.out_dir.mkdir(parents=True, exist_ok=True)
    k = args.train_per_class
    for name, blocks in (("train", [c[:k] for c in classes]), ("t10k", [c[k:] for c in classes])):
        images, labels = interleave(blocks)
        write_idx(args.out_dir / f"{name}-images-idx3-ubyte", images.reshape(-1, 28, 28), args.gzip)
        write_idx(args.out_dir / f"{name}-labels-idx1-ubyte", labels, args.gzip)
        print(f"{name}: {len(labels)} images")
    return 0


if __name__ == "__main__":
    sys.exit(main())
