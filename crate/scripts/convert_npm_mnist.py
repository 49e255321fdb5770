"""Convert the digit samples bundled with the `mnist` npm package into IDX files.

The npm package ships one JSON file per class holding flattened 28x28 images
with intensities in [0, 1]. This script shuffles them with a fixed seed and
writes an 8000/2000 train/test split in the standard gzipped IDX container.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 scripts/convert_npm_mnist.py package/src/digits data/mnist
"""
import gzip
import json
import random
import struct
import sys
from pathlib import Path


def write_idx(path, magic, dims, payload):
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(struct.pack(">I", magic))
        for d in dims:
            f.write(struct.pack(">I", d))
        f.write(bytes(payload))


def main(src, dst):
    src, dst = Path(src), Path(dst)
    samples = []
    for label in range(10):
        data = json.loads((src / f"{label}.json").read_text())["data"]
        for i in range(0, len(data), 784):
            pixels = [min(255, max(0, round(v * 255))) for v in data[i:i + 784]]
            samples.append((pixels, label))
    random.Random(20240611).shuffle(samples)
    splits = {"train": samples[:8000], "t10k": samples[8000:]}
    dst.mkdir(parents=True, exist_ok=True)
    for name, items in splits.items():
        images = [p for pixels, _ in items for p in pixels]
        labels = [label for _, label in items]
        write_idx(dst / f"{name}-images-idx3-ubyte.gz", 0x00000803, [len(items), 28, 28], images)
        write_idx(dst / f"{name}-labels-idx1-ubyte.gz", 0x00000801, [len(items)], labels)


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
