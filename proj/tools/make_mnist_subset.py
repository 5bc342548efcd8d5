#!/usr/bin/env python3
# Copyright 2026 The qfl Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Writes an IDX image/label pair holding selected MNIST digits.

Reads either a pair of standard MNIST IDX files or the 5000-sample CSV
bundled with the mlxtend wheel (mlxtend/data/data/mnist_5k.csv.gz; each row
is 784 pixels followed by the label). Samples keep their source order.
"""

import argparse
import gzip
import io
import struct
import zipfile

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


def read_idx_pair(images_path, labels_path):
    with open(images_path, "rb") as f:
        magic, count, rows, cols = struct.unpack(">IIII", f.read(16))
        if magic != IMAGES_MAGIC:
            raise ValueError(f"{images_path}: bad magic {magic:#010x}")
        pixels = f.read(count * rows * cols)
    with open(labels_path, "rb") as f:
        magic, n_labels = struct.unpack(">II", f.read(8))
        if magic != LABELS_MAGIC:
            raise ValueError(f"{labels_path}: bad magic {magic:#010x}")
        labels = f.read(n_labels)
    if n_labels != count:
        raise ValueError("image and label counts differ")
    size = rows * cols
    return [(pixels[i * size:(i + 1) * size], labels[i]) for i in range(count)]


def read_mlxtend_wheel(wheel_path):
    with zipfile.ZipFile(wheel_path) as z:
        raw = z.read("mlxtend/data/data/mnist_5k.csv.gz")
    samples = []
    for line in io.TextIOWrapper(gzip.GzipFile(fileobj=io.BytesIO(raw))):
        values = [int(v) for v in line.strip().split(",")]
        if len(values) != 785:
            raise ValueError("expected 785 columns per row")
        samples.append((bytes(values[:784]), values[784]))
    return samples


def write_idx(images_path, labels_path, samples):
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", IMAGES_MAGIC, len(samples), 28, 28))
        for pixels, _ in samples:
            f.write(pixels)
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", LABELS_MAGIC, len(samples)))
        f.write(bytes(label for _, label in samples))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--mlxtend-wheel", help="path to an mlxtend .whl")
    source.add_argument("--idx", nargs=2, metavar=("IMAGES", "LABELS"))
    parser.add_argument("--digits", default="0,1")
    parser.add_argument("--out-images", required=True)
    parser.add_argument("--out-labels", required=True)
    args = parser.parse_args()

    digits = {int(d) for d in args.digits.split(",")}
    if args.mlxtend_wheel:
        samples = read_mlxtend_wheel(args.mlxtend_wheel)
    else:
        samples = read_idx_pair(*args.idx)
    kept = [s for s in samples if s[1] in digits]
    write_idx(args.out_images, args.out_labels, kept)
    print(f"wrote {len(kept)} samples")


if __name__ == "__main__":
    main()
