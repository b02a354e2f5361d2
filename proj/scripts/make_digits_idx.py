#!/usr/bin/env python3
"""Build a 28x28 handwritten-digit corpus in IDX format.

Sources the scikit-learn bundled digits (1797 8x8 images), splits them at the
source-image level (so no augmented copy of a test digit appears in training),
upscales to 28x28, and expands each split with random sub-pixel shifts and
mild noise to 10k train / 2k test samples.
"""
import argparse
import struct

import numpy as np
from scipy import ndimage
from sklearn.datasets import load_digits


def write_idx_images(path, images):
    n, h, w = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">iiii", 0x00000803, n, h, w))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">ii", 0x00000801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def upscale(img8):
    # 8x8 [0,16] -> 28x28 [0,1], bilinear with a touch of smoothing
    img = ndimage.zoom(img8 / 16.0, 28 / 8, order=1)
    img = ndimage.gaussian_filter(img, sigma=0.6)
    m = img.max()
    return img / m if m > 0 else img


def expand(base_images, base_labels, count, rng):
    out_images = np.zeros((count, 28, 28), dtype=np.uint8)
    out_labels = np.zeros(count, dtype=np.uint8)
    n = len(base_images)
    for i in range(count):
        j = i % n
        img = base_images[j]
        if i >= n:  # keep one pristine copy of every source image
            shift = rng.uniform(-2.0, 2.0, size=2)
            angle = rng.uniform(-8.0, 8.0)
            img = ndimage.rotate(img, angle, reshape=False, order=1, mode="constant")
            img = ndimage.shift(img, shift, order=1, mode="constant")
            img = img + rng.normal(0.0, 0.02, img.shape)
        out_images[i] = np.clip(img * 255.0, 0, 255).round().astype(np.uint8)
        out_labels[i] = base_labels[j]
    perm = rng.permutation(count)
    return out_images[perm], out_labels[perm]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out-dir", default="data")
    ap.add_argument("--train", type=int, default=10000)
    ap.add_argument("--test", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=20240817)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    digits = load_digits()
    images = np.array([upscale(x) for x in digits.images])
    labels = digits.target

    # stratified source-level split: every 5th source image of each class -> test
    test_mask = np.zeros(len(labels), dtype=bool)
    for c in range(10):
        idx = np.flatnonzero(labels == c)
        test_mask[idx[::5]] = True

    train_x, train_y = expand(images[~test_mask], labels[~test_mask], args.train, rng)
    test_x, test_y = expand(images[test_mask], labels[test_mask], args.test, rng)

    write_idx_images(f"{args.out_dir}/train-images-idx3-ubyte", train_x)
    write_idx_labels(f"{args.out_dir}/train-labels-idx1-ubyte", train_y)
    write_idx_images(f"{args.out_dir}/test-images-idx3-ubyte", test_x)
    write_idx_labels(f"{args.out_dir}/test-labels-idx1-ubyte", test_y)
    print(f"wrote {len(train_x)} train / {len(test_x)} test images to {args.out_dir}/")


if __name__ == "__main__":
    main()
