"""Builds the image inputs used by the memorize and autoencode tasks.

Writes <out>/camera150.pgm (150x150) and <out>/corpus/imgNNNN.pgm (32x32
grayscale crops). Needs numpy and scikit-image.

MNIST is not generated here: put the four standard IDX files
(train-images-idx3-ubyte, train-labels-idx1-ubyte, t10k-images-idx3-ubyte,
t10k-labels-idx1-ubyte) in <out>/mnist.
"""

import argparse
from pathlib import Path

import numpy as np
import skimage.data as data
from skimage.color import rgb2gray
from skimage.transform import resize

SOURCES = [
    "astronaut", "camera", "coffee", "chelsea", "rocket", "coins", "moon", "page", "text", "grass",
    "gravel", "brick", "hubble_deep_field", "immunohistochemistry", "retina", "cat", "colorwheel",
    "horse", "logo",
]


def save_pgm(path, img):
    a = np.clip(np.round(img * 255), 0, 255).astype(np.uint8)
    h, w = a.shape
    path.write_bytes(b"P5\n%d %d\n255\n" % (w, h) + a.tobytes())


def load_gray(name):
    im = np.asarray(getattr(data, name)(), dtype=float)
    if im.ndim == 3:
        im = rgb2gray(im[..., :3] / (255.0 if im.max() > 1 else 1.0))
    elif im.max() > 1:
        im = im / 255.0
    return im


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", type=Path, default=Path("/root/data"))
    ap.add_argument("--count", type=int, default=640)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    (args.out / "corpus").mkdir(parents=True, exist_ok=True)
    save_pgm(args.out / "camera150.pgm", resize(data.camera() / 255.0, (150, 150), anti_aliasing=True))

    images = [load_gray(n) for n in SOURCES]
    rng = np.random.default_rng(args.seed)
    for k in range(args.count):
        im = images[k % len(images)]
        h, w = im.shape
        side = int(rng.integers(32, min(h, w) // 3 + 33))
        y = int(rng.integers(0, h - side + 1))
        x = int(rng.integers(0, w - side + 1))
        patch = resize(im[y:y + side, x:x + side], (32, 32), anti_aliasing=True)
        save_pgm(args.out / "corpus" / f"img{k:04d}.pgm", patch)


if __name__ == "__main__":
    main()
