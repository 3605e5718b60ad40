"""Dataset readers and synthetic task generators."""

from dataclasses import dataclass
import gzip
import math
import os
from pathlib import Path
import struct

import numpy as np
from scipy import ndimage

from .numerics import RandomSource

IDX_IMAGES = 0x00000803
IDX_LABELS = 0x00000801
_UBYTE = 0x08
_MAX_ITEMS = 1 << 31


class IdxError(ValueError):
    pass


class BadMagicError(IdxError):
    pass


class TruncatedPayloadError(IdxError):
    pass


class DimensionOverflowError(IdxError):
    pass


@dataclass
class IdxTensor:
    magic: int
    dims: tuple
    payload: np.ndarray  # uint8, shaped by dims

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)


def _open(path):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def parse_idx(raw: bytes) -> IdxTensor:
    if len(raw) < 4:
        raise TruncatedPayloadError("file too short for an IDX header")
    (magic,) = struct.unpack(">I", raw[:4])
    ndim = magic & 0xFF
    if magic >> 16 != 0 or (magic >> 8) & 0xFF != _UBYTE or not 1 <= ndim <= 4:
        raise BadMagicError(f"bad IDX magic 0x{magic:08x}")
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise TruncatedPayloadError("file too short for its dimension header")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    size = math.prod(dims)
    if size >= _MAX_ITEMS * 64 or any(d >= _MAX_ITEMS for d in dims):
        raise DimensionOverflowError(f"IDX dimensions {dims} are implausibly large")
    if len(raw) - header < size:
        raise TruncatedPayloadError(f"payload has {len(raw) - header} bytes, header promises {size}")
    payload = np.frombuffer(raw, dtype=np.uint8, count=size, offset=header).reshape(dims)
    return IdxTensor(magic, dims, payload)


def load_idx(path) -> IdxTensor:
    with _open(path) as fh:
        return parse_idx(fh.read())


def write_idx(path, array):
    array = np.ascontiguousarray(array, dtype=np.uint8)
    if not 1 <= array.ndim <= 4:
        raise IdxError("IDX supports 1 to 4 dimensions")
    magic = (_UBYTE << 8) | array.ndim
    header = struct.pack(f">I{array.ndim}I", magic, *array.shape)
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "wb") as fh:
        fh.write(header)
        fh.write(array.tobytes())


MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


def find_mnist_file(root, key):
    root = Path(root)
    base = MNIST_FILES[key]
    for name in (base, base + ".gz", base.replace("-idx", ".idx"), base.replace("-idx", ".idx") + ".gz"):
        if (root / name).exists():
            return root / name
    raise FileNotFoundError(f"no {base}[.gz] under {root}")


def load_mnist(root):
    """(train_images, train_labels, test_images, test_labels) as uint8 arrays."""
    out = []
    for key in ("train_images", "train_labels", "test_images", "test_labels"):
        out.append(load_idx(find_mnist_file(root, key)).payload)
    return tuple(out)


def load_binarized_amat(path):
    """Pre-binarised MNIST in the whitespace-separated ``.amat`` layout."""
    data = np.loadtxt(path, dtype=np.uint8)
    if data.ndim != 2 or data.shape[1] != 784:
        raise IdxError(f"{path}: expected 784 columns, got shape {data.shape}")
    return data


def mnist_dir_from_env(default="data/mnist"):
    return Path(os.environ.get("GLN_MNIST_DIR", default))


def binarize(image, threshold=128):
    if not 0 < threshold < 255:
        raise ValueError("threshold must lie in (0, 255)")
    return (np.asarray(image) >= threshold).astype(np.uint8).reshape(-1)


def image_moments(image):
    """(total mass, centre row, centre col, mu_rr, mu_cc, mu_rc) of an intensity image."""
    image = np.asarray(image, dtype=np.float64)
    mass = image.sum()
    if mass <= 0:
        return 0.0, 0.0, 0.0, 0.0, 0.0, 0.0
    rows, cols = np.indices(image.shape)
    cr = (rows * image).sum() / mass
    cc = (cols * image).sum() / mass
    dr, dc = rows - cr, cols - cc
    return (mass, cr, cc, (dr * dr * image).sum() / mass,
            (dc * dc * image).sum() / mass, (dr * dc * image).sum() / mass)


def deskew(image):
    """Shear an image so its row/column intensity covariance vanishes.

    The shear is about the centre of mass: column ``c`` of the output reads
    the input at ``c + alpha * (r - centre_row)``, ``alpha = mu_rc / mu_rr``,
    with bilinear interpolation.
    """
    image = np.asarray(image, dtype=np.float64)
    mass, cr, _, mu_rr, _, mu_rc = image_moments(image)
    if mass <= 0 or mu_rr <= 0:
        return image.copy()
    alpha = mu_rc / mu_rr
    matrix = np.array([[1.0, 0.0], [alpha, 1.0]])
    offset = np.array([0.0, -alpha * cr])
    out = ndimage.affine_transform(image, matrix, offset=offset, order=1, mode="constant", cval=0.0)
    return np.clip(out, image.min(), image.max())


class RunningMean:
    """Per-feature mean of everything seen so far."""

    def __init__(self, dim):
        self.mean = np.zeros(dim)
        self.count = 0

    def update(self, x):
        self.count += 1
        self.mean += (np.asarray(x, dtype=np.float64) - self.mean) / self.count
        return self.mean


@dataclass
class LabeledExample:
    features: np.ndarray
    label: int


def spiral_dataset(n_per_class, rng: RandomSource, classes=3, noise=0.05, r_max=1.0, turns=1.0):
    """Interleaved spiral arms, one per class.

    A point of class ``c`` at arm position ``s`` in [0, 1] has radius
    ``s * r_max`` and angle ``2 pi c / classes + 2 pi turns s`` plus
    N(0, noise^2) angular jitter. Points are returned in shuffled order.
    For noise <= 0.2 the nearest noiseless arm (:func:`spiral_arc_label`)
    recovers the class of at least 99% of points.
    """
    s = (np.arange(n_per_class) + 0.5) / n_per_class
    feats, labels = [], []
    for c in range(classes):
        theta = 2 * np.pi * c / classes + 2 * np.pi * turns * s
        if noise > 0:
            theta = theta + rng.normal(0.0, noise, n_per_class)
        r = s * r_max
        feats.append(np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1))
        labels.append(np.full(n_per_class, c))
    feats = np.concatenate(feats)
    labels = np.concatenate(labels)
    order = rng.permutation(feats.shape[0])
    return [LabeledExample(feats[i], int(labels[i])) for i in order]


def spiral_arc_label(points, classes=3, r_max=1.0, turns=1.0, samples=2000):
    """Label each point by its nearest noiseless spiral arm."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    s = np.linspace(0.0, 1.0, samples)
    best = np.full(points.shape[0], np.inf)
    label = np.zeros(points.shape[0], dtype=np.int64)
    for c in range(classes):
        theta = 2 * np.pi * c / classes + 2 * np.pi * turns * s
        arc = np.stack([s * r_max * np.cos(theta), s * r_max * np.sin(theta)], axis=1)
        d = ((points[:, None, :] - arc[None, :, :]) ** 2).sum(-1).min(axis=1)
        closer = d < best
        best[closer] = d[closer]
        label[closer] = c
    return label


def gaussian_bump(z):
    return np.exp(-0.5 * np.asarray(z, dtype=np.float64) ** 2)


def gaussian_task_sample(rng: RandomSource, n=None):
    """z ~ U[-3, 3], x ~ Bernoulli(exp(-z^2 / 2))."""
    count = 1 if n is None else n
    z = rng.uniform(-3.0, 3.0, count)
    x = (rng.random(count) < gaussian_bump(z)).astype(np.int8)
    if n is None:
        return float(z[0]), int(x[0])
    return z, x


def xor_task_sample(rng: RandomSource, n=None):
    """z ~ U[-1, 1]^2, x = 1[z1 z2 >= 0] (noise-free)."""
    count = 1 if n is None else n
    z = rng.uniform(-1.0, 1.0, 2 * count).reshape(count, 2)
    x = (z[:, 0] * z[:, 1] >= 0).astype(np.int8)
    if n is None:
        return z[0], int(x[0])
    return z, x
