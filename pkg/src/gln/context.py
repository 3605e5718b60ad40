"""Context functions: maps from side information to a weight-row index.

Every context function exposes ``size`` (the number of context ids) and is
callable on side information. Multi-bit ids are big-endian in declaration
order: the first part is the most significant digit.

Image contexts are defined by pixel offsets ``(drow, dcol)`` relative to the
pixel being predicted and are evaluated on ``(image, pixel_index)`` pairs in
row-major order. Pixels outside the image read as 0. Offsets must point
strictly backwards in row-major order; that is checked when the context is
built.

The ``*Bank`` classes evaluate many context functions at once with numpy;
they are what the networks use on the hot path.
"""

from dataclasses import dataclass, field
from importlib import resources
import math
from typing import Sequence

import numpy as np

from .numerics import RandomSource


class ContextError(ValueError):
    pass


@dataclass
class HalfSpaceContext:
    normal: np.ndarray
    offset: float = 0.0
    size: int = field(default=2, init=False)

    def __post_init__(self):
        self.normal = np.asarray(self.normal, dtype=np.float64)
        self.offset = float(self.offset)

    def __call__(self, z):
        z = np.asarray(z, dtype=np.float64)
        if z.shape != self.normal.shape:
            raise ContextError(f"side information shape {z.shape} != normal shape {self.normal.shape}")
        return int(float(np.dot(z, self.normal)) >= self.offset)


def eval_halfspace(ctx, z):
    return ctx(z)


@dataclass
class SkipGramContext:
    """Selected coordinates of (thresholded) side information, as a binary number."""

    indices: Sequence[int]
    threshold: float = 0.5

    def __post_init__(self):
        self.indices = tuple(int(i) for i in self.indices)
        if not self.indices:
            raise ContextError("a skip-gram needs at least one index")

    @property
    def size(self):
        return 1 << len(self.indices)

    def __call__(self, z):
        z = np.asarray(z)
        out = 0
        for i in self.indices:
            if not 0 <= i < z.shape[0]:
                raise ContextError(f"skip-gram index {i} out of bounds for length {z.shape[0]}")
            out = (out << 1) | int(z[i] >= self.threshold)
        return out


def eval_skipgram(ctx, z):
    return ctx(z)


@dataclass
class ComposedContext:
    parts: Sequence

    def __post_init__(self):
        self.parts = tuple(self.parts)
        if not self.parts:
            raise ContextError("cannot compose an empty list of contexts")

    @property
    def size(self):
        return math.prod(p.size for p in self.parts)

    def __call__(self, z):
        return compose(self.parts, z)


def compose(parts, z):
    """Mixed-radix encoding of the part ids; the first part is most significant."""
    out = 0
    for part in parts:
        out = out * part.size + int(part(z))
    return out


@dataclass
class ConstantContext:
    """The trivial gate: every input maps to context 0."""

    size: int = field(default=1, init=False)

    def __call__(self, z):
        return 0


# -- image contexts -----------------------------------------------------------


def is_causal(offset):
    dr, dc = offset
    return dr < 0 or (dr == 0 and dc < 0)


def _pixel_value(image, shape, row, col):
    h, w = shape
    if 0 <= row < h and 0 <= col < w:
        return int(image[row * w + col])
    return 0


class ImageContext:
    """Probes are regions of relative offsets; a region fires if any of its pixels is 1.

    ``encoding='binary'`` concatenates the region bits (big-endian);
    ``encoding='first'`` returns the 1-based index of the first firing
    region, or 0 when none fires.
    """

    def __init__(self, regions, encoding="binary", shape=(28, 28), name=None):
        if encoding not in ("binary", "first"):
            raise ContextError(f"unknown encoding {encoding!r}")
        regions = [tuple((int(dr), int(dc)) for dr, dc in region) for region in regions]
        if not regions or any(not r for r in regions):
            raise ContextError("image contexts need at least one non-empty region")
        for region in regions:
            for off in region:
                if not is_causal(off):
                    raise ContextError(f"offset {off} is not strictly before the current pixel")
        self.regions = regions
        self.encoding = encoding
        self.shape = tuple(shape)
        self.name = name

    @property
    def size(self):
        if self.encoding == "binary":
            return 1 << len(self.regions)
        return len(self.regions) + 1

    def region_bits(self, image, pixel):
        h, w = self.shape
        row, col = divmod(int(pixel), w)
        return [
            max(_pixel_value(image, self.shape, row + dr, col + dc) for dr, dc in region)
            for region in self.regions
        ]

    def __call__(self, z, pixel=None):
        image, pixel = z if pixel is None else (z, pixel)
        bits = self.region_bits(image, pixel)
        if self.encoding == "binary":
            out = 0
            for b in bits:
                out = (out << 1) | b
            return out
        for k, b in enumerate(bits, start=1):
            if b:
                return k
        return 0

    def to_dict(self):
        return {"regions": [list(map(list, r)) for r in self.regions], "encoding": self.encoding,
                "shape": list(self.shape), "name": self.name}

    @classmethod
    def from_dict(cls, d):
        return cls([[tuple(o) for o in r] for r in d["regions"]], d["encoding"], tuple(d["shape"]), d.get("name"))

    def __repr__(self):
        return f"{type(self).__name__}(name={self.name!r}, regions={len(self.regions)}, encoding={self.encoding!r})"


class PixelSkipGramContext(ImageContext):
    def __init__(self, offsets, shape=(28, 28), name=None):
        super().__init__([[o] for o in offsets], "binary", shape, name)


class MaxPoolContext(ImageContext):
    def __init__(self, regions, shape=(28, 28), name=None):
        super().__init__(regions, "binary", shape, name)


class DistanceContext(ImageContext):
    def __init__(self, probes, shape=(28, 28), name=None):
        super().__init__([[o] for o in probes], "first", shape, name)


def eval_maxpool(ctx, image, pixel):
    return ctx(image, pixel)


def eval_distance(ctx, image, pixel):
    return ctx(image, pixel)


PRESET_VERSION = 1


def _parse_cells(text):
    out = []
    for cell in text.split():
        dr, dc = cell.split(",")
        out.append((int(dr), int(dc)))
    return out


def parse_presets(text, shape=(28, 28)):
    """Parse the ``kind.name = offsets`` preset format into named contexts."""
    out = {}
    version = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ContextError(f"preset line {lineno}: expected 'key = value'")
        key, value = key.strip(), value.strip()
        if key == "version":
            version = int(value)
            if version != PRESET_VERSION:
                raise ContextError(f"unsupported preset version {version}")
            continue
        kind, _, name = key.partition(".")
        try:
            if kind == "skipgram":
                out[name] = PixelSkipGramContext(_parse_cells(value), shape, name)
            elif kind == "maxpool":
                out[name] = MaxPoolContext([_parse_cells(r) for r in value.split("|")], shape, name)
            elif kind == "distance":
                out[name] = DistanceContext(_parse_cells(value), shape, name)
            else:
                raise ContextError(f"preset line {lineno}: unknown kind {kind!r}")
        except ValueError as exc:
            raise ContextError(f"preset line {lineno}: {exc}") from exc
    if version is None:
        raise ContextError("preset file has no version line")
    return out


def format_presets(contexts):
    lines = [f"version = {PRESET_VERSION}"]
    for name, ctx in contexts.items():
        cells = [" ".join(f"{dr},{dc}" for dr, dc in r) for r in ctx.regions]
        if isinstance(ctx, MaxPoolContext):
            kind = "maxpool"
        elif ctx.encoding == "first":
            kind = "distance"
        else:
            kind = "skipgram"
        lines.append(f"{kind}.{name} = " + (" | " if kind == "maxpool" else " ").join(cells))
    return "\n".join(lines) + "\n"


def load_image_presets(shape=(28, 28)):
    """Named skip-gram / max-pool / distance patterns shipped with the package."""
    text = resources.files("gln.presets").joinpath("image_contexts.txt").read_text()
    return parse_presets(text, shape)


# -- sampling -----------------------------------------------------------------


def sample_halfspace(rng: RandomSource, d, sigma_v, sigma_b):
    if sigma_v < 0 or sigma_b < 0:
        raise ValueError("standard deviations must be non-negative")
    normal = rng.normal(0.0, sigma_v, d)
    offset = rng.normal(0.0, sigma_b) if sigma_b > 0 else 0.0
    return HalfSpaceContext(normal, offset)


# -- vectorised banks ---------------------------------------------------------


class HalfSpaceBank:
    """``n`` context functions, each a composition of ``bits`` half-spaces in R^d."""

    def __init__(self, normals, offsets):
        normals = np.asarray(normals, dtype=np.float64)
        offsets = np.asarray(offsets, dtype=np.float64)
        if normals.ndim != 3 or offsets.shape != normals.shape[:2]:
            raise ContextError("normals must be (n, bits, d) and offsets (n, bits)")
        self.normals = normals
        self.offsets = offsets
        n, bits, d = normals.shape
        self._flat = np.ascontiguousarray(normals.reshape(n * bits, d).T)
        self._flat_offsets = offsets.reshape(n * bits)
        self._place = (1 << np.arange(bits - 1, -1, -1)).astype(np.int64)

    @classmethod
    def sample(cls, rng, n, bits, d, sigma_v, sigma_b):
        normals = rng.normal(0.0, sigma_v, (n, bits, d))
        if sigma_b > 0:
            offsets = rng.normal(0.0, sigma_b, (n, bits))
        else:
            offsets = np.zeros((n, bits))
        return cls(normals, offsets)

    @property
    def count(self):
        return self.normals.shape[0]

    @property
    def sizes(self):
        return np.full(self.count, 1 << self.normals.shape[1], dtype=np.int64)

    def __call__(self, z):
        z = np.asarray(z, dtype=np.float64)
        if z.shape[-1] != self.normals.shape[2]:
            raise ContextError(f"side information has dim {z.shape[-1]}, expected {self.normals.shape[2]}")
        fired = (z @ self._flat) >= self._flat_offsets
        fired = fired.reshape(z.shape[:-1] + self.normals.shape[:2])
        return fired.astype(np.int64) @ self._place

    def context(self, i):
        return ComposedContext([HalfSpaceContext(v, b) for v, b in zip(self.normals[i], self.offsets[i])])

    def state(self):
        return {"normals": self.normals, "offsets": self.offsets}


class ImageContextBank:
    """Evaluates a list of :class:`ImageContext` at every pixel of an image at once.

    ``bank(image)`` returns an int array of shape ``(n_pixels, n_contexts)``.
    All cells of all regions are gathered in one flat pass; region values and
    context ids are then segment reductions along the cell axis.
    """

    def __init__(self, contexts, shape=(28, 28)):
        self.contexts = list(contexts)
        self.shape = tuple(shape)
        if not self.contexts:
            raise ContextError("empty context bank")
        h, w = self.shape
        n_pix = h * w
        rows, cols = np.divmod(np.arange(n_pix), w)
        cells, region_starts, region_place, region_rank = [], [], [], []
        context_starts = []
        for ctx in self.contexts:
            context_starts.append(len(region_starts))
            k = len(ctx.regions)
            for r, region in enumerate(ctx.regions):
                region_starts.append(len(cells))
                region_place.append(1 << (k - 1 - r) if ctx.encoding == "binary" else 0)
                region_rank.append(r + 1)
                cells.extend(region)
        index = np.full((n_pix, len(cells)), n_pix, dtype=np.intp)  # n_pix -> always-zero cell
        for j, (dr, dc) in enumerate(cells):
            rr, cc = rows + dr, cols + dc
            ok = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
            index[ok, j] = rr[ok] * w + cc[ok]
        self._index = index
        self._region_starts = np.array(region_starts, dtype=np.intp)
        self._single_cell = all(len(r) == 1 for c in self.contexts for r in c.regions)
        self._place = np.array(region_place, dtype=np.int64)
        self._rank = np.array(region_rank, dtype=np.int64)
        self._context_starts = np.array(context_starts, dtype=np.intp)
        self._binary = np.array([c.encoding == "binary" for c in self.contexts])
        self._none = np.iinfo(np.int64).max
        self.sizes = np.array([c.size for c in self.contexts], dtype=np.int64)

    @property
    def count(self):
        return len(self.contexts)

    def __call__(self, image):
        flat = np.zeros(self.shape[0] * self.shape[1] + 1, dtype=np.int64)
        flat[:-1] = np.asarray(image).reshape(-1) != 0
        fired = flat[self._index]
        if not self._single_cell:
            fired = np.maximum.reduceat(fired, self._region_starts, axis=1)
        binary_ids = np.add.reduceat(fired * self._place, self._context_starts, axis=1)
        if self._binary.all():
            return binary_ids
        first = np.minimum.reduceat(np.where(fired > 0, self._rank, self._none), self._context_starts, axis=1)
        first[first == self._none] = 0
        return np.where(self._binary, binary_ids, first)
