"""Autoregressive binary-image density model: one gated linear network per pixel.

Every pixel network has the same shape, so the 784 networks are trained as
one batch. Base predictions come from skip-gram models with Zero-Redundancy
counters; neurons gate on skip-gram, max-pool and distance contexts. All
contexts read only pixels strictly before the current one in row-major
order, so each pixel's prediction is a function of the prefix alone.
"""

from dataclasses import dataclass

import numpy as np

from ..base_models import ZRTable
from ..context import ImageContextBank, PixelSkipGramContext, is_causal, load_image_presets
from ..mixer import parse_schedule
from ..network import ContextIds, GatedLinearNetwork, NetworkSpec, output_probability
from ..numerics import BETA, DEFAULT_EPSILON, RandomSource
from ..switching import SwitchingMixture

SHAPE = (28, 28)


@dataclass
class DensityConfig:
    widths: tuple = (8, 16, 8, 16)
    n_skipgrams: int = 50
    n_contexts: int = 40
    max_skipgram_bits: int = 8
    max_gate_bits: int = 5
    window: int = 6
    bound: float = 200.0
    epsilon: float = DEFAULT_EPSILON
    beta: float = BETA
    schedule: str = "inv:25:0.005"
    switching: bool = True
    init: str = "zero"


def causal_window(radius):
    return [(dr, dc) for dr in range(-radius, 1) for dc in range(-radius, radius + 1) if is_causal((dr, dc))]


def random_skipgram(rng, radius, bits, shape=SHAPE, name=None):
    cells = causal_window(radius)
    pick = rng.choice(len(cells), bits)
    return PixelSkipGramContext([cells[i] for i in sorted(pick)], shape, name)


def build_skipgram_library(rng, count, max_bits, radius, shape=SHAPE):
    """Preset geometric patterns first, then random causal skip-grams."""
    presets = load_image_presets(shape)
    lib = [c for c in presets.values() if isinstance(c, PixelSkipGramContext) and len(c.regions) <= max_bits]
    lib = lib[:count]
    while len(lib) < count:
        bits = rng.integers(1, max_bits + 1)
        lib.append(random_skipgram(rng, radius, bits, shape, name=f"random{len(lib)}"))
    return lib


def build_gate_library(rng, count, max_bits, radius, shape=SHAPE):
    """Max-pool and distance presets plus small skip-grams, for neuron gating."""
    presets = load_image_presets(shape)
    lib = [c for c in presets.values() if c.size <= (1 << max_bits)]
    lib = lib[:count]
    while len(lib) < count:
        bits = rng.integers(1, max_bits + 1)
        lib.append(random_skipgram(rng, radius, bits, shape, name=f"gate{len(lib)}"))
    return lib


class AutoregressiveDensityModel:
    def __init__(self, cfg: DensityConfig, seed=0, backend=None, shape=SHAPE):
        self.cfg = cfg
        self.shape = tuple(shape)
        self.n_pixels = self.shape[0] * self.shape[1]
        rng = RandomSource(seed)
        self.base_bank = ImageContextBank(
            build_skipgram_library(rng.spawn("skipgrams"), cfg.n_skipgrams, cfg.max_skipgram_bits, cfg.window,
                                   self.shape), self.shape)
        self.gate_bank = ImageContextBank(
            build_gate_library(rng.spawn("gates"), cfg.n_contexts, cfg.max_gate_bits, cfg.window, self.shape),
            self.shape)
        self.spec = NetworkSpec(self.base_bank.count, cfg.widths, beta=cfg.beta, epsilon=cfg.epsilon,
                                bound=cfg.bound, init=cfg.init, schedule=parse_schedule(cfg.schedule))
        n = self.spec.n_neurons
        self.assignment = rng.spawn("assignment").integers(0, self.gate_bank.count, self.n_pixels * n)
        self.assignment = self.assignment.reshape(self.n_pixels, n)
        sizes = self.gate_bank.sizes[self.assignment]
        self.net = GatedLinearNetwork(self.spec, ContextIds(sizes), self.n_pixels, backend)
        offsets = np.concatenate([[0], np.cumsum(self.base_bank.sizes)])
        self._table_offsets = offsets[:-1]
        self.table = ZRTable((self.n_pixels, int(offsets[-1])))
        self.mixture = SwitchingMixture(n, batch=self.n_pixels) if cfg.switching else None
        self.images_seen = 0
        self._rows = np.arange(self.n_pixels)[:, None]

    def _prepare(self, image):
        image = np.asarray(image).reshape(-1)
        if image.shape[0] != self.n_pixels:
            raise ValueError(f"image has {image.shape[0]} pixels, expected {self.n_pixels}")
        bits = (image != 0).astype(np.int8)
        base_ids = self.base_bank(bits) + self._table_offsets
        base = self.table.predict((self._rows, base_ids))
        gate_ids = self.gate_bank(bits)
        ctx = np.take_along_axis(gate_ids, self.assignment, axis=1)
        return bits, base_ids, base, ctx

    def pixel_probabilities(self, image):
        """P(pixel_i = 1 | pixels before i) for every pixel; no learning."""
        _, _, base, ctx = self._prepare(image)
        trace = self.net.forward(base, ctx)
        return self._predict(trace)

    def _predict(self, trace):
        if self.mixture is None:
            return output_probability(trace)
        return self.mixture.predict(self.net.neuron_probabilities(trace))

    def step(self, image, learn=True):
        """Log loss of ``image`` in nats; learns from it afterwards when ``learn``."""
        bits, base_ids, base, ctx = self._prepare(image)
        trace = self.net.forward(base, ctx)
        if self.mixture is None:
            p = output_probability(trace)
        else:
            preds = self.net.neuron_probabilities(trace)
            p = self.mixture.predict(preds)
        p_obs = np.where(bits == 1, p, 1.0 - p)
        loss = float(-np.log(p_obs).sum())
        if learn:
            self.images_seen += 1
            self.net.update(trace, bits.astype(np.float64), t=self.images_seen)
            if self.mixture is not None:
                self.mixture.update(preds, bits)
            self.table.update((self._rows, base_ids), np.broadcast_to(bits[:, None], base_ids.shape))
        return loss

    def state(self):
        out = dict(self.net.state())
        out.update(self.table.state())
        out["assignment"] = self.assignment
        out["images_seen"] = np.array(self.images_seen)
        if self.mixture is not None:
            out.update(self.mixture.state())
        return out

    def load_state(self, arrays):
        self.net.load_state(arrays)
        self.table.load_state(arrays)
        self.assignment = np.asarray(arrays["assignment"])
        self.images_seen = int(arrays["images_seen"])
        if self.mixture is not None:
            self.mixture.load_state(arrays)


def density_step(model, image, learn=True):
    return model.step(image, learn)


class IndependentZRBaseline:
    """Each pixel predicted by its own context-free ZR estimator."""

    def __init__(self, n_pixels=784):
        self.table = ZRTable((n_pixels,))
        self._idx = np.arange(n_pixels)

    def step(self, image, learn=True):
        bits = (np.asarray(image).reshape(-1) != 0)
        p = self.table.predict()
        loss = float(-np.log(np.where(bits, p, 1.0 - p)).sum())
        if learn:
            self.table.update(self._idx, bits)
        return loss


def smoothed_blocks(losses, blocks=10):
    losses = np.asarray(losses, dtype=np.float64)
    blocks = max(1, min(blocks, losses.shape[0]))
    return np.array([chunk.mean() for chunk in np.array_split(losses, blocks)])


def is_monotone_decreasing(losses, blocks=10):
    means = smoothed_blocks(losses, blocks)
    return bool(np.all(np.diff(means) <= 0)), means


def run_density(cfg: DensityConfig, train_images, test_images, seed=0, metrics=None, backend=None,
                progress=None, baseline=True):
    """Single pass over the concatenated stream; learning stays on over the test segment."""
    model = AutoregressiveDensityModel(cfg, seed, backend)
    base = IndependentZRBaseline(model.n_pixels) if baseline else None
    train_losses, test_losses, base_test = [], [], []
    stream = [(img, "train") for img in train_images] + [(img, "test") for img in test_images]
    for i, (img, split) in enumerate(stream):
        loss = model.step(img, learn=True)
        b = base.step(img) if base is not None else float("nan")
        (train_losses if split == "train" else test_losses).append(loss)
        if split == "test":
            base_test.append(b)
        if metrics is not None:
            metrics.record(index=i, split=split, loss_nats=loss, baseline_nats=b)
        if progress is not None and (i + 1) % 1000 == 0:
            progress(i + 1, float(np.mean((train_losses + test_losses)[-1000:])))
    return {
        "model": model,
        "train_losses": np.array(train_losses),
        "test_losses": np.array(test_losses),
        "test_mean": float(np.mean(test_losses)) if test_losses else float("nan"),
        "baseline_test_mean": float(np.mean(base_test)) if base_test else float("nan"),
        "images_seen": model.images_seen,
    }
