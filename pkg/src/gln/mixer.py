"""Single-neuron geometric mixing and its online gradient descent update.

Weights live in the hypercube [-bound, bound]^m. Input probabilities are
expected to be clipped already; nothing here clips them again.
"""

from dataclasses import dataclass
import math
from typing import Any

import numpy as np

from .numerics import logit, sigmoid


def _as_inputs(w, p):
    w = np.asarray(w, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if w.ndim != 1 or p.ndim != 1 or w.shape != p.shape:
        raise ValueError(f"weight/input shape mismatch: {w.shape} vs {p.shape}")
    if p.size == 0:
        raise ValueError("a mixer needs at least one input")
    return w, p


def geo_mix(w, p):
    """Probability of a 1 under the geometric mixture: sigmoid(w . logit(p))."""
    w, p = _as_inputs(w, p)
    return sigmoid(float(np.dot(w, logit(p))))


def geo_mix_product(w, p):
    """Same mixture written as a normalised product of powered odds."""
    w, p = _as_inputs(w, p)
    # log-space to keep the products finite
    log_one = float(np.dot(w, np.log(p)))
    log_zero = float(np.dot(w, np.log1p(-p)))
    top = max(log_one, log_zero)
    a = math.exp(log_one - top)
    b = math.exp(log_zero - top)
    return a / (a + b)


def _check_bit(x):
    if x not in (0, 1):
        raise ValueError(f"target must be 0 or 1, got {x!r}")


def geo_loss(w, p, x):
    """Log loss (nats) of the mixture on bit ``x``."""
    _check_bit(x)
    w, p = _as_inputs(w, p)
    s = float(np.dot(w, logit(p)))
    # -log sigmoid(s) = softplus(-s); stable on both tails
    margin = s if x == 1 else -s
    return math.log1p(math.exp(-margin)) if margin > 0 else -margin + math.log1p(math.exp(margin))


def geo_gradient(w, p, x):
    _check_bit(x)
    w, p = _as_inputs(w, p)
    lp = logit(p)
    return (sigmoid(float(np.dot(w, lp))) - x) * lp


def ogd_step(w, grad, lr, bound):
    """One projected gradient step; projection onto the cube is a clamp."""
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    w = np.asarray(w, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if w.shape != grad.shape:
        raise ValueError(f"weight/gradient shape mismatch: {w.shape} vs {grad.shape}")
    return np.clip(w - lr * grad, -bound, bound)


@dataclass
class Neuron:
    """A gated geometric mixer: one weight row per context id."""

    context: Any
    weights: np.ndarray
    bound: float = 1.0

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.bound < 1.0:
            raise ValueError("the weight bound must be >= 1 so unit vectors are feasible")
        if self.weights.ndim != 2 or self.weights.shape[0] != self.context.size:
            raise ValueError("weights need one row per context id")

    def select(self, z):
        c = int(self.context(z))
        if not 0 <= c < self.weights.shape[0]:
            raise RuntimeError(f"context id {c} outside [0, {self.weights.shape[0]})")
        return c

    def predict(self, p, z):
        return geo_mix(self.weights[self.select(z)], p)

    def learn(self, p, z, x, lr):
        c = self.select(z)
        grad = geo_gradient(self.weights[c], p, x)
        self.weights[c] = ogd_step(self.weights[c], grad, lr, self.bound)
        return c


def gated_geo_mix(neuron, p, z):
    return neuron.predict(p, z)


# Learning-rate schedules: callables of the (1-based) round index.


@dataclass(frozen=True)
class ConstantRate:
    rate: float

    def __call__(self, t):
        return self.rate


@dataclass(frozen=True)
class InverseTimeRate:
    """``scale / t``, optionally capped: min(scale / t, cap)."""

    scale: float
    cap: float = math.inf

    def __call__(self, t):
        return min(self.scale / max(t, 1), self.cap)


@dataclass(frozen=True)
class InverseSqrtRate:
    """``scale / sqrt(t)``; with scale = D / G this is the Zinkevich schedule."""

    scale: float

    def __call__(self, t):
        return self.scale / math.sqrt(max(t, 1))


def parse_schedule(text):
    """Build a schedule from ``const:0.01``, ``inv:8000:0.3`` or ``invsqrt:2.5``."""
    kind, *args = str(text).split(":")
    vals = [float(a) for a in args]
    if kind == "const" and len(vals) == 1:
        return ConstantRate(vals[0])
    if kind == "inv" and len(vals) in (1, 2):
        return InverseTimeRate(*vals)
    if kind == "invsqrt" and len(vals) == 1:
        return InverseSqrtRate(vals[0])
    raise ValueError(f"unrecognised learning-rate schedule {text!r}")


def format_schedule(schedule):
    if isinstance(schedule, ConstantRate):
        return f"const:{schedule.rate!r}"
    if isinstance(schedule, InverseTimeRate):
        if math.isinf(schedule.cap):
            return f"inv:{schedule.scale!r}"
        return f"inv:{schedule.scale!r}:{schedule.cap!r}"
    if isinstance(schedule, InverseSqrtRate):
        return f"invsqrt:{schedule.scale!r}"
    raise TypeError(f"cannot serialise schedule {schedule!r}")
