"""Scalar numerics shared by the rest of the package, plus a portable RNG.

Logs are natural logs throughout, so every loss is in nats.
"""

import math
import zlib

import numpy as np

DEFAULT_EPSILON = 0.01
BETA = math.e / (1.0 + math.e)  # logit(BETA) == 1

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def sigmoid(x):
    """Logistic function; works on scalars and arrays."""
    if np.ndim(x) == 0:
        x = float(x)
        if x >= 0:
            return 1.0 / (1.0 + math.exp(-x))
        e = math.exp(x)
        return e / (1.0 + e)
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def logit(p):
    """Inverse of :func:`sigmoid`. Raises ``ValueError`` outside (0, 1)."""
    if np.ndim(p) == 0:
        p = float(p)
        if not 0.0 < p < 1.0:
            raise ValueError(f"logit undefined for p={p!r}")
        return math.log(p) - math.log1p(-p)
    p = np.asarray(p, dtype=np.float64)
    # NaN fails both comparisons, so it is rejected here too
    if not np.all((p > 0.0) & (p < 1.0)):
        raise ValueError("logit undefined outside the open interval (0, 1)")
    return np.log(p) - np.log1p(-p)


def check_epsilon(eps):
    if not 0.0 < eps < 0.5:
        raise ValueError(f"clipping epsilon must lie in (0, 1/2), got {eps!r}")
    return float(eps)


def clip_probability(p, eps=DEFAULT_EPSILON):
    check_epsilon(eps)
    if np.ndim(p) == 0:
        return min(max(float(p), eps), 1.0 - eps)
    return np.clip(np.asarray(p, dtype=np.float64), eps, 1.0 - eps)


def bernoulli_kl(p, q):
    """KL divergence D(p || q) between Bernoulli(p) and Bernoulli(q), 0 log 0 = 0."""
    p = float(p)
    q = float(q)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p!r}")
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q!r}")
    total = 0.0
    if p > 0.0:
        total += p * math.log(p / q)
    if p < 1.0:
        total += (1.0 - p) * math.log((1.0 - p) / (1.0 - q))
    return max(total, 0.0)


def _splitmix_scalar(z):
    z = (z ^ (z >> 30)) * _MIX1 & _MASK64
    z = (z ^ (z >> 27)) * _MIX2 & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed, label):
    """Stable child seed for a named component (``label`` may be str or int)."""
    if isinstance(label, str):
        tag = zlib.crc32(label.encode("utf-8"))
    else:
        tag = int(label) & _MASK64
    return _splitmix_scalar((int(seed) ^ _splitmix_scalar((tag + _GAMMA) & _MASK64)) & _MASK64)


class RandomSource:
    """SplitMix64 stream; the i-th output is ``mix(seed + (i + 1) * GAMMA)``.

    Because each output only depends on the seed and its position, blocks
    are produced with vectorised uint64 arithmetic and the sequence is the
    same however draws are batched. Uniform doubles take the top 53 bits;
    normals use Box-Muller on consecutive uniform pairs.

    Instances are single-owner. Use :meth:`spawn` to hand a generator to
    another component instead of sharing one.
    """

    def __init__(self, seed=0):
        self.seed = int(seed) & _MASK64
        self.counter = 0

    def spawn(self, label):
        return RandomSource(derive_seed(self.seed, label))

    def uint64(self, n=None):
        count = 1 if n is None else int(n)
        idx = np.arange(self.counter + 1, self.counter + 1 + count, dtype=np.uint64)
        self.counter += count
        with np.errstate(over="ignore"):
            z = np.uint64(self.seed) + idx * np.uint64(_GAMMA)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
            z = z ^ (z >> np.uint64(31))
        return int(z[0]) if n is None else z

    def random(self, n=None):
        """Uniform doubles in [0, 1); ``n`` may be a count or a shape."""
        count = 1 if n is None else int(np.prod(n))
        bits = self.uint64(count)
        u = (bits >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
        return float(u[0]) if n is None else u.reshape(n)

    def uniform(self, low=0.0, high=1.0, n=None):
        u = self.random(1 if n is None else n)
        out = low + (high - low) * u
        return float(out[0]) if n is None else out

    def normal(self, loc=0.0, scale=1.0, n=None):
        count = 1 if n is None else int(np.prod(n))
        pairs = (count + 1) // 2
        u = self.random(2 * pairs)
        u1 = 1.0 - u[0::2]  # (0, 1], keeps log finite
        u2 = u[1::2]
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.empty(2 * pairs)
        z[0::2] = r * np.cos(2.0 * np.pi * u2)
        z[1::2] = r * np.sin(2.0 * np.pi * u2)
        z = loc + scale * z[:count]
        if n is None:
            return float(z[0])
        return z.reshape(n)

    def integers(self, low, high=None, n=None):
        """Integers in [low, high); multiply-shift mapping (bias < 2^-40)."""
        if high is None:
            low, high = 0, low
        span = int(high) - int(low)
        if span <= 0:
            raise ValueError("empty integer range")
        u = self.random(1 if n is None else n)
        out = int(low) + np.minimum((u * span).astype(np.int64), span - 1)
        return int(out[0]) if n is None else out

    def bernoulli(self, p, n=None):
        u = self.random(1 if n is None else n)
        out = (u < p).astype(np.int8)
        return int(out[0]) if n is None else out

    def permutation(self, n):
        return np.argsort(self.random(n), kind="stable")

    def choice(self, n, size, replace=False):
        if replace:
            return self.integers(0, n, size)
        if size > n:
            raise ValueError("cannot sample more items than available without replacement")
        return self.permutation(n)[:size]
