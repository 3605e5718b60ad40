"""Base predictors that feed layer 0 of a network.

The Zero-Redundancy (ZR) estimator is the mixture
``1/2 KT + 1/4 [all zeros] + 1/4 [all ones]`` over binary sequences, where
KT is the Krichevsky-Trofimov (add-1/2) estimator. Its conditionals depend on
the counts only; once both symbols have been seen it is plain KT.
"""

from dataclasses import dataclass
import math

import numpy as np

from .numerics import DEFAULT_EPSILON, clip_probability, sigmoid


def kt_log_marginal(zeros, ones):
    """log P_KT of any sequence with the given symbol counts."""
    return (math.lgamma(zeros + 0.5) + math.lgamma(ones + 0.5)
            - math.lgamma(zeros + ones + 1.0) - math.log(math.pi))


@dataclass
class ZRCounter:
    zeros: int = 0
    ones: int = 0
    log_kt: float = 0.0  # log P_KT of the history so far, maintained incrementally

    def log_marginal(self):
        """log P_ZR of the history so far."""
        total = 0.5 * math.exp(self.log_kt)
        if self.ones == 0:
            total += 0.25
        if self.zeros == 0:
            total += 0.25
        return math.log(total)

    def predict(self):
        return zr_predict(self)

    def update(self, x):
        return zr_update(self, x)


def zr_predict(c: ZRCounter):
    """Probability that the next symbol is 1."""
    a, b = c.zeros, c.ones
    if a > 0 and b > 0:
        return (b + 0.5) / (a + b + 1.0)
    kt = math.exp(c.log_kt)
    kt_next = kt * (b + 0.5) / (a + b + 1.0)
    num = 0.5 * kt_next + (0.25 if a == 0 else 0.0)
    den = 0.5 * kt + (0.25 if b == 0 else 0.0) + (0.25 if a == 0 else 0.0)
    return num / den


def zr_update(c: ZRCounter, x):
    a, b = c.zeros, c.ones
    if x:
        c.log_kt += math.log((b + 0.5) / (a + b + 1.0))
        c.ones += 1
    else:
        c.log_kt += math.log((a + 0.5) / (a + b + 1.0))
        c.zeros += 1
    return c


class ZRTable:
    """Many ZR counters at once, addressed by flat index, for vectorised use.

    Only the counts are stored: while one count is still zero the history is
    a constant run and its KT marginal is a function of the run length,
    which is tabulated lazily.
    """

    def __init__(self, shape):
        self.zeros = np.zeros(shape, dtype=np.int64)
        self.ones = np.zeros(shape, dtype=np.int64)
        self._run = np.array([1.0])  # run[n] = P_KT of a constant run of length n

    def _run_table(self, n):
        if n >= self._run.shape[0]:
            m = max(n + 1, 2 * self._run.shape[0])
            k = np.arange(m - 1)
            self._run = np.concatenate([[1.0], np.cumprod((k + 0.5) / (k + 1.0))])
        return self._run

    def predict(self, index=None):
        a = self.zeros if index is None else self.zeros[index]
        b = self.ones if index is None else self.ones[index]
        return zr_predict_counts(a, b, self._run_table(int(max(a.max(initial=0), b.max(initial=0))) + 1))

    def update(self, index, x):
        x = np.asarray(x, dtype=bool)
        np.add.at(self.ones, index, x.astype(np.int64))
        np.add.at(self.zeros, index, (~x).astype(np.int64))

    def state(self, prefix="zr"):
        return {f"{prefix}_zeros": self.zeros, f"{prefix}_ones": self.ones}

    def load_state(self, arrays, prefix="zr"):
        self.zeros = np.asarray(arrays[f"{prefix}_zeros"], dtype=np.int64)
        self.ones = np.asarray(arrays[f"{prefix}_ones"], dtype=np.int64)


def zr_predict_counts(a, b, run):
    """Vectorised ZR conditional for count arrays ``a`` (zeros) and ``b`` (ones)."""
    a = np.asarray(a)
    b = np.asarray(b)
    out = (b + 0.5) / (a + b + 1.0)
    only_ones = a == 0
    if np.any(only_ones):
        bb = b[only_ones]
        kt = run[bb]
        extra = np.where(bb == 0, 0.25, 0.0)
        out[only_ones] = (0.5 * kt * (bb + 0.5) / (bb + 1.0) + 0.25) / (0.5 * kt + 0.25 + extra)
    only_zeros = (b == 0) & (a > 0)
    if np.any(only_zeros):
        aa = a[only_zeros]
        kt = run[aa]
        out[only_zeros] = (0.5 * kt * 0.5 / (aa + 1.0)) / (0.5 * kt + 0.25)
    return out


def feature_base(z, eps=DEFAULT_EPSILON):
    """Squash real features into clipped probabilities."""
    return clip_probability(sigmoid(np.asarray(z, dtype=np.float64)), eps)


def constant_base(alpha):
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"constant base prediction must lie in (0, 1), got {alpha!r}")
    return float(alpha)
