"""Bayesian mixture over sequences of models with a run-length prior.

The mixture weight of each model is kept normalised; one update costs
O(number of models). Weights carry a leading batch axis so one object can
serve many independent predicted variables (for example one per pixel).
"""

import math

import numpy as np


class SwitchingMixture:
    def __init__(self, n_models, batch=None):
        if n_models < 1:
            raise ValueError("need at least one model")
        self.n_models = int(n_models)
        shape = (self.n_models,) if batch is None else (int(batch), self.n_models)
        self.u = np.full(shape, 1.0 / self.n_models)
        self.t = 1

    def predict(self, preds):
        """Mixture probability of a 1."""
        preds = np.asarray(preds, dtype=np.float64)
        if preds.shape != self.u.shape:
            raise ValueError(f"expected {self.u.shape} predictions, got {preds.shape}")
        return np.sum(self.u * preds, axis=-1)

    def update(self, preds, x):
        """Posterior-then-switch step after observing bit(s) ``x``.

        Returns the mixture's probability of the observed bit, as used in
        the update.
        """
        preds = np.asarray(preds, dtype=np.float64)
        if preds.shape != self.u.shape:
            raise ValueError(f"expected {self.u.shape} predictions, got {preds.shape}")
        x = np.asarray(x, dtype=np.float64)
        if self.u.ndim == 2:
            x = x.reshape(-1, 1)
        rho = np.where(x > 0.5, preds, 1.0 - preds)
        joint = self.u * rho
        tau = joint.sum(axis=-1, keepdims=True)
        if self.n_models > 1:
            t = self.t
            m = self.n_models
            share = 1.0 / ((t + 1) * (m - 1))
            keep = (t * m - t - 1) / ((t + 1) * (m - 1))
            u = share + keep * joint / tau
            self.u = u / u.sum(axis=-1, keepdims=True)
        self.t += 1
        return tau[..., 0] if self.u.ndim == 2 else float(tau[0])

    def state(self):
        return {"switch_u": self.u, "switch_t": np.array(self.t)}

    def load_state(self, arrays):
        u = np.asarray(arrays["switch_u"], dtype=np.float64)
        if u.shape != self.u.shape:
            raise ValueError("switching weights have the wrong shape")
        self.u = u
        self.t = int(arrays["switch_t"])


def switch_predict(mix, preds):
    return mix.predict(preds)


def switch_update(mix, preds, x):
    mix.update(preds, x)
    return mix


def switch_prior_mass(seq, n_models):
    """Prior probability of a model-index sequence under the run-length prior."""
    mass = 1.0
    for n, v in enumerate(seq, start=1):
        if n == 1:
            mass = 1.0 / n_models
        elif v == seq[n - 2]:
            mass *= (n - 1) / n
        else:
            mass *= 1.0 / (n * (n_models - 1))
    return mass


def switch_count(seq):
    return sum(1 for a, b in zip(seq, seq[1:]) if a != b)


def switching_bound(seq, n_models):
    """Upper bound on -log prior: (switches + 1)(log |M| + log n)."""
    n = len(seq)
    return (switch_count(seq) + 1) * (math.log(n_models) + math.log(n))
