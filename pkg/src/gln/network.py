"""Gated linear networks trained online with local gradient steps.

A :class:`GatedLinearNetwork` holds ``n_nets`` independent networks that
share one shape (one-vs-all classifiers use one per class, the density model
one per pixel). Each layer's weights are stored as an array of shape
``(n_nets, width, max_contexts, fan_in + 1)``; column 0 is the weight on the
constant bias input whose probability is ``beta``.

Activations are carried in logit space. Clipping an activation to
``[eps, 1 - eps]`` is the same as clamping its logit to
``[logit(eps), logit(1 - eps)]``, which is what the kernels do.
"""

from dataclasses import dataclass, field, asdict
import math
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .mixer import ConstantRate, format_schedule, parse_schedule
from .numerics import BETA, DEFAULT_EPSILON, check_epsilon, logit


@dataclass
class NetworkSpec:
    base_width: int
    widths: Sequence[int]
    beta: float = BETA
    epsilon: float = DEFAULT_EPSILON
    bound: float = 200.0
    init: str = "zero"
    schedule: Callable = field(default_factory=lambda: ConstantRate(0.01))
    per_context_time: bool = False

    def __post_init__(self):
        self.widths = tuple(int(k) for k in self.widths)
        if self.base_width < 1 or not self.widths or min(self.widths) < 1:
            raise ValueError("every layer needs at least one neuron")
        if not 0.0 < self.beta < 1.0 or self.beta == 0.5:
            raise ValueError("beta must lie in (0, 1) and differ from 1/2")
        check_epsilon(self.epsilon)
        if self.bound < 1.0:
            raise ValueError("weight bound must be >= 1")
        if self.init not in ("zero", "geometric"):
            raise ValueError(f"unknown init scheme {self.init!r}")

    @property
    def fan_ins(self):
        return (self.base_width,) + self.widths[:-1]

    @property
    def n_neurons(self):
        return sum(self.widths)

    def layer_slices(self):
        out, start = [], 0
        for k in self.widths:
            out.append(slice(start, start + k))
            start += k
        return out

    def to_dict(self):
        d = asdict(self)
        d["widths"] = list(self.widths)
        d["schedule"] = format_schedule(self.schedule)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["schedule"] = parse_schedule(d["schedule"])
        return cls(**d)


@dataclass
class ForwardTrace:
    """Everything :meth:`GatedLinearNetwork.update` needs from a forward pass.

    ``inputs[i]`` are the (clipped) input logits of layer ``i`` with the bias
    logit in column 0; ``preacts[i]`` the raw pre-activations; ``contexts[i]``
    the selected row per neuron.
    """

    inputs: list
    preacts: list
    contexts: list
    version: int = 0

    @property
    def output_logits(self):
        """Clipped logits of the last layer, bias column excluded."""
        return self.inputs[-1][:, 1:]

    def activations(self, layer):
        """Probabilities of layer ``layer`` (0 = base), bias entry first."""
        return 1.0 / (1.0 + np.exp(-self.inputs[layer]))


class ContextIds:
    """Gating for callers that compute context ids themselves: ``z`` *is* the ids."""

    def __init__(self, sizes):
        self.sizes = np.asarray(sizes, dtype=np.int64)

    def __call__(self, z):
        return z


class NeuronContexts:
    """Gating from one context function per neuron (a single network)."""

    def __init__(self, contexts):
        self.contexts = list(contexts)
        self.sizes = np.array([c.size for c in self.contexts], dtype=np.int64)

    def __call__(self, z):
        return np.array([c(z) for c in self.contexts], dtype=np.int64)


class BankContexts:
    """Gating from a vectorised bank holding ``n_nets * n_neurons`` contexts, net-major."""

    def __init__(self, bank, n_nets, n_neurons):
        if bank.count != n_nets * n_neurons:
            raise ValueError(f"bank has {bank.count} contexts, need {n_nets * n_neurons}")
        self.bank = bank
        self.shape = (n_nets, n_neurons)
        self.sizes = np.asarray(bank.sizes).reshape(self.shape)

    def __call__(self, z):
        return self.bank(z).reshape(self.shape)


class GatedLinearNetwork:
    """Layers of gated geometric mixers.

    ``gating`` maps side information to an int array of context ids of shape
    ``(n_nets, n_neurons)`` (neurons numbered layer by layer) and exposes the
    matching context-space ``sizes``. A plain array of sizes means the caller
    passes context ids directly as ``z``.
    """

    def __init__(self, spec: NetworkSpec, gating, n_nets=1, backend=None):
        if not hasattr(gating, "sizes"):
            gating = ContextIds(gating)
        self.gating = gating
        self.spec = spec
        self.n_nets = int(n_nets)
        sizes = np.broadcast_to(np.asarray(gating.sizes, dtype=np.int64), (self.n_nets, spec.n_neurons))
        if sizes.min() < 1:
            raise ValueError("context spaces must be non-empty")
        self.context_sizes = np.array(sizes)
        self.kernels = kernels.get_backend(backend)
        self.weights = []
        for sl, fan_in, width in zip(spec.layer_slices(), spec.fan_ins, spec.widths):
            max_ctx = int(self.context_sizes[:, sl].max())
            fill = 0.0 if spec.init == "zero" else 1.0 / fan_in
            self.weights.append(np.full((self.n_nets, width, max_ctx, fan_in + 1), fill))
        self.visits = None
        if spec.per_context_time:
            self.visits = [np.zeros(w.shape[:3], dtype=np.int64) for w in self.weights]
        self.t = 0
        self._version = 0
        self._slices = spec.layer_slices()
        self._hi = math.log((1.0 - spec.epsilon) / spec.epsilon)
        self._bias_logit = logit(spec.beta)

    @property
    def n_layers(self):
        return len(self.weights)

    def base_logits(self, base):
        """Clip base probabilities and return input logits with the bias column."""
        base = np.asarray(base, dtype=np.float64)
        if base.ndim == 1:
            base = np.broadcast_to(base, (self.n_nets, base.shape[0]))
        if base.shape != (self.n_nets, self.spec.base_width):
            raise ValueError(f"base predictions have shape {base.shape}, expected "
                             f"({self.n_nets}, {self.spec.base_width})")
        eps = self.spec.epsilon
        x = np.empty((self.n_nets, self.spec.base_width + 1))
        x[:, 0] = self._bias_logit
        p = np.clip(base, eps, 1.0 - eps)
        x[:, 1:] = np.log(p) - np.log1p(-p)
        return x

    def split_contexts(self, ctx):
        ctx = np.asarray(ctx, dtype=np.int64)
        if ctx.shape != self.context_sizes.shape:
            if ctx.shape != (self.spec.n_neurons,):
                raise ValueError(f"context ids have shape {ctx.shape}, expected "
                                 f"({self.n_nets}, {self.spec.n_neurons})")
            ctx = np.broadcast_to(ctx, self.context_sizes.shape)
        if (ctx < 0).any() or (ctx >= self.context_sizes).any():
            raise IndexError("context id outside its neuron's context space")
        return [np.ascontiguousarray(ctx[:, sl]) for sl in self._slices]

    def forward(self, base, z, base_is_logit=False):
        """Evaluate every layer on base predictions ``base`` and side information ``z``."""
        x = np.ascontiguousarray(base, dtype=np.float64) if base_is_logit else self.base_logits(base)
        inputs, preacts = [x], []
        contexts = self.split_contexts(self.gating(z))
        for W, c in zip(self.weights, contexts):
            s = np.empty(c.shape)
            out = np.empty((self.n_nets, c.shape[1] + 1))
            self.kernels.forward_layer(W, c, x, -self._hi, self._hi, self._bias_logit, s, out)
            preacts.append(s)
            inputs.append(out)
            x = out
        return ForwardTrace(inputs, preacts, contexts, self._version)

    def learning_rates(self, layer, ctx):
        v = self.visits[layer]
        bi = np.arange(self.n_nets)[:, None]
        ki = np.arange(ctx.shape[1])[None, :]
        v[bi, ki, ctx] += 1
        return np.vectorize(self.spec.schedule, otypes=[float])(v[bi, ki, ctx])

    def update(self, trace: ForwardTrace, target, t=None):
        """One local gradient step for every neuron on the row chosen in ``trace``.

        ``t`` defaults to one more than the previous round. Returns each
        neuron's loss (nats) before the step, shape (n_nets, n_neurons).
        """
        if trace.version != self._version:
            raise RuntimeError("stale trace: the network changed since this forward pass")
        self.t = self.t + 1 if t is None else int(t)
        target = np.ascontiguousarray(np.broadcast_to(np.asarray(target, dtype=np.float64), (self.n_nets,)))
        losses = np.empty((self.n_nets, self.spec.n_neurons))
        if self.visits is None:
            rates = np.full((self.n_nets, self.spec.n_neurons), self.spec.schedule(self.t))
        bound = float(self.spec.bound)
        for i, (W, c, sl) in enumerate(zip(self.weights, trace.contexts, self._slices)):
            lr = rates[:, sl] if self.visits is None else self.learning_rates(i, c)
            loss = np.empty(c.shape)
            self.kernels.update_layer(W, c, trace.inputs[i], trace.preacts[i], target, lr, bound, loss)
            losses[:, sl] = loss
        self._version += 1
        return losses

    def predict(self, base, z):
        """Top neuron's clipped probability for each network; no mutation."""
        return output_probability(self.forward(base, z))

    def neuron_probabilities(self, trace):
        """Clipped output probability of every non-bias neuron, (n_nets, n_neurons)."""
        logits = np.concatenate([x[:, 1:] for x in trace.inputs[1:]], axis=1)
        return 1.0 / (1.0 + np.exp(-logits))

    def state(self):
        out = {f"weights_{i}": W for i, W in enumerate(self.weights)}
        out["context_sizes"] = self.context_sizes
        out["t"] = np.array(self.t)
        if self.visits is not None:
            out.update({f"visits_{i}": v for i, v in enumerate(self.visits)})
        return out

    def load_state(self, arrays):
        for i in range(self.n_layers):
            W = np.asarray(arrays[f"weights_{i}"], dtype=np.float64)
            if W.shape != self.weights[i].shape:
                raise ValueError(f"layer {i} weights have shape {W.shape}, expected {self.weights[i].shape}")
            self.weights[i] = np.ascontiguousarray(W)
            if self.visits is not None:
                self.visits[i] = np.asarray(arrays[f"visits_{i}"], dtype=np.int64)
        self.t = int(arrays["t"])
        self._version += 1


def output_probability(trace):
    """Probability of the first neuron of the last layer, (n_nets,)."""
    return 1.0 / (1.0 + np.exp(-trace.inputs[-1][:, 1]))


def init_network(spec: NetworkSpec, gating, n_nets=1, backend=None):
    return GatedLinearNetwork(spec, gating, n_nets, backend)

