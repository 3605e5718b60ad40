"""Self-checks run by ``gln verify``.

Each suite compares a library routine with a slow reference computed a
different way (finite differences, enumeration, explicit matrix products)
and returns a :class:`Check`.
"""

from dataclasses import dataclass
import itertools
import math

import numpy as np

from . import kernels
from .base_models import ZRCounter, kt_log_marginal
from .mixer import geo_gradient, geo_loss
from .network import GatedLinearNetwork, NetworkSpec
from .numerics import RandomSource
from .switching import SwitchingMixture, switch_prior_mass


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def check_gradient(samples=10_000, seed=0, step=1e-6, tol=1e-5):
    """Analytic mixer gradient against central differences of the loss."""
    rng = RandomSource(seed)
    sizes = rng.integers(1, 9, samples)
    targets = rng.integers(0, 2, samples)
    ws = rng.uniform(-2.0, 2.0, (samples, 8))
    ps = rng.uniform(0.02, 0.98, (samples, 8))
    worst = 0.0
    for i in range(samples):
        m, x = int(sizes[i]), int(targets[i])
        w, p = ws[i, :m], ps[i, :m]
        g = geo_gradient(w, p, x)
        for j in range(m):
            e = np.zeros(m)
            e[j] = step
            fd = (geo_loss(w + e, p, x) - geo_loss(w - e, p, x)) / (2 * step)
            # relative error, floored so tiny gradients are compared absolutely
            worst = max(worst, abs(fd - g[j]) / max(abs(g[j]), 1e-3))
    return Check("gradient", worst <= tol, f"max relative error {worst:.2e} over {samples} mixers (tol {tol:g})")


def product_form_logit(weights, contexts, x0):
    """Output logits as an explicit product of per-layer matrices.

    The matrix of layer ``i`` maps the bias-augmented input vector to the
    bias-augmented output vector: row 0 passes the bias entry through, row
    ``k`` is neuron ``k``'s selected weight row.
    """
    v = np.asarray(x0, dtype=np.float64)
    for W, c in zip(weights, contexts):
        k = W.shape[0]
        A = np.zeros((k + 1, W.shape[2]))
        A[0, 0] = 1.0
        A[1:] = W[np.arange(k), c]
        v = A @ v
    return v[1:]


def check_layer_identity(nets=100, seed=0, tol=1e-10):
    rng = RandomSource(seed)
    worst = 0.0
    clipped = 0
    for _ in range(nets):
        depth = int(rng.integers(1, 5))
        widths = [int(k) for k in rng.integers(1, 5, depth)]
        base_width = int(rng.integers(1, 6))
        spec = NetworkSpec(base_width, widths, epsilon=1e-6)
        sizes = rng.integers(1, 4, spec.n_neurons)
        net = GatedLinearNetwork(spec, sizes)
        for W in net.weights:
            W[...] = rng.uniform(-0.6, 0.6, W.shape)
        base = rng.uniform(0.2, 0.8, base_width)
        ctx = np.array([int(rng.integers(0, s)) for s in sizes])
        trace = net.forward(base, ctx)
        if any(np.abs(s).max() >= net._hi for s in trace.preacts):
            clipped += 1
            continue
        ref = product_form_logit([W[0] for W in net.weights], [c[0] for c in trace.contexts], trace.inputs[0][0])
        worst = max(worst, float(np.abs(ref - trace.output_logits[0]).max()))
    return Check("layer identity", worst <= tol and clipped == 0,
                 f"max |layerwise - product form| {worst:.2e} on {nets} nets ({clipped} clipped)")


def brute_force_switching(preds, xs):
    """Marginal probability of ``xs`` summed over every model-index sequence."""
    n, m = preds.shape
    total = 0.0
    for seq in itertools.product(range(m), repeat=n):
        like = 1.0
        for t, v in enumerate(seq):
            like *= preds[t, v] if xs[t] else 1.0 - preds[t, v]
        total += switch_prior_mass(seq, m) * like
    return total


def check_switching(max_len=6, models=(2, 3), seed=0, tol=1e-9):
    rng = RandomSource(seed)
    worst = 0.0
    bound_ok = True
    for m in models:
        for n in range(1, max_len + 1):
            preds = rng.uniform(0.05, 0.95, (n, m))
            for xs in itertools.product((0, 1), repeat=n):
                mix = SwitchingMixture(m)
                log_p = sum(math.log(mix.update(preds[t], xs[t])) for t in range(n))
                ref = brute_force_switching(preds, xs)
                worst = max(worst, abs(math.exp(log_p) - ref) / ref)
            for seq in itertools.product(range(m), repeat=n):
                s = sum(a != b for a, b in zip(seq, seq[1:]))
                bound = (s + 1) * (math.log(m) + math.log(n))
                bound_ok &= -math.log(switch_prior_mass(seq, m)) <= bound + 1e-12
    return Check("switching", worst <= tol and bound_ok,
                 f"max relative marginal error {worst:.2e}; prior bound {'holds' if bound_ok else 'VIOLATED'}")


def check_zr(max_len=8, tol=1e-12):
    worst = 0.0
    for n in range(1, max_len + 1):
        for xs in itertools.product((0, 1), repeat=n):
            c = ZRCounter()
            log_p = 0.0
            for x in xs:
                p = c.predict()
                log_p += math.log(p if x else 1.0 - p)
                c.update(x)
            ones = sum(xs)
            ref = 0.5 * math.exp(kt_log_marginal(n - ones, ones))
            ref += 0.25 * (ones == 0) + 0.25 * (ones == n)
            worst = max(worst, abs(log_p - math.log(ref)))
    return Check("zero-redundancy", worst <= tol, f"max |log P_seq - log P_mix| {worst:.2e} up to length {max_len}")


def check_kernels(seed=0, tol=1e-12):
    if kernels.compiled is None:
        return Check("kernel parity", True, "compiled backend not built; numpy backend only")
    rng = RandomSource(seed)
    worst = 0.0
    for _ in range(20):
        B, K, C, F = (int(v) for v in rng.integers(1, 6, 4))
        W = rng.uniform(-1, 1, (B, K, C, F + 1))
        ctx = rng.integers(0, C, (B, K))
        xin = rng.uniform(-3, 3, (B, F + 1))
        target = rng.integers(0, 2, B).astype(np.float64)
        lr = np.full((B, K), 0.1)
        outs = []
        for mod in (kernels.compiled, kernels.python):
            Wc = W.copy()
            s = np.empty((B, K))
            xo = np.empty((B, K + 1))
            loss = np.empty((B, K))
            mod.forward_layer(Wc, ctx, xin, -4.0, 4.0, 1.0, s, xo)
            mod.update_layer(Wc, ctx, xin, s, target, lr, 0.5, loss)
            outs.append((s, xo, loss, Wc))
        for a, b in zip(*outs):
            worst = max(worst, float(np.abs(a - b).max()))
    return Check("kernel parity", worst <= tol, f"max |cython - numpy| {worst:.2e}")


SUITES = {
    "gradient": check_gradient,
    "layers": check_layer_identity,
    "switching": check_switching,
    "zr": check_zr,
    "kernels": check_kernels,
}


def run_all(names=None, quick=False):
    names = list(SUITES) if not names else names
    out = []
    for name in names:
        if name == "gradient" and quick:
            out.append(check_gradient(samples=1000))
        else:
            out.append(SUITES[name]())
    return out
