"""Low-dimensional demonstrations: function fitting, the XOR failure case and switching."""

from dataclasses import dataclass, field
import math

import numpy as np

from ..context import HalfSpaceBank
from ..data import gaussian_bump, gaussian_task_sample, xor_task_sample
from ..mixer import InverseTimeRate
from ..network import BankContexts, GatedLinearNetwork, NetworkSpec, output_probability
from ..numerics import BETA, DEFAULT_EPSILON, RandomSource
from ..switching import SwitchingMixture

GRID_POINTS = 601
CAPACITY_WIDTHS = (3, 2, 2, 2, 2, 1)


def z_grid(points=GRID_POINTS, low=-3.0, high=3.0):
    return np.linspace(low, high, points)


def halfspace_offsets_1d(rng, n, spread="random", low=-3.0, high=3.0):
    if spread == "even":
        return np.linspace(low, high, n + 2)[1:-1]
    return rng.uniform(low, high, n)


@dataclass
class FitResult:
    """Learned per-neuron functions on a grid plus the loss trace."""

    grid: np.ndarray
    target: np.ndarray
    neuron_fits: np.ndarray  # (n_neurons, grid points)
    widths: tuple
    offsets: np.ndarray
    losses: np.ndarray  # (rounds, n_neurons) or empty
    extra: dict = field(default_factory=dict)

    def layer_of(self):
        return np.repeat(np.arange(len(self.widths)), self.widths)

    def top_mae(self):
        return float(np.mean(np.abs(self.neuron_fits[-1] - self.target)))


def one_dim_network(widths, offsets, schedule, bound, alpha, epsilon=DEFAULT_EPSILON, init="zero", beta=BETA,
                    backend=None):
    spec = NetworkSpec(1, widths, beta=beta, epsilon=epsilon, bound=bound, init=init, schedule=schedule)
    normals = np.ones((len(offsets), 1, 1))
    bank = HalfSpaceBank(normals, np.asarray(offsets, dtype=np.float64).reshape(-1, 1))
    net = GatedLinearNetwork(spec, BankContexts(bank, 1, spec.n_neurons), backend=backend)
    base = np.full((1, 1), alpha)
    return net, base


def grid_fits(net, base, grid):
    out = np.empty((net.spec.n_neurons, grid.shape[0]))
    for j, z in enumerate(grid):
        trace = net.forward(base, np.array([z]))
        out[:, j] = net.neuron_probabilities(trace)[0]
    return out


def _record(metrics, t, p, x):
    if metrics is not None:
        loss = -math.log(p if x == 1 else 1.0 - p)
        metrics.record(index=t, split="train", loss_nats=loss, correct=int((p >= 0.5) == (x == 1)))


def capacity_demo(rounds=200_000, widths=CAPACITY_WIDTHS, seed=0, spread="random", bound=10.0,
                  alpha=0.5, schedule=None, record_losses=False, snapshots=(), epsilon=DEFAULT_EPSILON,
                  beta=BETA, init="zero", metrics=None, backend=None):
    """Fit exp(-z^2/2) from Bernoulli samples with 1-d half-space gating."""
    rng = RandomSource(seed)
    schedule = schedule or InverseTimeRate(100.0, 0.1)
    n = sum(widths)
    offsets = halfspace_offsets_1d(rng.spawn("contexts"), n, spread)
    net, base = one_dim_network(widths, offsets, schedule, bound, alpha, epsilon, init, beta, backend)
    z, x = gaussian_task_sample(rng.spawn("data"), rounds)
    grid = z_grid()
    losses = np.empty((rounds, n)) if record_losses else np.empty((0, n))
    snaps = {}
    wanted = set(int(s) for s in snapshots)
    for t in range(rounds):
        trace = net.forward(base, z[t:t + 1])
        _record(metrics, t, float(output_probability(trace)[0]), x[t])
        loss = net.update(trace, x[t])
        if record_losses:
            losses[t] = loss[0]
        if t + 1 in wanted:
            snaps[t + 1] = grid_fits(net, base, grid)
    fits = grid_fits(net, base, grid)
    return FitResult(grid, gaussian_bump(grid), fits, tuple(widths), offsets, losses,
                     {"snapshots": snaps, "state": net.state()})


def cell_averages(offset, low=-3.0, high=3.0, f=gaussian_bump, points=200_001):
    """Average of ``f`` under U[low, high] on each side of ``offset`` (midpoint rule)."""
    out = []
    for a, b in ((low, offset), (offset, high)):
        if b - a <= 0:
            out.append(float("nan"))
            continue
        zs = a + (b - a) * (np.arange(points) + 0.5) / points
        out.append(float(np.mean(f(zs))))
    return tuple(out)


def xor_demo(rounds=200_000, widths=(2, 2, 2, 2, 2, 1), seed=0, bound=10.0, schedule=None,
             epsilon=DEFAULT_EPSILON, beta=BETA, init="zero", metrics=None, backend=None):
    """Every neuron gates on the sign of one coordinate; deep neurons stay near 1/2."""
    rng = RandomSource(seed)
    schedule = schedule or InverseTimeRate(100.0, 0.1)
    n = sum(widths)
    spec = NetworkSpec(1, widths, beta=beta, epsilon=epsilon, bound=bound, init=init, schedule=schedule)
    axis = np.arange(n) % 2
    normals = np.zeros((n, 1, 2))
    normals[np.arange(n), 0, axis] = 1.0
    bank = HalfSpaceBank(normals, np.zeros((n, 1)))
    net = GatedLinearNetwork(spec, BankContexts(bank, 1, n), backend=backend)
    base = np.full((1, 1), 0.5)
    z, x = xor_task_sample(rng.spawn("data"), rounds)
    for t in range(rounds):
        trace = net.forward(base, z[t])
        _record(metrics, t, float(output_probability(trace)[0]), x[t])
        net.update(trace, x[t])
    quadrants = np.array([[0.5, 0.5], [-0.5, 0.5], [-0.5, -0.5], [0.5, -0.5]])
    probs = np.array([net.neuron_probabilities(net.forward(base, q))[0] for q in quadrants])
    return {"widths": tuple(widths), "quadrants": quadrants, "neuron_probs": probs.T, "state": net.state()}


@dataclass
class SwitchingResult:
    times: np.ndarray
    weights: np.ndarray  # (records, n_neurons)
    layer_of: np.ndarray
    mixture_loss: float
    neuron_losses: np.ndarray  # cumulative per neuron
    fit: FitResult
    snapshots: dict
    mixture_snapshots: dict
    state: dict = field(default_factory=dict)


def switching_demo(rounds=20_000, widths=CAPACITY_WIDTHS, seed=0, record_every=10, snapshots=(1000, 2000, 4000),
                   bound=10.0, alpha=0.5, schedule=None, spread="random", epsilon=DEFAULT_EPSILON, beta=BETA,
                   init="zero", metrics=None, backend=None):
    """Capacity network plus a switching mixture over all its neurons."""
    rng = RandomSource(seed)
    schedule = schedule or InverseTimeRate(100.0, 0.1)
    n = sum(widths)
    offsets = halfspace_offsets_1d(rng.spawn("contexts"), n, spread)
    net, base = one_dim_network(widths, offsets, schedule, bound, alpha, epsilon, init, beta, backend)
    mix = SwitchingMixture(n)
    z, x = gaussian_task_sample(rng.spawn("data"), rounds)
    grid = z_grid()
    times, weights = [], []
    mixture_loss = 0.0
    neuron_losses = np.zeros(n)
    snaps, mix_snaps = {}, {}
    wanted = set(int(s) for s in snapshots)
    for t in range(rounds):
        trace = net.forward(base, z[t:t + 1])
        preds = net.neuron_probabilities(trace)[0]
        if t % record_every == 0:
            times.append(t + 1)
            weights.append(mix.u.copy())
        if metrics is not None:
            _record(metrics, t, float(mix.predict(preds)), x[t])
        p_obs = mix.update(preds, x[t])
        mixture_loss -= math.log(p_obs)
        neuron_losses -= np.log(np.where(x[t] == 1, preds, 1.0 - preds))
        net.update(trace, x[t])
        if t + 1 in wanted:
            fits = grid_fits(net, base, grid)
            snaps[t + 1] = fits
            mix_snaps[t + 1] = mix.u @ fits
    fit = FitResult(grid, gaussian_bump(grid), grid_fits(net, base, grid), tuple(widths), offsets, np.empty((0, n)))
    return SwitchingResult(np.array(times), np.array(weights), fit.layer_of(), mixture_loss, neuron_losses,
                           fit, snaps, mix_snaps, {**net.state(), **mix.state()})
