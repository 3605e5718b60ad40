"""One-vs-all classification with one gated linear network per class."""

from dataclasses import dataclass

import numpy as np

from ..base_models import feature_base
from ..context import HalfSpaceBank
from ..data import RunningMean, deskew, spiral_arc_label, spiral_dataset
from ..mixer import ConstantRate, parse_schedule
from ..network import BankContexts, GatedLinearNetwork, NetworkSpec, output_probability
from ..numerics import BETA, DEFAULT_EPSILON, RandomSource


class OneVsAllClassifier:
    """``n_classes`` same-shaped networks, each predicting ``label == c``.

    All networks see the same base predictions (squashed features) and the
    same side information; each neuron of each network has its own
    composition of ``context_bits`` random half-spaces.
    """

    def __init__(self, n_classes, dim, widths, rng: RandomSource, context_bits=1, sigma_v=1.0, sigma_b=0.0,
                 bound=200.0, epsilon=DEFAULT_EPSILON, schedule=None, init="zero", beta=BETA, backend=None):
        self.n_classes = int(n_classes)
        self.dim = int(dim)
        self.spec = NetworkSpec(self.dim, widths, beta=beta, epsilon=epsilon, bound=bound, init=init,
                                schedule=schedule or ConstantRate(0.01))
        n = self.spec.n_neurons
        self.bank = HalfSpaceBank.sample(rng, self.n_classes * n, context_bits, self.dim, sigma_v, sigma_b)
        self.net = GatedLinearNetwork(self.spec, BankContexts(self.bank, self.n_classes, n), self.n_classes, backend)
        self.examples_seen = 0

    def step(self, z, label=None, learn=True):
        """Predict, then (optionally) learn from one example.

        Returns ``(predicted label, per-class probabilities, per-class log losses)``;
        the losses are ``None`` when no label is given. Ties go to the lowest class id.
        """
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (self.dim,):
            raise ValueError(f"expected {self.dim} features, got shape {z.shape}")
        trace = self.net.forward(feature_base(z, self.spec.epsilon), z)
        probs = output_probability(trace)
        pred = int(np.argmax(probs))
        losses = None
        if label is not None:
            target = (np.arange(self.n_classes) == label).astype(np.float64)
            losses = -np.log(np.where(target > 0, probs, 1.0 - probs))
            if learn:
                self.net.update(trace, target)
                self.examples_seen += 1
        return pred, probs, losses

    def layer_predictions(self, z):
        """Per-neuron class probabilities, shape (n_classes, n_neurons)."""
        z = np.asarray(z, dtype=np.float64)
        trace = self.net.forward(feature_base(z, self.spec.epsilon), z)
        return self.net.neuron_probabilities(trace)

    def state(self):
        out = dict(self.net.state())
        out.update({"halfspace_normals": self.bank.normals, "halfspace_offsets": self.bank.offsets,
                    "examples_seen": np.array(self.examples_seen)})
        return out

    def load_state(self, arrays):
        self.net.load_state(arrays)
        self.examples_seen = int(arrays["examples_seen"])


def ova_step(clf, example, learn=True):
    return clf.step(example.features, example.label, learn)


# -- spiral -------------------------------------------------------------------


@dataclass
class SpiralConfig:
    n_per_class: int = 5000
    noise: float = 0.2
    r_max: float = 1.0
    turns: float = 1.0
    widths: tuple = (50, 25, 1)
    sigma_v: float = 6.0
    sigma_b: float = 3.0
    bound: float = 200.0
    epsilon: float = DEFAULT_EPSILON
    beta: float = BETA
    schedule: str = "const:0.01"
    init: str = "zero"
    grid: int = 101


def layer_accuracies(clf, points, labels):
    """Accuracy of the argmax classifier formed from neuron ``k`` of every class,
    averaged over ``k`` within each layer."""
    probs = np.stack([clf.layer_predictions(p) for p in points])  # (n, classes, neurons)
    correct = probs.argmax(axis=1) == labels[:, None]  # (n, neurons)
    per_neuron = correct.mean(axis=0)
    out = []
    for sl in clf.spec.layer_slices():
        out.append(float(per_neuron[sl].mean()))
    return out, probs


def spiral_grid(cfg: SpiralConfig):
    axis = np.linspace(-cfg.r_max, cfg.r_max, cfg.grid)
    xx, yy = np.meshgrid(axis, axis)
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
    return pts[np.hypot(pts[:, 0], pts[:, 1]) <= cfg.r_max]


def run_spiral(cfg: SpiralConfig, seed=0, metrics=None, backend=None):
    rng = RandomSource(seed)
    data = spiral_dataset(cfg.n_per_class, rng.spawn("data"), noise=cfg.noise, r_max=cfg.r_max, turns=cfg.turns)
    clf = OneVsAllClassifier(3, 2, cfg.widths, rng.spawn("contexts"), context_bits=1, sigma_v=cfg.sigma_v,
                             sigma_b=cfg.sigma_b, bound=cfg.bound, epsilon=cfg.epsilon,
                             schedule=parse_schedule(cfg.schedule), init=cfg.init, beta=cfg.beta, backend=backend)
    online_correct = 0
    for i, ex in enumerate(data):
        pred, _, losses = ova_step(clf, ex, learn=True)
        online_correct += pred == ex.label
        if metrics is not None:
            metrics.record(index=i, split="train", loss_nats=float(losses.sum()), correct=int(pred == ex.label))
    feats = np.stack([ex.features for ex in data])
    labels = np.array([ex.label for ex in data])
    train_preds = np.array([clf.step(f, learn=False)[0] for f in feats])
    grid = spiral_grid(cfg)
    grid_labels = spiral_arc_label(grid, r_max=cfg.r_max, turns=cfg.turns)
    layer_acc, grid_probs = layer_accuracies(clf, grid, grid_labels)
    return {
        "classifier": clf,
        "online_accuracy": online_correct / len(data),
        "train_accuracy": float(np.mean(train_preds == labels)),
        "layer_accuracy": layer_acc,
        "grid": grid,
        "grid_labels": grid_labels,
        "grid_predicted": grid_probs[:, :, -1].argmax(axis=1),
        "examples_seen": clf.examples_seen,
    }


# -- MNIST --------------------------------------------------------------------


@dataclass
class MnistClassifyConfig:
    widths: tuple = (128, 128, 1)
    context_bits: int = 4
    sigma_v: float = 0.1
    sigma_b: float = 0.0
    bound: float = 200.0
    epsilon: float = DEFAULT_EPSILON
    beta: float = BETA
    schedule: str = "inv:8000:0.3"
    init: str = "zero"
    use_deskew: bool = True
    mean_subtract: bool = True
    train_limit: int = 0  # 0 = all
    test_limit: int = 0
    learn_on_test: bool = False


class MnistPreprocessor:
    """Scale to [0, 1], optionally deskew, then subtract the running training mean."""

    def __init__(self, use_deskew=True, mean_subtract=True, dim=784):
        self.use_deskew = use_deskew
        self.mean = RunningMean(dim) if mean_subtract else None

    def __call__(self, image, train):
        img = np.asarray(image, dtype=np.float64).reshape(28, 28) / 255.0
        if self.use_deskew:
            img = deskew(img)
        x = img.reshape(-1)
        if self.mean is not None:
            if train:
                self.mean.update(x)
            x = x - self.mean.mean
        return x


def run_mnist_classify(cfg: MnistClassifyConfig, train_images, train_labels, test_images, test_labels,
                       seed=0, metrics=None, backend=None, progress=None):
    rng = RandomSource(seed)
    clf = OneVsAllClassifier(10, 784, cfg.widths, rng.spawn("contexts"), context_bits=cfg.context_bits,
                             sigma_v=cfg.sigma_v, sigma_b=cfg.sigma_b, bound=cfg.bound, epsilon=cfg.epsilon,
                             schedule=parse_schedule(cfg.schedule), init=cfg.init, beta=cfg.beta, backend=backend)
    prep = MnistPreprocessor(cfg.use_deskew, cfg.mean_subtract)
    n_train = len(train_images) if not cfg.train_limit else min(cfg.train_limit, len(train_images))
    n_test = len(test_images) if not cfg.test_limit else min(cfg.test_limit, len(test_images))
    train_correct = 0
    for i in range(n_train):
        z = prep(train_images[i], train=True)
        pred, _, losses = clf.step(z, int(train_labels[i]), learn=True)
        train_correct += pred == train_labels[i]
        if metrics is not None:
            metrics.record(index=i, split="train", loss_nats=float(losses.sum()), correct=int(pred == train_labels[i]))
        if progress is not None and (i + 1) % 1000 == 0:
            progress(i + 1, train_correct / (i + 1))
    test_correct = 0
    for j in range(n_test):
        z = prep(test_images[j], train=False)
        pred, _, losses = clf.step(z, int(test_labels[j]), learn=cfg.learn_on_test)
        test_correct += pred == test_labels[j]
        if metrics is not None:
            metrics.record(index=n_train + j, split="test", loss_nats=float(losses.sum()),
                           correct=int(pred == test_labels[j]))
    return {
        "classifier": clf,
        "train_online_accuracy": train_correct / max(n_train, 1),
        "test_accuracy": test_correct / max(n_test, 1),
        "n_train": n_train,
        "n_test": n_test,
        "examples_seen": clf.examples_seen,
    }
