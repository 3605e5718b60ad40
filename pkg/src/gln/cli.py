"""Command-line front end.

    gln gaussian [--switching] [--rounds N] [--seed S] [--out DIR] ...
    gln xor | spiral | mnist-classify | mnist-density [options]
    gln verify [--quick] [--suite NAME ...]
    gln plotdata RUN_DIR

Every experiment option can come from a flat ``key = value`` config file
(``--config FILE``) and be overridden by a flag of the same name
(``--widths 100,1``). A run directory receives ``config.txt``,
``metadata.json``, ``metrics.csv``, ``metrics.jsonl``, ``timing.csv``,
``checkpoint.npz``, ``artifacts.npz`` and the plot-data CSV files.

Exit codes: 0 success, 2 usage error, 3 unreadable dataset, 4 invalid
config, 5 verification failure, 6 missing run artifacts.
"""

import argparse
from dataclasses import asdict, dataclass, fields, replace
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .data import IdxError, binarize, load_binarized_amat, load_mnist, mnist_dir_from_env
from .io import MetricsWriter, save_checkpoint, write_columns
from .mixer import parse_schedule
from .numerics import BETA, DEFAULT_EPSILON, check_epsilon
from .tasks import synthetic
from .tasks.classify import MnistClassifyConfig, SpiralConfig, run_mnist_classify, run_spiral
from .tasks.density import DensityConfig, is_monotone_decreasing, run_density

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_CONFIG = 4
EXIT_VERIFY = 5
EXIT_ARTIFACTS = 6

EXPERIMENTS = ("gaussian", "xor", "spiral", "mnist-classify", "mnist-density")


class ConfigError(ValueError):
    pass


class DatasetError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "gaussian"
    seed: int = 0
    out: str = "runs/gaussian"
    backend: str = "auto"
    widths: tuple = synthetic.CAPACITY_WIDTHS
    epsilon: float = DEFAULT_EPSILON
    bound: float = 10.0
    beta: float = BETA
    schedule: str = "inv:100:0.1"
    init: str = "zero"
    metrics_block: int = 1000
    checkpoint: bool = True
    # synthetic tasks
    rounds: int = 200_000
    alpha: float = 0.5
    spread: str = "random"
    switching: bool = False
    record_every: int = 10
    snapshots: tuple = (1000, 2000, 4000)
    # half-space gating
    context_bits: int = 1
    sigma_v: float = 6.0
    sigma_b: float = 3.0
    # spiral
    n_per_class: int = 5000
    noise: float = 0.2
    grid: int = 101
    # MNIST
    data_dir: str = ""
    train_limit: int = 0
    test_limit: int = 0
    deskew: bool = True
    mean_subtract: bool = True
    binarization: str = "threshold"
    threshold: int = 128
    # density
    n_skipgrams: int = 50
    n_contexts: int = 40
    max_skipgram_bits: int = 8
    max_gate_bits: int = 5
    window: int = 6
    density_switching: bool = True


EXPERIMENT_DEFAULTS = {
    "gaussian": {},
    "xor": {"widths": (2, 2, 2, 2, 2, 1)},
    "spiral": {"widths": (50, 25, 1), "bound": 200.0, "schedule": "const:0.01", "sigma_v": 6.0, "sigma_b": 3.0,
               "context_bits": 1, "metrics_block": 500},
    "mnist-classify": {"widths": (128, 128, 1), "bound": 200.0, "schedule": "inv:8000:0.3", "context_bits": 4,
                       "sigma_v": 0.1, "sigma_b": 0.0},
    "mnist-density": {"widths": (8, 16, 8, 16), "bound": 200.0, "schedule": "inv:25:0.005", "metrics_block": 100},
}

_FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def default_config(experiment):
    if experiment not in EXPERIMENT_DEFAULTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    return replace(ExperimentConfig(), experiment=experiment, out=f"runs/{experiment}",
                   **EXPERIMENT_DEFAULTS[experiment])


def _convert(name, text):
    kind = type(_FIELDS[name].default)
    text = str(text).strip()
    try:
        if kind is bool:
            if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return text.lower() in ("true", "1", "yes")
        if kind is tuple:
            return tuple(int(v) for v in text.replace("-", ",").split(",") if v.strip())
        return kind(text)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {text!r}") from None


def _render(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_config(cfg: ExperimentConfig):
    return "".join(f"{f.name} = {_render(getattr(cfg, f.name))}\n" for f in fields(cfg))


def parse_config(text, base=None):
    """Apply ``key = value`` lines on top of ``base`` (or the defaults of the named experiment)."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _convert(key, value)
    if base is None:
        base = default_config(values.get("experiment", "gaussian"))
    return validate_config(replace(base, **values))


def validate_config(cfg: ExperimentConfig):
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {cfg.experiment!r}")
    if not cfg.widths or min(cfg.widths) < 1:
        raise ConfigError("widths must be positive layer sizes")
    try:
        check_epsilon(cfg.epsilon)
        parse_schedule(cfg.schedule)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.bound < 1.0:
        raise ConfigError("bound must be >= 1")
    if not 0.0 < cfg.beta < 1.0 or cfg.beta == 0.5:
        raise ConfigError("beta must lie in (0, 1) and differ from 1/2")
    if cfg.seed < 0:
        raise ConfigError("seed must be non-negative")
    if cfg.init not in ("zero", "geometric"):
        raise ConfigError(f"unknown init {cfg.init!r}")
    if cfg.backend not in ("auto", "cython", "numpy"):
        raise ConfigError(f"unknown backend {cfg.backend!r}")
    if cfg.spread not in ("random", "even"):
        raise ConfigError(f"unknown spread {cfg.spread!r}")
    if cfg.binarization not in ("threshold", "amat"):
        raise ConfigError(f"unknown binarization {cfg.binarization!r}")
    if min(cfg.rounds, cfg.metrics_block, cfg.record_every, cfg.n_per_class, cfg.grid, cfg.context_bits) < 1:
        raise ConfigError("counts must be positive")
    if cfg.sigma_v < 0 or cfg.sigma_b < 0 or cfg.noise < 0:
        raise ConfigError("standard deviations must be non-negative")
    return cfg


def _backend(cfg):
    return None if cfg.backend == "auto" else cfg.backend


# -- experiments --------------------------------------------------------------


def _first_layer_errors(fit):
    errs = []
    z = fit.grid
    for k in range(fit.widths[0]):
        lo, hi = synthetic.cell_averages(fit.offsets[k])
        below, above = z < fit.offsets[k], z >= fit.offsets[k]
        for mask, avg in ((below, lo), (above, hi)):
            if mask.any() and not math.isnan(avg):
                errs.append(float(np.max(np.abs(fit.neuron_fits[k, mask] - avg))))
    return errs


def run_gaussian(cfg, metrics):
    common = dict(rounds=cfg.rounds, widths=cfg.widths, seed=cfg.seed, bound=cfg.bound, alpha=cfg.alpha,
                  schedule=parse_schedule(cfg.schedule), spread=cfg.spread, epsilon=cfg.epsilon, beta=cfg.beta,
                  init=cfg.init, metrics=metrics, backend=_backend(cfg))
    if cfg.switching:
        res = synthetic.switching_demo(record_every=cfg.record_every, snapshots=cfg.snapshots, **common)
        fit = res.fit
        layer = fit.layer_of()[res.weights.argmax(axis=1)]
        summary = {"mixture_loss": res.mixture_loss, "best_neuron_loss": float(res.neuron_losses.min()),
                   "top_mae": fit.top_mae(), "argmax_layer_first": int(layer[0]), "argmax_layer_last": int(layer[-1])}
        artifacts = {"grid": fit.grid, "target": fit.target, "fits": fit.neuron_fits, "offsets": fit.offsets,
                     "layer_of": fit.layer_of(), "times": res.times, "weights": res.weights}
        return summary, artifacts, res.state
    fit = synthetic.capacity_demo(**common)
    errs = _first_layer_errors(fit)
    summary = {"top_mae": fit.top_mae(), "first_layer_max_error": max(errs) if errs else float("nan")}
    artifacts = {"grid": fit.grid, "target": fit.target, "fits": fit.neuron_fits, "offsets": fit.offsets,
                 "layer_of": fit.layer_of()}
    return summary, artifacts, fit.extra["state"]


def run_xor(cfg, metrics):
    res = synthetic.xor_demo(rounds=cfg.rounds, widths=cfg.widths, seed=cfg.seed, bound=cfg.bound,
                             schedule=parse_schedule(cfg.schedule), epsilon=cfg.epsilon, beta=cfg.beta,
                             init=cfg.init, metrics=metrics, backend=_backend(cfg))
    probs = res["neuron_probs"]
    layer_of = np.repeat(np.arange(len(cfg.widths)), cfg.widths)
    deep = probs[layer_of >= 1]
    summary = {"deep_max_deviation": float(np.abs(deep - 0.5).max()) if deep.size else float("nan")}
    return summary, {"quadrants": res["quadrants"], "neuron_probs": probs, "layer_of": layer_of}, res["state"]


def run_spiral_cmd(cfg, metrics):
    scfg = SpiralConfig(n_per_class=cfg.n_per_class, noise=cfg.noise, widths=cfg.widths, sigma_v=cfg.sigma_v,
                        sigma_b=cfg.sigma_b, bound=cfg.bound, epsilon=cfg.epsilon, beta=cfg.beta,
                        schedule=cfg.schedule, init=cfg.init, grid=cfg.grid)
    res = run_spiral(scfg, seed=cfg.seed, metrics=metrics, backend=_backend(cfg))
    summary = {"train_accuracy": res["train_accuracy"], "online_accuracy": res["online_accuracy"],
               "layer_accuracy": res["layer_accuracy"], "examples_seen": res["examples_seen"]}
    artifacts = {"grid": res["grid"], "grid_labels": res["grid_labels"], "grid_predicted": res["grid_predicted"]}
    return summary, artifacts, res["classifier"].state()


def _mnist_dir(cfg):
    return Path(cfg.data_dir) if cfg.data_dir else mnist_dir_from_env()


def load_mnist_or_fail(cfg):
    root = _mnist_dir(cfg)
    try:
        return load_mnist(root)
    except (OSError, IdxError) as exc:
        raise DatasetError(f"cannot read MNIST from {root}: {exc}") from None


def run_mnist_classify_cmd(cfg, metrics):
    train_x, train_y, test_x, test_y = load_mnist_or_fail(cfg)
    mcfg = MnistClassifyConfig(widths=cfg.widths, context_bits=cfg.context_bits, sigma_v=cfg.sigma_v,
                               sigma_b=cfg.sigma_b, bound=cfg.bound, epsilon=cfg.epsilon, beta=cfg.beta,
                               schedule=cfg.schedule, init=cfg.init, use_deskew=cfg.deskew,
                               mean_subtract=cfg.mean_subtract, train_limit=cfg.train_limit,
                               test_limit=cfg.test_limit)
    res = run_mnist_classify(mcfg, train_x, train_y, test_x, test_y, seed=cfg.seed, metrics=metrics,
                             backend=_backend(cfg), progress=_progress("train accuracy"))
    summary = {k: res[k] for k in ("train_online_accuracy", "test_accuracy", "n_train", "n_test", "examples_seen")}
    return summary, {}, res["classifier"].state()


def load_binary_images(cfg):
    """(train stream, test images, provenance) as uint8 arrays of shape (n, 784)."""
    root = _mnist_dir(cfg)
    if cfg.binarization == "amat":
        try:
            parts = [load_binarized_amat(root / f"binarized_mnist_{s}.amat") for s in ("train", "valid", "test")]
        except (OSError, ValueError) as exc:
            raise DatasetError(f"cannot read binarized MNIST from {root}: {exc}") from None
        train, test = np.concatenate(parts[:2]), parts[2]
        source = "pre-binarized .amat (train+valid, test)"
    else:
        train_x, _, test_x, _ = load_mnist_or_fail(cfg)
        train = binarize(train_x, cfg.threshold).reshape(len(train_x), -1)
        test = binarize(test_x, cfg.threshold).reshape(len(test_x), -1)
        source = f"IDX thresholded at >= {cfg.threshold}"
    if cfg.train_limit:
        train = train[:cfg.train_limit]
    if cfg.test_limit:
        test = test[:cfg.test_limit]
    return train, test, source


def run_density_cmd(cfg, metrics):
    train, test, source = load_binary_images(cfg)
    dcfg = DensityConfig(widths=cfg.widths, n_skipgrams=cfg.n_skipgrams, n_contexts=cfg.n_contexts,
                         max_skipgram_bits=cfg.max_skipgram_bits, max_gate_bits=cfg.max_gate_bits,
                         window=cfg.window, bound=cfg.bound, epsilon=cfg.epsilon, beta=cfg.beta,
                         schedule=cfg.schedule, switching=cfg.density_switching, init=cfg.init)
    res = run_density(dcfg, train, test, seed=cfg.seed, metrics=metrics, backend=_backend(cfg),
                      progress=_progress("mean nats (last 1000)"))
    monotone, blocks = is_monotone_decreasing(res["train_losses"])
    summary = {"test_mean_nats": res["test_mean"], "baseline_test_mean_nats": res["baseline_test_mean"],
               "train_blocks": blocks.tolist(), "train_monotone": monotone, "images_seen": res["images_seen"],
               "binarization": source}
    artifacts = {"train_losses": res["train_losses"], "test_losses": res["test_losses"]}
    return summary, artifacts, res["model"].state()


RUNNERS = {
    "gaussian": run_gaussian,
    "xor": run_xor,
    "spiral": run_spiral_cmd,
    "mnist-classify": run_mnist_classify_cmd,
    "mnist-density": run_density_cmd,
}


def _progress(label):
    def report(i, value):
        print(f"  {i:>7d} examples  {label} {value:.4f}", file=sys.stderr, flush=True)
    return report


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.integer, np.bool_)):
        return v.item()
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def run_experiment(cfg: ExperimentConfig):
    """Execute one experiment into ``cfg.out``; returns the summary dict."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(serialize_config(cfg))
    start = time.perf_counter()
    with MetricsWriter(out, block=cfg.metrics_block) as metrics:
        summary, artifacts, state = RUNNERS[cfg.experiment](cfg, metrics)
    wall = time.perf_counter() - start
    np.savez(out / "artifacts.npz", **artifacts)
    if cfg.checkpoint:
        save_checkpoint(out / "checkpoint.npz", state, config=asdict(cfg))
    meta = {"experiment": cfg.experiment, "seed": cfg.seed, "library_version": __version__,
            "backend": kernels.get_backend(_backend(cfg)).BACKEND, "config": asdict(cfg),
            "config_text": serialize_config(cfg), "summary": summary, "wall_time_s": wall}
    (out / "metadata.json").write_text(json.dumps(_jsonable(meta), indent=2, sort_keys=True) + "\n")
    emit_plotdata(out)
    return summary


# -- plot data ----------------------------------------------------------------


def emit_plotdata(run_dir):
    """Write columnar CSV files from a finished run; returns their paths."""
    run_dir = Path(run_dir)
    meta_path, art_path = run_dir / "metadata.json", run_dir / "artifacts.npz"
    if not meta_path.exists() or not art_path.exists():
        raise FileNotFoundError(f"{run_dir} is not a completed run (metadata.json / artifacts.npz missing)")
    meta = json.loads(meta_path.read_text())
    written = []
    with np.load(art_path) as art:
        a = {k: art[k] for k in art.files}
    exp = meta["experiment"]
    if exp == "gaussian":
        cols = {"z": a["grid"], "f": a["target"]}
        cols.update({f"p{k}_L{int(a['layer_of'][k])}": a["fits"][k] for k in range(a["fits"].shape[0])})
        path = run_dir / "grid_fit.csv"
        write_columns(path, cols)
        written.append(path)
        if "weights" in a:
            cols = {"t": a["times"]}
            cols.update({f"u{k}_L{int(a['layer_of'][k])}": a["weights"][:, k] for k in range(a["weights"].shape[1])})
            path = run_dir / "switching.csv"
            write_columns(path, cols)
            written.append(path)
    elif exp == "xor":
        q = a["quadrants"]
        cols = {"neuron": np.arange(a["neuron_probs"].shape[0]), "layer": a["layer_of"]}
        # one column per quadrant probe point, named by its coordinates
        cols.update({f"p({x:g};{y:g})": a["neuron_probs"][:, j] for j, (x, y) in enumerate(q)})
        path = run_dir / "xor.csv"
        write_columns(path, cols)
        written.append(path)
    elif exp == "spiral":
        path = run_dir / "spiral_grid.csv"
        write_columns(path, {"x": a["grid"][:, 0], "y": a["grid"][:, 1], "true": a["grid_labels"],
                             "predicted": a["grid_predicted"]})
        written.append(path)
    elif exp == "mnist-density":
        for split in ("train", "test"):
            losses = a[f"{split}_losses"]
            path = run_dir / f"density_{split}.csv"
            write_columns(path, {"image": np.arange(losses.shape[0]), "loss_nats": losses})
            written.append(path)
    return written


# -- argument parsing ---------------------------------------------------------


def _add_config_flags(p):
    p.add_argument("--config", help="flat 'key = value' config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key")
    for name, f in _FIELDS.items():
        if name == "experiment":
            continue
        flag = "--" + name.replace("_", "-")
        if isinstance(f.default, bool):
            p.add_argument(flag, dest=name, default=None, action=argparse.BooleanOptionalAction)
        else:
            p.add_argument(flag, dest=name, default=None, metavar=name.upper())


def build_parser():
    parser = argparse.ArgumentParser(prog="gln", description="Gated linear network experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        _add_config_flags(sub.add_parser(name, help=f"run the {name} experiment"))
    v = sub.add_parser("verify", help="run the built-in oracle checks")
    v.add_argument("--quick", action="store_true", help="fewer gradient samples")
    v.add_argument("--suite", action="append", choices=["gradient", "layers", "switching", "zr", "kernels"])
    pd = sub.add_parser("plotdata", help="write columnar plot files for a finished run")
    pd.add_argument("run_dir")
    return parser


def config_from_args(args):
    cfg = default_config(args.command)
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
        cfg = parse_config(text, base=cfg)
        if cfg.experiment != args.command:
            raise ConfigError(f"config is for {cfg.experiment!r}, not {args.command!r}")
    values = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or key not in _FIELDS or key == "experiment":
            raise ConfigError(f"bad --set {item!r}")
        values[key] = _convert(key, value)
    for name in _FIELDS:
        v = getattr(args, name, None)
        if v is not None and name != "experiment":
            values[name] = v if isinstance(v, bool) else _convert(name, v)
    return validate_config(replace(cfg, **values))


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.command == "verify":
        from .verify import run_all
        checks = run_all(args.suite, quick=args.quick)
        for c in checks:
            print(c.line())
        return EXIT_OK if all(c.passed for c in checks) else EXIT_VERIFY
    if args.command == "plotdata":
        try:
            for path in emit_plotdata(args.run_dir):
                print(path)
        except (FileNotFoundError, KeyError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_ARTIFACTS
        return EXIT_OK
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        summary = run_experiment(cfg)
    except DatasetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(_jsonable(summary), sort_keys=True))
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
