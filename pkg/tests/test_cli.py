import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gln import cli, verify
from gln.data import write_idx
from gln.io import load_checkpoint, read_columns, read_metrics
from gln.numerics import RandomSource


@settings(max_examples=60)
@given(experiment=st.sampled_from(cli.EXPERIMENTS), seed=st.integers(0, 2**31),
       widths=st.lists(st.integers(1, 64), min_size=1, max_size=5).map(tuple),
       epsilon=st.floats(1e-9, 0.49), bound=st.floats(1.0, 1e3), switching=st.booleans(),
       schedule=st.sampled_from(["const:0.01", "inv:100:0.1", "invsqrt:0.5"]), out=st.text("abc/_-", min_size=1))
def test_config_round_trip(experiment, seed, widths, epsilon, bound, switching, schedule, out):
    cfg = replace(cli.default_config(experiment), seed=seed, widths=widths, epsilon=epsilon, bound=bound,
                  switching=switching, schedule=schedule, out=out)
    assert cli.parse_config(cli.serialize_config(cfg)) == cfg


def test_config_file_comments_and_errors():
    cfg = cli.parse_config("experiment = xor  # negative control\n\nrounds = 10\n")
    assert cfg.experiment == "xor" and cfg.rounds == 10 and cfg.widths == (2, 2, 2, 2, 2, 1)
    for bad in ("rounds", "nonsense = 1", "rounds = ten", "epsilon = 0.7", "beta = 0.5", "widths = 0,1",
                "experiment = chess", "schedule = fast", "deskew = maybe", "init = random"):
        with pytest.raises(cli.ConfigError):
            cli.parse_config(bad)


def _run(argv, capsys=None):
    code = cli.run([str(a) for a in argv])
    return code


def test_usage_and_config_exit_codes(tmp_path, capsys):
    assert _run([]) == cli.EXIT_USAGE
    assert _run(["chess"]) == cli.EXIT_USAGE
    assert _run(["xor", "--bogus"]) == cli.EXIT_USAGE
    assert _run(["xor", "--epsilon", "2", "--out", tmp_path]) == cli.EXIT_CONFIG
    assert _run(["xor", "--set", "nope=1"]) == cli.EXIT_CONFIG
    assert _run(["xor", "--config", tmp_path / "missing.txt"]) == cli.EXIT_CONFIG
    (tmp_path / "g.txt").write_text("experiment = gaussian\n")
    assert _run(["xor", "--config", tmp_path / "g.txt"]) == cli.EXIT_CONFIG
    assert not (tmp_path / "metrics.csv").exists()


def test_missing_dataset_exit_code(tmp_path):
    for cmd in ("mnist-classify", "mnist-density"):
        assert _run([cmd, "--data-dir", tmp_path / "nothing", "--out", tmp_path / cmd]) == cli.EXIT_DATA
    (tmp_path / "bad").mkdir()
    for name in ("train-images-idx3-ubyte", "train-labels-idx1-ubyte", "t10k-images-idx3-ubyte",
                 "t10k-labels-idx1-ubyte"):
        (tmp_path / "bad" / name).write_bytes(b"\x00\x00\x08")
    assert _run(["mnist-classify", "--data-dir", tmp_path / "bad", "--out", tmp_path / "o"]) == cli.EXIT_DATA


def test_verify_exit_codes(monkeypatch, capsys):
    assert _run(["verify", "--suite", "zr", "--suite", "layers"]) == cli.EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 2 and all(line.startswith("PASS") for line in out)
    monkeypatch.setitem(verify.SUITES, "zr", lambda: verify.Check("zr", False, "forced"))
    assert _run(["verify", "--suite", "zr"]) == cli.EXIT_VERIFY
    assert "FAIL  zr: forced" in capsys.readouterr().out


def test_plotdata_exit_codes(tmp_path):
    assert _run(["plotdata", tmp_path]) == cli.EXIT_ARTIFACTS
    with pytest.raises(FileNotFoundError):
        cli.emit_plotdata(tmp_path)


def test_gaussian_run_artifacts(tmp_path, capsys):
    out = tmp_path / "g"
    assert _run(["gaussian", "--rounds", 3000, "--metrics-block", 500, "--seed", 3, "--out", out]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert 0 <= summary["top_mae"] <= 1
    for name in ("config.txt", "metadata.json", "metrics.csv", "metrics.jsonl", "timing.csv", "checkpoint.npz",
                 "artifacts.npz", "grid_fit.csv"):
        assert (out / name).exists(), name
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["seed"] == 3 and meta["config"]["rounds"] == 3000 and meta["library_version"]
    assert cli.parse_config(meta["config_text"]) == cli.parse_config((out / "config.txt").read_text())
    rows = read_metrics(out / "metrics.jsonl")
    assert [r["count"] for r in rows] == [500] * 6 and rows[0]["index"] == 0
    grid = read_columns(out / "grid_fit.csv")
    assert len(grid["z"]) == 601 and "p11_L5" in grid
    header, arrays = load_checkpoint(out / "checkpoint.npz")
    assert header["config"]["seed"] == 3 and "weights_0" in arrays or len(arrays) > 0
    (out / "grid_fit.csv").unlink()
    assert _run(["plotdata", out]) == 0
    assert (out / "grid_fit.csv").exists()


def test_config_file_and_flag_precedence(tmp_path, capsys):
    (tmp_path / "c.txt").write_text("experiment = gaussian\nrounds = 100\nseed = 9\n")
    out = tmp_path / "run"
    assert _run(["gaussian", "--config", tmp_path / "c.txt", "--seed", 4, "--set", "alpha=0.25",
                 "--no-checkpoint", "--out", out]) == 0
    cfg = cli.parse_config((out / "config.txt").read_text())
    assert (cfg.rounds, cfg.seed, cfg.alpha, cfg.checkpoint) == (100, 4, 0.25, False)
    assert not (out / "checkpoint.npz").exists()


def test_switching_and_small_experiments(tmp_path, capsys):
    assert _run(["gaussian", "--switching", "--rounds", 1000, "--record-every", 100, "--snapshots", "500",
                 "--out", tmp_path / "s"]) == 0
    sw = read_columns(tmp_path / "s" / "switching.csv")
    u = np.column_stack([v for k, v in sw.items() if k != "t"])
    assert u.shape == (10, 12) and np.allclose(u.sum(axis=1), 1.0)
    assert _run(["xor", "--rounds", 500, "--out", tmp_path / "x"]) == 0
    assert len(read_columns(tmp_path / "x" / "xor.csv")["neuron"]) == 11
    assert _run(["spiral", "--n-per-class", 100, "--grid", 21, "--widths", "8,4,1", "--out", tmp_path / "sp"]) == 0
    summary = json.loads(capsys.readouterr().out.splitlines()[-1])
    assert summary["examples_seen"] == 300 and len(summary["layer_accuracy"]) == 3
    sp = read_columns(tmp_path / "sp" / "spiral_grid.csv")
    assert set(sp) == {"x", "y", "true", "predicted"}


def _fake_mnist(root, n_train=12, n_test=4):
    rng = RandomSource(0)
    root.mkdir()
    for prefix, n in (("train", n_train), ("t10k", n_test)):
        imgs = np.zeros((n, 28, 28), np.uint8)
        labels = rng.integers(0, 10, n).astype(np.uint8)
        for i, lab in enumerate(labels):
            imgs[i, 4 + lab:14 + lab, 8:18] = 200
        write_idx(root / f"{prefix}-images-idx3-ubyte", imgs)
        write_idx(root / f"{prefix}-labels-idx1-ubyte", labels)
    return root


def test_mnist_commands_on_synthetic_files(tmp_path, capsys):
    data = _fake_mnist(tmp_path / "mnist")
    assert _run(["mnist-classify", "--data-dir", data, "--widths", "8,1", "--out", tmp_path / "c"]) == 0
    summary = json.loads(capsys.readouterr().out.splitlines()[-1])
    assert (summary["n_train"], summary["n_test"]) == (12, 4)
    splits = [r["split"] for r in read_metrics(tmp_path / "c" / "metrics.jsonl")]
    assert splits == ["train", "test"]
    assert _run(["mnist-density", "--data-dir", data, "--widths", "2,2", "--n-skipgrams", 6, "--n-contexts", 6,
                 "--train-limit", 5, "--test-limit", 2, "--out", tmp_path / "d"]) == 0
    summary = json.loads(capsys.readouterr().out.splitlines()[-1])
    assert summary["images_seen"] == 7 and summary["binarization"].startswith("IDX")
    assert len(read_columns(tmp_path / "d" / "density_test.csv")["loss_nats"]) == 2


def test_same_seed_same_metrics(tmp_path, capsys):
    runs = []
    for k in range(2):
        d = tmp_path / str(k)
        assert _run(["gaussian", "--switching", "--rounds", 1500, "--metrics-block", 100, "--out", d]) == 0
        runs.append(((d / "metrics.csv").read_bytes(), (d / "metrics.jsonl").read_bytes()))
    assert runs[0] == runs[1]
    d = tmp_path / "other"
    assert _run(["gaussian", "--switching", "--rounds", 1500, "--metrics-block", 100, "--seed", 1, "--out", d]) == 0
    assert (d / "metrics.csv").read_bytes() != runs[0][0]


def test_mnist_paths_are_deterministic(tmp_path, capsys):
    data = _fake_mnist(tmp_path / "mnist")
    for cmd, extra in (("mnist-classify", ["--widths", "4,1"]),
                       ("mnist-density", ["--widths", "2,2", "--n-skipgrams", 4, "--n-contexts", 4,
                                          "--train-limit", 4, "--test-limit", 2])):
        files = []
        for k in range(2):
            d = tmp_path / f"{cmd}{k}"
            assert _run([cmd, "--data-dir", data, "--metrics-block", 1, "--out", d, *extra]) == 0
            files.append((d / "metrics.csv").read_bytes() + (d / "metrics.jsonl").read_bytes())
        assert files[0] == files[1]
