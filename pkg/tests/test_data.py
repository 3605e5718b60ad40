import gzip
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from gln.data import (BadMagicError, DimensionOverflowError, IdxError, RunningMean, TruncatedPayloadError,
                      binarize, deskew, gaussian_bump, gaussian_task_sample, image_moments, load_binarized_amat,
                      load_idx, load_mnist, mnist_dir_from_env, parse_idx, spiral_arc_label, spiral_dataset,
                      write_idx, xor_task_sample)
from gln.numerics import RandomSource

MEAN_F = 0.4166434815805158412  # (1/6) int_{-3}^{3} exp(-z^2/2) dz, mpmath
F_AT_3 = 0.0111089965382423065


def test_golden_idx_file(tmp_path):
    raw = bytes([0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 2, 0, 127, 128, 255])
    path = tmp_path / "tiny-idx3-ubyte"
    path.write_bytes(raw)
    t = load_idx(path)
    assert t.magic == 0x803 and t.dims == (1, 2, 2)
    assert t.payload.tolist() == [[[0, 127], [128, 255]]]
    write_idx(tmp_path / "again", t.payload)
    assert (tmp_path / "again").read_bytes() == raw


@settings(max_examples=50, deadline=None)
@given(hnp.arrays(np.uint8, hnp.array_shapes(min_dims=1, max_dims=4, max_side=6)))
def test_idx_round_trip(tmp_path_factory, arr):
    path = tmp_path_factory.mktemp("idx") / "t.idx"
    write_idx(path, arr)
    back = load_idx(path).payload
    assert back.dtype == np.uint8 and back.shape == arr.shape and np.array_equal(back, arr)


def test_idx_gzip(tmp_path):
    arr = np.arange(24, dtype=np.uint8).reshape(2, 3, 4)
    write_idx(tmp_path / "a.gz", arr)
    with gzip.open(tmp_path / "a.gz") as f:
        assert f.read(4) == bytes([0, 0, 8, 3])
    assert np.array_equal(load_idx(tmp_path / "a.gz").payload, arr)


def test_idx_errors():
    header = struct.pack(">IIII", 0x803, 2, 2, 2)
    with pytest.raises(TruncatedPayloadError):
        parse_idx(header + bytes(7))
    with pytest.raises(TruncatedPayloadError):
        parse_idx(b"\x00\x00")
    with pytest.raises(TruncatedPayloadError):
        parse_idx(struct.pack(">I", 0x803) + bytes(4))
    with pytest.raises(BadMagicError):
        parse_idx(struct.pack(">II", 0x12345678, 1) + bytes(1))
    with pytest.raises(BadMagicError):
        parse_idx(struct.pack(">II", 0x0D01, 1) + bytes(8))  # float payloads are not supported
    with pytest.raises(DimensionOverflowError):
        parse_idx(struct.pack(">IIII", 0x803, 0xFFFFFFFF, 28, 28))
    for err in (BadMagicError, TruncatedPayloadError, DimensionOverflowError):
        assert issubclass(err, IdxError)
    assert len({BadMagicError, TruncatedPayloadError, DimensionOverflowError}) == 3


def test_load_mnist_layout(tmp_path, monkeypatch):
    rng = RandomSource(0)
    write_idx(tmp_path / "train-images-idx3-ubyte.gz", rng.integers(0, 256, (5, 28, 28)).astype(np.uint8))
    write_idx(tmp_path / "train-labels-idx1-ubyte", np.arange(5, dtype=np.uint8))
    write_idx(tmp_path / "t10k-images.idx3-ubyte", np.zeros((2, 28, 28), np.uint8))
    write_idx(tmp_path / "t10k-labels-idx1-ubyte", np.array([3, 4], np.uint8))
    tx, ty, vx, vy = load_mnist(tmp_path)
    assert tx.shape == (5, 28, 28) and ty.tolist() == [0, 1, 2, 3, 4] and vx.shape == (2, 28, 28)
    monkeypatch.setenv("GLN_MNIST_DIR", str(tmp_path))
    assert mnist_dir_from_env() == tmp_path
    with pytest.raises(FileNotFoundError):
        load_mnist(tmp_path / "missing")


def test_amat(tmp_path):
    rows = np.zeros((3, 784), dtype=int)
    rows[1, ::2] = 1
    np.savetxt(tmp_path / "b.amat", rows, fmt="%d")
    assert np.array_equal(load_binarized_amat(tmp_path / "b.amat"), rows)
    np.savetxt(tmp_path / "bad.amat", rows[:, :10], fmt="%d")
    with pytest.raises(IdxError):
        load_binarized_amat(tmp_path / "bad.amat")


def test_binarize_examples():
    assert binarize(np.zeros((28, 28), np.uint8)).sum() == 0
    assert binarize(np.array([128]), 128).tolist() == [1]
    assert binarize(np.array([127]), 128).tolist() == [0]
    board = (np.indices((4, 4)).sum(0) % 2 * 255).astype(np.uint8)
    assert np.array_equal(binarize(board), (board // 255).reshape(-1))
    with pytest.raises(ValueError):
        binarize(board, 0)


@given(hnp.arrays(np.uint8, 30, elements=st.integers(0, 1)))
def test_binarize_idempotent_on_binary(img):
    once = binarize(img * 255)
    assert np.array_equal(binarize(once * 255), once)


def blob(sr=3.0, sc=2.0, shear=0.0, size=28):
    r, c = np.indices((size, size)).astype(float)
    r -= 13.5
    c -= 13.5 + shear * r
    return np.exp(-0.5 * ((r / sr) ** 2 + (c / sc) ** 2))


def test_deskew_symmetric_blob_unchanged():
    img = blob()
    assert abs(image_moments(img)[5]) < 1e-12
    assert np.max(np.abs(deskew(img) - img)) <= 1e-6


def test_deskew_reduces_skew():
    img = blob(sr=5.0, sc=1.5, shear=0.4)
    before = abs(image_moments(img)[5])
    after = abs(image_moments(deskew(img))[5])
    assert before > 0.5
    assert after <= 0.1 * before


def test_deskew_degenerate_and_deterministic():
    blank = np.zeros((28, 28))
    assert np.array_equal(deskew(blank), blank)
    img = blob(shear=0.3) * 255
    a, b = deskew(img), deskew(img)
    assert np.array_equal(a, b)
    assert a.min() >= img.min() and a.max() <= img.max()


def test_spiral_noiseless_arms_separate():
    d = spiral_dataset(300, RandomSource(0), noise=0.0)
    X = np.stack([e.features for e in d])
    y = np.array([e.label for e in d])
    gaps = []
    for a in range(3):
        for b in range(a + 1, 3):
            diff = X[y == a][:, None, :] - X[y == b][None, :, :]
            gaps.append(np.sqrt((diff ** 2).sum(-1)).min())
    assert min(gaps) > 0


def test_spiral_deterministic_and_balanced():
    a = spiral_dataset(200, RandomSource(4), noise=0.2)
    b = spiral_dataset(200, RandomSource(4), noise=0.2)
    assert all(np.array_equal(x.features, y.features) and x.label == y.label for x, y in zip(a, b))
    assert np.bincount([e.label for e in a]).tolist() == [200, 200, 200]


@pytest.mark.parametrize("noise", [0.0, 0.05, 0.1, 0.2])
def test_spiral_nearest_arc_oracle(noise):
    d = spiral_dataset(1000, RandomSource(1), noise=noise)
    X = np.stack([e.features for e in d])
    y = np.array([e.label for e in d])
    assert np.mean(spiral_arc_label(X) == y) >= 0.99


def test_gaussian_task():
    assert gaussian_bump(0.0) == 1.0
    assert gaussian_bump(3.0) == pytest.approx(F_AT_3, abs=1e-15)
    z, x = gaussian_task_sample(RandomSource(2), 1_000_000)
    assert z.min() >= -3 and z.max() <= 3
    assert abs(x.mean() - MEAN_F) <= 0.002
    zs, xs = gaussian_task_sample(RandomSource(2))
    assert isinstance(zs, float) and xs in (0, 1)


def test_xor_task():
    z, x = xor_task_sample(RandomSource(3), 1000)
    assert np.array_equal(x, (z[:, 0] * z[:, 1] >= 0).astype(np.int8))
    assert 0.4 < x.mean() < 0.6


def test_running_mean():
    rm = RunningMean(3)
    data = RandomSource(5).normal(0, 1, (100, 3))
    for row in data:
        rm.update(row)
    assert np.allclose(rm.mean, data.mean(axis=0), atol=1e-12)
