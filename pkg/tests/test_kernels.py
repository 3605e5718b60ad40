import os
import subprocess
import sys

import numpy as np
import pytest

from gln import kernels
from gln.network import ContextIds, GatedLinearNetwork, NetworkSpec
from gln.numerics import RandomSource
from gln.verify import check_kernels


def _layer_case(seed, B=3, K=4, C=5, F=6):
    rng = RandomSource(seed)
    W = rng.uniform(-1, 1, (B, K, C, F + 1))
    ctx = rng.integers(0, C, (B, K))
    xin = rng.uniform(-3, 3, (B, F + 1))
    return W, ctx, xin


def test_numpy_forward_matches_definition():
    W, ctx, xin = _layer_case(0)
    B, K = ctx.shape
    s = np.empty((B, K))
    xo = np.empty((B, K + 1))
    kernels.python.forward_layer(W, ctx, xin, -2.0, 2.0, 0.75, s, xo)
    for b in range(B):
        for k in range(K):
            assert s[b, k] == pytest.approx(W[b, k, ctx[b, k]] @ xin[b], abs=1e-12)
    assert np.all(xo[:, 0] == 0.75)
    assert np.array_equal(xo[:, 1:], np.clip(s, -2.0, 2.0))


@pytest.mark.skipif(kernels.compiled is None, reason="compiled kernels not built")
def test_compiled_parity():
    assert check_kernels().passed


@pytest.mark.skipif(kernels.compiled is None, reason="compiled kernels not built")
def test_network_backends_agree():
    spec = NetworkSpec(3, (4, 2, 1), bound=5.0)
    rng = RandomSource(1)
    sizes = rng.integers(1, 4, spec.n_neurons)
    nets = [GatedLinearNetwork(spec, ContextIds(sizes), backend=b) for b in ("cython", "numpy")]
    for _ in range(200):
        base = rng.uniform(0.05, 0.95, 3)
        ctx = np.array([int(rng.integers(0, s)) for s in sizes])
        x = float(rng.integers(0, 2))
        outs = [n.predict(base, ctx) for n in nets]
        assert np.allclose(outs[0], outs[1], atol=1e-12)
        for n in nets:
            n.update(n.forward(base, ctx), x)
    for a, b in zip(nets[0].weights, nets[1].weights):
        assert np.allclose(a, b, atol=1e-10)


def test_backend_selection_errors():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")
    assert kernels.get_backend("numpy") is kernels.python


def test_pure_python_fallback_subprocess():
    env = dict(os.environ, GLN_PURE_PYTHON="1")
    code = ("from gln import kernels; from gln.verify import check_layer_identity;"
            "print(kernels.BACKEND, kernels.compiled is None, check_layer_identity(nets=20).passed)")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["numpy", "True", "True"]
