
import numpy as np
import pytest
from hypothesis import given, strategies as st

from gln.numerics import (BETA, RandomSource, bernoulli_kl, check_epsilon, clip_probability, derive_seed, logit,
                          sigmoid)

# reference values computed with mpmath at 30 digits
SIGMOID_ONE = 0.7310585786300048793
LN9 = 2.1972245773362193828
KL_ONE_BETA = 0.3132616875182228340  # -log(beta)
KL_ZERO_BETA = 1.3132616875182228340  # -log(1 - beta) = log(1 + e)
KL_HALF_QUARTER = 0.1438410362258904637


def test_sigmoid_values():
    assert sigmoid(0.0) == 0.5
    assert sigmoid(1.0) == pytest.approx(SIGMOID_ONE, abs=1e-15)
    assert sigmoid(logit(0.3)) == pytest.approx(0.3, abs=1e-15)


def test_sigmoid_saturates_without_overflow():
    with np.errstate(over="raise", invalid="raise"):
        assert sigmoid(-1000.0) == 0.0
        assert sigmoid(1000.0) == 1.0
        out = sigmoid(np.array([-800.0, 0.0, 800.0]))
    assert np.all(np.diff(out) > 0)


def test_logit_values():
    assert logit(0.5) == 0.0
    assert logit(BETA) == pytest.approx(1.0, abs=1e-15)
    assert logit(0.9) == pytest.approx(LN9, abs=1e-14)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
def test_logit_domain(p):
    with pytest.raises(ValueError):
        logit(p)


def test_logit_inverts_sigmoid():
    # exact for x <= 0; for x > 0 the only loss is rounding 1 - sigmoid(x),
    # whose relative error is at most about 2^-53 / (1 - sigmoid(x))
    x = np.linspace(-30, 30, 2001)
    err = np.abs(logit(sigmoid(x)) - x)
    neg = x <= 0
    assert np.max(err[neg]) <= 1e-13
    assert np.all(err[~neg] <= 4e-16 * (1 + np.exp(x[~neg])))


def test_sigmoid_inverts_logit():
    rng = RandomSource(1)
    p = rng.uniform(1e-6, 1 - 1e-6, 10_000)
    assert np.max(np.abs(sigmoid(logit(p)) - p)) <= 1e-12


def test_clip_probability():
    assert clip_probability(0.5, 0.01) == 0.5
    assert clip_probability(0.0, 0.01) == 0.01
    assert clip_probability(1.2, 0.05) == 0.95


@pytest.mark.parametrize("eps", [0.0, 0.5, -0.1, 0.7])
def test_clip_rejects_bad_epsilon(eps):
    with pytest.raises(ValueError):
        clip_probability(0.3, eps)
    with pytest.raises(ValueError):
        check_epsilon(eps)


@given(st.floats(-2, 3, allow_nan=False), st.floats(1e-4, 0.49))
def test_clip_idempotent_and_bounded(p, eps):
    once = clip_probability(p, eps)
    assert eps <= once <= 1 - eps
    assert clip_probability(once, eps) == once


def test_bernoulli_kl_values():
    assert bernoulli_kl(0.3, 0.3) == 0.0
    assert bernoulli_kl(0.0, BETA) == pytest.approx(KL_ZERO_BETA, abs=1e-14)
    assert bernoulli_kl(1.0, BETA) == pytest.approx(KL_ONE_BETA, abs=1e-14)
    assert bernoulli_kl(0.5, 0.25) == pytest.approx(KL_HALF_QUARTER, abs=1e-14)


@pytest.mark.parametrize("q", [0.0, 1.0, 1.2])
def test_bernoulli_kl_domain(q):
    with pytest.raises(ValueError):
        bernoulli_kl(0.5, q)


def test_pinsker():
    rng = RandomSource(2)
    p = rng.random(10_000)
    q = rng.uniform(1e-6, 1 - 1e-6, 10_000)
    kl = np.array([bernoulli_kl(a, b) for a, b in zip(p, q)])
    assert np.all(kl >= 2 * (p - q) ** 2 - 1e-12)


@given(st.floats(0, 1), st.floats(1e-3, 1 - 1e-3))
def test_kl_nonnegative_zero_iff_equal(p, q):
    d = bernoulli_kl(p, q)
    assert d >= 0
    if abs(p - q) > 1e-6:
        assert d > 0


def test_random_source_reproducible():
    a = RandomSource(123).uint64(100_000)
    b = RandomSource(123).uint64(100_000)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, RandomSource(124).uint64(100_000))


def test_random_source_draws_split_consistently():
    # the generator is counter based: n draws at once equal n single draws
    a = RandomSource(9)
    b = RandomSource(9)
    many = a.random(50)
    single = np.array([b.random() for _ in range(50)])
    assert np.array_equal(many, single)


def test_random_source_golden():
    # SplitMix64 output for seed 0, first draw; fixed across platforms
    assert RandomSource(0).uint64() == 0xE220A8397B1DCDAF


def test_random_source_distributions():
    rng = RandomSource(5)
    u = rng.random(200_000)
    assert 0.0 <= u.min() and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.005
    z = rng.normal(0.0, 2.0, 200_000)
    assert abs(z.mean()) < 0.02 and abs(z.std() - 2.0) < 0.02
    k = rng.integers(0, 7, 70_000)
    assert set(np.unique(k)) == set(range(7))
    assert rng.normal(0, 1, (3, 4)).shape == (3, 4)
    perm = rng.permutation(100)
    assert sorted(perm) == list(range(100))
    c = rng.choice(10, 10)
    assert sorted(c) == list(range(10))
    with pytest.raises(ValueError):
        rng.choice(3, 4)


def test_derived_seeds_are_label_specific():
    assert derive_seed(1, "data") == derive_seed(1, "data")
    assert derive_seed(1, "data") != derive_seed(1, "contexts")
    assert derive_seed(1, "data") != derive_seed(2, "data")
    a = RandomSource(3).spawn("x").random(5)
    b = RandomSource(3).spawn("x").random(5)
    assert np.array_equal(a, b)
