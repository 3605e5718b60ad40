import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gln.base_models import (ZRCounter, ZRTable, constant_base, feature_base, kt_log_marginal, zr_predict,
                             zr_predict_counts, zr_update)
from gln.numerics import BETA, logit


def kt_exact(xs):
    """KT marginal as an exact rational, built symbol by symbol."""
    p = Fraction(1)
    a = b = 0
    for x in xs:
        if x:
            p *= Fraction(2 * b + 1, 2 * (a + b + 1))
            b += 1
        else:
            p *= Fraction(2 * a + 1, 2 * (a + b + 1))
            a += 1
    return p


def zr_exact(xs):
    xs = list(xs)
    p = Fraction(1, 2) * kt_exact(xs)
    if not any(xs):
        p += Fraction(1, 4)
    if all(xs):
        p += Fraction(1, 4)
    return p


def sequential(xs):
    c = ZRCounter()
    log_p = 0.0
    for x in xs:
        p = zr_predict(c)
        log_p += math.log(p if x else 1 - p)
        zr_update(c, x)
    return log_p, c


def test_zr_predict_examples():
    assert zr_predict(ZRCounter()) == 0.5
    c = ZRCounter()
    for _ in range(3):
        zr_update(c, 1)
    assert zr_predict(c) == pytest.approx(99 / 104, abs=1e-15)
    assert float(zr_exact([1, 1, 1, 1]) / zr_exact([1, 1, 1])) == pytest.approx(99 / 104, abs=1e-15)
    d = ZRCounter()
    zr_update(d, 0)
    zr_update(d, 1)
    assert zr_predict(d) == pytest.approx(0.5, abs=1e-15)


def test_update_counts():
    c = zr_update(ZRCounter(), 1)
    assert (c.zeros, c.ones) == (0, 1)


def test_sequential_matches_exact_marginals():
    worst = 0.0
    for n in range(1, 11):
        for xs in itertools.product((0, 1), repeat=n):
            log_p, c = sequential(xs)
            worst = max(worst, abs(log_p - math.log(zr_exact(xs))))
            assert c.log_marginal() == pytest.approx(log_p, abs=1e-12)
    assert worst <= 1e-12


def test_zr_is_a_valid_sequential_model():
    for n in range(0, 10):
        for xs in itertools.product((0, 1), repeat=n):
            assert zr_exact(xs + (0,)) + zr_exact(xs + (1,)) == (zr_exact(xs) if n else 1)


def test_kt_log_marginal():
    for xs in itertools.product((0, 1), repeat=6):
        ones = sum(xs)
        assert kt_log_marginal(6 - ones, ones) == pytest.approx(math.log(kt_exact(xs)), abs=1e-13)


def test_deterministic_runs_cost_at_most_log4():
    c_zero, c_one = ZRCounter(), ZRCounter()
    lz = lo = 0.0
    for _ in range(10_000):
        lz -= math.log(1 - zr_predict(c_zero))
        lo -= math.log(zr_predict(c_one))
        zr_update(c_zero, 0)
        zr_update(c_one, 1)
    assert lz <= math.log(4) and lo <= math.log(4)


@given(st.integers(1, 500), st.integers(1, 500))
def test_kt_closed_form_once_both_seen(a, b):
    c = ZRCounter(a, b, kt_log_marginal(a, b))
    assert zr_predict(c) == pytest.approx((b + 0.5) / (a + b + 1), abs=1e-12)


def test_predictions_strictly_inside():
    c = ZRCounter()
    for _ in range(2000):
        p = zr_predict(c)
        assert 0 < p < 1
        zr_update(c, 1)


def test_vectorised_counts_match_scalar():
    a = np.arange(0, 30)
    b = np.arange(0, 30)
    A, B = np.meshgrid(a, b, indexing="ij")
    table = ZRTable((1,))
    run = table._run_table(40)
    got = zr_predict_counts(A.ravel(), B.ravel(), run)
    for (i, j), g in zip(itertools.product(a, b), got):
        c = ZRCounter(int(i), int(j), kt_log_marginal(int(i), int(j)))
        assert g == pytest.approx(zr_predict(c), abs=1e-12)


def test_table_update_and_state():
    table = ZRTable((3, 4))
    idx = (np.array([0, 0, 2]), np.array([1, 1, 3]))
    table.update(idx, np.array([1, 1, 0]))
    assert table.ones[0, 1] == 2 and table.zeros[2, 3] == 1
    p = table.predict(idx)
    c = ZRCounter()
    zr_update(c, 1)
    zr_update(c, 1)
    assert p[0] == pytest.approx(zr_predict(c), abs=1e-15)
    assert table.predict()[1, 1] == 0.5  # untouched context: empty-history prior
    other = ZRTable((3, 4))
    other.load_state(table.state())
    assert np.array_equal(other.predict(), table.predict())


def test_feature_base():
    assert feature_base([0.0, 0.0]).tolist() == [0.5, 0.5]
    assert feature_base([1.0])[0] == pytest.approx(BETA, abs=1e-15)
    assert feature_base([-50.0, 50.0], 0.01).tolist() == [0.01, 0.99]


def test_constant_base():
    assert constant_base(0.5) == 0.5
    assert logit(constant_base(BETA)) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        constant_base(1.0)
