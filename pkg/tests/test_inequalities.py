"""Scalar inequalities that underpin the sweep bookkeeping.

The harness trusts three pieces of arithmetic: the product bound
a*b <= a**p + (p-1)*(b/p)**(p/(p-1)), the elementary power estimates
(s+t)**p - s**p >= t**p >= t - (p-1), and the pairing-exponent identity
behind ``holder_exponent``.  Each is checked on 10^4 seeded random
instances with slack 1e-12 at the scale of the dominating term.
"""

import math

import numpy as np
import pytest

from orlicztv import holder_exponent, young_correction

INSTANCES = 10_000
SLACK = 1e-12


def test_product_bound_random_instances():
    rng = np.random.default_rng(41)
    a = 10.0 ** rng.uniform(-3.0, 3.0, INSTANCES)
    b = 10.0 ** rng.uniform(-3.0, 3.0, INSTANCES)
    p = 1.0 + rng.uniform(0.0, 2.0, INSTANCES)
    conj = p / (p - 1.0)
    # p near 1 makes the conjugate power overflow or underflow; both
    # saturations land on the safe side of the bound
    with np.errstate(over="ignore", under="ignore"):
        rhs = a ** p + (p - 1.0) * (b / p) ** conj
    slack = SLACK * np.maximum(1.0, rhs)
    bad = a * b > rhs + slack
    assert not np.any(bad), (a[bad][:3], b[bad][:3], p[bad][:3])


def test_product_bound_equality_case():
    # b = p * a**(p-1) is the touching point; the two sides agree there
    rng = np.random.default_rng(42)
    a = 10.0 ** rng.uniform(-2.0, 2.0, INSTANCES)
    p = 1.0 + rng.uniform(1e-3, 2.0, INSTANCES)
    b = p * a ** (p - 1.0)
    rhs = a ** p + (p - 1.0) * (b / p) ** (p / (p - 1.0))
    np.testing.assert_allclose(a * b, rhs, rtol=1e-10)


def test_shifted_power_bounds_random_instances():
    rng = np.random.default_rng(43)
    s = 10.0 ** rng.uniform(-6.0, 3.0, INSTANCES)
    t = 10.0 ** rng.uniform(-6.0, 3.0, INSTANCES)
    s[::7] = 0.0
    t[::11] = 0.0
    p = 1.0 + rng.uniform(0.0, 1.0, INSTANCES)

    left = (s + t) ** p - s ** p
    mid = t ** p
    assert np.all(left >= mid - SLACK * np.maximum(1.0, (s + t) ** p))
    assert np.all(mid >= t - (p - 1.0) - SLACK * np.maximum(1.0, t))


def test_shifted_power_bound_tight_at_zero_shift():
    t = np.array([0.0, 0.5, 1.0, 7.0])
    p = 1.5
    np.testing.assert_array_equal((0.0 + t) ** p - 0.0 ** p, t ** p)


def test_linear_lower_bound_minimum_is_interior():
    # min_t (t**p - t + (p-1)) sits at t = p**(-1/(p-1)) and is positive
    p = 1.5
    t = p ** (-1.0 / (p - 1.0))
    assert t ** p - t + (p - 1.0) == pytest.approx((p - 1.0) * (1.0 - t / p))
    assert t ** p - t + (p - 1.0) > 0.0


def test_pairing_exponent_identity_random_instances():
    rng = np.random.default_rng(44)
    for _ in range(INSTANCES):
        r = 1.0 + 10.0 ** rng.uniform(-2.0, 1.7)
        p = 1.0 + rng.uniform(1e-6, 1.0 - 1e-6) * (r - 1.0)
        q = holder_exponent(r, p)
        assert q > 1.0
        assert abs(1.0 / q + r * (1.0 - 1.0 / q) - p) <= SLACK * max(1.0, p)


def test_pairing_exponent_examples():
    assert holder_exponent(2.0, 1.5) == pytest.approx(2.0, abs=1e-15)
    assert holder_exponent(3.0, 2.0) == pytest.approx(2.0, abs=1e-15)
    # q -> 1 as p -> 1
    assert holder_exponent(2.0, 1.0 + 1e-9) == pytest.approx(1.0, abs=1e-8)


def test_pairing_exponent_domain_errors():
    for r, p in ((2.0, 1.0), (2.0, 0.5), (2.0, 2.0), (2.0, 2.5),
                 (1.0, 1.0), (2.0, math.nan), (math.inf, 2.0)):
        with pytest.raises(ValueError):
            holder_exponent(r, p)


def test_correction_vanishes_random_instances():
    # 0 <= correction <= measure * (p - 1); the right side -> 0 as p -> 1
    rng = np.random.default_rng(45)
    for _ in range(INSTANCES):
        p = 1.0 + 10.0 ** rng.uniform(-12.0, 0.5)
        measure = 10.0 ** rng.uniform(-3.0, 3.0)
        value = young_correction(p, measure)
        assert 0.0 <= value <= measure * (p - 1.0) + SLACK


def test_correction_normalized_limit():
    # correction / (measure * (p-1)) -> exp(-1) as p -> 1
    ratio = young_correction(1.0 + 1e-8, 1.0) / 1e-8
    assert ratio == pytest.approx(math.exp(-1.0), rel=1e-6)
