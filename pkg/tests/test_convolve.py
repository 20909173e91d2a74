"""FFT and naive truncated products must agree coefficient-for-coefficient."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from polygames.convolve import (ScaledPoly, convolve_fft, convolve_naive,
                                truncated_product)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 200), st.integers(1, 200), st.integers(0, 2**31))
def test_fft_matches_naive(na, nb, seed):
    rng = np.random.default_rng(seed)
    a = rng.random(na)
    b = rng.random(nb)
    ref = convolve_naive(a, b)
    got = convolve_fft(a, b)
    np.testing.assert_allclose(got, ref, rtol=1e-10, atol=1e-10 * ref.max())


def test_truncation():
    a = np.array([1.0, 2.0, 3.0])
    b = np.array([4.0, 5.0])
    full = np.convolve(a, b)
    np.testing.assert_allclose(truncated_product(a, b, 1), full[:2])
    np.testing.assert_allclose(truncated_product(a, b, 10), full)


def test_fft_clamps_negatives():
    a = np.array([1e-18, 1.0])
    b = np.array([1.0, 1e-18])
    out = convolve_fft(a, b)
    assert np.all(out >= 0.0)


def test_scaled_poly_running_product_stays_normalized():
    rng = np.random.default_rng(0)
    p = ScaledPoly.one()
    factors = [rng.random(6) * 1e80 for _ in range(10)]
    for f in factors:
        p = p.mul_truncated(ScaledPoly(f), degree=5)
    assert np.max(p.coeffs) <= 1.0 + 1e-12
    # spot-check one coefficient in log space against slow accumulation
    q = np.ones(1)
    for f in factors:
        q = np.convolve(q, f)[:6]
        q /= np.max(q)  # keep finite; only ratios are compared
    ratio_ref = q[3] / q[5]
    mant3, _ = p.coeff_scaled(3)
    mant5, _ = p.coeff_scaled(5)
    assert np.isclose(mant3 / mant5, ratio_ref, rtol=1e-9)
