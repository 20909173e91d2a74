"""Truncated products of nonnegative-coefficient polynomials.

The generating-function kernels multiply degree-n polynomials k times and
only ever read coefficients up to degree n, so every product is truncated.
The fast path pads to the next power of two >= the full product length and
multiplies via real FFT; a naive O(n^2) path is kept both as a fallback and
as the cross-check required of the fast path.

True coefficients are products of positive weights, so tiny negative values
produced by FFT rounding are clamped to zero.
"""

from __future__ import annotations

import numpy as np

FFT_THRESHOLD = 32  # below this, naive convolution wins and is exact


def next_pow2(n):
    p = 1
    while p < n:
        p <<= 1
    return p


def convolve_naive(a, b):
    return np.convolve(np.asarray(a, float), np.asarray(b, float))


def convolve_fft(a, b):
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    size = next_pow2(len(a) + len(b) - 1)
    out = np.fft.irfft(np.fft.rfft(a, size) * np.fft.rfft(b, size), size)
    out = out[: len(a) + len(b) - 1]
    peak = float(np.max(np.abs(out))) if out.size else 0.0
    out[np.abs(out) < 1e-12 * peak] = 0.0
    return np.maximum(out, 0.0)


def truncated_product(a, b, degree, use_fft=None):
    """Coefficients of a*b up to (and including) ``degree``."""
    if use_fft is None:
        use_fft = max(len(a), len(b)) >= FFT_THRESHOLD
    full = convolve_fft(a, b) if use_fft else convolve_naive(a, b)
    return full[: degree + 1]


class ScaledPoly:
    """Nonnegative polynomial stored as coefficients times exp(log_scale).

    Running kernel products renormalize after every multiplication so the
    stored coefficients stay near unit magnitude; only ratios of kernels are
    consumed downstream, and absolute values are recovered via ``value``.
    """

    __slots__ = ("coeffs", "log_scale")

    def __init__(self, coeffs, log_scale=0.0):
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.log_scale = float(log_scale)

    @classmethod
    def one(cls):
        return cls(np.ones(1), 0.0)

    def normalized(self):
        peak = float(np.max(self.coeffs)) if self.coeffs.size else 0.0
        if peak <= 0.0:
            return ScaledPoly(np.zeros_like(self.coeffs), 0.0)
        return ScaledPoly(self.coeffs / peak, self.log_scale + np.log(peak))

    def mul_truncated(self, other, degree, use_fft=None):
        coeffs = truncated_product(self.coeffs, other.coeffs, degree, use_fft)
        return ScaledPoly(coeffs, self.log_scale + other.log_scale).normalized()

    def coeff_value(self, index):
        """Absolute value of one coefficient (may overflow to inf)."""
        if index < 0 or index >= len(self.coeffs):
            return 0.0
        return float(self.coeffs[index]) * float(np.exp(self.log_scale))

    def coeff_scaled(self, index):
        """(mantissa, log_scale) form of one coefficient."""
        if index < 0 or index >= len(self.coeffs):
            return 0.0, self.log_scale
        return float(self.coeffs[index]), self.log_scale
