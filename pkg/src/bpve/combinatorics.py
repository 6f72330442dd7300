"""Exact combinatorial identities and the reciprocal-gap sums behind the
moment asymptotics of the visit count."""
from __future__ import annotations

import math

import numpy as np
from scipy.signal import fftconvolve


def identity_l2(a: int) -> int:
    """sum_{j=0}^{a} (a+j)! / (j! j! (a-j)!) (-1)^(a-j), in exact integers (always 1)."""
    if a < 0:
        raise ValueError(f"a must be >= 0, got {a}")
    total = 0
    for j in range(a + 1):
        term = math.factorial(a + j) // (math.factorial(j) ** 2 * math.factorial(a - j))
        total += term if (a - j) % 2 == 0 else -term
    return total


def composition_count(a: int, j: int) -> int:
    """Number of ways to write a as an ordered sum of j positive integers."""
    if a < 1 or j < 1:
        raise ValueError(f"need a, j >= 1, got a={a}, j={j}")
    if j > a:
        raise ValueError(f"need j <= a, got a={a}, j={j}")
    return math.comb(a - 1, j - 1)


def compositions(a: int, j: int):
    """Yield every tuple of j positive integers summing to a."""
    if j == 1:
        if a >= 1:
            yield (a,)
        return
    for first in range(1, a - j + 2):
        for rest in compositions(a - first, j - 1):
            yield (first,) + rest


MAX_LEMSA_ORDER = 3


def lemsa_sum(n: int, k: int, l: int) -> float:
    """(log n)^-k · sum over l <= j_1 < ... < j_k <= n with all gaps > l of
    1 / (j_1 (j_2 - j_1) ... (j_k - j_{k-1})).

    Built level by level: h_1(j) = 1/j on j >= l, and
    h_{i+1}(j) = sum_{d > l} h_i(j - d) / d, which is a convolution.
    """
    if not 1 <= k <= MAX_LEMSA_ORDER:
        raise ValueError(f"k must be in 1..{MAX_LEMSA_ORDER}, got {k}")
    if l < 1:
        raise ValueError(f"l must be >= 1, got {l}")
    if n < 2 or n < l * (k + 1):
        raise ValueError(f"need n >= max(2, l*(k+1)), got n={n}, l={l}, k={k}")
    idx = np.arange(n + 1, dtype=float)
    h = np.zeros(n + 1)
    h[l:] = 1.0 / idx[l:]
    gap = np.zeros(n + 1)
    gap[l + 1 :] = 1.0 / idx[l + 1 :]
    for i in range(1, k):
        h = fftconvolve(h, gap)[: n + 1]
        # exact support starts at l + i(l+1); below it only fft round-off remains
        h[: l + i * (l + 1)] = 0.0
        np.clip(h, 0.0, None, out=h)
    return math.fsum(h) / math.log(n) ** k
