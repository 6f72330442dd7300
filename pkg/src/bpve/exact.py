"""Exact kernels: D-tables, the law of Z_n, conditional and joint level
probabilities, and exact moments of the visit count |C ∩ [1, n]|.

With m_k = q_k / p_k,

    D(k, n) = 1 + sum_{j=k}^{n} m_j ... m_n,      D(n) = D(1, n),

and Z_n is geometric on {0, 1, ...} with success parameter 1 / D(n).
D grows like a power of n (or geometrically in supercritical stretches), so
every D value is kept both linearly and as a logarithm; probabilities are
formed from the logarithms whenever the linear value has saturated.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from numba import njit

from .environment import EnvironmentSpec, Homogeneous

#: Linear D values above this are stored as +inf; the log slot stays exact.
OVERFLOW_THRESHOLD = 1e300
#: Default tail mass used when truncating distributions.
TAIL_TOL = 1e-12
#: Largest horizon accepted for exact moments of order >= 2 (O(n^2) work).
MAX_MOMENT_HORIZON = 10_000
MAX_MOMENT_ORDER = 4


@njit(cache=True)
def _forward(m, logm, d_prev, logd_prev, out_d, out_logd):
    # D(n+1) = 1 + m_{n+1} D(n), in both representations
    for i in range(m.shape[0]):
        x = logm[i] + logd_prev
        logd_prev = x + math.log1p(math.exp(-x))
        d_prev = 1.0 + m[i] * d_prev
        if d_prev > OVERFLOW_THRESHOLD:
            d_prev = math.inf
        out_d[i] = d_prev
        out_logd[i] = logd_prev


@njit(cache=True)
def _logaddexp(x, y):
    if x > y:
        return x + math.log1p(math.exp(y - x))
    return y + math.log1p(math.exp(x - y))


@njit(cache=True)
def _log_window(logm, k, n):
    # backward over j = n..k: log(1 + sum_j m_j...m_n), and log(m_k...m_n)
    log_sum = 0.0
    log_prod = 0.0
    for j in range(n, k - 1, -1):
        log_prod += logm[j]
        log_sum = _logaddexp(log_sum, log_prod)
    return log_sum, log_prod


@njit(cache=True)
def _return_prob(log_alpha, log_beta, log_delta, a, binom2):
    # P(Z_{k+n}=a | Z_k=a) = (1/alpha) sum_l C(a,l)^2 (b0 r)^(a-l) c^l with
    # b0 = beta/alpha, r = 1 - 1/alpha, c = (alpha - beta)/alpha^2; all terms >= 0
    inv_alpha = math.exp(-log_alpha)
    if a == 0:
        return inv_alpha
    r = -math.expm1(-log_alpha)
    b0r = math.exp(log_beta - log_alpha) * r
    c = math.exp(log_delta - 2.0 * log_alpha)
    s = 0.0
    for l in range(a + 1):
        s += binom2[l] * b0r ** (a - l) * c ** l
    return inv_alpha * s


@njit(cache=True)
def _joint_sums(logm, logd, a, mmax, binom2):
    """G(m, n) = sum over 1 <= j_1 < ... < j_m <= n of P(Z_{j_1}=a, ..., Z_{j_m}=a)."""
    n = logd.shape[0] - 1
    h = np.zeros((mmax + 1, n + 1))
    for j in range(1, n + 1):
        inv_d = math.exp(-logd[j])
        h[1, j] = math.exp(a * math.log1p(-inv_d) - logd[j])
    for j in range(2, n + 1):
        log_next = 0.0  # log D(j+1, j)
        log_prod = 0.0
        for k in range(j, 1, -1):
            log_prod += logm[k]
            log_cur = _logaddexp(log_next, log_prod)  # log D(k, j)
            q = _return_prob(log_cur, log_next, log_prod, a, binom2)
            jp = k - 1
            for i in range(1, mmax):
                h[i + 1, j] += h[i, jp] * q
            log_next = log_cur
    g = np.zeros(mmax + 1)
    for i in range(1, mmax + 1):
        g[i] = h[i, 1:].sum()
    return g


class DTable:
    """Lazily grown table of D(n) for one environment.

    ``d`` holds the linear values (``inf`` past the overflow threshold) and
    ``log_d`` the natural logarithms; index 0 stores D(0) = 1.
    """

    def __init__(self, env: EnvironmentSpec, n: int = 0):
        self.env = env
        self._n = 0
        self._m = np.zeros(1)
        self._logm = np.zeros(1)
        self._d = np.ones(1)
        self._logd = np.zeros(1)
        if n:
            self.ensure(n)

    @property
    def size(self) -> int:
        return self._n

    def ensure(self, n: int) -> None:
        if n <= self._n:
            return
        target = max(n, 2 * self._n)
        p = self.env.p_array(target)[self._n:]
        m = (1.0 - p) / p
        logm = np.log(m)
        d = np.empty_like(m)
        logd = np.empty_like(m)
        _forward(m, logm, self._d[-1], self._logd[-1], d, logd)
        self._m = np.concatenate([self._m, m])
        self._logm = np.concatenate([self._logm, logm])
        self._d = np.concatenate([self._d, d])
        self._logd = np.concatenate([self._logd, logd])
        self._n = target

    def d(self, n: int) -> float:
        self.ensure(n)
        return float(self._d[n])

    def log_d(self, n: int) -> float:
        self.ensure(n)
        return float(self._logd[n])

    def overflowed(self, n: int) -> bool:
        return math.isinf(self.d(n))

    def means(self, n: int) -> np.ndarray:
        """m_1..m_n (index 0 of the returned array is m_1)."""
        self.ensure(n)
        return self._m[1 : n + 1]

    def d_values(self, n: int) -> np.ndarray:
        self.ensure(n)
        return self._d[1 : n + 1]

    def log_d_values(self, n: int) -> np.ndarray:
        self.ensure(n)
        return self._logd[1 : n + 1]

    def log_window(self, k: int, n: int) -> float:
        """log D(k, n); D(n+1, n) = 1 by the empty-sum convention."""
        if k < 1 or n < k - 1:
            raise ValueError(f"need 1 <= k <= n + 1, got k={k}, n={n}")
        self.ensure(n)
        return float(_log_window(self._logm, k, n)[0])

    def log_mean_product(self, k: int, n: int) -> float:
        """log(m_k ... m_n)."""
        self.ensure(n)
        return float(self._logm[k : n + 1].sum())

    def window(self, k: int, n: int) -> float:
        lw = self.log_window(k, n)
        return math.inf if lw > math.log(OVERFLOW_THRESHOLD) else math.exp(lw)

    def write_csv(self, path, n: int) -> None:
        self.ensure(n)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "D", "logD"])
            for i in range(1, n + 1):
                w.writerow([i, _fmt(self._d[i]), _fmt(self._logd[i])])


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def d_value(table: DTable, n: int) -> float:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return table.d(n)


def d_window(table: DTable, k: int, n: int) -> float:
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    return table.window(k, n)


def level_probability(table: DTable, n: int, a: int) -> float:
    """P(Z_n = a) = (1 - 1/D(n))^a / D(n); through log D(n) once D(n) has overflowed."""
    if n < 1 or a < 0:
        raise ValueError(f"need n >= 1 and a >= 0, got n={n}, a={a}")
    d = table.d(n)
    if math.isinf(d):
        logd = table.log_d(n)
        return math.exp(a * math.log1p(-math.exp(-logd)) - logd)
    return (1.0 - 1.0 / d) ** a / d


def level_probabilities(table: DTable, n: int, a: int) -> np.ndarray:
    """P(Z_i = a) for i = 1..n."""
    logd = table.log_d_values(n)
    return np.exp(a * np.log1p(-np.exp(-logd)) - logd)


def level_pmf(table: DTable, n: int, a_max: int) -> np.ndarray:
    """P(Z_n = a) for a = 0..a_max."""
    d = table.d(n)
    a = np.arange(a_max + 1)
    if math.isinf(d):
        logd = table.log_d(n)
        return np.exp(a * math.log1p(-math.exp(-logd)) - logd)
    return (1.0 - 1.0 / d) ** a / d


@dataclass(frozen=True)
class ConditionalKernel:
    k: int
    n: int
    a: int
    coefficients: np.ndarray
    tail_mass: float

    def __getitem__(self, j: int) -> float:
        return float(self.coefficients[j])


def _kernel_logs(table: DTable, k: int, n: int):
    log_alpha = table.log_window(k + 1, k + n)
    log_beta = table.log_window(k + 2, k + n)
    log_delta = table.log_mean_product(k + 1, k + n)
    return log_alpha, log_beta, log_delta


def _truncated_mul(x, y, size):
    return np.convolve(x, y)[:size]


def conditional_distribution(table: DTable, k: int, n: int, a: int, j_max: int | None = None) -> ConditionalKernel:
    """Coefficients of E(s^{Z_{k+n}} | Z_k = a) up to degree ``j_max``.

    The generating function is B(s)^a A(s) with
    A(s) = 1/(α - (α-1)s) and B(s) = (β - (β-1)s)/(α - (α-1)s),
    α = D(k+1, k+n), β = D(k+2, k+n).  B expands to b_0 = β/α and
    b_i = (α-β) r^(i-1) / α^2, r = 1 - 1/α, all nonnegative, so the
    product is formed by plain truncated convolutions.
    """
    if k < 0 or n < 1 or a < 0:
        raise ValueError(f"need k >= 0, n >= 1, a >= 0, got k={k}, n={n}, a={a}")
    if j_max is None:
        j_max = a + 50 * max(1, a)
    if j_max < 0:
        raise ValueError(f"j_max must be >= 0, got {j_max}")
    size = j_max + 1
    log_alpha, log_beta, log_delta = _kernel_logs(table, k, n)
    r = -math.expm1(-log_alpha)
    powers = r ** np.arange(size)
    A = math.exp(-log_alpha) * powers
    B = np.empty(size)
    B[0] = math.exp(log_beta - log_alpha)
    B[1:] = math.exp(log_delta - 2.0 * log_alpha) * powers[:-1]

    out = A
    base, e = B, a
    while e:
        if e & 1:
            out = _truncated_mul(out, base, size)
        e >>= 1
        if e:
            base = _truncated_mul(base, base, size)
    tail = max(0.0, 1.0 - math.fsum(out))
    return ConditionalKernel(k, n, a, out, tail)


def return_probability(table: DTable, k: int, n: int, a: int) -> float:
    """P(Z_{k+n} = a | Z_k = a) from the closed nonnegative sum."""
    if k < 0 or n < 1 or a < 0:
        raise ValueError(f"need k >= 0, n >= 1, a >= 0, got k={k}, n={n}, a={a}")
    log_alpha, log_beta, log_delta = _kernel_logs(table, k, n)
    return float(_return_prob(log_alpha, log_beta, log_delta, a, _binom2(a)))


@lru_cache(maxsize=64)
def _binom2_cached(a: int) -> tuple:
    return tuple(float(math.comb(a, l) ** 2) for l in range(a + 1))


def _binom2(a: int) -> np.ndarray:
    return np.array(_binom2_cached(a))


def homogeneous_conditional(n: int, a: int) -> float:
    """P(Z_{n+k} = a | Z_k = a) when p ≡ 1/2, from the explicit alternating sum.

    Evaluated in exact rational arithmetic; the terms alternate in sign and
    cancel heavily for large a.
    """
    if n < 1 or a < 0:
        raise ValueError(f"need n >= 1 and a >= 0, got n={n}, a={a}")
    x = Fraction(n, n + 1)
    y = Fraction(1 - n, n + 1)
    total = Fraction(0)
    for j in range(a + 1):
        coef = math.factorial(a + j) // (math.factorial(j) ** 2 * math.factorial(a - j))
        total += coef * x**j * x**j * y ** (a - j)
    return float(total / (n + 1))


def joint_level_probability(table: DTable, times, a: int) -> float:
    """P(Z_{t_1} = a, ..., Z_{t_m} = a) by the Markov property."""
    times = [int(t) for t in times]
    if not times:
        raise ValueError("times must be nonempty")
    if times[0] < 1 or any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
        raise ValueError(f"times must be strictly increasing positive integers, got {times}")
    prob = level_probability(table, times[0], a)
    for t1, t2 in zip(times, times[1:]):
        prob *= conditional_distribution(table, t1, t2 - t1, a, j_max=a)[a]
    return prob


def surjection_weight(k: int, m: int) -> int:
    """Number of maps from k ordered slots onto m distinct times: m! S(k, m)."""
    return sum((-1) ** i * math.comb(m, i) * (m - i) ** k for i in range(m + 1))


def joint_sums(table: DTable, n: int, a: int, m_max: int) -> np.ndarray:
    """[G(1, n), ..., G(m_max, n)]."""
    if m_max > 1 and n > MAX_MOMENT_HORIZON:
        raise ValueError(f"n={n} exceeds {MAX_MOMENT_HORIZON} for joint sums of order >= 2")
    table.ensure(n + 1)
    return _joint_sums(table._logm[: n + 1], table._logd[: n + 1], a, m_max, _binom2(a))[1:]


def visit_count_moments(table: DTable, n: int, a: int, k: int) -> np.ndarray:
    """E|C ∩ [1, n]|^i for i = 1..k."""
    if n < 1 or a < 0:
        raise ValueError(f"need n >= 1 and a >= 0, got n={n}, a={a}")
    if not 1 <= k <= MAX_MOMENT_ORDER:
        raise ValueError(f"moment order must be in 1..{MAX_MOMENT_ORDER}, got {k}")
    if k == 1:
        return np.array([math.fsum(level_probabilities(table, n, a))])
    g = joint_sums(table, n, a, k)
    return np.array([
        sum(surjection_weight(i, m) * g[m - 1] for m in range(1, i + 1)) for i in range(1, k + 1)
    ])


def visit_count_moment(table: DTable, n: int, a: int, k: int) -> float:
    return float(visit_count_moments(table, n, a, k)[-1])


def dependence_ratio(table: DTable, k: int, n: int, a: int) -> float:
    """D(k+1,k+n)/D(k+n) · P(Z_{k+n}=a, Z_k=a) / (P(Z_{k+n}=a) P(Z_k=a))."""
    if k < 1 or n < 1:
        raise ValueError(f"need k, n >= 1, got k={k}, n={n}")
    log_alpha = table.log_window(k + 1, k + n)
    cond = return_probability(table, k, n, a)
    return math.exp(log_alpha - table.log_d(k + n)) * cond / level_probability(table, k + n, a)


def window_ratio(table: DTable, k: int, n: int) -> float:
    """D(k, k+n) / D(k+1, k+n) = 1 + m_k...m_{k+n} / D(k+1, k+n)."""
    if k < 1 or n < 0:
        raise ValueError(f"need k >= 1 and n >= 0, got k={k}, n={n}")
    return 1.0 + math.exp(table.log_mean_product(k, k + n) - table.log_window(k + 1, k + n))


def critical_table(n: int = 0) -> DTable:
    return DTable(Homogeneous(0.5), n)
