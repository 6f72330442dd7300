"""
The law of Z_n from the D table
===============================

Every generation is geometric: P(Z_n = a) = (1 - 1/D(n))^a / D(n).
Here we build the table for a few environments and look at the law,
a conditional law and the first moments of the visit count.
"""
import math

import numpy as np

from bpve import DTable, Homogeneous, PolyCritical, conditional_distribution, level_probability
from bpve.exact import level_pmf, visit_count_moments

# D(n) = n + 1 when every p_k is 1/2
flat = DTable(Homogeneous(0.5))
print("homogeneous D(1..5):", flat.d_values(5))

# the polynomial family pushes p_k slightly below 1/2, so D grows faster
for B in (0.5, 1.0, 1.5):
    t = DTable(PolyCritical(B))
    print(f"B={B}: D(10^3)={t.d(1000):.1f}  D(10^5)={t.d(100_000):.4g}")

# P(Z_9 = 0) = 1/D(9) = 1/10
print("P(Z_9 = 0) =", level_probability(flat, 9, 0))

# the pmf sums to one and decays geometrically
t = DTable(PolyCritical(0.5))
a_max = int(40 * t.d(200))
pmf = level_pmf(t, 200, a_max)
print(f"mass on 0..{a_max} at n=200:", math.fsum(pmf))

# conditional law of Z_{k+n} given Z_k = a, with its truncated tail
ker = conditional_distribution(t, 100, 50, 2, j_max=400)
print("P(Z_150 = 2 | Z_100 = 2) =", ker[2], " tail beyond 400:", ker.tail_mass)

# E|C ∩ [1,n]|^k for the flat environment, scaled by k! (log n)^k
n = 10_000
moms = visit_count_moments(flat, n, 0, 3)
print("moments / (k! log^k n):", np.round(moms / [math.factorial(k) * math.log(n) ** k for k in (1, 2, 3)], 4))
