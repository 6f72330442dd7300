"""
Finite or infinite level sets
=============================

Whether the chain returns to a level infinitely often is decided by the
growth of D(n). The polynomial family switches at B = 1; the expected
number of visits tracks (1 - B) log n below the switch.
"""
from bpve import Homogeneous, PolyCritical, classify
from bpve.analysis import d_asymptotics, expected_count_profile
from bpve.exact import DTable

for B in (0.0, 0.5, 1.0, 1.5):
    v = classify(PolyCritical(B), horizon=100_000)
    print(f"B={B}: {v.verdict:<8s} growth {v.diagnostics['d_growth']}")

v = classify(Homogeneous(0.4), horizon=10_000)
print("homogeneous p=0.4:", v.verdict, "/", v.basis)

# D(n) against its leading-order prediction
for B in (0.0, 0.5, 1.0):
    t = DTable(PolyCritical(B))
    ratios = [t.d(n) / d_asymptotics(B, n) for n in (10**3, 10**6)]
    print(f"B={B}: D/prediction at 1e3, 1e6 = {ratios[0]:.4f}, {ratios[1]:.6f}")

# the expected visit count to level 0 for B = 1/2
prof = expected_count_profile(PolyCritical(0.5), 0, [10**3, 10**4, 10**5, 10**6])
for row in prof.rows:
    print(f"n={row['n']:>8d}  E|C|={row['exact']:.4f}  (1-B) log n={row['prediction']:.4f}  ratio={row['ratio']:.4f}")
