"""
The exponential limit of the visit count
========================================

For p = 1/2 the number of visits to a level up to time n, divided by
log n, approaches Exp(1). Convergence is logarithmic, so at desk scale we
can only watch the KS distance shrink. Takes about half a minute.
"""
import sys

from bpve import Homogeneous, SimulationConfig, limit_law_check, run_ensemble

workers = int(sys.argv[1]) if len(sys.argv) > 1 else 1

cfg = SimulationConfig(Homogeneous(0.5), horizon=10**5, level=0, replications=2000, seed=20261015)
rep = limit_law_check(cfg, [10**3, 10**4, 10**5], workers=workers)
for row in rep.rows:
    extra = ""
    if "exact_mean" in row:
        extra = f"  sample mean {row['sample_mean']:.3f} vs exact {row['exact_mean']:.3f}"
    print(f"n={row['n']:>6d}  KS={row['ks']:.4f}  E[X]/log n={row['mean_over_logn']:.3f}{extra}")
print("trend:", rep.trend)

# replications are keyed by index, so the worker count never changes a path
small = SimulationConfig(Homogeneous(0.5), 1000, 0, 50, seed=1)
assert run_ensemble(small, workers=1).records == run_ensemble(small, workers=2).records
print("same ensemble with 1 and 2 workers")
