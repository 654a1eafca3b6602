"""
Given-data OT sensitivity indices
=================================

Two toy models with known answers (an output that is a function of X1,
and a sum of two inputs) plus a pure-noise input.  The dummy threshold marks
what "irrelevant" looks like at this sample size.
"""

import numpy as np
from scipy.stats import norm

from dacgsa.gsa import IoSample, dummy_threshold, estimate_index, local_separations
from dacgsa.sampling import SampleMatrix

rng = np.random.default_rng(1)
n = 3000
X = rng.standard_normal((n, 3))
S = SampleMatrix(X, norm.cdf(X), ["x1", "x2", "noise"])

for label, y in [("Y = X1", X[:, 0]), ("Y = X1 + X2", X[:, 0] + X[:, 1])]:
    sample = IoSample(S, y)
    for j in range(3):
        e = estimate_index(sample, j, partitions=30)
        print(f"{label:12s} {e.name:6s} index {e.index:.3f} "
              f"(mean {e.mean_part:.3f}, cov {e.cov_part:.3f}, residual {e.residual_part:.3f})")
    thr, _ = dummy_threshold(sample, 30, replicates=3)
    print(f"{'':12s} dummy threshold {thr:.3f}")

# the sum case should sit near 1 - 1/sqrt(2)
print(f"expected for X1 in X1 + X2: {1 - 1 / np.sqrt(2):.4f}")

# local separation: how far the conditional law moves as x1 varies
seps = local_separations(IoSample(S, X[:, 0] + X[:, 1]), 0, 10)
for c, g in zip(seps.centers, seps.gamma):
    print(f"x1 ~ {c:+.2f}   gamma {g:.3f}")
