"""
Latin hypercube sample and balanced cluster layout
==================================================

Draws the 38-input DACCS sample, groups it into equally sized clusters
around Sobol centroids, and shows how runs inside a cluster are ordered.
"""

import time

import numpy as np

from dacgsa.dist import default_input_space
from dacgsa.doe import cluster_balanced, layout_cost
from dacgsa.sampling import lhs_sample

space = default_input_space()
print(len(space), "inputs;", sum(e.spec.degenerate for e in space), "fixed")

S = lhs_sample(space, 600, designs=6, seed=0)
print("sample", S.values.shape)

# every column puts one point in each 1/100 stratum within a design
u = S.quantiles[:100, 0]
print("strata hit:", len(set(np.floor(u * 100).astype(int))), "of 100")

t0 = time.perf_counter()
layout = cluster_balanced(S, 20)
print(f"layout: {len(layout.clusters)} clusters of {len(layout.clusters[0])} in {time.perf_counter() - t0:.2f}s")
print("assignment cost", round(layout_cost(S, layout), 2))

# consecutive runs in a cluster are neighbours in quantile space
Q = S.quantiles[:, ~S.degenerate]
c0 = layout.clusters[0]
hops = np.linalg.norm(np.diff(Q[c0], axis=0), axis=1)
print("mean hop inside cluster 0:", hops.mean().round(3),
      "vs random pair:", np.linalg.norm(Q[0] - Q[1]).round(3))
