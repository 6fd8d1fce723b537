"""
Finding contaminated taxa in a distance tree
============================================

A tree metric is built from a random weighted tree, a few taxa get
corrupted distances, and the quadratic-time fit removes a small set of
points that explains every inconsistency.
"""

import numpy as np

from outembed import (DistanceMatrix, induced_metric, linf_gap, outliers_tree_fast, restrict_labels,
                      to_newick, verify_certificate)
from outembed.instances import random_tree

rng = np.random.default_rng(0)
D = induced_metric(random_tree(40, rng)).square().copy()

# corrupt three taxa: every distance from them is raised by a random amount,
# then lowered to the shortest path through the others so D stays a metric
for i in (5, 17, 29):
    others = np.arange(40) != i
    row = D[i, others] + rng.uniform(1, 3, 39)
    D[i, others] = D[others, i] = np.min(row[:, None] + D[np.ix_(others, others)], axis=0)
M = DistanceMatrix.from_square(D)

res, tree = outliers_tree_fast(M)
print("outliers:", res.outliers)
print("planted taxa among them:", sorted(set(res.outliers) & {5, 17, 29}))
print("certificate re-checks:", verify_certificate(M, res))

# the fitted tree reproduces every kept distance exactly
print("max error on kept points:", linf_gap(induced_metric(tree), restrict_labels(M, res.kept)))
print(to_newick(tree)[:120], "...")
