"""
Recovering planar positions from ranges
=======================================

Pairwise ranges between beacons in the plane, two of which report
inflated ranges. The exact fit keeps a largest consistent set and returns
coordinates for it; the grid version tolerates small range noise.
"""

import numpy as np

from outembed import (BicriteriaParams, DistanceMatrix, bicriteria_euclidean, outliers_euclidean,
                      planted_instance, verify_certificate)

rng = np.random.default_rng(3)
X = rng.random((12, 2))
D = np.sqrt(((X[:, None] - X[None]) ** 2).sum(-1))
for i in (2, 7):
    D[i, :] += 0.4
    D[:, i] += 0.4
    D[i, i] = 0
M = DistanceMatrix.from_square(D)

res, coords = outliers_euclidean(M, 2)
print("inconsistent beacons:", res.outliers)
print("certificate re-checks:", verify_certificate(M, res))
E = np.sqrt(((coords[:, None] - coords[None]) ** 2).sum(-1))
keep = [M.index(v) for v in res.kept]
print("max range error on kept beacons:", np.abs(E - D[np.ix_(keep, keep)]).max())

# noisy ranges: no exact planar fit exists, the grid version still works
# a corrupted beacon is only removed when no grid placement meets the budget,
# and a whole-row shift can often be absorbed by moving the beacon
inst = planted_instance("euclidean", n=8, k=1, eps=0.05, seed=4, d=2)
print("planted:", inst.witness)
for C_d in (8.0, 0.5, 0.2):
    res, coords = bicriteria_euclidean(inst.matrix, BicriteriaParams(0.05, d=2, C_d=C_d))
    print(f"C_d {C_d}: removed {res.outliers}, budget {res.stats['budget']:.3f}, "
          f"worst pair error {res.stats['distortion']:.3f}")
