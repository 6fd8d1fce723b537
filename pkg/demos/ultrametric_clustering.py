"""
Hierarchical clustering with a few bad points
=============================================

A noisy ultrametric (think of divergence times) with planted outliers.
The exact fit removes whole violating triples; the bi-criteria fit
tolerates noise up to 2 eps diam per triple and reports its distortion.
"""

import math

from outembed import (BicriteriaParams, bicriteria_ultrametric, fkw_optimal_ultrametric,
                      outliers_ultrametric_fast, planted_instance)

inst = planted_instance("ultrametric", n=64, k=3, eps=0.02, seed=1)
M = inst.matrix
print("planted witnesses:", inst.witness)

# with noise nothing is an exact ultrametric, so the exact fit removes a lot
exact = outliers_ultrametric_fast(M)
print("exact fit removes", exact.k, "points")

# allowing additive distortion keeps almost everything
eps = 0.02
res, dendrogram, distortion = bicriteria_ultrametric(M, BicriteriaParams(eps))
bound = 2 * eps * M.diameter() * math.ceil(math.log2(M.n))
print("bi-criteria removes", res.outliers)
print(f"distortion {distortion:.4f} (bound {bound:.4f})")

# the l-infinity closest ultrametric to everything, outliers included
U, err = fkw_optimal_ultrametric(M)
print(f"best single ultrametric for all points has error {err:.4f}")
print(dendrogram.to_newick()[:100], "...")
