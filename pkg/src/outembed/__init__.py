"""Outlier embeddings of finite metric spaces.

Find a small set of points whose removal lets the rest embed isometrically
(or with small additive distortion) into an ultrametric, a tree metric or
low-dimensional Euclidean space.
"""

__version__ = "0.1.0"

from .metric import (DEFAULT_TOL, DistanceMatrix, ToleranceConfig, ValidationReport, all_quads_ok,
                     all_triples_ok, diameter, four_point_ok, linf_gap, restrict, restrict_labels,
                     ultrametric_triple_ok, validate_metric)
from .result import OutlierResult, Violation
from .tree import (StemLocation, WeightedTree, induced_metric, leaf_augment, parse_newick,
                   remove_labels, to_newick, tree_distance)
from .ultrametric import outliers_ultrametric_cubic, outliers_ultrametric_fast
from .treefit import (OrientationState, Sink, compute_x_orientation, extend_or_violate,
                      outliers_tree_fast, outliers_tree_quartic)
from .euclidean import (ConflictGraph, EmbeddabilityReport, EmbedTolerance, conflict_graph,
                        embedding_report, outliers_euclidean, vertex_cover_2approx)
from .bicriteria import (BicriteriaParams, Dendrogram, GridSpec, InfeasibleParameters,
                         bicriteria_euclidean, bicriteria_tree, bicriteria_ultrametric,
                         fkw_optimal_ultrametric, grid_near_embed, gromov_tree, mst,
                         subdominant_ultrametric)
from .instances import (PlantedInstance, SimpleGraph, all_graphs, parse_graph, planted_instance,
                        vc_euclidean_instance, vc_tree_instance, vc_ultrametric_instance)
from .oracle import (BudgetExceeded, OracleBudget, exact_min_outliers, exact_min_vertex_cover,
                     verify_certificate)
