"""Constant-query graph sampling: oracle access, ball-union profiles,
sampling distances, estimators and a small GNN over sampled subgraphs."""

from .canonical import CanonicalCode, canonical_form, canonicalize, isomorphic
from .errors import (
    BudgetExceeded,
    CanonicalizationTimeout,
    DimensionError,
    InvalidArgument,
    InvalidState,
    ParseError,
    RBSError,
    TooLarge,
    TrainingDiverged,
)
from .estimators import (
    CanonicalEstimatorTable,
    canonical_estimate,
    connectivity_demo,
    local_clustering,
    triangle_density,
)
from .exact import (
    exact_global_clustering,
    exact_local_clustering,
    exact_max_degree,
    exact_triangle_statistic,
)
from .generators import (
    GraphonSpec,
    gen_config_regular,
    gen_er,
    gen_graphon,
    gen_two_cliques,
    perturb_add_edges,
)
from .graph import Graph, load_edge_list, write_edge_list
from .metric import DistanceEstimate, Profile, estimate_profile, sampling_distance, tv_distance, wasserstein
from .oracle import OracleSession, QueryCounts
from .sampler import (
    BallUnion,
    ComponentSet,
    random_ball_sample,
    rooted_union_sample,
    union_sample,
    weakly_connected_components,
)

__version__ = "0.1.0"
