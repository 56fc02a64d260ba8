"""Staged event trees and chain event graphs for categorical data.

Learn stage structures from contingency data with score- and distance-based
searches, score and query the fitted models, and coalesce them into chain
event graphs.
"""

from .tree import (
    EventTree,
    Vertex,
    StagedTree,
    encode_path,
    decode_vertex,
    as_staged_tree_from_bn,
)
from .data import (
    Dataset,
    from_records,
    load_records_csv,
    load_counts_csv,
    save_model,
    load_model,
)
from .estimation import (
    ModelScore,
    full,
    indep,
    collapse_unobserved,
    fit,
    refit,
    loglik,
    degrees_of_freedom,
    aic,
    bic,
    score,
)
from .divergences import divergence, parse_divergence
from .learn import (
    SearchConfig,
    join_stages,
    stages_hc,
    stages_bhc,
    stages_fbhc,
    stages_bhcr,
    stages_bj,
    stages_hclust,
    stages_kmeans,
)
from .query import (
    prob,
    atomic_probs,
    atomic_prob_vector,
    sample_from,
    get_stage,
    get_path,
    subtree,
    stndnaming,
    StageDiff,
    compare_stages,
    ModelSummary,
    summary,
    floret_table,
    predict,
    LrTestResult,
    lr_test,
    chisq_upper_tail,
)
from .ceg import Ceg, positions, ceg, ceg_adjmat, tree_to_dot, ceg_to_dot

__version__ = "0.1.0"

__all__ = [
    "EventTree",
    "Vertex",
    "StagedTree",
    "encode_path",
    "decode_vertex",
    "as_staged_tree_from_bn",
    "Dataset",
    "from_records",
    "load_records_csv",
    "load_counts_csv",
    "save_model",
    "load_model",
    "ModelScore",
    "full",
    "indep",
    "collapse_unobserved",
    "fit",
    "refit",
    "loglik",
    "degrees_of_freedom",
    "aic",
    "bic",
    "score",
    "divergence",
    "parse_divergence",
    "SearchConfig",
    "join_stages",
    "stages_hc",
    "stages_bhc",
    "stages_fbhc",
    "stages_bhcr",
    "stages_bj",
    "stages_hclust",
    "stages_kmeans",
    "prob",
    "atomic_probs",
    "atomic_prob_vector",
    "sample_from",
    "get_stage",
    "get_path",
    "subtree",
    "stndnaming",
    "StageDiff",
    "compare_stages",
    "ModelSummary",
    "summary",
    "floret_table",
    "predict",
    "LrTestResult",
    "lr_test",
    "chisq_upper_tail",
    "Ceg",
    "positions",
    "ceg",
    "ceg_adjmat",
    "tree_to_dot",
    "ceg_to_dot",
    "__version__",
]
