"""Bernoulli percolation and colourings on Galton-Watson genealogies.

Set ``GENEAPERC_DISABLE_JIT=1`` before import to run the pure-numpy kernels
instead of the numba-compiled ones.
"""

__version__ = "0.1.0"

from .branching import (
    Criticality,
    GrowthBudget,
    OffspringLaw,
    TypedOffspringLaw,
    classify,
    extinction_probability,
    example_law,
    perron_root,
    sample_bgw_tree,
    sample_multitype_tree,
)
from .coloring import (
    ColorDistribution,
    Coloring,
    MutationParams,
    dac_color,
    dac_critical_bgw,
    effective_retention,
    infinite_alleles_color,
    mdm_offspring_pmf,
    mdm_sample,
    mim_offspring_pmf,
    mim_sample,
    restricted_dac_color,
    same_type_root_component,
)
from .genealogy import Tree, build_tree, complete_tree, example_tree, parse_label, path_tree, star
from .mc import ExperimentPlan, estimate_survival, locate_critical, run_plan, test_correspondence
from .oracle import ExactLaw, TruncationSpec, exact_bgw_truncated_law, exact_coloring_law, exact_root_cluster_law, tv_distance
from .percolation import EdgeConfig, clusters, critical_bgw, critical_dary, percolate

__all__ = [
    "ColorDistribution",
    "Coloring",
    "Criticality",
    "EdgeConfig",
    "ExactLaw",
    "ExperimentPlan",
    "GrowthBudget",
    "MutationParams",
    "OffspringLaw",
    "Tree",
    "TruncationSpec",
    "TypedOffspringLaw",
    "build_tree",
    "classify",
    "clusters",
    "complete_tree",
    "critical_bgw",
    "critical_dary",
    "dac_color",
    "dac_critical_bgw",
    "effective_retention",
    "estimate_survival",
    "exact_bgw_truncated_law",
    "exact_coloring_law",
    "exact_root_cluster_law",
    "extinction_probability",
    "example_law",
    "example_tree",
    "infinite_alleles_color",
    "locate_critical",
    "mdm_offspring_pmf",
    "mdm_sample",
    "mim_offspring_pmf",
    "mim_sample",
    "parse_label",
    "path_tree",
    "percolate",
    "perron_root",
    "restricted_dac_color",
    "run_plan",
    "same_type_root_component",
    "sample_bgw_tree",
    "sample_multitype_tree",
    "star",
    "test_correspondence",
    "tv_distance",
]
