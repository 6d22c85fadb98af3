"""Random fractal laboratory.

Similarity IFS attractors with symbolic coding trees, Galton-Watson
fractal sampling, exact dimension solvers (Moran roots, almost-sure
dimension, support extremes), and resolution-certified geometric
verification (Hausdorff metric, minisets, microset zooms, local
covering-count estimators).
"""

from gwflab.errors import (
    ConfigError,
    DegenerateFamilyError,
    DomainError,
    EmptySetError,
    GWFLabError,
    HorizonError,
    InvalidWordError,
    NodeNotFoundError,
    PreconditionError,
    ResolutionError,
    ResourceLimitError,
    SamplingError,
)
from gwflab.geometry import EMPTY_SET, EmptySet, PointCloud, hausdorff_distance, miniset
from gwflab.similarity import (
    IFS,
    Section,
    SeparationVerdict,
    SimilarityMap,
    attractor_cloud,
    build_section,
    check_declared_osc,
    check_ssc,
    compose_word,
    restricted_attractor_cloud,
    wsc_profile,
)
from gwflab.trees import (
    EXTINCT,
    Extinct,
    Tree,
    TreeSectionEntry,
    descendant_tree,
    from_child_lists,
    full_tree,
    is_family_tree,
    project_tree,
    ray_tree,
    reduce_to_horizon,
    tree_section,
)
from gwflab.branching import (
    ExtinctionReport,
    OffspringDistribution,
    empirical_reduced_law,
    extinction_by_generation,
    extinction_probability,
    kesten_stigum_stats,
    reduced_offspring,
    sample_surviving,
    sample_tree,
)
from gwflab.dimensions import (
    DimensionReport,
    FamilyInterval,
    assouad_estimate,
    box_counts,
    box_dim_estimate,
    family_interval,
    galton_watson_dimension,
    lower_estimate,
    moran_dimension,
    offspring_extremes,
    offspring_for_target,
    section_count_check,
)
from gwflab.microsets import (
    ZoomStep,
    check_zoom_identity_ssc,
    descendant_cloud,
    zoom_sequence,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DegenerateFamilyError",
    "DomainError",
    "EmptySetError",
    "GWFLabError",
    "HorizonError",
    "InvalidWordError",
    "NodeNotFoundError",
    "PreconditionError",
    "ResolutionError",
    "ResourceLimitError",
    "SamplingError",
    "EMPTY_SET",
    "EmptySet",
    "PointCloud",
    "hausdorff_distance",
    "miniset",
    "IFS",
    "Section",
    "SeparationVerdict",
    "SimilarityMap",
    "attractor_cloud",
    "build_section",
    "check_declared_osc",
    "check_ssc",
    "compose_word",
    "restricted_attractor_cloud",
    "wsc_profile",
    "EXTINCT",
    "Extinct",
    "Tree",
    "TreeSectionEntry",
    "descendant_tree",
    "from_child_lists",
    "full_tree",
    "is_family_tree",
    "project_tree",
    "ray_tree",
    "reduce_to_horizon",
    "tree_section",
    "ExtinctionReport",
    "OffspringDistribution",
    "empirical_reduced_law",
    "extinction_by_generation",
    "extinction_probability",
    "kesten_stigum_stats",
    "reduced_offspring",
    "sample_surviving",
    "sample_tree",
    "DimensionReport",
    "FamilyInterval",
    "assouad_estimate",
    "box_counts",
    "box_dim_estimate",
    "family_interval",
    "galton_watson_dimension",
    "lower_estimate",
    "moran_dimension",
    "offspring_extremes",
    "offspring_for_target",
    "section_count_check",
    "ZoomStep",
    "check_zoom_identity_ssc",
    "descendant_cloud",
    "zoom_sequence",
]
