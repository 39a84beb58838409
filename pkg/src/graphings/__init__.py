"""Finite-resolution laboratory for graphings of measured equivalence
relations: concentration profiles, invariance defects, Folner searches.
"""

__version__ = "0.1.0"

from .space import (
    FiniteMeasuredSpace,
    PartialIsomorphism,
    Cocycle,
    make_space,
    compose,
    inverse,
    identity_map,
    partial_isomorphism,
    cocycle_of,
)
from .graphing import (
    Graphing,
    DegreeReport,
    build_graphing,
    bfs_distance,
    boundary,
    ball,
    word_family,
    degree_report,
)
from .families import (
    rotation_graphing,
    odometer_graphing,
    odometer_tower,
    expander_graphing,
    default_expander,
    product_graphing,
    restrict,
    saturate_sequence,
    quotient_pushforward,
)
from .concentration import (
    ConcentrationProfile,
    DistanceProfileFunction,
    set_distance,
    is_ergodic_metric,
    profile_exact,
    profile_heuristic,
    nonconcentration_witness,
    level_set_extraction,
)
from .folner import (
    InvarianceReport,
    FolnerCertificate,
    SpectralReport,
    invariance_defect,
    spectral_gap,
    folner_search,
    accumulate_invariant,
    asymptotic_invariance_series,
    admissible_inner_ratio,
)
from .errors import ConfigError, ConvergenceError, ResourceCapError

__all__ = [
    "FiniteMeasuredSpace",
    "PartialIsomorphism",
    "Cocycle",
    "make_space",
    "compose",
    "inverse",
    "identity_map",
    "partial_isomorphism",
    "cocycle_of",
    "Graphing",
    "DegreeReport",
    "build_graphing",
    "bfs_distance",
    "boundary",
    "ball",
    "word_family",
    "degree_report",
    "rotation_graphing",
    "odometer_graphing",
    "odometer_tower",
    "expander_graphing",
    "default_expander",
    "product_graphing",
    "restrict",
    "saturate_sequence",
    "quotient_pushforward",
    "ConcentrationProfile",
    "DistanceProfileFunction",
    "set_distance",
    "is_ergodic_metric",
    "profile_exact",
    "profile_heuristic",
    "nonconcentration_witness",
    "level_set_extraction",
    "InvarianceReport",
    "FolnerCertificate",
    "SpectralReport",
    "invariance_defect",
    "spectral_gap",
    "folner_search",
    "accumulate_invariant",
    "asymptotic_invariance_series",
    "admissible_inner_ratio",
    "ConfigError",
    "ConvergenceError",
    "ResourceCapError",
]
