"""Auditing and post-processing predictors for equalized odds and equal opportunity."""

from .audit import (
    AuditReport,
    audit,
    conditional_kolmogorov_distance,
    demographic_parity_violation,
    equal_opportunity_violation,
    equalized_odds_violation,
    identical_roc_check,
    matching_frequencies_violation,
    matching_roc_check,
)
from .binary import (
    AdjustmentResult,
    DerivedBinaryPredictor,
    apply_derived,
    derive_equal_opportunity,
    derive_equalized_odds,
    expected_loss,
)
from .errors import (
    DegenerateLoss,
    EmptyGroupOutcome,
    EqoddsError,
    Infeasible,
    NegativeWeight,
    NonFiniteScore,
    ParseError,
    StructureMismatch,
    UnknownGroup,
)
from .geometry import (
    FeasibleRegion,
    Fixed,
    Mixture,
    RocCurve,
    achievable_region,
    binary_polytope,
    conditional_roc,
    intersect_regions,
    point_to_mixture,
    rule_rates,
)
from .joint import (
    ConditionalScoreDistribution,
    GroupLabel,
    JointBinaryDistribution,
    LossSpec,
    RatePoint,
    SampleTable,
    estimate_binary_joint,
    estimate_score_distribution,
    gamma,
)
from .scenarios import (
    TwoSampleReport,
    sample_scenario_one,
    sample_scenario_two,
    unidentifiability_check,
)
from .score import (
    PolicyReport,
    RandomizedThresholdPolicy,
    apply_policy,
    optimize_demographic_parity,
    optimize_equal_opportunity,
    optimize_equalized_odds,
    optimize_group_blind,
    optimize_max_profit,
)

__version__ = "0.1.0"

__all__ = [
    "AdjustmentResult",
    "AuditReport",
    "ConditionalScoreDistribution",
    "DegenerateLoss",
    "DerivedBinaryPredictor",
    "EmptyGroupOutcome",
    "EqoddsError",
    "FeasibleRegion",
    "Fixed",
    "GroupLabel",
    "Infeasible",
    "JointBinaryDistribution",
    "LossSpec",
    "Mixture",
    "NegativeWeight",
    "NonFiniteScore",
    "ParseError",
    "PolicyReport",
    "RandomizedThresholdPolicy",
    "RatePoint",
    "RocCurve",
    "SampleTable",
    "StructureMismatch",
    "TwoSampleReport",
    "UnknownGroup",
    "achievable_region",
    "apply_derived",
    "apply_policy",
    "audit",
    "binary_polytope",
    "conditional_kolmogorov_distance",
    "conditional_roc",
    "demographic_parity_violation",
    "derive_equal_opportunity",
    "derive_equalized_odds",
    "equal_opportunity_violation",
    "equalized_odds_violation",
    "estimate_binary_joint",
    "estimate_score_distribution",
    "expected_loss",
    "gamma",
    "identical_roc_check",
    "intersect_regions",
    "matching_frequencies_violation",
    "matching_roc_check",
    "optimize_demographic_parity",
    "optimize_equal_opportunity",
    "optimize_equalized_odds",
    "optimize_group_blind",
    "optimize_max_profit",
    "point_to_mixture",
    "rule_rates",
    "sample_scenario_one",
    "sample_scenario_two",
    "unidentifiability_check",
]
