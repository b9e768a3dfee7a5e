"""Standardized disease rates over categorical registry data.

Exact-arithmetic standardization operators (crude, single-covariate,
complete-conditional, and arbitrary weight families), confounding
diagnostics, nesting/projection property checks, and synthetic registry
generation from disease-probability models with an unmeasured covariate.
"""

from .diagnostics import (
    ConfoundingCondition,
    ConfoundingDemo,
    ConfoundingVerdict,
    TriState,
    Witness,
    check_crude_unconfounded,
    check_sca_scc_agreement,
    check_sca_unconfounded,
    check_sca_unconfounded_everywhere,
    confounding_demo,
    percent_diff,
    percent_diff_fraction,
)
from .distribution import (
    CellCount,
    EmpiricalJoint,
    build_empirical,
    build_from_counts,
    expand_to_records,
)
from .errors import (
    ConfigError,
    IngestError,
    ModelError,
    NestingError,
    RateStandError,
    SchemaError,
    UndefinedRateError,
    WeightError,
)
from .fdp import (
    GENERATOR_NAME,
    AssumptionVerdict,
    FdpModel,
    GeneratedData,
    GenerationMode,
    Inference,
    falsify,
    falsify_from_data,
    fdp_generate,
    fdp_marginalize,
    scc_marginal,
)
from .nesting import (
    NestingPair,
    ProjectionReport,
    PseudoRecursionCheck,
    RecursionCheck,
    projection_checks,
    sca_pseudo_recurse,
    scc_recurse,
)
from .operators import (
    EmptyStratumPolicy,
    OperatorKind,
    OpResult,
    RateStatus,
    RateTable,
    SoncFamily,
    StandardizationSpec,
    crude,
    rate_table,
    sca,
    sca_expanded,
    scc,
    sonc_apply,
    standardize_general,
)
from .schema import (
    EMPTY_KEY,
    CovariateSchema,
    Factorization,
    StratumKey,
    valid_level,
)
from .weights import NORMALIZATION_TOL, WeightMeasure, exact_fraction

__version__ = "0.1.0"

__all__ = [
    "AssumptionVerdict",
    "CellCount",
    "ConfigError",
    "ConfoundingCondition",
    "ConfoundingDemo",
    "ConfoundingVerdict",
    "CovariateSchema",
    "EMPTY_KEY",
    "EmpiricalJoint",
    "EmptyStratumPolicy",
    "Factorization",
    "FdpModel",
    "GENERATOR_NAME",
    "GeneratedData",
    "GenerationMode",
    "Inference",
    "IngestError",
    "ModelError",
    "NORMALIZATION_TOL",
    "NestingError",
    "NestingPair",
    "OpResult",
    "OperatorKind",
    "ProjectionReport",
    "PseudoRecursionCheck",
    "RateStandError",
    "RateStatus",
    "RateTable",
    "RecursionCheck",
    "SchemaError",
    "SoncFamily",
    "StandardizationSpec",
    "StratumKey",
    "TriState",
    "UndefinedRateError",
    "WeightError",
    "WeightMeasure",
    "Witness",
    "build_empirical",
    "build_from_counts",
    "check_crude_unconfounded",
    "check_sca_scc_agreement",
    "check_sca_unconfounded",
    "check_sca_unconfounded_everywhere",
    "confounding_demo",
    "crude",
    "exact_fraction",
    "expand_to_records",
    "falsify",
    "falsify_from_data",
    "fdp_generate",
    "fdp_marginalize",
    "percent_diff",
    "percent_diff_fraction",
    "projection_checks",
    "rate_table",
    "sca",
    "sca_expanded",
    "sca_pseudo_recurse",
    "scc",
    "scc_marginal",
    "scc_recurse",
    "sonc_apply",
    "standardize_general",
    "valid_level",
]
