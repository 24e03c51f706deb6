from core.oracle.checks import DEFAULT_LAMBDAS, LambdaVerdict, OracleReport, check_system
from core.oracle.score import (
    LikelihoodCache,
    ScoredHypothesis,
    enumerate_optimum,
    exact_score,
    is_canonical,
    true_lcg_from_distribution,
)
from core.oracle.system import (
    ContextDef,
    DiscreteCSSISystem,
    bundled_systems,
    empirical_system,
    load_bundled,
    load_system,
    parse_system,
)

__all__ = [
    "DEFAULT_LAMBDAS",
    "ContextDef",
    "DiscreteCSSISystem",
    "LambdaVerdict",
    "LikelihoodCache",
    "OracleReport",
    "ScoredHypothesis",
    "bundled_systems",
    "check_system",
    "empirical_system",
    "enumerate_optimum",
    "exact_score",
    "is_canonical",
    "load_bundled",
    "load_system",
    "parse_system",
    "true_lcg_from_distribution",
]
