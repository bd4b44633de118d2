from .agreement import AgreementResult, KappaResult, category_weights, cohen_kappa, gwet_ac2
from .diagnostic import (
    AucResult,
    DiagnosticCounts,
    PerformanceResult,
    diagnostic_performance,
    grade_counts,
    performance_from_counts,
    roc_auc,
    wilson_ci,
)
from .significance import (
    FriedmanResult,
    WilcoxonResult,
    friedman_test,
    holm_adjust,
    mcnemar_exact,
    pairwise_wilcoxon_holm,
    wilcoxon_signed_rank,
)
from .tables import (
    GRADE_TOKENS,
    LIKERT_ITEMS,
    METHODS,
    DiagnosticTable,
    RatingsTable,
    consensus,
    grade_rank,
)

__all__ = [
    "AgreementResult",
    "KappaResult",
    "category_weights",
    "cohen_kappa",
    "gwet_ac2",
    "AucResult",
    "DiagnosticCounts",
    "PerformanceResult",
    "diagnostic_performance",
    "grade_counts",
    "performance_from_counts",
    "roc_auc",
    "wilson_ci",
    "FriedmanResult",
    "WilcoxonResult",
    "friedman_test",
    "holm_adjust",
    "mcnemar_exact",
    "pairwise_wilcoxon_holm",
    "wilcoxon_signed_rank",
    "GRADE_TOKENS",
    "LIKERT_ITEMS",
    "METHODS",
    "DiagnosticTable",
    "RatingsTable",
    "consensus",
    "grade_rank",
]
