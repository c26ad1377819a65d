"""Synthetic benchmark: phantom cases with oracle paths, baselines, ablation and metrics."""

from .baselines import (
    Bin,
    EmbeddingLabeler,
    Labeler,
    NoisyLabeler,
    OracleLabeler,
    ablated_predict,
    ablated_questions,
    baseline_path_similarity,
    baseline_scores,
    quantize,
    random_baseline_accuracy,
    random_path,
)
from .metrics import CSV_HEADER, ClassMetrics, EvalResult, compute_metrics
from .phantom import (
    PROFILES,
    GeneratedCase,
    LesionSpec,
    OrganProfile,
    Oracle,
    SyntheticSpec,
    check_spec,
    gen_case,
    gen_suite,
    oracle_for,
    phantom_bands,
    profile_for,
    rasterize,
    sample_spec,
)
from .report import LesionFacts, ReportFacts, match_report_per_lesion, match_report_to_path
from .runner import (
    MODES,
    CasePrediction,
    Manifest,
    default_provider,
    predict_cases,
    read_case,
    read_manifest,
    run_benchmark,
    score,
    write_case,
    write_manifest,
)

__all__ = [name for name in dir() if not name.startswith("_")]
