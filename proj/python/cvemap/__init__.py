"""Python access to the cvemap core: label grammar, preprocessing, rankers and metrics."""

from ._core import (
    Catalog,
    CleanupReport,
    CveRecord,
    DataError,
    DatasetRow,
    DatasetStats,
    Error,
    EvalReport,
    LabelAssignment,
    RankedEntry,
    RankedList,
    TrainingPair,
    UpstreamError,
    UsageError,
    average_precision_at_k,
    bm25_rank,
    check_invariants,
    cleanup,
    cosine_sentence_rank,
    dataset_stats,
    evaluate,
    export_training_pairs,
    format_label,
    load_dataset,
    load_records,
    macro_f1,
    ndcg_at_k,
    parse_label,
    reciprocal_rank,
    save_dataset,
    segment_sentences,
    stratified_split,
    tokenize,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
