from ._core import (
    ShapeError,
    TrainingDivergence,
    classification_loss,
    config_hash,
    desk_config,
    evaluate_checkpoint,
    lead_subset,
    load_embeddings,
    load_manifest,
    macro_auc,
    make_synthetic_corpus,
    roc_auc,
    similarity,
    soft_encode,
    total_loss,
)

__all__ = [
    "ShapeError",
    "TrainingDivergence",
    "classification_loss",
    "config_hash",
    "desk_config",
    "evaluate_checkpoint",
    "lead_subset",
    "load_embeddings",
    "load_manifest",
    "macro_auc",
    "make_synthetic_corpus",
    "roc_auc",
    "similarity",
    "soft_encode",
    "total_loss",
]
