"""Bi-GRU capsule network for compound-entity hypernymy detection."""

from ._hypercaps import (
    CheckpointError,
    CorpusError,
    DimensionError,
    Metrics,
    Model,
    attention_weights,
    classify,
    grad_check,
    import_corpora,
    lcs_masks,
    load_checkpoint,
    load_corpus,
    margin_loss,
    run_baseline,
    score,
    set_containing,
    squash,
    string_containing,
    tokenize,
    train,
)

__all__ = [
    "CheckpointError",
    "CorpusError",
    "DimensionError",
    "Metrics",
    "Model",
    "attention_weights",
    "classify",
    "grad_check",
    "import_corpora",
    "lcs_masks",
    "load_checkpoint",
    "load_corpus",
    "margin_loss",
    "run_baseline",
    "score",
    "set_containing",
    "squash",
    "string_containing",
    "tokenize",
    "train",
]
