"""Probabilistically permuted prophet language model.

Thin Python surface over the C++ core: order sampling and mask construction,
span-corruption data preparation, synthetic tasks, sequence metrics, internal
selfchecks, and an ID-space model wrapper (create/load/save, logits, score,
loss, beam generation).
"""

from ._core import (
    BOS,
    EOS,
    MASK,
    NUM_SPECIALS,
    PAD,
    UNK,
    ConfigError,
    ConsistencyError,
    DataError,
    MaskError,
    Model,
    NumericError,
    ShapeError,
    Vocab,
    apply_span_mask,
    build_masks,
    corpus_metrics,
    dump_masks,
    exact_match,
    gen_synthetic,
    identity_order,
    log_prior,
    parse_masks,
    rouge_l,
    sample_order,
    selfcheck,
    step_index,
    token_accuracy,
)

__all__ = [
    "BOS",
    "EOS",
    "MASK",
    "NUM_SPECIALS",
    "PAD",
    "UNK",
    "ConfigError",
    "ConsistencyError",
    "DataError",
    "MaskError",
    "Model",
    "NumericError",
    "ShapeError",
    "Vocab",
    "apply_span_mask",
    "build_masks",
    "corpus_metrics",
    "dump_masks",
    "exact_match",
    "gen_synthetic",
    "identity_order",
    "log_prior",
    "parse_masks",
    "rouge_l",
    "sample_order",
    "selfcheck",
    "step_index",
    "token_accuracy",
]
