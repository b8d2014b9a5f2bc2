from ._hner import (
    EntitySpan,
    EvalReport,
    LabelScheme,
    TokenizedSentence,
    Vocabulary,
    crf_nll,
    ema_closed_form,
    evaluate_tags,
    extract_spans,
    gradcheck,
    log_partition,
    logsumexp,
    run_cli,
    softmax,
    tokenize_sentence,
    tokenize_word,
    viterbi_decode,
)

__all__ = [
    "EntitySpan",
    "EvalReport",
    "LabelScheme",
    "TokenizedSentence",
    "Vocabulary",
    "crf_nll",
    "ema_closed_form",
    "evaluate_tags",
    "extract_spans",
    "gradcheck",
    "log_partition",
    "logsumexp",
    "run_cli",
    "softmax",
    "tokenize_sentence",
    "tokenize_word",
    "viterbi_decode",
]
