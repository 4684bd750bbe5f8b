"""Python bindings for the clarion conversational retrieval core."""

from ._clarion import (
    END,
    SEP,
    UNK,
    ClarionError,
    ConstraintOptions,
    Corpus,
    CorpusManifest,
    DataError,
    DecodingTrie,
    Document,
    InvertedIndex,
    RemoteError,
    UsageError,
    Vocabulary,
    assign_keyword_ids,
    beam_decode,
    combine_losses,
    evaluate,
    extract_keywords,
    normalize,
    rank_loss,
    ranked_terms,
    read_qrels,
    read_run,
    relative_delta,
    tokenize,
    write_run,
)

__version__ = "0.1.0"
