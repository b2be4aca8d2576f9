"""Corpus annotation and embedding that feeds the ecd-eval file formats."""

from ecd_adapter.adapter import (
    AdapterConfig,
    AnnotateSummary,
    EmbedSummary,
    annotate_corpus,
    embed_corpus,
    read_corpus,
)
from ecd_adapter.backends import (
    BuiltinEmbedder,
    BuiltinTagger,
    load_embedder,
    load_tagger,
    split_sentences,
)
from ecd_adapter.errors import AdapterError, InputError, ModelError

__all__ = [
    "AdapterConfig",
    "AdapterError",
    "AnnotateSummary",
    "BuiltinEmbedder",
    "BuiltinTagger",
    "EmbedSummary",
    "InputError",
    "ModelError",
    "annotate_corpus",
    "embed_corpus",
    "load_embedder",
    "load_tagger",
    "read_corpus",
    "split_sentences",
]
