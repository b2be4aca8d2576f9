"""Entity-context divergence scoring and RAG-ability diagnostics."""

from ecd_eval.text import (
    AnnotatedDoc,
    ContextWindow,
    Document,
    Entity,
    EntityMention,
    EntitySet,
    RejectedRecord,
    Token,
    canonicalize,
    context_window,
    extract_entities_heuristic,
    load_annotations,
    tokenize,
)
from ecd_eval.metric import (
    EcdBreakdown,
    EcdConfig,
    EntityPartition,
    NoCommonEntitiesError,
    added_penalty,
    common_divergence,
    ecd_score,
    jaccard_divergence,
    missing_penalty,
    partition_entities,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotatedDoc",
    "ContextWindow",
    "Document",
    "EcdBreakdown",
    "EcdConfig",
    "Entity",
    "EntityMention",
    "EntityPartition",
    "EntitySet",
    "NoCommonEntitiesError",
    "RejectedRecord",
    "Token",
    "added_penalty",
    "canonicalize",
    "common_divergence",
    "context_window",
    "ecd_score",
    "extract_entities_heuristic",
    "jaccard_divergence",
    "load_annotations",
    "missing_penalty",
    "partition_entities",
    "tokenize",
]
