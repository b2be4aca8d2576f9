"""Context assembly from retrieved documents, plus controlled corruption.

Documents are split into sentences, every sentence is embedded, and the
top fraction by cosine similarity to the query becomes the context, in
similarity order with deterministic ties.  The corruption op swaps entity
mentions for replacements while leaving every other byte untouched, which
gives evaluation a knob whose effect on the score is known in advance.
"""
from __future__ import annotations

import math
import random
import re
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ecd_eval.text import AnnotatedDoc, Document, tokenize

# Abbreviations that end with a period mid-sentence.  Lowercase, no dot.
DEFAULT_ABBREVIATIONS = frozenset(
    {
        "mr", "mrs", "ms", "dr", "prof", "rev", "hon", "st", "sr", "jr",
        "vs", "etc", "inc", "ltd", "co", "corp", "dept", "est", "fig",
        "gen", "gov", "sen", "rep", "capt", "col", "sgt", "lt", "cmdr",
        "approx", "appt", "apt", "ave", "blvd", "mt", "no", "nos", "vol",
    }
)

_TERMINAL_RUN_RE = re.compile(r"[.!?]+(?=\s|$)")
_LAST_WORD_RE = re.compile(r"(\w+)$")


@dataclass(frozen=True)
class RetrievedDoc:
    """One retrieved document: stable id, provenance URI, non-empty text."""

    id: str
    source_uri: str
    text: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError(f"retrieved doc {self.id!r} has empty text")


def split_sentences(
    text: str,
    abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS,
    guard_single_letters: bool = True,
) -> list[str]:
    """Split on terminal punctuation, guarding known abbreviations.

    A run of '.' does not end a sentence when the word before it is a
    known abbreviation or (by default) a single letter, so "Mr. Sunak
    arrived. He spoke." yields two sentences, not three.  '!' and '?'
    always terminate.  Text without terminal punctuation is one sentence.
    """
    boundaries: list[int] = []
    for m in _TERMINAL_RUN_RE.finditer(text):
        run = m.group()
        if "!" not in run and "?" not in run:
            word = _LAST_WORD_RE.search(text[: m.start()])
            if word is not None:
                w = word.group(1)
                if w.lower() in abbreviations:
                    continue
                if guard_single_letters and len(w) == 1 and w.isalpha():
                    continue
        boundaries.append(m.end())

    sentences: list[str] = []
    prev = 0
    for b in boundaries:
        piece = text[prev:b].strip()
        if piece:
            sentences.append(piece)
        prev = b
    tail = text[prev:].strip()
    if tail:
        sentences.append(tail)
    return sentences


class EmbeddingProvider:
    """Maps text to a fixed-dimension vector; equal text gives equal vectors."""

    dimension: int

    def embed(self, text: str) -> np.ndarray:
        raise NotImplementedError


_VOCAB_TOKEN_RE = re.compile(r"\w+")


def _vocab_tokens(text: str) -> list[str]:
    return [m.group().casefold() for m in _VOCAB_TOKEN_RE.finditer(text)]


class TfidfEmbedding(EmbeddingProvider):
    """TF-IDF vectors over the corpus vocabulary, L2-normalized.

    The fallback when no external vectors are supplied.  idf uses the
    smoothed form ln((1 + N) / (1 + df)) + 1; words outside the fitted
    vocabulary are ignored at embed time.
    """

    def __init__(self, corpus_texts: Sequence[str]):
        if not corpus_texts:
            raise ValueError("cannot fit tf-idf on an empty corpus")
        df: dict[str, int] = {}
        for text in corpus_texts:
            for word in set(_vocab_tokens(text)):
                df[word] = df.get(word, 0) + 1
        self._index = {word: i for i, word in enumerate(sorted(df))}
        n = len(corpus_texts)
        self._idf = np.array(
            [math.log((1 + n) / (1 + df[w])) + 1.0 for w in sorted(df)], dtype=float
        )
        self.dimension = len(self._index)

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dimension, dtype=float)
        for word in _vocab_tokens(text):
            i = self._index.get(word)
            if i is not None:
                vec[i] += 1.0
        vec *= self._idf
        norm = float(np.linalg.norm(vec))
        if norm > 0:
            vec /= norm
        return vec


class ExternalVectors(EmbeddingProvider):
    """Embedding lookup backed by precomputed vectors keyed by exact text."""

    def __init__(self, vectors: Mapping[str, Sequence[float]]):
        if not vectors:
            raise ValueError("empty vector table")
        self._vectors = {k: np.asarray(v, dtype=float) for k, v in vectors.items()}
        dims = {v.shape for v in self._vectors.values()}
        if len(dims) != 1 or any(len(s) != 1 for s in dims):
            raise ValueError("vectors must share one dimension")
        self.dimension = next(iter(dims))[0]

    def embed(self, text: str) -> np.ndarray:
        try:
            return self._vectors[text]
        except KeyError:
            raise ValueError(f"no vector for text {text[:60]!r}") from None


def cosine(a: Sequence[float], b: Sequence[float]) -> float:
    """Cosine similarity; zero vectors score 0 instead of dividing by zero."""
    va = np.asarray(a, dtype=float)
    vb = np.asarray(b, dtype=float)
    if va.shape != vb.shape:
        raise ValueError(f"dimension mismatch: {va.shape} vs {vb.shape}")
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(va @ vb / (na * nb))


@dataclass(frozen=True)
class RankedSentence:
    doc_id: str
    sentence_index: int
    text: str
    similarity: float


@dataclass(frozen=True)
class BuiltContext:
    """The selected sentences, most similar first."""

    query: str
    fraction: float
    sentences: tuple[RankedSentence, ...]

    @property
    def text(self) -> str:
        return "\n".join(s.text for s in self.sentences)


def build_context(
    query: str,
    docs: Sequence[RetrievedDoc],
    fraction: float = 0.30,
    provider: EmbeddingProvider | None = None,
) -> BuiltContext:
    """Select the top ``ceil(fraction * N)`` sentences by query similarity.

    Ties and ordering are deterministic: sentences sort by descending
    similarity, then doc id, then sentence index, so the result does not
    depend on the order the documents arrive in.
    """
    if not docs:
        raise ValueError("no retrieved documents")
    if not (0.0 < fraction <= 1.0):
        raise ValueError("fraction must be in (0, 1]")
    ids = [d.id for d in docs]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate retrieved doc ids")

    candidates: list[tuple[str, int, str]] = []
    for doc in sorted(docs, key=lambda d: d.id):
        for idx, sentence in enumerate(split_sentences(doc.text)):
            candidates.append((doc.id, idx, sentence))
    if not candidates:
        raise ValueError("retrieved documents contain no sentences")

    if provider is None:
        provider = TfidfEmbedding([c[2] for c in candidates])
    query_vec = provider.embed(query)

    ranked = [
        RankedSentence(
            doc_id=doc_id,
            sentence_index=idx,
            text=sentence,
            similarity=cosine(query_vec, provider.embed(sentence)),
        )
        for doc_id, idx, sentence in candidates
    ]
    ranked.sort(key=lambda s: (-s.similarity, s.doc_id, s.sentence_index))

    # round() guards float dust like 0.3 * 70 = 21.000000000000004.
    keep = math.ceil(round(fraction * len(ranked), 9))
    return BuiltContext(query=query, fraction=fraction, sentences=tuple(ranked[:keep]))


def synthesize_corrupted_context(
    context: AnnotatedDoc,
    replacements: Mapping[str, str | Sequence[str]],
    seed: int = 0,
) -> Document:
    """Swap every mention of the given entities for replacement strings.

    Values may be a single replacement or a pool to sample from; sampling
    is seeded and one choice per entity key applies to all its mentions.
    Bytes outside the replaced mention spans are preserved exactly.
    """
    known = context.entities.keys()
    unknown = set(replacements) - known
    if unknown:
        raise ValueError(f"replacement keys not in entity set: {sorted(unknown)}")

    rng = random.Random(seed)
    chosen: dict[str, str] = {}
    for key in sorted(replacements):
        value = replacements[key]
        if isinstance(value, str):
            chosen[key] = value
        else:
            pool = list(value)
            if not pool:
                raise ValueError(f"empty replacement pool for {key!r}")
            chosen[key] = rng.choice(pool)

    spans: list[tuple[int, int, str]] = []
    for entity in context.entities:
        if entity.key not in chosen:
            continue
        for m in entity.mentions:
            first = context.doc.tokens[m.token_span[0]]
            last = context.doc.tokens[m.token_span[1]]
            spans.append((first.start, last.end, chosen[entity.key]))
    spans.sort(reverse=True)

    text = context.doc.raw_text
    for start, end, replacement in spans:
        text = text[:start] + replacement + text[end:]
    return tokenize(text, doc_id=context.doc.id + "+corrupted")
