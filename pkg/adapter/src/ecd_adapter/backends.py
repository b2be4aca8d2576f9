"""Tagger and embedder backends.

The "builtin" backends are deterministic, offline, and dependency-free:
a capitalization tagger and a hashed bag-of-words embedder.  Any other
backend name is treated as a pretrained model identifier and loaded
lazily; load failures surface as ModelError so callers get one exit
path whether the package is missing, the weights are absent, or the
hub is unreachable.
"""
from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass
from typing import Protocol, Sequence

from ecd_adapter.errors import ModelError

_WORD_RE = re.compile(r"[A-Za-z][A-Za-z0-9'-]*")
_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")
_TOKEN_RE = re.compile(r"[a-z0-9']+")

# Words that are capitalized at a sentence start purely by convention.
# A single capitalized word opening a sentence is dropped when it is one
# of these; any other word there is taken to be a name.
_FUNCTION_WORDS = frozenset(
    """
    a an the this that these those there here it its he she they we i you
    his her their our my your in on at by for of to with from but and or
    nor so yet if as when while after before since because although though
    however meanwhile moreover also then now today tomorrow yesterday not
    no yes some many most few all any each every one two both other another
    such what who whom whose which why how where do does did is are was
    were be been being have has had will would can could may might must
    shall should
    """.split()
)


@dataclass(frozen=True)
class EntitySpan:
    """One tagged mention: character offsets plus the canonical key."""

    start: int
    end: int
    key: str


def split_sentences(text: str) -> list[str]:
    """Split on terminal punctuation followed by whitespace.

    Sentences come back stripped; empty pieces are dropped.  Keys in the
    vectors file are exactly these strings.
    """
    return [piece for piece in (p.strip() for p in _SENTENCE_SPLIT_RE.split(text)) if piece]


def _canonical(surface: str) -> str:
    return re.sub(r"\s+", " ", surface.strip()).casefold()


class Tagger(Protocol):
    def tag(self, text: str) -> list[EntitySpan]: ...


class Embedder(Protocol):
    dimension: int

    def embed(self, sentences: Sequence[str]) -> list[list[float]]: ...


class BuiltinTagger:
    """Maximal capitalized word runs, with a sentence-start guard.

    A run longer than one word is always kept.  A single capitalized word
    that opens a sentence is kept unless it is a common function word,
    since sentence case alone does not make "The" a name but does not
    disqualify "Modi" either.
    """

    def tag(self, text: str) -> list[EntitySpan]:
        words = list(_WORD_RE.finditer(text))
        spans: list[EntitySpan] = []
        i = 0
        while i < len(words):
            if not words[i].group()[0].isupper():
                i += 1
                continue
            j = i
            while (
                j + 1 < len(words)
                and words[j + 1].group()[0].isupper()
                and not _terminal_between(text, words[j].end(), words[j + 1].start())
            ):
                j += 1
            start, end = words[i].start(), words[j].end()
            single = i == j
            word = words[i].group()
            if not (
                single
                and _sentence_initial(text, words, i)
                and word.casefold() in _FUNCTION_WORDS
            ):
                spans.append(EntitySpan(start=start, end=end, key=_canonical(text[start:end])))
            i = j + 1
        return spans


def _terminal_between(text: str, end: int, start: int) -> bool:
    return any(ch in ".!?" for ch in text[end:start])


def _sentence_initial(text: str, words: list[re.Match], index: int) -> bool:
    if index == 0:
        gap = text[: words[0].start()]
        return True if not gap.strip() else any(ch in ".!?" for ch in gap)
    return _terminal_between(text, words[index - 1].end(), words[index].start())


class BuiltinEmbedder:
    """Hashed bag of words, L2-normalized.

    Each casefolded token hashes to one of ``dimension`` buckets; counts
    accumulate and the vector is normalized to unit length.  Identical
    sentences embed identically and cosine with itself is 1 by
    construction.  A sentence with no word tokens has no direction and
    cannot be embedded.
    """

    def __init__(self, dimension: int = 64):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self.dimension = dimension

    def embed(self, sentences: Sequence[str]) -> list[list[float]]:
        return [self._one(s) for s in sentences]

    def _one(self, sentence: str) -> list[float]:
        vec = [0.0] * self.dimension
        for token in _TOKEN_RE.findall(sentence.casefold()):
            digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
            vec[int.from_bytes(digest, "big") % self.dimension] += 1.0
        norm = math.sqrt(sum(v * v for v in vec))
        if norm == 0.0:
            raise ValueError(f"sentence has no word tokens: {sentence!r}")
        return [v / norm for v in vec]


class TransformersTagger:
    """Token-classification pipeline over a pretrained model."""

    def __init__(self, model_name: str):
        try:
            from transformers import pipeline

            self._pipe = pipeline(
                "token-classification", model=model_name, aggregation_strategy="simple"
            )
        except Exception as exc:
            raise ModelError(f"cannot load tagger model {model_name!r}: {exc}") from exc
        self._model_name = model_name

    def tag(self, text: str) -> list[EntitySpan]:
        try:
            raw = self._pipe(text)
        except Exception as exc:
            raise ModelError(f"tagger model {self._model_name!r} failed: {exc}") from exc
        spans = [
            EntitySpan(
                start=int(r["start"]),
                end=int(r["end"]),
                key=_canonical(text[int(r["start"]) : int(r["end"])]),
            )
            for r in raw
        ]
        return sorted(spans, key=lambda s: (s.start, s.end))


class SentenceTransformersEmbedder:
    """Sentence embeddings from a pretrained sentence-transformers model."""

    def __init__(self, model_name: str):
        try:
            from sentence_transformers import SentenceTransformer

            self._model = SentenceTransformer(model_name)
            self.dimension = int(self._model.get_sentence_embedding_dimension())
        except Exception as exc:
            raise ModelError(f"cannot load embedder model {model_name!r}: {exc}") from exc
        self._model_name = model_name

    def embed(self, sentences: Sequence[str]) -> list[list[float]]:
        try:
            matrix = self._model.encode(
                list(sentences), normalize_embeddings=True, show_progress_bar=False
            )
        except Exception as exc:
            raise ModelError(f"embedder model {self._model_name!r} failed: {exc}") from exc
        return [[float(v) for v in row] for row in matrix]


def load_tagger(name: str) -> Tagger:
    if name == "builtin":
        return BuiltinTagger()
    return TransformersTagger(name)


def load_embedder(name: str, dimension: int = 64) -> Embedder:
    """Resolve an embedder; ``dimension`` applies to the builtin only."""
    if name == "builtin":
        return BuiltinEmbedder(dimension)
    return SentenceTransformersEmbedder(name)
