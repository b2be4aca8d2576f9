"""Tokenization, entity sets, and entity context windows.

Everything downstream compares documents through the vocabulary built here:
word and punctuation tokens with character offsets, canonical entity keys,
and the set of normalized words observed near an entity's mentions.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

# Words (with a leading clitic apostrophe kept attached) or single
# non-space symbols.  "Sunak's" -> ["Sunak", "'s"].
_TOKEN_RE = re.compile(r"\w+|'\w+|[^\w\s]")
_WORD_CHAR_RE = re.compile(r"\w")
_WS_RE = re.compile(r"\s+")

_SENTENCE_TERMINALS = frozenset(".!?")


@dataclass(frozen=True)
class Token:
    """One surface token with character offsets into the raw text."""

    surface: str
    start: int
    end: int
    normalized: str

    @property
    def is_punctuation(self) -> bool:
        return _WORD_CHAR_RE.search(self.surface) is None


@dataclass(frozen=True)
class Document:
    id: str
    raw_text: str
    tokens: tuple[Token, ...]


def tokenize(raw_text: str, doc_id: str = "doc") -> Document:
    """Split text into word and punctuation tokens with offsets.

    Offsets index the original string, so ``raw_text[t.start:t.end]``
    always reproduces the surface form.  Normalization is casefolding.
    """
    tokens = tuple(
        Token(m.group(), m.start(), m.end(), m.group().casefold())
        for m in _TOKEN_RE.finditer(raw_text)
    )
    return Document(id=doc_id, raw_text=raw_text, tokens=tokens)


def canonicalize(surface: str) -> str:
    """Casefold and collapse internal whitespace to single spaces."""
    return _WS_RE.sub(" ", surface.strip()).casefold()


@dataclass(frozen=True)
class EntityMention:
    """One occurrence of an entity: surface form plus inclusive token span."""

    surface: str
    token_span: tuple[int, int]
    canonical: str


@dataclass(frozen=True)
class Entity:
    key: str
    rank: int
    mentions: tuple[EntityMention, ...]


@dataclass(frozen=True)
class EntitySet:
    """Entities of one document, keyed canonically, with salience ranks.

    Keys are unique, ranks are unique positive integers.  Rank 1 is the
    most salient entity.  Automatically assigned ranks are contiguous;
    explicitly supplied ranks are taken verbatim and may have gaps.
    """

    entities: tuple[Entity, ...]

    def __post_init__(self) -> None:
        keys = [e.key for e in self.entities]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate entity keys in entity set")
        ranks = [e.rank for e in self.entities]
        if any(not isinstance(r, int) or r < 1 for r in ranks):
            raise ValueError("entity ranks must be positive integers")
        if len(set(ranks)) != len(ranks):
            raise ValueError("duplicate entity ranks in entity set")

    def __iter__(self) -> Iterator[Entity]:
        return iter(self.entities)

    def __len__(self) -> int:
        return len(self.entities)

    def __contains__(self, key: str) -> bool:
        return any(e.key == key for e in self.entities)

    def keys(self) -> frozenset[str]:
        return frozenset(e.key for e in self.entities)

    def get(self, key: str) -> Entity:
        for e in self.entities:
            if e.key == key:
                return e
        raise KeyError(key)

    def rank_of(self, key: str) -> int:
        return self.get(key).rank


def _sentence_start_flags(doc: Document) -> list[bool]:
    flags = []
    at_start = True
    for tok in doc.tokens:
        flags.append(at_start)
        if tok.is_punctuation:
            at_start = at_start or tok.surface in _SENTENCE_TERMINALS
        else:
            at_start = False
    return flags


def extract_entities_heuristic(doc: Document) -> EntitySet:
    """Entity mentions as maximal runs of capitalized word tokens.

    A single capitalized word opening a sentence is kept only when the
    same word also appears capitalized somewhere mid-sentence; longer
    runs are kept regardless, so "Rishi Sunak met Modi" still yields
    "rishi sunak".  Mentions sharing a canonical key collapse into one
    entity, ranked 1..n in order of first occurrence.
    """
    starts = _sentence_start_flags(doc)
    capitalized = [
        not t.is_punctuation and t.surface[:1].isupper() for t in doc.tokens
    ]
    confirmed = {
        t.normalized
        for i, t in enumerate(doc.tokens)
        if capitalized[i] and not starts[i]
    }

    runs: list[tuple[int, int]] = []
    i = 0
    while i < len(doc.tokens):
        if capitalized[i]:
            j = i
            while j + 1 < len(doc.tokens) and capitalized[j + 1]:
                j += 1
            runs.append((i, j))
            i = j + 1
        else:
            i += 1

    mentions_by_key: dict[str, list[EntityMention]] = {}
    for first, last in runs:
        if (
            starts[first]
            and first == last
            and doc.tokens[first].normalized not in confirmed
        ):
            continue
        key = canonicalize(
            " ".join(doc.tokens[k].normalized for k in range(first, last + 1))
        )
        surface = doc.raw_text[doc.tokens[first].start : doc.tokens[last].end]
        mention = EntityMention(surface=surface, token_span=(first, last), canonical=key)
        mentions_by_key.setdefault(key, []).append(mention)

    entities = tuple(
        Entity(key=key, rank=rank, mentions=tuple(ms))
        for rank, (key, ms) in enumerate(mentions_by_key.items(), start=1)
    )
    return EntitySet(entities=entities)


@dataclass(frozen=True)
class RejectedRecord:
    """An annotation record that could not be applied, with the reason."""

    doc_id: str
    key: str
    reason: str


def _span_tokens(doc: Document, start: int, end: int) -> tuple[int, int] | None:
    overlapping = [
        i
        for i, t in enumerate(doc.tokens)
        if t.start < end and t.end > start
    ]
    if not overlapping:
        return None
    return overlapping[0], overlapping[-1]


def load_annotations(
    doc: Document, records: Iterable[Mapping[str, object]]
) -> tuple[EntitySet, list[RejectedRecord]]:
    """Build an entity set from external annotation records for one document.

    Each record carries ``start``/``end`` character offsets, a canonical
    ``key``, and optionally a ``rank``.  Ranks must be supplied for all
    records or for none; explicit ranks are used verbatim (duplicates
    across keys are an error), otherwise ranks follow first occurrence.
    Records whose span is out of range or covers no tokens are returned
    as rejected records instead of raising.
    """
    accepted: list[tuple[str, tuple[int, int], str, object]] = []
    rejected: list[RejectedRecord] = []
    ranked_flags: set[bool] = set()

    for rec in records:
        key = canonicalize(str(rec.get("key", "")))
        ranked_flags.add("rank" in rec)
        if not key:
            rejected.append(RejectedRecord(doc.id, str(rec.get("key", "")), "empty key"))
            continue
        try:
            start = int(rec["start"])  # type: ignore[index]
            end = int(rec["end"])  # type: ignore[index]
        except (KeyError, TypeError, ValueError):
            rejected.append(RejectedRecord(doc.id, key, "missing or non-integer span"))
            continue
        if start < 0 or end > len(doc.raw_text) or start >= end:
            rejected.append(
                RejectedRecord(doc.id, key, f"span [{start}, {end}) out of range")
            )
            continue
        span = _span_tokens(doc, start, end)
        if span is None:
            rejected.append(
                RejectedRecord(doc.id, key, f"span [{start}, {end}) covers no tokens")
            )
            continue
        accepted.append((key, span, doc.raw_text[start:end], rec.get("rank")))

    if True in ranked_flags and False in ranked_flags:
        raise ValueError(f"{doc.id}: mixed explicit and implicit ranks")
    explicit = ranked_flags == {True}

    mentions_by_key: dict[str, list[EntityMention]] = {}
    rank_by_key: dict[str, int] = {}
    for key, span, surface, rank in accepted:
        mentions_by_key.setdefault(key, []).append(
            EntityMention(surface=surface, token_span=span, canonical=key)
        )
        if explicit:
            rank_int = rank if isinstance(rank, int) and not isinstance(rank, bool) else None
            if rank_int is None or rank_int < 1:
                raise ValueError(f"{doc.id}: rank for {key!r} must be a positive integer")
            if key in rank_by_key and rank_by_key[key] != rank_int:
                raise ValueError(f"{doc.id}: conflicting ranks for {key!r}")
            rank_by_key[key] = rank_int

    if explicit:
        if len(set(rank_by_key.values())) != len(rank_by_key):
            raise ValueError(f"{doc.id}: duplicate explicit ranks")
    else:
        # First occurrence by earliest mention token.
        order = sorted(
            mentions_by_key, key=lambda k: min(m.token_span[0] for m in mentions_by_key[k])
        )
        rank_by_key = {key: i for i, key in enumerate(order, start=1)}

    entities = tuple(
        Entity(
            key=key,
            rank=rank_by_key[key],
            mentions=tuple(sorted(ms, key=lambda m: m.token_span)),
        )
        for key, ms in mentions_by_key.items()
    )
    return EntitySet(entities=entities), rejected


@dataclass(frozen=True)
class ContextWindow:
    """Normalized word tokens within w positions of an entity's mentions."""

    entity: str
    words: frozenset[str]


def context_window(
    doc: Document, entities: EntitySet, key: str, w: int = 10
) -> ContextWindow:
    """Collect normalized words within ``w`` tokens of any mention of ``key``.

    The window is a set: the union over mentions, minus every token that
    belongs to any mention of the entity itself, minus pure punctuation.
    Punctuation still occupies window positions.
    """
    if w < 1:
        raise ValueError("window half-size must be >= 1")
    entity = entities.get(key) if key in entities else None
    if entity is None:
        raise ValueError(f"unknown entity key {key!r}")

    own = set()
    for m in entity.mentions:
        own.update(range(m.token_span[0], m.token_span[1] + 1))

    words: set[str] = set()
    n = len(doc.tokens)
    for m in entity.mentions:
        first, last = m.token_span
        lo = max(0, first - w)
        hi = min(n - 1, last + w)
        for i in list(range(lo, first)) + list(range(last + 1, hi + 1)):
            tok = doc.tokens[i]
            if i in own or tok.is_punctuation:
                continue
            words.add(tok.normalized)
    return ContextWindow(entity=key, words=frozenset(words))


@dataclass(frozen=True)
class AnnotatedDoc:
    """A tokenized document paired with its entity set."""

    doc: Document
    entities: EntitySet

    @classmethod
    def from_text(cls, raw_text: str, doc_id: str = "doc") -> "AnnotatedDoc":
        doc = tokenize(raw_text, doc_id)
        return cls(doc=doc, entities=extract_entities_heuristic(doc))

    @classmethod
    def from_records(
        cls,
        raw_text: str,
        records: Sequence[Mapping[str, object]],
        doc_id: str = "doc",
    ) -> tuple["AnnotatedDoc", list[RejectedRecord]]:
        doc = tokenize(raw_text, doc_id)
        entities, rejected = load_annotations(doc, records)
        return cls(doc=doc, entities=entities), rejected

    def window(self, key: str, w: int = 10) -> ContextWindow:
        return context_window(self.doc, self.entities, key, w)
