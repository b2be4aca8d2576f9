"""Corpus-level operations: annotate and embed, emitting JSONL files.

Both operations read the same corpus format the downstream scorer uses
({"id", "text"} per line) and write files it ingests directly:
annotations as {"doc_id", "entities": [{"start", "end", "key"}]} and
vectors as {"key", "vector"}.  Writers sort object keys and end with a
newline so identical inputs give byte-identical outputs.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

from ecd_adapter.backends import load_embedder, load_tagger, split_sentences
from ecd_adapter.errors import AdapterError, InputError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdapterConfig:
    corpus: Path
    annotations_out: Path | None = None
    vectors_out: Path | None = None
    tagger: str = "builtin"
    embedder: str = "builtin"
    batch_size: int = 32
    dimension: int = 64

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")


@dataclass(frozen=True)
class AnnotateSummary:
    path: Path
    documents: int
    mentions: int


@dataclass(frozen=True)
class EmbedSummary:
    path: Path
    sentences: int
    dimension: int
    skipped: int


def read_corpus(path: str | Path) -> list[tuple[str, str]]:
    """Read (doc_id, text) pairs in file order, validating hard."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    docs: list[tuple[str, str]] = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        if not isinstance(rec, dict) or "id" not in rec or "text" not in rec:
            raise InputError(f"{path}:{lineno}: corpus record needs 'id' and 'text'")
        doc_id = str(rec["id"])
        if doc_id in seen:
            raise InputError(f"{path}:{lineno}: duplicate doc id {doc_id!r}")
        seen.add(doc_id)
        docs.append((doc_id, str(rec["text"])))
    if not docs:
        raise InputError(f"{path}: corpus is empty")
    return docs


def _batches(items: Sequence, size: int) -> Iterator[Sequence]:
    for i in range(0, len(items), size):
        yield items[i : i + size]


def _write_jsonl(path: Path, rows: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        "".join(json.dumps(row, sort_keys=True) + "\n" for row in rows),
        encoding="utf-8",
    )


def annotate_corpus(config: AdapterConfig) -> AnnotateSummary:
    """Tag every document and write one annotation record per document.

    Documents without entities still get a record (empty list), so the
    output names every corpus id.  Every span is checked against the
    document text before anything is written; a backend that produces an
    out-of-range span aborts the run rather than emitting a bad file.
    """
    if config.annotations_out is None:
        raise ValueError("annotations_out is not set")
    docs = read_corpus(config.corpus)
    tagger = load_tagger(config.tagger)

    rows: list[dict] = []
    mentions = 0
    for batch in _batches(docs, config.batch_size):
        for doc_id, text in batch:
            spans = tagger.tag(text)
            for span in spans:
                if not (0 <= span.start < span.end <= len(text)):
                    raise AdapterError(
                        f"tagger produced invalid span [{span.start}, {span.end}) "
                        f"for document {doc_id!r} of length {len(text)}"
                    )
                if not span.key:
                    raise AdapterError(f"tagger produced an empty key for {doc_id!r}")
            rows.append(
                {
                    "doc_id": doc_id,
                    "entities": [
                        {"start": s.start, "end": s.end, "key": s.key} for s in spans
                    ],
                }
            )
            mentions += len(spans)

    _write_jsonl(config.annotations_out, rows)
    return AnnotateSummary(
        path=config.annotations_out, documents=len(rows), mentions=mentions
    )


def embed_corpus(config: AdapterConfig) -> EmbedSummary:
    """Embed every distinct sentence and write one vector per key.

    Keys are exact sentence strings; the first occurrence fixes the
    order.  Sentences the backend cannot embed (no word tokens) are
    skipped with a log line rather than poisoning the file.
    """
    if config.vectors_out is None:
        raise ValueError("vectors_out is not set")
    docs = read_corpus(config.corpus)
    embedder = load_embedder(config.embedder, config.dimension)

    keys: list[str] = []
    seen: set[str] = set()
    for _, text in docs:
        for sentence in split_sentences(text):
            if sentence not in seen:
                seen.add(sentence)
                keys.append(sentence)

    rows: list[dict] = []
    skipped = 0
    dimension = 0
    for batch in _batches(keys, config.batch_size):
        embeddable = []
        for key in batch:
            try:
                # Probe one at a time so a single bad sentence skips, not the batch.
                vectors = embedder.embed([key])
            except ValueError as exc:
                logger.info("skipping sentence: %s", exc)
                skipped += 1
                continue
            embeddable.append((key, vectors[0]))
        for key, vector in embeddable:
            dimension = len(vector)
            rows.append({"key": key, "vector": vector})

    _write_jsonl(config.vectors_out, rows)
    return EmbedSummary(
        path=config.vectors_out,
        sentences=len(rows),
        dimension=dimension,
        skipped=skipped,
    )
