"""File formats: JSONL corpora, annotations, manifests, vectors.

Readers validate hard and either raise InputError (malformed files) or
collect per-record rejections where the format tolerates bad rows.
Writers are deterministic: sorted keys, fixed separators, newline at EOF,
no timestamps, so identical inputs give byte-identical outputs.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping, Sequence

from ecd_eval.text import AnnotatedDoc, RejectedRecord


class InputError(Exception):
    """A file could not be read or parsed as its declared format."""


def read_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    """Yield (line_number, record) for each non-blank line of a JSONL file."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        if not isinstance(record, dict):
            raise InputError(f"{path}:{lineno}: expected a JSON object")
        yield lineno, record


def read_corpus(path: str | Path) -> dict[str, str]:
    """Read {"id", "text"} records into an id -> text mapping."""
    docs: dict[str, str] = {}
    for lineno, rec in read_jsonl(path):
        if "id" not in rec or "text" not in rec:
            raise InputError(f"{path}:{lineno}: corpus record needs 'id' and 'text'")
        doc_id = str(rec["id"])
        if doc_id in docs:
            raise InputError(f"{path}:{lineno}: duplicate doc id {doc_id!r}")
        docs[doc_id] = str(rec["text"])
    if not docs:
        raise InputError(f"{path}: corpus is empty")
    return docs


def read_annotation_file(path: str | Path) -> dict[str, list[dict]]:
    """Read {"doc_id", "entities": [...]} records into doc_id -> entity records."""
    annotations: dict[str, list[dict]] = {}
    for lineno, rec in read_jsonl(path):
        if "doc_id" not in rec or "entities" not in rec:
            raise InputError(
                f"{path}:{lineno}: annotation record needs 'doc_id' and 'entities'"
            )
        doc_id = str(rec["doc_id"])
        entities = rec["entities"]
        if not isinstance(entities, list):
            raise InputError(f"{path}:{lineno}: 'entities' must be a list")
        annotations.setdefault(doc_id, []).extend(entities)
    return annotations


def read_manifest(path: str | Path) -> list[dict]:
    """Read pairing records with context_id, generated_id, and scenario."""
    pairs: list[dict] = []
    for lineno, rec in read_jsonl(path):
        missing = {"context_id", "generated_id", "scenario"} - rec.keys()
        if missing:
            raise InputError(f"{path}:{lineno}: manifest record lacks {sorted(missing)}")
        pairs.append(
            {
                "context_id": str(rec["context_id"]),
                "generated_id": str(rec["generated_id"]),
                "scenario": str(rec["scenario"]),
            }
        )
    return pairs


def read_vectors(
    path: str | Path,
) -> tuple[dict[str, tuple[float, ...]], list[tuple[int, str]]]:
    """Read {"key", "vector"} records; malformed rows come back as rejections.

    Returns (key -> vector, [(line_number, reason), ...]).  All accepted
    vectors must share the dimension of the first accepted one.
    """
    vectors: dict[str, tuple[float, ...]] = {}
    rejected: list[tuple[int, str]] = []
    dimension: int | None = None
    for lineno, rec in read_jsonl(path):
        if "key" not in rec or "vector" not in rec:
            rejected.append((lineno, "record needs 'key' and 'vector'"))
            continue
        key = str(rec["key"])
        raw = rec["vector"]
        if not isinstance(raw, list) or not raw:
            rejected.append((lineno, "vector must be a non-empty list"))
            continue
        try:
            vec = tuple(float(v) for v in raw)
        except (TypeError, ValueError):
            rejected.append((lineno, "vector entries must be numbers"))
            continue
        if dimension is None:
            dimension = len(vec)
        elif len(vec) != dimension:
            rejected.append(
                (lineno, f"vector dimension {len(vec)} != expected {dimension}")
            )
            continue
        if key in vectors:
            rejected.append((lineno, f"duplicate key {key!r}"))
            continue
        vectors[key] = vec
    return vectors, rejected


def load_annotated_corpus(
    corpus_path: str | Path,
    annotations_path: str | Path | None = None,
) -> tuple[dict[str, AnnotatedDoc], list[RejectedRecord]]:
    """Corpus plus optional annotations; heuristic entities fill the gaps."""
    texts = read_corpus(corpus_path)
    annotations = (
        read_annotation_file(annotations_path) if annotations_path is not None else {}
    )
    docs: dict[str, AnnotatedDoc] = {}
    rejected: list[RejectedRecord] = []
    for doc_id, text in texts.items():
        records = annotations.get(doc_id)
        if records is None:
            docs[doc_id] = AnnotatedDoc.from_text(text, doc_id)
        else:
            docs[doc_id], bad = AnnotatedDoc.from_records(text, records, doc_id)
            rejected.extend(bad)
    return docs, rejected


def dump_json(obj: object) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_json(path: str | Path, obj: object) -> None:
    Path(path).write_text(dump_json(obj), encoding="utf-8")


def write_jsonl(path: str | Path, rows: Sequence[Mapping[str, object]]) -> None:
    lines = [
        json.dumps(row, sort_keys=True, separators=(", ", ": "), ensure_ascii=False)
        for row in rows
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


@dataclass(frozen=True)
class CsvColumn:
    name: str
    values: Sequence[float]


def write_csv(path: str | Path, columns: Sequence[CsvColumn]) -> None:
    """Write float columns with repr round-tripping and a trailing newline."""
    if not columns:
        raise ValueError("no columns to write")
    lengths = {len(c.values) for c in columns}
    if len(lengths) != 1:
        raise ValueError("columns must share one length")
    lines = [",".join(c.name for c in columns)]
    for i in range(lengths.pop()):
        lines.append(",".join(repr(float(c.values[i])) for c in columns))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
