"""Documents, entity spans, and the external corpus formats (JSONL, CoNLL-2003)."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import IO, Iterable


class EntityCategory(str, Enum):
    PER = "PER"
    LOC = "LOC"
    ORG = "ORG"


# Placeholder words used by sanitization, per category.
CATEGORY_WORDS = {
    EntityCategory.PER: "PERSON",
    EntityCategory.LOC: "LOCATION",
    EntityCategory.ORG: "ORGANIZATION",
}


class ConllParseError(ValueError):
    """Raised for malformed CoNLL input; message names the offending line."""


class JsonlSchemaError(ValueError):
    """Raised for malformed document JSONL; message names line and field."""


@dataclass(frozen=True)
class EntitySpan:
    """Character-offset range with a category. Offsets count Unicode scalar
    values (Python string indices), start inclusive, end exclusive."""

    start: int
    end: int
    category: EntityCategory
    surface: str

    def validate(self, text: str) -> None:
        if not (0 <= self.start < self.end <= len(text)):
            raise ValueError(
                f"span ({self.start},{self.end}) out of range for text of length {len(text)}"
            )
        if text[self.start : self.end] != self.surface:
            raise ValueError(
                f"span surface {self.surface!r} != text[{self.start}:{self.end}]"
                f" == {text[self.start:self.end]!r}"
            )


@dataclass
class Document:
    id: str
    text: str
    gold_spans: list[EntitySpan] | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("document id must be non-empty")

    def validate(self) -> None:
        if self.gold_spans is not None:
            check_spans(self.gold_spans, self.text)


def check_spans(spans: list[EntitySpan], text: str) -> None:
    """Assert spans are individually valid, sorted by start, and non-overlapping."""
    for span in spans:
        span.validate(text)
    for a, b in zip(spans, spans[1:]):
        if b.start < a.start:
            raise ValueError(f"spans not sorted: {a} before {b}")
        if b.start < a.end:
            raise ValueError(f"spans overlap: {a} and {b}")


# ---------------------------------------------------------------------------
# CoNLL-2003

_NE_TAGS = {"O"} | {
    f"{prefix}-{kind}" for prefix in ("B", "I") for kind in ("PER", "LOC", "ORG", "MISC")
}

_DOCSTART = "-DOCSTART-"


def parse_conll(raw: str | IO[str], id_prefix: str = "conll") -> list[Document]:
    """Parse CoNLL-2003 4-column data (token, POS, chunk, NE tag) into documents.

    Documents are delimited by ``-DOCSTART-`` lines; when none appear the whole
    stream is one document.  Sentences are separated by blank lines.  Text is
    rebuilt with single spaces between tokens and a newline between sentences.
    NE tags may use IOB1 or BIO2; both are normalized by the run-building rule
    below.  PER/LOC/ORG runs become gold spans; MISC runs are dropped.
    """
    if hasattr(raw, "read"):
        raw = raw.read()
    docs: list[Document] = []
    saw_docstart = False
    # Per-document accumulation: list of sentences, each a list of (token, tag).
    sentences: list[list[tuple[str, str]]] = []
    current: list[tuple[str, str]] = []

    def flush_sentence() -> None:
        nonlocal current
        if current:
            sentences.append(current)
            current = []

    def flush_document() -> None:
        nonlocal sentences
        flush_sentence()
        if sentences:
            docs.append(_build_document(f"{id_prefix}-{len(docs) + 1:04d}", sentences))
        sentences = []

    for lineno, line in enumerate(raw.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            flush_sentence()
            continue
        fields = stripped.split()
        if fields[0] == _DOCSTART:
            # Delimiter line; column counts vary across distributions.
            flush_document()
            saw_docstart = True
            continue
        if len(fields) != 4:
            raise ConllParseError(
                f"line {lineno}: expected 4 columns, got {len(fields)}: {stripped!r}"
            )
        token, _pos, _chunk, tag = fields
        if tag not in _NE_TAGS:
            raise ConllParseError(f"line {lineno}: unknown NE tag {tag!r}")
        current.append((token, tag))

    flush_document()
    if not docs and not saw_docstart:
        return []
    return docs


def _build_document(doc_id: str, sentences: list[list[tuple[str, str]]]) -> Document:
    parts: list[str] = []
    runs: list[tuple[int, int, str]] = []
    offset = 0
    for sent_idx, sentence in enumerate(sentences):
        if sent_idx > 0:
            parts.append("\n")
            offset += 1
        run_start: int | None = None
        run_kind = ""
        prev_end = offset
        for tok_idx, (token, tag) in enumerate(sentence):
            if tok_idx > 0:
                parts.append(" ")
                offset += 1
            tok_start = offset
            parts.append(token)
            offset += len(token)

            if tag == "O":
                if run_start is not None:
                    runs.append((run_start, prev_end, run_kind))
                run_start = None
            else:
                prefix, kind = tag.split("-", 1)
                # B-X always opens a run; I-X continues a same-kind run and
                # otherwise opens one (IOB1 input).
                if prefix == "B" or run_kind != kind or run_start is None:
                    if run_start is not None:
                        runs.append((run_start, prev_end, run_kind))
                    run_start, run_kind = tok_start, kind
            prev_end = offset
        if run_start is not None:
            runs.append((run_start, prev_end, run_kind))

    text = "".join(parts)
    spans = [
        EntitySpan(start, end, EntityCategory(kind), text[start:end])
        for start, end, kind in runs
        if kind != "MISC"
    ]
    return Document(doc_id, text, gold_spans=spans)


def write_conll(docs: Iterable[Document]) -> str:
    """Serialize documents back to CoNLL-2003 with BIO2 tags.

    Tokens are recovered by splitting on the detokenization separators
    (newline between sentences, single space between tokens); gold spans must
    align with token boundaries.  POS and chunk columns are emitted as -X-.
    """
    lines: list[str] = []
    for doc in docs:
        spans = doc.gold_spans or []
        for span in spans:
            if "\n" in span.surface:
                raise ValueError(f"doc {doc.id}: span {span.start}:{span.end} crosses sentences")
        lines.append(f"{_DOCSTART} -X- -X- O")
        lines.append("")
        offset = 0
        for sentence in doc.text.split("\n"):
            for token in sentence.split(" "):
                if not token:
                    raise ValueError(f"doc {doc.id}: text is not in detokenized form")
                tok_start, tok_end = offset, offset + len(token)
                tag = "O"
                for span in spans:
                    if span.start <= tok_start and tok_end <= span.end:
                        tag = ("B-" if tok_start == span.start else "I-") + span.category.value
                        break
                    if tok_start < span.end and span.start < tok_end:
                        raise ValueError(
                            f"doc {doc.id}: span {span.start}:{span.end} is not aligned"
                            " to token boundaries"
                        )
                lines.append(f"{token} -X- -X- {tag}")
                offset = tok_end + 1  # skip the separator
            lines.append("")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Document JSONL

_CATEGORY_VALUES = {c.value for c in EntityCategory}


def _span_from_json(obj: dict, text: str, lineno: int, idx: int) -> EntitySpan:
    where = f"line {lineno}: entities[{idx}]"
    if not isinstance(obj, dict):
        raise JsonlSchemaError(f"{where}: expected object")
    for key in ("start", "end", "category", "surface"):
        if key not in obj:
            raise JsonlSchemaError(f"{where}.{key}: missing field")
    start, end = obj["start"], obj["end"]
    if not isinstance(start, int) or not isinstance(end, int):
        raise JsonlSchemaError(f"{where}.start/end: expected integers")
    if obj["category"] not in _CATEGORY_VALUES:
        raise JsonlSchemaError(f"{where}.category: invalid value {obj['category']!r}")
    if not isinstance(obj["surface"], str):
        raise JsonlSchemaError(f"{where}.surface: expected string")
    span = EntitySpan(start, end, EntityCategory(obj["category"]), obj["surface"])
    try:
        span.validate(text)
    except ValueError as exc:
        raise JsonlSchemaError(f"{where}: {exc}") from exc
    return span


def read_jsonl(raw: str | IO[str]) -> list[Document]:
    """Read one Document per JSON line, validating the schema and invariants."""
    if hasattr(raw, "read"):
        raw = raw.read()
    docs: list[Document] = []
    seen_ids: set[str] = set()
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise JsonlSchemaError(f"line {lineno}: invalid JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise JsonlSchemaError(f"line {lineno}: expected JSON object")
        for key, kind in (("id", str), ("text", str)):
            if key not in obj:
                raise JsonlSchemaError(f"line {lineno}: {key}: missing field")
            if not isinstance(obj[key], kind):
                raise JsonlSchemaError(f"line {lineno}: {key}: expected {kind.__name__}")
        if not obj["id"]:
            raise JsonlSchemaError(f"line {lineno}: id: must be non-empty")
        if obj["id"] in seen_ids:
            raise JsonlSchemaError(f"line {lineno}: id: duplicate {obj['id']!r}")
        seen_ids.add(obj["id"])
        spans = None
        if "entities" in obj and obj["entities"] is not None:
            if not isinstance(obj["entities"], list):
                raise JsonlSchemaError(f"line {lineno}: entities: expected list")
            spans = [
                _span_from_json(s, obj["text"], lineno, i) for i, s in enumerate(obj["entities"])
            ]
            try:
                check_spans(spans, obj["text"])
            except ValueError as exc:
                raise JsonlSchemaError(f"line {lineno}: entities: {exc}") from exc
        docs.append(Document(obj["id"], obj["text"], gold_spans=spans))
    return docs


def document_to_json(doc: Document) -> str:
    """One normalized JSON line per document: fixed key order, compact separators."""
    obj: dict = {"id": doc.id, "text": doc.text}
    if doc.gold_spans is not None:
        obj["entities"] = [
            {"start": s.start, "end": s.end, "category": s.category.value, "surface": s.surface}
            for s in doc.gold_spans
        ]
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def write_jsonl(docs: Iterable[Document]) -> str:
    return "".join(document_to_json(doc) + "\n" for doc in docs)
