"""Span rewriting: enumerated placeholders (sanitize) or knowledge-graph
surrogates (pseudonymize), with per-key consistency and offset-correct
splicing."""

from __future__ import annotations

import hashlib
import random
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable

from pseudotext.corpus import CATEGORY_WORDS, Document, EntityCategory, EntitySpan, check_spans
from pseudotext.kg import (
    KnowledgeGraph,
    NoSurrogateError,
    candidate_set,
    filter_candidates,
    find_leaf,
    sample_replacement,
)

SANITIZE = "sanitize"
PSEUDONYMIZE = "pseudonymize"


class AllDocumentsFailedError(RuntimeError):
    def __init__(self, failures: list[tuple[str, str]]):
        super().__init__(f"all {len(failures)} documents failed; first: {failures[0][1]}")
        self.failures = failures

# (case-folded surface, category): mentions sharing a key share a surrogate.
Key = tuple[str, EntityCategory]


def doc_rng(seed: int, doc_id: str) -> random.Random:
    """Per-document generator, derived so corpus output does not depend on
    worker scheduling."""
    digest = hashlib.sha256(f"{seed}\x1f{doc_id}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def placeholder(category: EntityCategory, index: int) -> str:
    return f"{CATEGORY_WORDS[category]}_{index}"


class ConsistencyMap:
    """Insert-only surrogate table. Every distinct key is enumerated per
    category in first-appearance order; the index feeds the placeholder that
    sanitize assigns (and pseudonymize falls back to). Synchronized so a
    corpus-wide map can be shared across workers."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._surrogates: dict[Key, str] = {}
        self._indices: dict[Key, int] = {}
        self._counters: dict[EntityCategory, int] = {}

    def resolve(self, key: Key, factory: Callable[[int], str]) -> str:
        """Return the key's surrogate, creating it via factory(index) once."""
        with self._lock:
            if key not in self._indices:
                category = key[1]
                self._counters[category] = self._counters.get(category, 0) + 1
                self._indices[key] = self._counters[category]
            if key not in self._surrogates:
                self._surrogates[key] = factory(self._indices[key])
            return self._surrogates[key]

    def snapshot(self) -> dict[Key, str]:
        with self._lock:
            return dict(self._surrogates)


@dataclass
class ReplacementPlan:
    assignments: list[tuple[EntitySpan, str]]
    consistency_map: dict[Key, str]
    mode: str
    seed: int = 0


@dataclass
class RewrittenDocument:
    id: str
    text: str
    plan: ReplacementPlan
    new_spans: list[EntitySpan] = field(default_factory=list)

    def to_document(self) -> Document:
        return Document(self.id, self.text, gold_spans=self.new_spans)


# ---------------------------------------------------------------------------
# Splicing


def splice(text: str, replacements: list[tuple[int, int, str]]) -> tuple[str, list[tuple[int, int]]]:
    """Replace sorted non-overlapping (start, end) ranges, returning the new
    text and each replacement's location in it."""
    parts: list[str] = []
    locations: list[tuple[int, int]] = []
    cursor = 0
    for start, end, replacement in replacements:
        if not (0 <= start < end <= len(text)):
            raise ValueError(f"range ({start},{end}) out of bounds for text of length {len(text)}")
        if start < cursor:
            raise ValueError(f"range ({start},{end}) overlaps or is out of order")
        parts.append(text[cursor:start])
        new_start = sum(len(p) for p in parts)
        parts.append(replacement)
        locations.append((new_start, new_start + len(replacement)))
        cursor = end
    parts.append(text[cursor:])
    return "".join(parts), locations


def apply_replacements(
    text: str, assignments: list[tuple[EntitySpan, str]]
) -> tuple[str, list[EntitySpan]]:
    """Splice each surrogate over its span. Characters outside the spans are
    preserved; new spans carry the original categories."""
    for span, _ in assignments:
        span.validate(text)
    new_text, locations = splice(
        text, [(span.start, span.end, surrogate) for span, surrogate in assignments]
    )
    new_spans = [
        EntitySpan(loc[0], loc[1], span.category, surrogate)
        for (span, surrogate), loc in zip(assignments, locations)
    ]
    return new_text, new_spans


# ---------------------------------------------------------------------------
# Rewriting


def _kg_factory(
    kg: KnowledgeGraph, surface: str, category: EntityCategory, rng: random.Random
) -> Callable[[int], str]:
    def factory(index: int) -> str:
        leaf = find_leaf(kg, surface, category)
        if leaf is None:
            return placeholder(category, index)
        pool = filter_candidates(candidate_set(kg, leaf), leaf)
        if not pool:
            return placeholder(category, index)
        try:
            return sample_replacement(pool, surface, rng)
        except NoSurrogateError:
            return placeholder(category, index)

    return factory


def _rewrite(
    doc: Document,
    spans: list[EntitySpan],
    mode: str,
    cmap: ConsistencyMap,
    kg: KnowledgeGraph | None,
    seed: int,
) -> RewrittenDocument:
    check_spans(spans, doc.text)
    rng = doc_rng(seed, doc.id) if mode == PSEUDONYMIZE else None
    assignments: list[tuple[EntitySpan, str]] = []
    for span in spans:
        key: Key = (span.surface.casefold(), span.category)
        if mode == SANITIZE:
            factory = lambda index, c=span.category: placeholder(c, index)
        else:
            assert kg is not None and rng is not None
            factory = _kg_factory(kg, span.surface, span.category, rng)
        assignments.append((span, cmap.resolve(key, factory)))
    new_text, new_spans = apply_replacements(doc.text, assignments)
    plan = ReplacementPlan(assignments, cmap.snapshot(), mode, seed)
    return RewrittenDocument(doc.id, new_text, plan, new_spans)


def sanitize(doc: Document, spans: list[EntitySpan]) -> RewrittenDocument:
    """Replace each distinct (surface, category) with PERSON_k / LOCATION_k /
    ORGANIZATION_k, enumerated per category in first-appearance order."""
    return _rewrite(doc, spans, SANITIZE, ConsistencyMap(), kg=None, seed=0)


def pseudonymize(
    doc: Document, spans: list[EntitySpan], kg: KnowledgeGraph, seed: int = 0
) -> RewrittenDocument:
    """Replace each distinct (surface, category) with a sampled KG surrogate;
    keys the graph cannot serve fall back to their sanitize placeholder."""
    return _rewrite(doc, spans, PSEUDONYMIZE, ConsistencyMap(), kg=kg, seed=seed)


def rewrite_corpus(
    docs: Iterable[Document],
    detector,
    mode: str,
    kg: KnowledgeGraph | None = None,
    seed: int = 0,
    link_scope: str = "doc",
    workers: int = 1,
) -> tuple[list[RewrittenDocument], list[tuple[str, str]]]:
    """Detect and rewrite every document. Per-document failures are collected,
    not raised; the output keeps input order. With link_scope="corpus" one
    shared consistency map spans all documents (deterministic only with a
    single worker)."""
    if mode not in (SANITIZE, PSEUDONYMIZE):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == PSEUDONYMIZE and kg is None:
        raise ValueError("pseudonymize requires a knowledge graph")
    if link_scope not in ("doc", "corpus"):
        raise ValueError(f"unknown link scope {link_scope!r}")
    docs = list(docs)
    shared = ConsistencyMap() if link_scope == "corpus" else None

    def one(doc: Document):
        cmap = shared if shared is not None else ConsistencyMap()
        spans = detector.detect(doc)
        return _rewrite(doc, spans, mode, cmap, kg, seed)

    results: list[RewrittenDocument] = []
    failures: list[tuple[str, str]] = []

    def guarded(doc: Document):
        try:
            return one(doc), None
        except Exception as exc:
            return None, (doc.id, str(exc))

    if workers <= 1:
        outcomes = [guarded(doc) for doc in docs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(guarded, docs))
    for rewritten, failure in outcomes:
        if failure is not None:
            failures.append(failure)
        else:
            results.append(rewritten)
    if docs and not results:
        raise AllDocumentsFailedError(failures)
    return results, failures


# ---------------------------------------------------------------------------
# Parallel corpus


def generate_parallel_corpus(
    docs: Iterable[Document],
    detector,
    kg: KnowledgeGraph,
    seed: int = 0,
    workers: int = 1,
) -> tuple[list[tuple[str, str]], list[tuple[str, str]]]:
    """(original, pseudonymized) text pairs in input order, plus per-document
    failures."""
    docs = list(docs)
    rewritten, failures = rewrite_corpus(
        docs, detector, PSEUDONYMIZE, kg=kg, seed=seed, workers=workers
    )
    by_id = {r.id: r for r in rewritten}
    pairs = [(doc.text, by_id[doc.id].text) for doc in docs if doc.id in by_id]
    return pairs, failures


def _escape_tsv(value: str) -> str:
    return value.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")


def _unescape_tsv(value: str) -> str:
    out = []
    i = 0
    while i < len(value):
        ch = value[i]
        if ch == "\\" and i + 1 < len(value):
            nxt = value[i + 1]
            if nxt == "\\":
                out.append("\\")
            elif nxt == "t":
                out.append("\t")
            elif nxt == "n":
                out.append("\n")
            else:
                out.append(ch + nxt)
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def write_parallel_tsv(pairs: Iterable[tuple[str, str]]) -> str:
    return "".join(
        f"{_escape_tsv(original)}\t{_escape_tsv(rewritten)}\n" for original, rewritten in pairs
    )


def read_parallel_tsv(raw: str) -> list[tuple[str, str]]:
    pairs = []
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line:
            continue
        cells = line.split("\t")
        if len(cells) != 2:
            raise ValueError(f"line {lineno}: expected 2 tab-separated cells, got {len(cells)}")
        pairs.append((_unescape_tsv(cells[0]), _unescape_tsv(cells[1])))
    return pairs
