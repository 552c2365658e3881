"""Entity detectors: gold-replaying oracle, lexicon gazetteer, and an adapter
that drives any external NER over a line-delimited JSON pipe."""

from __future__ import annotations

import json
import queue
import selectors
import shlex
import subprocess
import threading
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol

from pseudotext.corpus import Document, EntityCategory, EntitySpan
from pseudotext.textmatch import fold, is_word_bounded

_CATEGORY_ORDER = {EntityCategory.PER: 0, EntityCategory.LOC: 1, EntityCategory.ORG: 2}

PROTOCOL_VERSION = 1


class DetectorError(RuntimeError):
    pass


class Detector(Protocol):
    def detect(self, doc: Document) -> list[EntitySpan]: ...


def resolve_overlaps(spans: Iterable[EntitySpan]) -> list[EntitySpan]:
    """Drop conflicting spans: longer wins, then earlier start, then category
    order PER < LOC < ORG. Result is sorted by start and non-overlapping."""
    ranked = sorted(
        spans, key=lambda s: (-(s.end - s.start), s.start, _CATEGORY_ORDER[s.category])
    )
    kept: list[EntitySpan] = []
    for span in ranked:
        if all(span.end <= other.start or other.end <= span.start for other in kept):
            kept.append(span)
    kept.sort(key=lambda s: s.start)
    return kept


# ---------------------------------------------------------------------------
# Gazetteer


class _AhoCorasick:
    """Multi-pattern matcher over a goto/fail trie."""

    def __init__(self, patterns: Iterable[str]):
        self._goto: list[dict[str, int]] = [{}]
        self._fail = [0]
        self._out: list[list[str]] = [[]]
        for pattern in patterns:
            self._insert(pattern)
        self._link()

    def _insert(self, pattern: str) -> None:
        state = 0
        for ch in pattern:
            nxt = self._goto[state].get(ch)
            if nxt is None:
                nxt = len(self._goto)
                self._goto[state][ch] = nxt
                self._goto.append({})
                self._fail.append(0)
                self._out.append([])
            state = nxt
        self._out[state].append(pattern)

    def _link(self) -> None:
        pending = deque()
        for state in self._goto[0].values():
            pending.append(state)
        while pending:
            state = pending.popleft()
            for ch, nxt in self._goto[state].items():
                pending.append(nxt)
                fallback = self._fail[state]
                while fallback and ch not in self._goto[fallback]:
                    fallback = self._fail[fallback]
                self._fail[nxt] = self._goto[fallback].get(ch, 0)
                self._out[nxt] = self._out[nxt] + self._out[self._fail[nxt]]

    def find_all(self, text: str) -> list[tuple[int, int, str]]:
        """(start, end, pattern) for every occurrence of every pattern."""
        hits = []
        state = 0
        for i, ch in enumerate(text):
            while state and ch not in self._goto[state]:
                state = self._fail[state]
            state = self._goto[state].get(ch, 0)
            for pattern in self._out[state]:
                hits.append((i + 1 - len(pattern), i + 1, pattern))
        return hits


@dataclass
class Gazetteer:
    """Surface-to-category lexicon with match policy flags."""

    entries: dict[str, EntityCategory]
    case_sensitive: bool = True
    word_boundary: bool = True
    _automaton: _AhoCorasick = field(init=False, repr=False, compare=False)
    _categories: dict[str, EntityCategory] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if any(not surface for surface in self.entries):
            raise ValueError("gazetteer entries must be non-empty strings")
        self._categories = {}
        for surface, category in self.entries.items():
            key = surface if self.case_sensitive else fold(surface)
            previous = self._categories.get(key)
            if previous is not None and previous != category:
                raise ValueError(
                    f"gazetteer entry {surface!r} folds onto an entry of another category"
                )
            self._categories[key] = EntityCategory(category)
        self._automaton = _AhoCorasick(self._categories)

    @classmethod
    def from_file(cls, path: str | Path) -> "Gazetteer":
        """Load a JSON lexicon: {"case_sensitive"?, "word_boundary"?, "entries": {surface: category}}."""
        with open(path, encoding="utf-8") as handle:
            obj = json.load(handle)
        if not isinstance(obj, dict) or "entries" not in obj:
            raise ValueError(f"{path}: expected a JSON object with an 'entries' map")
        entries = {
            surface: EntityCategory(category) for surface, category in obj["entries"].items()
        }
        return cls(
            entries=entries,
            case_sensitive=bool(obj.get("case_sensitive", True)),
            word_boundary=bool(obj.get("word_boundary", True)),
        )


def gazetteer_match(text: str, gazetteer: Gazetteer) -> list[EntitySpan]:
    """All maximal lexicon occurrences honoring the case/boundary flags.
    Longer entries shadow shorter overlapping ones."""
    haystack = text if gazetteer.case_sensitive else fold(text)
    raw = []
    for start, end, pattern in gazetteer._automaton.find_all(haystack):
        if gazetteer.word_boundary and not is_word_bounded(text, start, end):
            continue
        raw.append(EntitySpan(start, end, gazetteer._categories[pattern], text[start:end]))
    return resolve_overlaps(raw)


# ---------------------------------------------------------------------------
# Detectors


class OracleDetector:
    """Replays gold annotations, isolating replacement quality from detection."""

    def detect(self, doc: Document) -> list[EntitySpan]:
        if doc.gold_spans is None:
            raise DetectorError(f"doc {doc.id}: oracle detector requires gold spans")
        return list(doc.gold_spans)


class GazetteerDetector:
    def __init__(self, gazetteer: Gazetteer):
        self.gazetteer = gazetteer

    def detect(self, doc: Document) -> list[EntitySpan]:
        if not doc.text:
            raise DetectorError(f"doc {doc.id}: empty text")
        return gazetteer_match(doc.text, self.gazetteer)


class _Worker:
    """One child process speaking the line-delimited JSON protocol."""

    def __init__(self, command: list[str], timeout: float):
        self.timeout = timeout
        try:
            self.proc = subprocess.Popen(
                command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise DetectorError(f"cannot launch external detector {command!r}: {exc}") from exc
        handshake = self._read_message()
        if handshake.get("proto") != PROTOCOL_VERSION:
            self._fail(f"bad handshake {handshake!r}")

    def _diagnostics(self) -> str:
        stderr = ""
        if self.proc.stderr is not None:
            try:
                self.proc.kill()
                stderr = self.proc.stderr.read() or ""
            except Exception:
                pass
        tail = stderr.strip().splitlines()[-5:]
        code = self.proc.poll()
        return f"exit={code} stderr={' | '.join(tail)!r}"

    def _fail(self, reason: str):
        raise DetectorError(f"external detector: {reason} ({self._diagnostics()})")

    def _read_message(self) -> dict:
        assert self.proc.stdout is not None
        sel = selectors.DefaultSelector()
        sel.register(self.proc.stdout, selectors.EVENT_READ)
        if not sel.select(self.timeout):
            self._fail(f"no response within {self.timeout}s")
        line = self.proc.stdout.readline()
        if not line:
            self._fail("closed stdout")
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            self._fail(f"invalid JSON line {line!r}")
        if not isinstance(obj, dict):
            self._fail(f"expected JSON object, got {line!r}")
        return obj

    def request(self, doc: Document) -> list[EntitySpan]:
        assert self.proc.stdin is not None
        try:
            self.proc.stdin.write(json.dumps({"id": doc.id, "text": doc.text}) + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError):
            self._fail("closed stdin pipe")
        reply = self._read_message()
        if reply.get("id") != doc.id:
            self._fail(f"reply id {reply.get('id')!r} does not match request {doc.id!r}")
        spans = []
        for i, ent in enumerate(reply.get("entities", [])):
            try:
                span = EntitySpan(
                    int(ent["start"]),
                    int(ent["end"]),
                    EntityCategory(ent["category"]),
                    doc.text[int(ent["start"]) : int(ent["end"])],
                )
                span.validate(doc.text)
            except (KeyError, TypeError, ValueError) as exc:
                self._fail(f"bad entity #{i} in reply for {doc.id!r}: {exc}")
            spans.append(span)
        return spans

    def close(self) -> None:
        try:
            if self.proc.stdin is not None:
                self.proc.stdin.close()
            self.proc.wait(timeout=5)
        except Exception:
            self.proc.kill()


class ExternalDetector:
    """Wraps an external NER command behind the pipe protocol.

    The child prints a ``{"proto": 1}`` handshake, then answers each
    ``{"id", "text"}`` request line with ``{"id", "entities": [...]}`` and
    exits 0 on stdin EOF. A pool of processes serves batch calls, one
    in-flight document per process.
    """

    def __init__(self, command: str | list[str], workers: int = 1, timeout: float = 30.0):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout
        self._idle: queue.Queue[_Worker] = queue.Queue()
        self._lock = threading.Lock()
        self._spawned = 0
        self._max_workers = max(1, workers)

    def _borrow(self) -> _Worker:
        try:
            return self._idle.get_nowait()
        except queue.Empty:
            pass
        spawn = False
        with self._lock:
            if self._spawned < self._max_workers:
                self._spawned += 1
                spawn = True
        if spawn:
            try:
                return _Worker(self.command, self.timeout)
            except Exception:
                with self._lock:
                    self._spawned -= 1
                raise
        return self._idle.get()

    def detect(self, doc: Document) -> list[EntitySpan]:
        if not doc.text:
            raise DetectorError(f"doc {doc.id}: empty text")
        worker = self._borrow()
        try:
            spans = worker.request(doc)
        except DetectorError:
            worker.close()
            with self._lock:
                self._spawned -= 1
            raise
        self._idle.put(worker)
        return resolve_overlaps(spans)

    def close(self) -> None:
        with self._lock:
            while not self._idle.empty():
                self._idle.get_nowait().close()
            self._spawned = 0

    def __enter__(self) -> "ExternalDetector":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def make_detector(spec: str, workers: int = 1) -> Detector:
    """Build a detector from a CLI spec: ``oracle``, ``gazetteer:<lexicon>``,
    or ``external:<command>``."""
    if spec == "oracle":
        return OracleDetector()
    if spec.startswith("gazetteer:"):
        return GazetteerDetector(Gazetteer.from_file(spec.split(":", 1)[1]))
    if spec.startswith("external:"):
        return ExternalDetector(spec.split(":", 1)[1], workers=workers)
    raise ValueError(f"unknown detector spec {spec!r}")
