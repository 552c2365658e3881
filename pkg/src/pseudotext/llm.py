"""Two-stage LLM rewriting: a one-shot extraction prompt, a one-shot
replacement chat, alignment of the two entity lists, and word-boundary
splicing of the surrogates back into the text.

Stage one speaks to a completion-style model (the prompt is sent as a single
user message); stage two is a chat exchange. Both go through the same generic
chat-completions client, or through a rule-based mock for offline runs.
"""

from __future__ import annotations

import os
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol

import httpx
import yaml

from pseudotext.corpus import Document
from pseudotext.rewrite import splice
from pseudotext.textmatch import find_occurrences

NER_INSTRUCTION = (
    "Find all the locations, names and organizations in the following text."
    " Write them separated by commas:"
)
NER_EXEMPLAR_TEXT = (
    "Daniel worked in Google for five years before moving from America to France."
    " Daniel is now working with Emma in Danone and living in Paris."
)
NER_EXEMPLAR_ANSWER = "Daniel, Google, America, France, Emma, Danone, Paris."

REPLACEMENT_INSTRUCTION = (
    "Change following named entities using different named entities of the same type."
)
REPLACEMENT_EXEMPLAR_INPUT = "Africa, James Potter, Google, Poland, Lily Jameson, Danone"
REPLACEMENT_EXEMPLAR_OUTPUT = "Asia, John Lennon, Microsoft, Germany, Anna Smith, Starbucks"


class EmptyExtractionError(ValueError):
    """The model response contained no entities after cleaning."""


class AlignmentError(RuntimeError):
    """Extracted and replaced entity lists have different lengths."""

    def __init__(self, extracted: list[str], replaced: list[str]):
        super().__init__(
            f"cannot align {len(extracted)} extracted entities with "
            f"{len(replaced)} replacements: {extracted!r} vs {replaced!r}"
        )
        self.extracted = extracted
        self.replaced = replaced


class LlmTransportError(RuntimeError):
    pass


@dataclass
class ChatMessage:
    role: str  # system | user | assistant
    content: str


@dataclass
class LlmEndpoint:
    """Where a stage sends its requests. url is the full chat-completions URL."""

    url: str
    model: str
    api_key_env: str = "LLM_API_KEY"
    timeout: float = 30.0
    max_retries: int = 2
    temperature: float = 0.0

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


class ChatClient(Protocol):
    def complete(self, messages: list[ChatMessage]) -> str: ...


def _check_messages(messages: list[ChatMessage]) -> None:
    for message in messages:
        if message.role in ("user", "system") and not message.content:
            raise ValueError(f"{message.role} message content must be non-empty")


# ---------------------------------------------------------------------------
# Prompts and parsing


def build_ner_prompt(text: str) -> str:
    """One-shot extraction prompt; ends with a bare "Answer:"."""
    if not text:
        raise ValueError("text must be non-empty")
    return (
        f"{NER_INSTRUCTION}\n"
        f"Text: {NER_EXEMPLAR_TEXT}\n"
        f"Answer: {NER_EXEMPLAR_ANSWER}\n"
        f"Text: {text}\n"
        f"Answer:"
    )


def parse_entity_list(response: str) -> list[str]:
    """Split a comma-separated completion into entity surfaces.

    Items are whitespace-trimmed, one trailing period is stripped from the
    final item, and empty items are dropped. Order and duplicates survive.
    """
    items = [item.strip() for item in response.split(",")]
    if items and items[-1].endswith("."):
        items[-1] = items[-1][:-1].rstrip()
    items = [item for item in items if item]
    if not items:
        raise EmptyExtractionError(f"no entities in response {response!r}")
    return items


def build_replacement_messages(entities: list[str]) -> list[ChatMessage]:
    """System instruction, the one-shot exemplar pair, then the input list."""
    if not entities:
        raise ValueError("entities must be non-empty")
    return [
        ChatMessage("system", REPLACEMENT_INSTRUCTION),
        ChatMessage("user", REPLACEMENT_EXEMPLAR_INPUT),
        ChatMessage("assistant", REPLACEMENT_EXEMPLAR_OUTPUT),
        ChatMessage("user", ", ".join(entities)),
    ]


@dataclass
class Alignment:
    mapping: dict[str, str]
    self_replacements: list[str] = field(default_factory=list)
    suspect_non_entities: list[str] = field(default_factory=list)


def align_replacements(extracted: list[str], replaced: list[str]) -> Alignment:
    """Positional surface-to-surrogate mapping.

    Raises AlignmentError on length mismatch. Pairs whose surrogate equals the
    source (case-insensitive) are kept but flagged; sources that do not look
    like named entities (lowercase-initial) are flagged as probable non-entity
    substitutions. Duplicate sources keep their first surrogate.
    """
    if len(extracted) != len(replaced):
        raise AlignmentError(extracted, replaced)
    alignment = Alignment(mapping={})
    for source, surrogate in zip(extracted, replaced):
        if source not in alignment.mapping:
            alignment.mapping[source] = surrogate
        if source.casefold() == surrogate.casefold():
            alignment.self_replacements.append(source)
        if source and source[0].isalpha() and source[0].islower():
            alignment.suspect_non_entities.append(source)
    return alignment


# ---------------------------------------------------------------------------
# Clients


def _backoff_seconds(attempt: int) -> float:
    # exponential with jitter: 0.5, 1, 2, ... doubled at each retry
    return 0.5 * 2 ** (attempt - 1) * (1 + random.random())


class HttpChatClient:
    """Generic chat-completions client: POST {model, messages, temperature},
    read choices[0].message.content. Bearer token comes from the endpoint's
    configured environment variable, when set."""

    _RETRIED_STATUS = (429, 500, 502, 503, 504)

    def __init__(self, endpoint: LlmEndpoint, client: httpx.Client | None = None):
        self.endpoint = endpoint
        self._client = client or httpx.Client(timeout=endpoint.timeout)

    def complete(self, messages: list[ChatMessage]) -> str:
        _check_messages(messages)
        payload = {
            "model": self.endpoint.model,
            "messages": [{"role": m.role, "content": m.content} for m in messages],
            "temperature": self.endpoint.temperature,
        }
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.endpoint.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"

        last_error: Exception | None = None
        for attempt in range(self.endpoint.max_retries + 1):
            if attempt:
                time.sleep(_backoff_seconds(attempt))
            try:
                response = self._client.post(self.endpoint.url, json=payload, headers=headers)
            except httpx.HTTPError as exc:
                last_error = exc
                continue
            if response.status_code in self._RETRIED_STATUS:
                last_error = LlmTransportError(f"HTTP {response.status_code}: {response.text[:200]}")
                continue
            if response.status_code != 200:
                raise LlmTransportError(f"HTTP {response.status_code}: {response.text[:200]}")
            try:
                return response.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError, ValueError) as exc:
                raise LlmTransportError(f"malformed completion payload: {exc}") from exc
        raise LlmTransportError(
            f"request failed after {self.endpoint.max_retries + 1} attempts: {last_error}"
        )


class MockChatClient:
    """Deterministic stand-in: first rule whose match string occurs in the
    rendered request wins; otherwise the default response."""

    def __init__(self, rules: list[tuple[str, str]], default: str = ""):
        self.rules = list(rules)
        self.default = default
        self.calls: list[str] = []

    @classmethod
    def from_yaml(cls, path: str | Path) -> "MockChatClient":
        with open(path, encoding="utf-8") as handle:
            spec = yaml.safe_load(handle)
        if not isinstance(spec, dict):
            raise ValueError(f"{path}: expected a mapping with 'rules'/'default'")
        rules = [(rule["match"], rule["response"]) for rule in spec.get("rules", [])]
        return cls(rules, default=spec.get("default", ""))

    def complete(self, messages: list[ChatMessage]) -> str:
        _check_messages(messages)
        request_text = "\n".join(f"{m.role}: {m.content}" for m in messages)
        self.calls.append(request_text)
        for match, response in self.rules:
            if match in request_text:
                return response
        return self.default


# ---------------------------------------------------------------------------
# The chain


@dataclass
class LlmRewrite:
    id: str
    text: str
    mapping: dict[str, str] = field(default_factory=dict)
    replaced_spans: list[tuple[int, int]] = field(default_factory=list)
    unmatched: list[str] = field(default_factory=list)
    self_replacements: list[str] = field(default_factory=list)
    suspect_non_entities: list[str] = field(default_factory=list)

    def to_document(self) -> Document:
        return Document(self.id, self.text)


def llm_pseudonymize(
    doc: Document,
    extract_client: ChatClient,
    replace_client: ChatClient,
    align_retries: int = 2,
) -> LlmRewrite:
    """Run the extraction prompt, the replacement chat, and splice surrogates
    over every word-boundary occurrence of each extracted surface.

    An empty extraction means nothing to replace and returns the document
    unchanged; an empty or misaligned replacement list is retried up to
    align_retries times and then raised as AlignmentError. Longer surfaces are
    spliced first so nested mentions are not clobbered.
    """
    extraction = extract_client.complete([ChatMessage("user", build_ner_prompt(doc.text))])
    try:
        extracted = parse_entity_list(extraction)
    except EmptyExtractionError:
        return LlmRewrite(doc.id, doc.text)

    messages = build_replacement_messages(extracted)
    alignment: Alignment | None = None
    for attempt in range(align_retries + 1):
        reply = replace_client.complete(messages)
        try:
            replaced = parse_entity_list(reply)
        except EmptyExtractionError:
            replaced = []
        try:
            alignment = align_replacements(extracted, replaced)
            break
        except AlignmentError:
            if attempt == align_retries:
                raise
    assert alignment is not None

    # Claim occurrences longest-surface-first; shadowed or absent surfaces
    # simply produce no splice.
    claimed: list[tuple[int, int, str]] = []
    unmatched: list[str] = []
    for surface in sorted(alignment.mapping, key=lambda s: (-len(s), s)):
        surrogate = alignment.mapping[surface]
        occurrences = find_occurrences(doc.text, surface, word_boundary=True)
        if not occurrences:
            unmatched.append(surface)
            continue
        for start in occurrences:
            end = start + len(surface)
            if all(end <= s or e <= start for s, e, _ in claimed):
                claimed.append((start, end, surrogate))
    claimed.sort()
    new_text, locations = splice(doc.text, claimed)
    return LlmRewrite(
        doc.id,
        new_text,
        mapping=alignment.mapping,
        replaced_spans=locations,
        unmatched=unmatched,
        self_replacements=alignment.self_replacements,
        suspect_non_entities=alignment.suspect_non_entities,
    )


def llm_pseudonymize_batch(
    docs: Iterable[Document],
    extract_client: ChatClient,
    replace_client: ChatClient,
    align_retries: int = 2,
    max_in_flight: int = 4,
) -> tuple[list[LlmRewrite], list[tuple[str, str]]]:
    """Per-document chains with at most max_in_flight concurrent documents.
    Failures are collected per document; results keep input order."""
    docs = list(docs)

    def guarded(doc: Document):
        try:
            return llm_pseudonymize(doc, extract_client, replace_client, align_retries), None
        except Exception as exc:
            return None, (doc.id, str(exc))

    if max_in_flight <= 1:
        outcomes = [guarded(doc) for doc in docs]
    else:
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            outcomes = list(pool.map(guarded, docs))

    results: list[LlmRewrite] = []
    failures: list[tuple[str, str]] = []
    for rewrite, failure in outcomes:
        if failure is not None:
            failures.append(failure)
        else:
            results.append(rewrite)
    return results, failures
