"""Word-boundary substring matching shared by the detector, the LLM splicer,
and the leakage evaluator."""

from __future__ import annotations


def is_word_char(ch: str) -> bool:
    return ch.isalnum() or ch == "_"


def fold(text: str) -> str:
    """Length-preserving lowercase fold so offsets survive case-insensitive
    matching (characters with multi-char lowercase forms are left as-is)."""
    out = []
    for ch in text:
        low = ch.lower()
        out.append(low if len(low) == 1 else ch)
    return "".join(out)


def is_word_bounded(text: str, start: int, end: int) -> bool:
    before_ok = start == 0 or not is_word_char(text[start - 1])
    after_ok = end == len(text) or not is_word_char(text[end])
    return before_ok and after_ok


def find_occurrences(text: str, surface: str, word_boundary: bool = True) -> list[int]:
    """Start offsets of every (optionally word-bounded) occurrence of surface."""
    if not surface:
        return []
    hits = []
    pos = text.find(surface)
    while pos != -1:
        if not word_boundary or is_word_bounded(text, pos, pos + len(surface)):
            hits.append(pos)
        pos = text.find(surface, pos + 1)
    return hits


def contains_word_bounded(text: str, surface: str, fold_case: bool = False) -> bool:
    if fold_case:
        text, surface = fold(text), fold(surface)
    return bool(find_occurrences(text, surface, word_boundary=True))
