#!/usr/bin/env python3
"""Regenerate the bundled fixtures: the knowledge graph, the gazetteer
lexicon derived from it, and the newsroom example document."""

import json
from pathlib import Path

from pseudotext.corpus import Document, EntityCategory, EntitySpan, write_jsonl
from pseudotext.synthdata import build_fixture_kg, gazetteer_entries
from pseudotext.kg import dump_kg

DATA = Path(__file__).resolve().parents[1] / "data"

TABLE1_TEXT = "Sarah works at The Times in London with Rachel and David."
TABLE1_SPANS = [
    (0, 5, "PER", "Sarah"),
    (15, 24, "ORG", "The Times"),
    (28, 34, "LOC", "London"),
    (40, 46, "PER", "Rachel"),
    (51, 56, "PER", "David"),
]


def main() -> None:
    DATA.mkdir(exist_ok=True)
    graph = build_fixture_kg()

    (DATA / "kg_fixture.jsonl").write_text(dump_kg(graph), encoding="utf-8")
    print(f"kg_fixture.jsonl: {len(graph.nodes)} nodes, {len(graph.edges)} edges")

    lexicon = {"case_sensitive": True, "word_boundary": True, "entries": gazetteer_entries(graph)}
    (DATA / "gazetteer_fixture.json").write_text(
        json.dumps(lexicon, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    print(f"gazetteer_fixture.json: {len(lexicon['entries'])} entries")

    doc = Document(
        "table1",
        TABLE1_TEXT,
        gold_spans=[
            EntitySpan(start, end, EntityCategory(cat), surface)
            for start, end, cat, surface in TABLE1_SPANS
        ],
    )
    doc.validate()
    (DATA / "table1.jsonl").write_text(write_jsonl([doc]), encoding="utf-8")
    print("table1.jsonl: 1 document")


if __name__ == "__main__":
    main()
