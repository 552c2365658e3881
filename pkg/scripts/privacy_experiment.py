#!/usr/bin/env python3
"""Privacy-preservation experiment at desk scale: rewrite a corpus with each
system and report per-category leakage (false-negative) rates as one table.

By default runs on a synthetic corpus drawn from the bundled graph; pass a
CoNLL-2003 file to measure on real annotations instead.
"""

import argparse
import json
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]

from pseudotext.corpus import parse_conll
from pseudotext.detect import Gazetteer, GazetteerDetector, OracleDetector
from pseudotext.evaluation import leakage_report
from pseudotext.kg import load_kg
from pseudotext.rewrite import rewrite_corpus
from pseudotext.synthdata import entity_corpus, gazetteer_entries


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--conll", help="CoNLL-2003 file to evaluate on (optional)")
    parser.add_argument("--kg", default=str(REPO / "data" / "kg_fixture.jsonl"))
    parser.add_argument("--n-docs", type=int, default=500, help="synthetic corpus size")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", help="write the table as JSON here")
    args = parser.parse_args()

    kg = load_kg(args.kg)
    if args.conll:
        docs = parse_conll(Path(args.conll).read_text(encoding="utf-8"))
        print(f"loaded {len(docs)} documents from {args.conll}", file=sys.stderr)
    else:
        docs = entity_corpus(kg, args.n_docs, seed=args.seed)
        print(f"generated {len(docs)} synthetic documents", file=sys.stderr)

    gazetteer = GazetteerDetector(Gazetteer(gazetteer_entries(kg)))
    systems = {
        "sanitize(oracle)": (OracleDetector(), "sanitize"),
        "pseudonymize(oracle)": (OracleDetector(), "pseudonymize"),
        "pseudonymize(gazetteer)": (gazetteer, "pseudonymize"),
    }

    table = {}
    for name, (detector, mode) in systems.items():
        rewritten, failures = rewrite_corpus(
            docs, detector, mode, kg=kg if mode == "pseudonymize" else None, seed=args.seed
        )
        by_id = {r.id: r.to_document() for r in rewritten}
        evaluated = [doc for doc in docs if doc.id in by_id]
        report = leakage_report(evaluated, [by_id[d.id] for d in evaluated])
        table[name] = report.to_json_dict()
        if failures:
            print(f"{name}: {len(failures)} documents failed", file=sys.stderr)

    header = f"{'system':<26} {'PER':>7} {'ORG':>7} {'LOC':>7} {'micro':>7} {'macro':>7}"
    print(header)
    print("-" * len(header))
    for name, row in table.items():
        print(
            f"{name:<26} {row['PER']['rate']:>7.2f} {row['ORG']['rate']:>7.2f}"
            f" {row['LOC']['rate']:>7.2f} {row['micro_mean']:>7.2f} {row['macro_mean']:>7.2f}"
        )
    if args.out:
        Path(args.out).write_text(json.dumps(table, indent=2) + "\n", encoding="utf-8")
    return 0


if __name__ == "__main__":
    sys.exit(main())
