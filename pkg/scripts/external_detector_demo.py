#!/usr/bin/env python3
"""Reference external detector: wraps a gazetteer lexicon behind the
line-delimited JSON pipe protocol, showing the glue any NER needs.

Usage: external_detector_demo.py <lexicon.json>

Protocol: print {"proto": 1} once, then answer each {"id", "text"} request
line with {"id", "entities": [{"start", "end", "category"}]}; exit 0 on EOF.
"""

import json
import sys

from pseudotext.corpus import Document
from pseudotext.detect import Gazetteer, GazetteerDetector


def main() -> int:
    detector = GazetteerDetector(Gazetteer.from_file(sys.argv[1]))
    print(json.dumps({"proto": 1}), flush=True)
    for line in sys.stdin:
        if not line.strip():
            continue
        request = json.loads(line)
        spans = detector.detect(Document(request["id"], request["text"]))
        reply = {
            "id": request["id"],
            "entities": [
                {"start": s.start, "end": s.end, "category": s.category.value} for s in spans
            ],
        }
        print(json.dumps(reply, ensure_ascii=False), flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
