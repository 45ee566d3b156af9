#!/usr/bin/env python3
"""Regenerate fixtures/mock_fixture.json from the committed corpus.

The mock answers are keyed by question (any image) and the extraction
fixtures by the committed original-image digests, so original charts
extract their exact gold tables while generated charts fall back to the
canned wildcard table. VQA answers intentionally mix correct, tolerance-
boundary, and wrong cases so fixture runs exercise the whole scoring
matrix.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "fixtures" / "corpus"

# question -> mock answer: 9 of 12 judged correct (see tests for the math)
VQA_ANSWERS = {
    "What is the title of this graph?": "State Populations",
    "What is the population of Texas?": "30",
    "What was the score in 2019?": "55.8",
    "In which year was the score 52.4?": "Null",
    "Which browser has the largest share?": "Safari",
    "What percentage of the market does Safari hold?": "19%",
    "How many groups of bars are there?": "2",
    "What was the rainfall in Oslo in 2018?": "763",
    "What is the difference in rainfall in Cairo between 2018 and 2019?": "10",
    "Did the number of users increase from 2000 to 2010?": "Yes",
    "In which year was the number of users highest?": "2010",
    "What is the sum of users per 100 people in 2000 and 2005?": "22.6",
}

WILDCARD_TABLE = "Category | Count <0x0A> A | 1 <0x0A> B | 2"


def linearize(csv_path: Path, newline_token: str) -> str:
    lines = csv_path.read_text(encoding="utf-8").strip().splitlines()
    rows = [" | ".join(line.split(",")) for line in lines]
    return newline_token.join(rows)


def main() -> None:
    manifest = json.loads((CORPUS / "manifest.json").read_text(encoding="utf-8"))
    extraction = {"*": WILDCARD_TABLE}
    for i, sample in enumerate(manifest["samples"]):
        image = CORPUS / sample["image"]
        digest = hashlib.sha256(image.read_bytes()).hexdigest()
        # alternate separators to cover both accepted row-break spellings
        token = "<0x0A>" if i % 2 == 0 else "\n"
        extraction[digest] = linearize(CORPUS / sample["csv"], token)
    fixture = {
        "chat": {},
        "vqa": {f"*|{q}": a for q, a in VQA_ANSWERS.items()},
        "vqa_default": "unknown",
        "extraction": extraction,
    }
    out = ROOT / "fixtures" / "mock_fixture.json"
    out.write_text(json.dumps(fixture, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
