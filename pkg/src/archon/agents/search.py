"""Statement retrieval over a corpus of ``{"id", "statement"}`` JSON lines.

The default embedding is a term-frequency vector over lowercased word
tokens; cosine similarity ranks results. Any callable returning a sparse
``{term: weight}`` mapping can replace it.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

_WORD = re.compile(r"\w+")

Embedding = Callable[[str], dict]


def term_frequency(text: str) -> Counter:
    return Counter(_WORD.findall(text.lower()))


def cosine(a: dict, b: dict) -> float:
    if len(a) > len(b):
        a, b = b, a
    dot = sum(v * b.get(k, 0) for k, v in a.items())
    na = sum(v * v for v in a.values())
    nb = sum(v * v for v in b.values())
    if not na or not nb:
        return 0.0
    # one sqrt over the product keeps self-similarity exactly 1.0 for integer weights
    return dot / math.sqrt(na * nb)


@dataclass
class StatementIndex:
    records: list[tuple[str, str]]
    embed: Embedding = term_frequency
    vectors: list[dict] = field(init=False, repr=False)

    def __post_init__(self):
        self.records = sorted(self.records)
        self.vectors = [self.embed(s) for _, s in self.records]

    @classmethod
    def from_jsonl(cls, path, embed: Embedding = term_frequency) -> "StatementIndex":
        records = []
        p = Path(path)
        if p.exists():
            for line in p.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    r = json.loads(line)
                    records.append((str(r["id"]), str(r["statement"])))
        return cls(records, embed)

    def __len__(self) -> int:
        return len(self.records)


def search_library(query: str, k: int, index: StatementIndex) -> list[tuple[str, str, float]]:
    """Top ``min(k, len(index))`` records by cosine score, ties broken by id."""
    q = index.embed(query)
    if not q or not index.records or k <= 0:
        return []
    scored = [(cosine(q, v), _rank_key(q, v), ident, stmt)
              for (ident, stmt), v in zip(index.records, index.vectors)]
    scored.sort(key=lambda s: (-s[1], s[2]))
    return [(ident, stmt, score) for score, _, ident, stmt in scored[:k]]


def _rank_key(a: dict, b: dict):
    """Exact signed squared cosine for integer weights, so equal scores tie exactly."""
    if not all(isinstance(w, int) for w in (*a.values(), *b.values())):
        return round(cosine(a, b), 12)
    dot = sum(v * b.get(k, 0) for k, v in a.items())
    na = sum(v * v for v in a.values())
    nb = sum(v * v for v in b.values())
    if not na or not nb:
        return Fraction(0)
    return Fraction(dot * abs(dot), na * nb)
