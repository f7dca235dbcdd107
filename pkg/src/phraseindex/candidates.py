"""Candidate answer spans: every contiguous token range up to a length cap.

Spans are token-index pairs (s, e), both inclusive, ordered lexicographically.
That ordering is the canonical candidate order everywhere downstream (index
rows, tie-breaking, filter labels).
"""

from __future__ import annotations

from typing import NamedTuple


class CandidateSpan(NamedTuple):
    """An answer candidate: token range [s, e] (inclusive) of one document."""

    doc_id: int
    s: int
    e: int


def enumerate_spans(doc_len: int, max_span_len: int) -> list[tuple[int, int]]:
    """All (s, e) with 1 <= e-s+1 <= max_span_len, lexicographic by (s, e)."""
    if doc_len < 0:
        raise ValueError(f"doc_len must be >= 0, got {doc_len}")
    if max_span_len < 1:
        raise ValueError(f"max_span_len must be >= 1, got {max_span_len}")
    return [
        (s, e)
        for s in range(doc_len)
        for e in range(s, min(s + max_span_len, doc_len))
    ]


def span_count(doc_len: int, max_span_len: int) -> int:
    """Closed-form count of enumerate_spans: m*L - L(L-1)/2 for m >= L, else m(m+1)/2."""
    m, L = doc_len, max_span_len
    if m < 0:
        raise ValueError(f"doc_len must be >= 0, got {m}")
    if L < 1:
        raise ValueError(f"max_span_len must be >= 1, got {L}")
    if m >= L:
        return m * L - L * (L - 1) // 2
    return m * (m + 1) // 2


def candidates_per_word(doc_len: int, max_span_len: int) -> float:
    """Unfiltered candidate-to-word ratio; approaches max_span_len for long docs."""
    if doc_len < 1:
        raise ValueError(f"doc_len must be >= 1, got {doc_len}")
    return span_count(doc_len, max_span_len) / doc_len
