"""Per-word vector channels: file I/O and a deterministic toy generator.

Text file format, one block per (channel, id):

    <channel> <doc_or_question_id> <count> <dim>
    <pos> <f1> ... <fdim>          (count lines, one per token position)

Document channels are base / sa_key / sa_query and use integer ids; question
channels are base / score0..score3 and use the question id. A `base` block is
treated as a document when its id parses as a nonnegative integer, otherwise
as a question. score* blocks carry one float per position (dim 1).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, TextIO

import numpy as np

from ..errors import SchemaError

if TYPE_CHECKING:
    from ..corpus import Corpus

DOC_CHANNELS = ("base", "sa_key", "sa_query")
SCORE_CHANNELS = tuple(f"score{k}" for k in range(4))


@dataclass
class DocChannels:
    doc_id: int
    base: np.ndarray  # (m, dim) float32
    sa_key: np.ndarray | None = None
    sa_query: np.ndarray | None = None


@dataclass
class QuestionChannels:
    question_id: str
    base: np.ndarray  # (n, dim) float32
    scores: dict[int, np.ndarray] = field(default_factory=dict)  # k -> (n,)


@dataclass
class WordVectorTable:
    dim: int
    documents: dict[int, DocChannels] = field(default_factory=dict)
    questions: dict[str, QuestionChannels] = field(default_factory=dict)

    def doc(self, doc_id: int) -> DocChannels:
        if doc_id not in self.documents:
            raise SchemaError(f"word-vector table has no document {doc_id}")
        return self.documents[doc_id]

    def question(self, question_id: str) -> QuestionChannels:
        if question_id not in self.questions:
            raise SchemaError(f"word-vector table has no question {question_id!r}")
        return self.questions[question_id]


def _is_doc_id(raw: str) -> bool:
    return raw.isdigit()


def read_word_vectors(path: str) -> WordVectorTable:
    """Parse a word-vector file, validating coverage and dimension agreement."""
    table = WordVectorTable(dim=0)
    with open(path, encoding="utf-8") as f:
        lineno = 0
        while True:
            header = f.readline()
            lineno += 1
            if not header:
                break
            if not header.strip():
                continue
            parts = header.split()
            if len(parts) != 4:
                raise SchemaError(f"{path}:{lineno}: bad header {header.strip()!r}")
            channel, ident, count_s, dim_s = parts
            try:
                count, dim = int(count_s), int(dim_s)
            except ValueError:
                raise SchemaError(f"{path}:{lineno}: non-integer count/dim in header")
            rows = np.zeros((count, dim), dtype=np.float32)
            seen = np.zeros(count, dtype=bool)
            for _ in range(count):
                line = f.readline()
                lineno += 1
                if not line:
                    raise SchemaError(f"{path}:{lineno}: truncated block for {channel} {ident}")
                fields = line.split()
                if len(fields) != dim + 1:
                    raise SchemaError(
                        f"{path}:{lineno}: expected {dim + 1} fields, got {len(fields)}"
                    )
                pos = int(fields[0])
                if not 0 <= pos < count or seen[pos]:
                    raise SchemaError(f"{path}:{lineno}: bad or repeated position {pos}")
                seen[pos] = True
                rows[pos] = [float(x) for x in fields[1:]]
            _insert_block(table, channel, ident, rows, f"{path}:{lineno}")
    _validate(table, path)
    return table


def _insert_block(table, channel, ident, rows, where):
    if channel in ("sa_key", "sa_query") or (channel == "base" and _is_doc_id(ident)):
        doc_id = int(ident)
        chan = table.documents.setdefault(doc_id, DocChannels(doc_id, base=None))
        if getattr(chan, channel) is not None:
            raise SchemaError(f"{where}: duplicate channel {channel} for document {doc_id}")
        setattr(chan, channel, rows)
    elif channel == "base":
        q = table.questions.setdefault(ident, QuestionChannels(ident, base=None))
        if q.base is not None:
            raise SchemaError(f"{where}: duplicate base channel for question {ident!r}")
        q.base = rows
    elif channel in SCORE_CHANNELS:
        if rows.shape[1] != 1:
            raise SchemaError(f"{where}: score channel must have dim 1")
        k = int(channel[len("score"):])
        q = table.questions.setdefault(ident, QuestionChannels(ident, base=None))
        if k in q.scores:
            raise SchemaError(f"{where}: duplicate {channel} for question {ident!r}")
        q.scores[k] = rows[:, 0]
    else:
        raise SchemaError(f"{where}: unknown channel {channel!r}")


def _validate(table: WordVectorTable, path: str):
    dims = set()
    for doc_id, chan in table.documents.items():
        if chan.base is None:
            raise SchemaError(f"{path}: document {doc_id} has sa channels but no base")
        dims.add(chan.base.shape[1])
        for name in ("sa_key", "sa_query"):
            extra = getattr(chan, name)
            if extra is not None:
                if extra.shape[1] != chan.base.shape[1]:
                    raise SchemaError(
                        f"{path}: document {doc_id} channel {name} dim "
                        f"{extra.shape[1]} != base dim {chan.base.shape[1]}"
                    )
                if len(extra) != len(chan.base):
                    raise SchemaError(
                        f"{path}: document {doc_id} channel {name} covers "
                        f"{len(extra)} positions, base covers {len(chan.base)}"
                    )
    for qid, q in table.questions.items():
        if q.base is None:
            raise SchemaError(f"{path}: question {qid!r} has scores but no base")
        dims.add(q.base.shape[1])
        for k, s in q.scores.items():
            if len(s) != len(q.base):
                raise SchemaError(
                    f"{path}: question {qid!r} score{k} covers {len(s)} positions, "
                    f"base covers {len(q.base)}"
                )
    if len(dims) > 1:
        raise SchemaError(f"{path}: inconsistent vector dims {sorted(dims)}")
    table.dim = dims.pop() if dims else 0


def _write_block(f: TextIO, channel: str, ident, rows: np.ndarray):
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float32))
    f.write(f"{channel} {ident} {rows.shape[0]} {rows.shape[1]}\n")
    for pos in range(rows.shape[0]):
        values = " ".join(f"{float(v):.9g}" for v in rows[pos])
        f.write(f"{pos} {values}\n")


def write_word_vectors(table: WordVectorTable, path: str):
    """Write a table back out; floats keep 9 significant digits (float32 exact)."""
    with open(path, "w", encoding="utf-8") as f:
        for doc_id in sorted(table.documents):
            chan = table.documents[doc_id]
            _write_block(f, "base", doc_id, chan.base)
            if chan.sa_key is not None:
                _write_block(f, "sa_key", doc_id, chan.sa_key)
            if chan.sa_query is not None:
                _write_block(f, "sa_query", doc_id, chan.sa_query)
        for qid in sorted(table.questions):
            q = table.questions[qid]
            _write_block(f, "base", qid, q.base)
            for k in sorted(q.scores):
                _write_block(f, f"score{k}", qid, q.scores[k].reshape(-1, 1))


def _toy_rng(seed: int, kind: str, ident) -> np.random.Generator:
    digest = hashlib.sha256(f"{seed}/{kind}/{ident}".encode()).digest()
    key = int.from_bytes(digest[:16], "little")
    return np.random.Generator(np.random.Philox(key=key))


def toy_word_vector_table(
    corpus: "Corpus",
    dim: int = 16,
    seed: int = 0,
    with_sa: bool = True,
    score_channels: int = 4,
) -> WordVectorTable:
    """Deterministic hash-seeded word vectors for tests and smoke runs.

    Every (seed, channel, id) pair maps to an independent counter-based
    stream, so tables are reproducible across platforms and insertion order.
    """
    table = WordVectorTable(dim=dim)
    for doc in corpus.documents:
        m = len(doc)
        base = _toy_rng(seed, "doc_base", doc.doc_id).normal(size=(m, dim))
        chan = DocChannels(doc.doc_id, base=base.astype(np.float32))
        if with_sa:
            chan.sa_key = (
                _toy_rng(seed, "sa_key", doc.doc_id).normal(size=(m, dim)).astype(np.float32)
            )
            chan.sa_query = (
                _toy_rng(seed, "sa_query", doc.doc_id).normal(size=(m, dim)).astype(np.float32)
            )
        table.documents[doc.doc_id] = chan
    for ex in corpus.examples:
        n = max(1, len(ex.question_tokens))
        q = QuestionChannels(
            ex.question_id,
            base=_toy_rng(seed, "q_base", ex.question_id).normal(size=(n, dim)).astype(np.float32),
        )
        for k in range(score_channels):
            q.scores[k] = (
                _toy_rng(seed, f"score{k}", ex.question_id).normal(size=n).astype(np.float32)
            )
        table.questions[ex.question_id] = q
    return table
