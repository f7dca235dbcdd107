"""Dense phrase/question composition from precomputed per-word vectors.

The engine never trains encoders: per-word vectors and attention scores
arrive through a word-vector table (see wordvectors.py), and these functions
assemble them into phrase vectors (endpoint concatenation, optionally
augmented with self-attention pooling) and question vectors (attention-pooled
blocks). All softmaxes subtract the max score before exponentiation.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from ..errors import ConfigError

if TYPE_CHECKING:
    from .wordvectors import DocChannels, QuestionChannels

LSTM = "lstm"
LSTM_SA = "lstm_sa"

# Score channels a question must carry for each composition mode.
QUESTION_POOLS = {LSTM: 2, LSTM_SA: 4}


def softmax(scores: np.ndarray) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    z = np.exp(scores - scores.max())
    return z / z.sum()


def softmax_pool(vectors, scores) -> np.ndarray:
    """Weighted sum of vectors under softmax(scores)."""
    vectors = np.asarray(vectors, dtype=np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    if vectors.ndim != 2 or scores.ndim != 1 or len(vectors) != len(scores):
        raise ValueError(
            f"need matching non-empty lists, got {len(vectors)} vectors "
            f"and {scores.size} scores"
        )
    if len(vectors) == 0:
        raise ValueError("softmax_pool needs at least one vector")
    return softmax(scores) @ vectors


def sa_word_vector(channels: "DocChannels", position: int) -> np.ndarray:
    """Self-attended word vector: base words pooled by query[j]-key[i] scores."""
    if channels.sa_key is None or channels.sa_query is None:
        raise ConfigError(
            f"document {channels.doc_id} is missing sa_key/sa_query channels"
        )
    scores = channels.sa_key.astype(np.float64) @ channels.sa_query[position].astype(np.float64)
    return softmax_pool(channels.base, scores)


def sa_all(channels: "DocChannels") -> np.ndarray:
    """Self-attended vectors for every position at once (row j = sa_word_vector(j))."""
    if channels.sa_key is None or channels.sa_query is None:
        raise ConfigError(
            f"document {channels.doc_id} is missing sa_key/sa_query channels"
        )
    scores = channels.sa_query.astype(np.float64) @ channels.sa_key.astype(np.float64).T
    z = np.exp(scores - scores.max(axis=1, keepdims=True))
    weights = z / z.sum(axis=1, keepdims=True)
    return weights @ channels.base.astype(np.float64)


def compose_phrase_lstm(channels: "DocChannels", span) -> np.ndarray:
    """Endpoint concatenation [word[s], word[e]]; dim = 2 x word dim."""
    m = len(channels.base)
    if not (0 <= span.s <= span.e < m):
        raise ValueError(f"span {span} out of range for {m} positions")
    base = channels.base.astype(np.float64)
    return np.concatenate([base[span.s], base[span.e]])


def compose_phrase_lstm_sa(
    channels: "DocChannels", span, sa_matrix: np.ndarray | None = None
) -> np.ndarray:
    """[word[s], sa[s], word[e], sa[e]]; dim = 4 x word dim.

    sa_matrix, when given, must be sa_all(channels); passing it avoids
    recomputing attention for every span of the same document.
    """
    m = len(channels.base)
    if not (0 <= span.s <= span.e < m):
        raise ValueError(f"span {span} out of range for {m} positions")
    if sa_matrix is None:
        sa_matrix = sa_all(channels)
    base = channels.base.astype(np.float64)
    return np.concatenate(
        [base[span.s], sa_matrix[span.s], base[span.e], sa_matrix[span.e]]
    )


def compose_question(channels: "QuestionChannels", mode: str) -> np.ndarray:
    """Concatenate one softmax pool of the question words per score channel."""
    if mode not in QUESTION_POOLS:
        raise ConfigError(f"unknown composition mode {mode!r}")
    pools = QUESTION_POOLS[mode]
    missing = [k for k in range(pools) if k not in channels.scores]
    if missing:
        raise ConfigError(
            f"question {channels.question_id!r} is missing score channels {missing} "
            f"required by mode {mode!r}"
        )
    return np.concatenate(
        [softmax_pool(channels.base, channels.scores[k]) for k in range(pools)]
    )


def candidate_nll(
    question_vec: np.ndarray,
    candidate_vecs: np.ndarray,
    gold_index: int,
) -> tuple[float, np.ndarray]:
    """Negative log probability of the gold candidate, plus d(loss)/d(question).

    Candidate scores are inner products; the probability is their softmax.
    gradient = sum_i (p_i - 1[i == gold]) * candidate_i.
    """
    q = np.asarray(question_vec, dtype=np.float64)
    cands = np.asarray(candidate_vecs, dtype=np.float64)
    if cands.ndim != 2 or len(cands) == 0:
        raise ValueError("need a non-empty 2-D array of candidate vectors")
    if not 0 <= gold_index < len(cands):
        raise ValueError(f"gold_index {gold_index} out of range for {len(cands)} candidates")
    logits = cands @ q
    shifted = logits - logits.max()
    logsumexp = np.log(np.exp(shifted).sum())
    loss = float(logsumexp - shifted[gold_index])
    p = np.exp(shifted - logsumexp)
    p[gold_index] -= 1.0
    gradient = p @ cands
    return loss, gradient
