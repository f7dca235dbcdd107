"""Approximate maximum-inner-product search via asymmetric LSH.

Sign-ALSH construction: data vectors are shrunk into the unit ball and
augmented with norm-correction terms, queries are normalized and padded
with zeros, and both sides are hashed by sign bits of shared random
hyperplanes. Bucket collisions propose candidates; the proposals are then
re-scored exactly against the original vectors, so approximation can only
lose recall, never corrupt scores.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, FormatError
from .index import PhraseIndex, SearchHit, _Reader, _top_k

MAGIC = b"PQAH"
VERSION = 1


@dataclass(frozen=True)
class AlshParams:
    m: int = 2  # norm-correction terms appended to data vectors
    U: float = 0.75  # shrink factor; data norms end up <= U < 1
    bits_per_table: int = 12
    tables: int = 32
    seed: int = 0

    def validate(self) -> None:
        if self.m < 0:
            raise ConfigError(f"m must be >= 0, got {self.m}")
        if not 0.0 < self.U <= 1.0:
            raise ConfigError(f"U must be in (0, 1], got {self.U}")
        if not 0 <= self.bits_per_table <= 64:
            raise ConfigError(
                f"bits_per_table must be in [0, 64] (codes are one machine word), "
                f"got {self.bits_per_table}"
            )
        if self.tables < 1:
            raise ConfigError(f"tables must be >= 1, got {self.tables}")


@dataclass
class AlshIndex:
    params: AlshParams
    max_norm: float
    hyperplanes: np.ndarray  # (T, b, dim + m) float64, unit rows
    buckets: list[dict[int, np.ndarray]]  # per table: code -> ascending ordinals
    backing: PhraseIndex


def _norm_terms(sq_norms: np.ndarray, m: int) -> np.ndarray:
    """Columns 1/2 - ||x'||^(2^i) for i = 1..m, from squared norms."""
    cols = np.empty(sq_norms.shape + (m,), dtype=np.float64)
    power = np.asarray(sq_norms, dtype=np.float64).copy()
    for i in range(m):
        cols[..., i] = 0.5 - power
        power = power * power
    return cols


def preprocess_data(x: np.ndarray, max_norm: float, U: float = 0.75, m: int = 2) -> np.ndarray:
    """Shrink a data vector into the unit ball and append norm corrections."""
    if max_norm <= 0:
        raise ValueError(f"max_norm must be positive, got {max_norm}")
    x = np.asarray(x, dtype=np.float64)
    norm = float(np.linalg.norm(x))
    if norm > max_norm * (1 + 1e-9):
        raise ValueError(f"vector norm {norm} exceeds max_norm {max_norm}")
    scaled = x * (U / max_norm)
    return np.concatenate([scaled, _norm_terms(np.dot(scaled, scaled), m)])


def preprocess_query(q: np.ndarray, m: int = 2) -> np.ndarray:
    """Normalize a query vector and pad with m zeros."""
    q = np.asarray(q, dtype=np.float64)
    norm = float(np.linalg.norm(q))
    if norm == 0.0:
        raise ValueError("query vector is zero")
    return np.concatenate([q / norm, np.zeros(m)])


def _pack_codes(projections: np.ndarray, bits: int) -> np.ndarray:
    """Sign-bit hash codes from a (rows, bits) projection block."""
    if bits == 0:
        return np.zeros(projections.shape[:-1], dtype=np.uint64)
    on = (projections > 0).astype(np.uint64)
    shifts = np.arange(bits, dtype=np.uint64)
    return (on << shifts).sum(axis=-1, dtype=np.uint64)


def build_alsh(index: PhraseIndex, params: AlshParams = AlshParams()) -> AlshIndex:
    """Hash every stored vector of a dense index into T bucket tables."""
    if index.kind != "dense":
        raise ValueError("aLSH requires a dense index")
    params.validate()
    n = len(index)
    t, b, m = params.tables, params.bits_per_table, params.m
    aug_dim = index.dim + m

    norms = np.linalg.norm(index.vectors.astype(np.float64), axis=1) if n else np.zeros(0)
    max_norm = float(norms.max()) if n and norms.max() > 0 else 1.0

    rng = np.random.Generator(np.random.Philox(key=params.seed))
    hyperplanes = rng.normal(size=(t, b, aug_dim))
    if b:
        hyperplanes /= np.linalg.norm(hyperplanes, axis=2, keepdims=True)

    codes = np.zeros((t, n), dtype=np.uint64)
    if b and n:
        flat = hyperplanes.reshape(t * b, aug_dim)
        scale = params.U / max_norm
        step = max(1, (1 << 21) // max(1, aug_dim))
        for start in range(0, n, step):
            stop = min(n, start + step)
            scaled = index.vectors[start:stop].astype(np.float64) * scale
            aug = np.concatenate(
                [scaled, _norm_terms((scaled * scaled).sum(axis=1), m)], axis=1
            )
            proj = aug @ flat.T
            for ti in range(t):
                codes[ti, start:stop] = _pack_codes(proj[:, ti * b : (ti + 1) * b], b)

    buckets: list[dict[int, np.ndarray]] = []
    for ti in range(t):
        table: dict[int, np.ndarray] = {}
        if n:
            order = np.argsort(codes[ti], kind="stable")
            sorted_codes = codes[ti][order]
            bounds = np.flatnonzero(np.r_[True, sorted_codes[1:] != sorted_codes[:-1]])
            for i, lo in enumerate(bounds):
                hi = bounds[i + 1] if i + 1 < len(bounds) else n
                table[int(sorted_codes[lo])] = order[lo:hi].astype(np.uint64)
        buckets.append(table)
    return AlshIndex(params, max_norm, hyperplanes, buckets, index)


def search_approx(
    alsh: AlshIndex,
    query: np.ndarray,
    k_top: int = 1,
    doc_id: int | None = None,
) -> tuple[list[SearchHit], int]:
    """Gather the query's bucket from every table, re-score exactly.

    Returns the hits plus the probe count (candidates re-scored after
    deduplication and any document restriction).
    """
    if k_top < 1:
        raise ValueError("k_top must be >= 1")
    index = alsh.backing
    q = np.asarray(query, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] != index.dim:
        raise ValueError(f"query dim {q.shape} does not match index dim {index.dim}")
    q_aug = preprocess_query(q, alsh.params.m)

    parts = []
    b = alsh.params.bits_per_table
    for ti in range(alsh.params.tables):
        code = int(_pack_codes(alsh.hyperplanes[ti] @ q_aug, b)) if b else 0
        hit = alsh.buckets[ti].get(code)
        if hit is not None:
            parts.append(hit)
    if not parts:
        return [], 0
    gathered = np.unique(np.concatenate(parts)).astype(np.int64)
    if doc_id is not None:
        lo, hi = index.doc_range(doc_id)
        gathered = gathered[(gathered >= lo) & (gathered < hi)]
    if len(gathered) == 0:
        return [], 0

    rows = np.ascontiguousarray(index.vectors[gathered])
    scores = rows @ q.astype(np.float32)
    picked = _top_k(scores, min(k_top, len(gathered)))
    hits = [
        SearchHit(index.span(int(gathered[i])), float(scores[i])) for i in picked
    ]
    return hits, int(len(gathered))


def save_alsh(alsh: AlshIndex, path: str) -> None:
    p = alsh.params
    parts = [
        MAGIC,
        struct.pack("<I", VERSION),
        struct.pack("<IdIIq", p.m, p.U, p.bits_per_table, p.tables, p.seed),
        struct.pack("<d", alsh.max_norm),
        struct.pack("<I", alsh.hyperplanes.shape[2]),
        np.ascontiguousarray(alsh.hyperplanes, dtype="<f8").tobytes(),
    ]
    for table in alsh.buckets:
        parts.append(struct.pack("<Q", len(table)))
        for code in sorted(table):
            ords = table[code]
            parts.append(struct.pack("<QQ", code, len(ords)))
            parts.append(np.ascontiguousarray(ords, dtype="<u8").tobytes())
    with open(path, "wb") as f:
        f.write(b"".join(parts))


def load_alsh(path: str, backing: PhraseIndex) -> AlshIndex:
    with open(path, "rb") as f:
        r = _Reader(f.read(), path)
    magic = r.take(4, "magic")
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}", offset=0)
    version = r.u32("version")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}", offset=4)
    m, U, bits, tables, seed = struct.unpack("<IdIIq", r.take(28, "params"))
    params = AlshParams(m=m, U=U, bits_per_table=bits, tables=tables, seed=seed)
    max_norm = struct.unpack("<d", r.take(8, "max_norm"))[0]
    aug_dim = r.u32("augmented dim")
    if backing.kind != "dense" or aug_dim != backing.dim + m:
        raise FormatError(
            f"{path}: augmented dim {aug_dim} does not fit backing index "
            f"(dim {backing.dim} + m {m})",
            offset=r.pos - 4,
        )
    planes = r.array(np.dtype("<f8"), tables * bits * aug_dim, "hyperplanes")
    hyperplanes = planes.reshape(tables, bits, aug_dim)
    buckets: list[dict[int, np.ndarray]] = []
    for ti in range(tables):
        table: dict[int, np.ndarray] = {}
        for _ in range(r.u64(f"bucket count of table {ti}")):
            at = r.pos
            code = r.u64("bucket code")
            size = r.u64("bucket size")
            ords = r.array(np.dtype("<u8"), size, f"bucket 0x{code:x} of table {ti}")
            if np.any(ords >= len(backing)):
                raise FormatError(
                    f"{path}: bucket 0x{code:x} references ordinal beyond index", offset=at
                )
            table[int(code)] = ords
        buckets.append(table)
    if r.pos != len(r.buf):
        raise FormatError(f"{path}: {len(r.buf) - r.pos} bytes of trailing data", offset=r.pos)
    return AlshIndex(params, max_norm, hyperplanes, buckets, backing)
