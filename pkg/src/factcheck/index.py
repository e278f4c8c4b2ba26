"""Cached explanation embeddings with exhaustive top-k cosine retrieval.

Index file format: magic ``FCIX``, version u16, dimension u32, count u32,
length-prefixed UTF-8 encoder identity, then each id as length-prefixed
UTF-8, then all vectors as 32-bit little-endian floats, row-major.
"""

from __future__ import annotations

import logging
import os
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from factcheck.corpus import ExplanationRecord
from factcheck.errors import IndexFileError

logger = logging.getLogger(__name__)

_MAGIC = b"FCIX"
_VERSION = 1

DEFAULT_TOP_K = 10


@dataclass(frozen=True)
class RetrievalHit:
    """One retrieved explanation; hits of a query are ranked from 1, best first."""

    explanation_id: str
    similarity: float
    rank: int


@dataclass(frozen=True)
class Threshold:
    """Similarity cutoff ``t = mean - std`` over validation gold-pair cosines."""

    t: float
    mean: float
    std: float
    n_calibration: int


@dataclass
class EmbeddingIndex:
    """Unit-normalized explanation vectors; zero embeddings stay zero rows."""

    dimension: int
    ids: list[str]
    vectors: np.ndarray  # (n, dimension) float32
    encoder_identity: str
    built_at: float = field(default_factory=time.time)
    _id_sort_rank: np.ndarray = field(init=False, repr=False)
    _position: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.ids) != self.vectors.shape[0]:
            raise ValueError("ids and vectors disagree in length")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("index ids must be unique")
        if self.vectors.shape[1] != self.dimension:
            raise ValueError("vector width does not match dimension")
        # Tie-break support: rank of each row when ids are sorted ascending.
        order = sorted(range(len(self.ids)), key=lambda i: self.ids[i])
        rank = np.empty(len(self.ids), dtype=np.int64)
        rank[order] = np.arange(len(self.ids))
        self._id_sort_rank = rank
        self._position = {eid: i for i, eid in enumerate(self.ids)}

    def __len__(self) -> int:
        return len(self.ids)

    def vector_for(self, explanation_id: str) -> np.ndarray:
        try:
            return self.vectors[self._position[explanation_id]]
        except KeyError:
            raise KeyError(f"explanation {explanation_id!r} not in index") from None


def _normalize_rows(vectors: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    safe = np.where(norms == 0.0, 1.0, norms)
    return vectors / safe


def build_index(explanations: Sequence[ExplanationRecord], encoder) -> EmbeddingIndex:
    """Encode every explanation once, normalize, and store as float32."""
    if not explanations:
        raise ValueError("cannot build an index from an empty explanation list")
    ids = [e.id for e in explanations]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate explanation ids")
    embedded = encoder.encode_batch([e.text for e in explanations])
    vectors = _normalize_rows(np.asarray(embedded, dtype=np.float64)).astype("<f4")
    logger.info("built index of %d explanations (dimension %d)", len(ids), encoder.dimension)
    return EmbeddingIndex(
        dimension=encoder.dimension,
        ids=ids,
        vectors=vectors,
        encoder_identity=encoder.descriptor.identity,
    )


def query_top_k(
    index: EmbeddingIndex, claim_embedding: np.ndarray, k: int = DEFAULT_TOP_K
) -> list[RetrievalHit]:
    """Exhaustive cosine scoring; ties broken by ascending explanation id.

    A zero claim embedding scores 0.0 everywhere, so the result follows
    plain id order.
    """
    if len(index) == 0:
        raise ValueError("cannot query an empty index")
    if k < 1:
        raise ValueError("k must be at least 1")
    q = np.asarray(claim_embedding, dtype=np.float64).ravel()
    if q.shape[0] != index.dimension:
        raise ValueError(
            f"claim embedding dimension {q.shape[0]} != index dimension {index.dimension}"
        )
    norm = np.linalg.norm(q)
    if norm == 0.0:
        sims = np.zeros(len(index))
    else:
        sims = index.vectors @ (q / norm)

    order = np.lexsort((index._id_sort_rank, -sims))[: min(k, len(index))]
    return [
        RetrievalHit(index.ids[i], float(sims[i]), rank)
        for rank, i in enumerate(order, start=1)
    ]


def calibrate_threshold(
    index: EmbeddingIndex,
    encoder,
    validation_pairs: Sequence[tuple[str, str]],
) -> Threshold:
    """Fit ``t = mean - population std`` of gold-pair cosine similarities.

    ``validation_pairs`` are (claim text, gold explanation id); the gold
    vectors come from the index itself.
    """
    if len(validation_pairs) < 2:
        raise ValueError("insufficient calibration data: need at least 2 pairs")
    sims = []
    for claim_text, gold_id in validation_pairs:
        try:
            gold_vec = index.vector_for(gold_id)
        except KeyError:
            raise ValueError(f"gold explanation {gold_id!r} absent from index") from None
        q = np.asarray(encoder.encode(claim_text), dtype=np.float64)
        norm = np.linalg.norm(q)
        sims.append(0.0 if norm == 0.0 else float(gold_vec @ (q / norm)))
    mean = float(np.mean(sims))
    std = float(np.std(sims))  # population std: deterministic even for n = 2
    return Threshold(t=mean - std, mean=mean, std=std, n_calibration=len(sims))


def filter_hits(hits: Sequence[RetrievalHit], t: float) -> list[RetrievalHit]:
    """Keep hits with similarity strictly greater than ``t``, order preserved."""
    return [h for h in hits if h.similarity > t]


def save_index(index: EmbeddingIndex, path: str | Path) -> None:
    """Write the index atomically (temp file + rename): no partial index files."""
    path = Path(path)
    identity = index.encoder_identity.encode("utf-8")
    chunks = [
        _MAGIC,
        struct.pack("<HII", _VERSION, index.dimension, len(index)),
        struct.pack("<I", len(identity)),
        identity,
    ]
    for eid in index.ids:
        raw = eid.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
    chunks.append(np.ascontiguousarray(index.vectors, dtype="<f4").tobytes())

    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(b"".join(chunks))
    os.replace(tmp, path)


def load_index(path: str | Path) -> EmbeddingIndex:
    """Load an index written by :func:`save_index`."""
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != _MAGIC:
        raise IndexFileError(f"{path}: not an index file (bad magic)")
    offset = 4
    try:
        version, dimension, count = struct.unpack_from("<HII", data, offset)
        offset += struct.calcsize("<HII")
        if version != _VERSION:
            raise IndexFileError(f"{path}: unsupported index version {version}")
        (id_len,) = struct.unpack_from("<I", data, offset)
        offset += 4
        encoder_identity = data[offset : offset + id_len].decode("utf-8")
        offset += id_len
        ids = []
        for _ in range(count):
            (raw_len,) = struct.unpack_from("<I", data, offset)
            offset += 4
            ids.append(data[offset : offset + raw_len].decode("utf-8"))
            offset += raw_len
        n_floats = count * dimension
        vectors = (
            np.frombuffer(data, dtype="<f4", count=n_floats, offset=offset)
            .reshape(count, dimension)
            .copy()
        )
        offset += n_floats * 4
    except (struct.error, UnicodeDecodeError, ValueError) as exc:
        raise IndexFileError(f"{path}: truncated or corrupt index ({exc})") from None
    if offset != len(data):
        raise IndexFileError(f"{path}: trailing bytes in index file")
    return EmbeddingIndex(
        dimension=dimension,
        ids=ids,
        vectors=vectors,
        encoder_identity=encoder_identity,
        built_at=path.stat().st_mtime,
    )
