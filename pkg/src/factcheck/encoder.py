"""Text-to-vector encoders behind one interface.

Three implementations: averaged pretrained word vectors, a deterministic
hashed encoder (hermetic stand-in, no external data), and a client for an
external embedding service speaking the JSON wire protocol:

    POST /embed    {"texts": [..]}            -> {"dim": int, "vectors": [[..]..]}
    POST /classify {"pairs": [[claim, exp]..]} -> {"probs": [..]}
    GET  /health                               -> {"status": "ok", "model": str}

All encoders pool a sentence as the element-wise mean of its token vectors
and return the zero vector for text with no known tokens.
"""

from __future__ import annotations

import hashlib
import logging
import threading
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import httpx
import numpy as np

from factcheck.errors import EncoderError
from factcheck.featurizer import tokenize

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT_S = 10.0
DEFAULT_MAX_IN_FLIGHT = 4


@dataclass(frozen=True)
class EncoderDescriptor:
    """Stable identity of an encoder configuration; stored inside index files."""

    kind: str
    dimension: int
    identity: str


class _MeanPoolingEncoder:
    """Shared pooling: mean over per-token vectors, fetched once per distinct token.

    A single distinct token returns its vector directly, which keeps
    ``encode(word * k) == encode(word)`` exact in floating point.
    """

    dimension: int
    descriptor: EncoderDescriptor

    def _token_vector(self, token: str) -> np.ndarray | None:
        raise NotImplementedError

    def encode(self, text: str) -> np.ndarray:
        counts = Counter(tokenize(text))
        total = 0
        acc = np.zeros(self.dimension)
        last = None
        distinct = 0
        for token, count in counts.items():
            vec = self._token_vector(token)
            if vec is None:
                continue
            acc += count * vec
            total += count
            last = vec
            distinct += 1
        if total == 0:
            return np.zeros(self.dimension)
        if distinct == 1:
            return last.copy()
        return acc / total

    def encode_batch(self, texts: Sequence[str]) -> np.ndarray:
        if len(texts) == 0:
            return np.zeros((0, self.dimension))
        return np.stack([self.encode(t) for t in texts])


class WordVectorEncoder(_MeanPoolingEncoder):
    """Averaged pretrained word vectors (GloVe-style text file)."""

    def __init__(self, vectors: dict[str, np.ndarray], dimension: int, identity: str):
        self.vectors = vectors
        self.dimension = dimension
        self.descriptor = EncoderDescriptor("word_vectors", dimension, identity)

    def _token_vector(self, token: str) -> np.ndarray | None:
        return self.vectors.get(token)


def load_word_vectors(path: str | Path) -> WordVectorEncoder:
    """Parse a text file of ``token c1 .. cD`` lines into an encoder.

    The dimension is fixed by the first line; a line with a different
    component count fails with its line number. Identity is the file hash.
    """
    path = Path(path)
    vectors: dict[str, np.ndarray] = {}
    dimension = None
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for line_no, raw in enumerate(fh, start=1):
            digest.update(raw)
            parts = raw.decode("utf-8").split()
            if not parts:
                continue
            token, components = parts[0], parts[1:]
            if dimension is None:
                dimension = len(components)
                if dimension == 0:
                    raise EncoderError(f"{path} line {line_no}: no vector components")
            elif len(components) != dimension:
                raise EncoderError(
                    f"{path} line {line_no}: expected {dimension} components, "
                    f"got {len(components)}"
                )
            try:
                vectors[token] = np.array([float(c) for c in components])
            except ValueError:
                raise EncoderError(f"{path} line {line_no}: non-numeric component") from None
    if dimension is None:
        raise EncoderError(f"{path}: empty word-vector file")
    identity = f"word_vectors:sha256:{digest.hexdigest()}"
    logger.info("loaded %d word vectors of dimension %d from %s", len(vectors), dimension, path)
    return WordVectorEncoder(vectors, dimension, identity)


class HashedEncoder(_MeanPoolingEncoder):
    """Deterministic pseudo-random unit vector per token, seeded by a token hash.

    Purely an artifact of this codebase: it gives the pipeline a hermetic,
    dependency-free encoder whose outputs are stable across processes.
    """

    def __init__(self, dimension: int = 300):
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self.descriptor = EncoderDescriptor(
            "hashed", dimension, f"hashed:blake2b64:d{dimension}:v1"
        )
        # Distinct-token working sets are small; caching skips regenerating vectors.
        self._token_vector = lru_cache(maxsize=65536)(self._make_token_vector)

    def _make_token_vector(self, token: str) -> np.ndarray:
        seed = int.from_bytes(
            hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "little"
        )
        rng = np.random.default_rng(seed)
        vec = rng.standard_normal(self.dimension)
        norm = np.linalg.norm(vec)
        while norm == 0.0:  # unreachable in practice, kept for determinism
            vec = rng.standard_normal(self.dimension)
            norm = np.linalg.norm(vec)
        return vec / norm


class SidecarClient:
    """HTTP client for the external encoder/verifier wire protocol.

    Concurrent in-flight requests are bounded by a semaphore; each request
    carries a timeout. Both limits default to the service contract values.
    """

    def __init__(
        self,
        base_url: str,
        timeout: float = DEFAULT_TIMEOUT_S,
        max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
        transport: httpx.BaseTransport | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self._client = httpx.Client(
            base_url=self.base_url, timeout=timeout, transport=transport
        )
        self._semaphore = threading.BoundedSemaphore(max_in_flight)

    def _post(self, endpoint: str, payload: dict) -> dict:
        try:
            with self._semaphore:
                response = self._client.post(endpoint, json=payload)
        except httpx.TimeoutException:
            raise EncoderError(f"external service timed out on {endpoint}") from None
        except httpx.HTTPError as exc:
            raise EncoderError(f"external service unreachable: {exc}") from None
        if response.status_code != 200:
            raise EncoderError(
                f"external service returned {response.status_code} on {endpoint}: "
                f"{_error_detail(response)}"
            )
        try:
            return response.json()
        except ValueError:
            raise EncoderError(f"malformed JSON from {endpoint}") from None

    def health(self) -> dict:
        try:
            with self._semaphore:
                response = self._client.get("/health")
        except httpx.HTTPError as exc:
            raise EncoderError(f"external service unreachable: {exc}") from None
        if response.status_code != 200:
            raise EncoderError(f"health check failed: {response.status_code}")
        try:
            body = response.json()
        except ValueError:
            raise EncoderError("malformed JSON from /health") from None
        if body.get("status") != "ok":
            raise EncoderError(f"service unhealthy: {body}")
        return body

    def embed(self, texts: Sequence[str]) -> tuple[int, np.ndarray]:
        body = self._post("/embed", {"texts": list(texts)})
        try:
            dim = int(body["dim"])
            rows = body["vectors"]
        except (KeyError, TypeError, ValueError):
            raise EncoderError("malformed /embed response: missing dim or vectors") from None
        if len(rows) != len(texts):
            raise EncoderError(
                f"/embed returned {len(rows)} vectors for {len(texts)} texts"
            )
        for i, row in enumerate(rows):
            if len(row) != dim:
                raise EncoderError(f"/embed vector {i} has length {len(row)}, expected {dim}")
        vectors = np.array(rows, dtype=float).reshape(len(rows), dim)
        if not np.all(np.isfinite(vectors)):
            bad = int(np.argwhere(~np.isfinite(vectors).all(axis=1))[0][0])
            raise EncoderError(f"/embed vector {bad} contains non-finite components")
        return dim, vectors

    def classify(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        body = self._post("/classify", {"pairs": [[c, e] for c, e in pairs]})
        try:
            probs = [float(p) for p in body["probs"]]
        except (KeyError, TypeError, ValueError):
            raise EncoderError("malformed /classify response: missing probs") from None
        if len(probs) != len(pairs):
            raise EncoderError(
                f"/classify returned {len(probs)} probabilities for {len(pairs)} pairs"
            )
        for i, p in enumerate(probs):
            if not (np.isfinite(p) and 0.0 <= p <= 1.0):
                raise EncoderError(f"/classify probability {i} out of [0, 1]: {p}")
        return probs

    def close(self) -> None:
        self._client.close()


class ExternalEncoder:
    """Embedding encoder backed by a sidecar service.

    The dimension is probed once at construction (an empty /embed call) and
    enforced on every subsequent response.
    """

    def __init__(self, client: SidecarClient):
        self.client = client
        health = client.health()
        model = str(health.get("model", "unknown"))
        dim, _ = client.embed([])
        if dim < 1:
            raise EncoderError(f"external service reports invalid dimension {dim}")
        self.dimension = dim
        self.descriptor = EncoderDescriptor("external", dim, f"external:{model}")

    def encode(self, text: str) -> np.ndarray:
        return self.encode_batch([text])[0]

    def encode_batch(self, texts: Sequence[str]) -> np.ndarray:
        if len(texts) == 0:
            return np.zeros((0, self.dimension))
        dim, vectors = self.client.embed(texts)
        if dim != self.dimension:
            raise EncoderError(
                f"external service changed dimension: {dim} != {self.dimension}"
            )
        return vectors


def _error_detail(response: httpx.Response) -> str:
    try:
        body = response.json()
        if isinstance(body, dict) and "error" in body:
            return str(body["error"])
    except ValueError:
        pass
    return response.text[:200]
