"""Classical text features: tokenization, vocabulary, TF / TF-IDF vectors.

The baseline feature layout is ``[claim TF | explanation TF | TF-IDF cosine]``
with the two TF blocks padded to ``BASELINE_VOCAB_SIZE`` positions each.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

BASELINE_VOCAB_SIZE = 5000
BASELINE_FEATURE_DIM = 2 * BASELINE_VOCAB_SIZE + 1

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on runs of non-alphanumeric characters."""
    return _TOKEN_RE.findall(text.lower())


def load_stop_words(path: str | Path | None = None) -> frozenset[str]:
    """Load a stop-word list (one term per line, UTF-8).

    Without a path, returns the bundled English list.
    """
    if path is None:
        text = (
            resources.files("factcheck.data").joinpath("stopwords_en.txt").read_text("utf-8")
        )
    else:
        text = Path(path).read_text("utf-8")
    return frozenset(line.strip() for line in text.splitlines() if line.strip())


@dataclass(frozen=True)
class Vocabulary:
    """Top-frequency term index over a tokenized corpus.

    Terms are ordered by descending total corpus frequency, ties broken
    lexicographically, and indexed densely from 0.
    """

    term_to_index: dict[str, int]
    document_frequency: dict[str, int]
    corpus_size: int

    @property
    def size(self) -> int:
        return len(self.term_to_index)

    def idf(self, term: str) -> float:
        """Smoothed inverse document frequency: ln((1+N)/(1+df)) + 1."""
        df = self.document_frequency.get(term, 0)
        return math.log((1 + self.corpus_size) / (1 + df)) + 1.0

    def to_json_dict(self) -> dict:
        terms = sorted(self.term_to_index, key=self.term_to_index.get)
        return {
            "corpus_size": self.corpus_size,
            "terms": [
                {"term": t, "index": i, "df": self.document_frequency.get(t, 0)}
                for i, t in enumerate(terms)
            ],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "Vocabulary":
        term_to_index = {row["term"]: row["index"] for row in data["terms"]}
        document_frequency = {row["term"]: row["df"] for row in data["terms"]}
        return cls(term_to_index, document_frequency, int(data["corpus_size"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json_dict(), sort_keys=True, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        return cls.from_json_dict(json.loads(Path(path).read_text("utf-8")))


def build_vocabulary(
    documents: Sequence[Sequence[str]],
    max_terms: int = BASELINE_VOCAB_SIZE,
    stop_words: Iterable[str] | None = None,
) -> Vocabulary:
    """Build a vocabulary of the ``max_terms`` most frequent non-stop terms.

    ``documents`` are already-tokenized token lists. Document frequency
    counts the number of documents containing each retained term.
    """
    if not documents:
        raise ValueError("cannot build a vocabulary from an empty document list")
    stops = frozenset(stop_words) if stop_words is not None else load_stop_words()

    total = Counter()
    doc_freq = Counter()
    for tokens in documents:
        kept = [t for t in tokens if t not in stops]
        total.update(kept)
        doc_freq.update(set(kept))

    if not total:
        raise ValueError("no non-stop-word terms in the corpus")

    ranked = sorted(total.items(), key=lambda kv: (-kv[1], kv[0]))[:max_terms]
    term_to_index = {term: i for i, (term, _) in enumerate(ranked)}
    document_frequency = {term: doc_freq[term] for term in term_to_index}
    return Vocabulary(term_to_index, document_frequency, len(documents))


@dataclass(frozen=True)
class SparseVector:
    """Sparse vector with strictly increasing indices below ``dimension``."""

    dimension: int
    entries: tuple[tuple[int, float], ...]

    def __post_init__(self):
        last = -1
        for idx, weight in self.entries:
            if not 0 <= idx < self.dimension:
                raise ValueError(f"index {idx} out of range for dimension {self.dimension}")
            if idx <= last:
                raise ValueError("entries must have strictly increasing indices")
            if not math.isfinite(weight):
                raise ValueError(f"non-finite weight at index {idx}")
            last = idx

    def norm(self) -> float:
        return math.sqrt(sum(w * w for _, w in self.entries))

    def to_dense(self, dimension: int | None = None) -> np.ndarray:
        dim = self.dimension if dimension is None else dimension
        if dim < self.dimension:
            raise ValueError("target dimension smaller than vector dimension")
        dense = np.zeros(dim)
        for idx, weight in self.entries:
            dense[idx] = weight
        return dense


def tf_vector(tokens: Sequence[str], vocab: Vocabulary) -> SparseVector:
    """Raw in-vocabulary term counts; out-of-vocabulary tokens are ignored."""
    counts = Counter(
        vocab.term_to_index[t] for t in tokens if t in vocab.term_to_index
    )
    entries = tuple((idx, float(counts[idx])) for idx in sorted(counts))
    return SparseVector(vocab.size, entries)


def tfidf_vector(tokens: Sequence[str], vocab: Vocabulary) -> SparseVector:
    """L2-normalized TF-IDF vector; the all-zero vector stays all-zero."""
    index_to_term = {i: t for t, i in vocab.term_to_index.items()}
    tf = tf_vector(tokens, vocab)
    weighted = [(idx, w * vocab.idf(index_to_term[idx])) for idx, w in tf.entries]
    norm = math.sqrt(sum(w * w for _, w in weighted))
    if norm > 0.0:
        weighted = [(idx, w / norm) for idx, w in weighted]
    return SparseVector(vocab.size, tuple(weighted))


def cosine(a: SparseVector, b: SparseVector) -> float:
    """Cosine similarity; 0.0 whenever either vector has zero norm."""
    if a.dimension != b.dimension:
        raise ValueError(f"dimension mismatch: {a.dimension} vs {b.dimension}")
    norm_a = a.norm()
    norm_b = b.norm()
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    b_map = dict(b.entries)
    dot = sum(w * b_map[idx] for idx, w in a.entries if idx in b_map)
    return dot / (norm_a * norm_b)


def assemble_baseline_features(
    claim_tokens: Sequence[str],
    explanation_tokens: Sequence[str],
    vocab: Vocabulary,
) -> np.ndarray:
    """Dense classifier input: claim TF, explanation TF, TF-IDF cosine.

    Vocabulary positions beyond the actual vocabulary size are zero-padded,
    so the output always has ``BASELINE_FEATURE_DIM`` components.
    """
    if vocab.size > BASELINE_VOCAB_SIZE:
        raise ValueError(
            f"vocabulary size {vocab.size} exceeds the baseline layout "
            f"of {BASELINE_VOCAB_SIZE} positions"
        )
    features = np.zeros(BASELINE_FEATURE_DIM)
    for idx, weight in tf_vector(claim_tokens, vocab).entries:
        features[idx] = weight
    for idx, weight in tf_vector(explanation_tokens, vocab).entries:
        features[BASELINE_VOCAB_SIZE + idx] = weight
    features[-1] = cosine(
        tfidf_vector(claim_tokens, vocab), tfidf_vector(explanation_tokens, vocab)
    )
    return features
