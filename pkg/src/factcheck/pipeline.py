"""End-to-end claim checking: retrieval, threshold filtering, verification.

A verdict aggregates the verifier's per-candidate alignment probabilities
into ``p_truth`` (their arithmetic mean) and labels the claim True when
``p_truth >= tau_b``. A claim with no candidate above the similarity
threshold is labeled NoEvidence rather than guessed.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from factcheck.corpus import PairExample
from factcheck.featurizer import Vocabulary, assemble_baseline_features, tokenize
from factcheck.index import (
    DEFAULT_TOP_K,
    EmbeddingIndex,
    RetrievalHit,
    Threshold,
    filter_hits,
    query_top_k,
)
from factcheck.nn import DenseNet, forward_batch

logger = logging.getLogger(__name__)

LABEL_TRUE = "True"
LABEL_FALSE = "False"
LABEL_NO_EVIDENCE = "NoEvidence"


def tfidf_pair_features(claim_text: str, explanation_text: str, vocab: Vocabulary) -> np.ndarray:
    """10,001-d baseline features for one (claim, explanation) pair."""
    return assemble_baseline_features(tokenize(claim_text), tokenize(explanation_text), vocab)


def wordvec_pair_features(claim_text: str, explanation_text: str, encoder) -> np.ndarray:
    """Concatenated claim and explanation sentence vectors."""
    return np.concatenate([encoder.encode(claim_text), encoder.encode(explanation_text)])


class BaselineTfidfVerifier:
    """Alignment classifier over TF/TF-IDF features."""

    kind = "baseline_tfidf_net"

    def __init__(self, net: DenseNet, vocab: Vocabulary, tau_b: float = 0.5):
        self.net = net
        self.vocab = vocab
        self.tau_b = tau_b

    def features(self, claim_text: str, explanation_text: str) -> np.ndarray:
        return tfidf_pair_features(claim_text, explanation_text, self.vocab)

    def probabilities(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        if not pairs:
            return []
        batch = np.stack([self.features(c, e) for c, e in pairs])
        return [float(p) for p in forward_batch(self.net, batch)[:, 1]]


class BaselineWordvecVerifier:
    """Alignment classifier over concatenated sentence vectors."""

    kind = "baseline_wordvec_net"

    def __init__(self, net: DenseNet, encoder, tau_b: float = 0.5):
        self.net = net
        self.encoder = encoder
        self.tau_b = tau_b

    def features(self, claim_text: str, explanation_text: str) -> np.ndarray:
        return wordvec_pair_features(claim_text, explanation_text, self.encoder)

    def probabilities(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        if not pairs:
            return []
        batch = np.stack([self.features(c, e) for c, e in pairs])
        return [float(p) for p in forward_batch(self.net, batch)[:, 1]]


class ExternalVerifier:
    """Alignment probabilities delegated to the sidecar's /classify endpoint."""

    kind = "external"

    def __init__(self, client, tau_b: float = 0.5):
        self.client = client
        self.tau_b = tau_b

    def probabilities(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        if not pairs:
            return []
        return self.client.classify(pairs)


@dataclass(frozen=True)
class Candidate:
    """A retrieved explanation that survived the similarity threshold."""

    explanation_id: str
    similarity: float
    probability: float


@dataclass(frozen=True)
class Verdict:
    """Per-claim output with all intermediate values recorded."""

    claim: str
    candidates: tuple[Candidate, ...]
    p_truth: float | None
    label: str
    tau_b: float
    threshold_t: float
    timings_ms: dict[str, float] = field(default_factory=dict)
    error: str | None = None

    def to_json_dict(self) -> dict:
        out = {
            "claim": self.claim,
            "label": self.label,
            "tau_b": self.tau_b,
            "threshold_t": self.threshold_t,
            "candidates": [
                {"id": c.explanation_id, "similarity": c.similarity, "prob": c.probability}
                for c in self.candidates
            ],
            "timings_ms": self.timings_ms,
        }
        if self.p_truth is not None:  # absent, not null, when no evidence survived
            out["p_truth"] = self.p_truth
        if self.error is not None:
            out["error"] = self.error
        return out


@dataclass
class CheckPipeline:
    """Immutable run-time state: encoder, index, threshold, verifier, texts."""

    encoder: object
    index: EmbeddingIndex
    threshold: Threshold
    verifier: object
    explanation_texts: dict[str, str]
    k: int = DEFAULT_TOP_K

    def __post_init__(self):
        if len(self.index) == 0:
            raise ValueError("empty knowledge base: index has no entries")
        missing = [eid for eid in self.index.ids if eid not in self.explanation_texts]
        if missing:
            raise ValueError(
                f"index references {len(missing)} explanations with no text, "
                f"first: {missing[0]!r}"
            )
        if self.encoder.dimension != self.index.dimension:
            raise ValueError(
                f"encoder dimension {self.encoder.dimension} != index dimension "
                f"{self.index.dimension}"
            )
        if self.encoder.descriptor.identity != self.index.encoder_identity:
            raise ValueError(
                "index was built with a different encoder: "
                f"{self.index.encoder_identity!r} != {self.encoder.descriptor.identity!r}"
            )


def verdict_from_hits(
    pipeline: CheckPipeline,
    claim_text: str,
    hits: Sequence[RetrievalHit],
    timings_ms: dict[str, float] | None = None,
) -> Verdict:
    """Verify surviving hits and fold their probabilities into a verdict.

    Used by evaluation runs that already hold the retrieval results.
    """
    if timings_ms is None:
        timings_ms = {}
    survivors = filter_hits(hits, pipeline.threshold.t)
    started = time.perf_counter()
    probs = pipeline.verifier.probabilities(
        [(claim_text, pipeline.explanation_texts[h.explanation_id]) for h in survivors]
    )
    timings_ms["verify"] = (time.perf_counter() - started) * 1000.0

    candidates = tuple(
        Candidate(h.explanation_id, h.similarity, p) for h, p in zip(survivors, probs)
    )
    if not candidates:
        return Verdict(
            claim=claim_text,
            candidates=(),
            p_truth=None,
            label=LABEL_NO_EVIDENCE,
            tau_b=pipeline.verifier.tau_b,
            threshold_t=pipeline.threshold.t,
            timings_ms=timings_ms,
        )
    p_truth = sum(c.probability for c in candidates) / len(candidates)
    label = LABEL_TRUE if p_truth >= pipeline.verifier.tau_b else LABEL_FALSE
    return Verdict(
        claim=claim_text,
        candidates=candidates,
        p_truth=p_truth,
        label=label,
        tau_b=pipeline.verifier.tau_b,
        threshold_t=pipeline.threshold.t,
        timings_ms=timings_ms,
    )


def _error_verdict(pipeline: CheckPipeline, claim_text: str, cause: Exception) -> Verdict:
    logger.warning("check failed for claim %.60r: %s", claim_text, cause)
    return Verdict(
        claim=claim_text,
        candidates=(),
        p_truth=None,
        label=LABEL_NO_EVIDENCE,
        tau_b=pipeline.verifier.tau_b,
        threshold_t=pipeline.threshold.t,
        error=str(cause),
    )


def check_claim(pipeline: CheckPipeline, claim_text: str) -> Verdict:
    """Encode, retrieve top-k, filter by threshold, verify, aggregate.

    Encoder or verifier failures yield an error verdict carrying the cause
    instead of raising, so batch runs degrade per claim.
    """
    timings_ms: dict[str, float] = {}
    try:
        started = time.perf_counter()
        embedding = pipeline.encoder.encode(claim_text)
        timings_ms["encode"] = (time.perf_counter() - started) * 1000.0

        started = time.perf_counter()
        hits = query_top_k(pipeline.index, embedding, k=pipeline.k)
        timings_ms["retrieve"] = (time.perf_counter() - started) * 1000.0

        return verdict_from_hits(pipeline, claim_text, hits, timings_ms)
    except Exception as exc:
        return _error_verdict(pipeline, claim_text, exc)


def check_batch(pipeline: CheckPipeline, claims: Sequence[str]) -> list[Verdict]:
    """Order-preserving batch check; per-claim failures do not stop the batch."""
    return [check_claim(pipeline, claim) for claim in claims]


def calibrate_verifier_boundary(
    verifier, validation_pairs: Sequence[PairExample]
) -> float:
    """Decision boundary from class statistics on stage-B validation pairs.

    Returns the midpoint of the two class mean probabilities; falls back to
    0.5 with a warning when the means are not ordered the right way round.
    """
    labels = {p.label for p in validation_pairs}
    if labels != {0, 1}:
        raise ValueError("validation pairs must contain both labels")
    probs = verifier.probabilities(
        [(p.claim_text, p.explanation_text) for p in validation_pairs]
    )
    pos = [pr for pr, pair in zip(probs, validation_pairs) if pair.label == 1]
    neg = [pr for pr, pair in zip(probs, validation_pairs) if pair.label == 0]
    mean_pos = sum(pos) / len(pos)
    mean_neg = sum(neg) / len(neg)
    if mean_pos <= mean_neg:
        logger.warning(
            "class means are not separated (label-1 %.4f <= label-0 %.4f); "
            "falling back to tau_b = 0.5",
            mean_pos,
            mean_neg,
        )
        return 0.5
    return (mean_pos + mean_neg) / 2.0
