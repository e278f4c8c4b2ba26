"""Shared fixtures: toy corpora and a hermetic checking pipeline."""

from __future__ import annotations

from datetime import date

import numpy as np
import pytest

from factcheck.corpus import ClaimRecord, Corpus, ExplanationRecord
from factcheck.encoder import HashedEncoder
from factcheck.index import Threshold, build_index
from factcheck.pipeline import CheckPipeline


def make_corpus(n_rows: int = 6, with_true_claims: bool = True) -> Corpus:
    """Synthetic corpus: distinct topic words keep every text unique."""
    explanations = []
    claims = []
    for i in range(1, n_rows + 1):
        exp_id = f"exp-{i:05d}"
        day = date(2020, 1, (i % 27) + 1)
        explanations.append(
            ExplanationRecord(
                id=exp_id,
                text=f"verified explanation number {i} about topic{i} and remedy{i}",
                date=day,
                source="fixture",
            )
        )
        claims.append(
            ClaimRecord(
                id=f"claim-{i:05d}-f",
                text=f"bogus story number {i} claims topic{i} cures everything",
                veracity=False,
                gold_explanation_id=exp_id,
                date=day,
            )
        )
        if with_true_claims:
            claims.append(
                ClaimRecord(
                    id=f"claim-{i:05d}-t",
                    text=f"accurate report number {i} notes topic{i} remains unproven",
                    veracity=True,
                    gold_explanation_id=exp_id,
                    date=day,
                )
            )
    return Corpus(claims=claims, explanations=explanations)


class StubVerifier:
    """Fixed or rule-based alignment probabilities for pipeline tests."""

    kind = "stub"

    def __init__(self, probability=1.0, tau_b=0.5):
        self._probability = probability
        self.tau_b = tau_b

    def probabilities(self, pairs):
        if callable(self._probability):
            return [self._probability(c, e) for c, e in pairs]
        return [self._probability] * len(pairs)


@pytest.fixture
def toy_corpus() -> Corpus:
    return make_corpus()


@pytest.fixture
def hashed_encoder() -> HashedEncoder:
    return HashedEncoder(dimension=32)


def make_planted_pipeline(
    corpus: Corpus,
    encoder: HashedEncoder,
    verifier=None,
    threshold_t: float = -1.0,
    k: int = 10,
) -> CheckPipeline:
    """Pipeline over a prebuilt index with a permissive default threshold."""
    index = build_index(corpus.explanations, encoder)
    return CheckPipeline(
        encoder=encoder,
        index=index,
        threshold=Threshold(t=threshold_t, mean=0.0, std=0.0, n_calibration=2),
        verifier=verifier or StubVerifier(),
        explanation_texts=corpus.explanation_texts(),
        k=k,
    )


def random_unit_rows(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    vectors = rng.standard_normal((n, dim))
    return vectors / np.linalg.norm(vectors, axis=1, keepdims=True)
