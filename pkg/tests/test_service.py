"""HTTP service contract: /check, /health, /metrics, error shapes, concurrency."""

import threading

import numpy as np
import pytest
from fastapi.testclient import TestClient

from factcheck.encoder import HashedEncoder
from factcheck.index import EmbeddingIndex, Threshold
from factcheck.pipeline import CheckPipeline
from factcheck.service import create_app
from tests.conftest import StubVerifier, make_corpus, make_planted_pipeline, random_unit_rows


@pytest.fixture
def client():
    corpus = make_corpus(n_rows=8)
    encoder = HashedEncoder(dimension=32)
    verifier = StubVerifier(lambda c, e: 0.75, tau_b=0.5)
    pipeline = make_planted_pipeline(corpus, encoder, verifier, threshold_t=0.0)
    return TestClient(create_app(pipeline), raise_server_exceptions=False)


class TestCheckEndpoint:
    def test_verdict_shape(self, client):
        response = client.post("/check", json={"claim": "bogus story about topic3"})
        assert response.status_code == 200
        body = response.json()
        assert body["label"] in {"True", "False", "NoEvidence"}
        assert {"claim", "label", "tau_b", "threshold_t", "candidates", "timings_ms"} <= set(body)
        for candidate in body["candidates"]:
            assert set(candidate) == {"id", "similarity", "prob"}

    def test_true_label_with_p_truth(self, client):
        body = client.post("/check", json={"claim": "topic2 remedy2 story"}).json()
        assert body["label"] == "True"
        assert 0.0 <= body["p_truth"] <= 1.0

    def test_empty_claim_is_400(self, client):
        response = client.post("/check", json={"claim": "   "})
        assert response.status_code == 400
        assert response.json() == {"error": "empty claim"}

    def test_missing_field_is_400_with_error_shape(self, client):
        response = client.post("/check", json={"not_claim": "x"})
        assert response.status_code == 400
        assert "error" in response.json()

    def test_no_evidence_omits_p_truth(self):
        corpus = make_corpus(n_rows=4)
        encoder = HashedEncoder(dimension=32)
        pipeline = make_planted_pipeline(corpus, encoder, StubVerifier(0.9), threshold_t=2.0)
        client = TestClient(create_app(pipeline))
        body = client.post("/check", json={"claim": "whatever"}).json()
        assert body["label"] == "NoEvidence"
        assert "p_truth" not in body
        assert body["candidates"] == []

    def test_twenty_concurrent_checks(self, client):
        results = [None] * 20
        def worker(i):
            response = client.post("/check", json={"claim": f"story about topic{i % 8}"})
            results[i] = response

        threads = [threading.Thread(target=worker, args=(i,)) for i in range(20)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        for i, response in enumerate(results):
            assert response is not None and response.status_code == 200
            body = response.json()
            assert body["claim"] == f"story about topic{i % 8}"
            assert body["label"] in {"True", "False", "NoEvidence"}


class TestHealthEndpoint:
    def test_reports_index_size_and_encoder(self, client):
        body = client.get("/health").json()
        assert body["status"] == "ok"
        assert body["index_size"] == 8
        assert body["encoder"].startswith("hashed:")

    def test_knowledge_base_scale_count(self):
        rng = np.random.default_rng(0)
        encoder = HashedEncoder(dimension=32)
        n = 5500
        index = EmbeddingIndex(
            dimension=32,
            ids=[f"exp-{i:05d}" for i in range(n)],
            vectors=random_unit_rows(rng, n, 32).astype("<f4"),
            encoder_identity=encoder.descriptor.identity,
        )
        pipeline = CheckPipeline(
            encoder=encoder,
            index=index,
            threshold=Threshold(0.0, 0.0, 0.0, 2),
            verifier=StubVerifier(0.9),
            explanation_texts={eid: f"text {eid}" for eid in index.ids},
        )
        client = TestClient(create_app(pipeline))
        response = client.get("/health")
        assert response.status_code == 200
        assert response.json()["index_size"] == 5500


class TestMetricsEndpoint:
    def test_counts_and_latency(self, client):
        for i in range(3):
            client.post("/check", json={"claim": f"metric probe {i}"})
        client.get("/health")
        body = client.get("/metrics").json()
        assert body["requests"]["check"] == 3
        assert body["requests"]["health"] == 1
        assert body["check_latency"]["n"] == 3
        assert body["check_latency"]["median_ms"] >= 0.0
        assert body["uptime_s"] >= 0.0

    def test_no_checks_yet(self, client):
        body = client.get("/metrics").json()
        assert body["requests"].get("check") is None
        assert body["check_latency"] is None
