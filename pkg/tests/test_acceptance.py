"""Acceptance gate: one test per release criterion, each printing a PASS line.

Budgets and tolerances are pinned here, not calibrated elsewhere. "Exact"
comparisons on derived floating-point fixtures use 1e-12.
"""

import json
import time
from datetime import date

import numpy as np
import pytest

from factcheck.cli import main
from factcheck.corpus import ClaimRecord, Corpus, ExplanationRecord, PairExample
from factcheck.encoder import EncoderDescriptor, HashedEncoder
from factcheck.evaluation import (
    RankingOutcome,
    accuracy,
    evaluate_retrieval,
    mrr,
    recall_at_10,
)
from factcheck.featurizer import build_vocabulary, tokenize
from factcheck.index import (
    EmbeddingIndex,
    calibrate_threshold,
    load_index,
    query_top_k,
    save_index,
)
from factcheck.nn import (
    TrainConfig,
    baseline_tfidf_net,
    baseline_wordvec_net,
    classification_accuracy,
    loss_and_grad,
    train,
)
from factcheck.pipeline import (
    LABEL_FALSE,
    LABEL_NO_EVIDENCE,
    LABEL_TRUE,
    Verdict,
    check_claim,
    tfidf_pair_features,
)
from tests.conftest import StubVerifier, make_planted_pipeline, random_unit_rows


def report(name: str) -> None:
    print(f"ACCEPTANCE PASS: {name}")


class TestMetricOracleEquivalence:
    """MRR, Recall@10, accuracy vs brute force on 100 random fixtures, 1e-12."""

    def test_metric_oracle_equivalence(self):
        started = time.perf_counter()
        rng = np.random.default_rng(2024)
        for fixture in range(100):
            n = int(rng.integers(1, 1001))
            ranks = [
                None if rng.uniform() < 0.25 else int(rng.integers(1, 30)) for _ in range(n)
            ]
            outcomes = [RankingOutcome(f"c{i}", f"e{i}", r) for i, r in enumerate(ranks)]

            oracle_mrr = 0.0
            oracle_recall = 0
            for r in ranks:
                if r is not None:
                    oracle_mrr += 1.0 / r
                    if r <= 10:
                        oracle_recall += 1
            assert abs(mrr(outcomes) - oracle_mrr / n) <= 1e-12
            assert abs(recall_at_10(outcomes) - oracle_recall / n) <= 1e-12

            labels = [LABEL_TRUE, LABEL_FALSE, LABEL_NO_EVIDENCE]
            verdicts = [
                Verdict("x", (), None, labels[int(rng.integers(0, 3))], 0.5, 0.0)
                for _ in range(n)
            ]
            gold = [bool(rng.integers(0, 2)) for _ in range(n)]
            oracle_correct = 0
            oracle_scored = 0
            for v, g in zip(verdicts, gold):
                if v.label == LABEL_NO_EVIDENCE:
                    continue
                oracle_scored += 1
                if (v.label == LABEL_TRUE) == g:
                    oracle_correct += 1
            score, confusion = accuracy(verdicts, gold)
            expected = oracle_correct / oracle_scored if oracle_scored else 0.0
            assert abs(score - expected) <= 1e-12
            assert confusion.no_evidence == n - oracle_scored

        elapsed = time.perf_counter() - started
        assert elapsed < 10.0, f"metric oracle run took {elapsed:.1f}s"
        report("metric oracle equivalence (100 fixtures, 1e-12)")


class TestGradientCorrectness:
    """Both baseline nets vs central finite differences, h=1e-5, rel err < 1e-4."""

    @staticmethod
    def sampled_relative_error(net, x, y, rng, coords_per_tensor=8, h=1e-5):
        _, analytic = loss_and_grad(net, x, y)
        a_sample = []
        f_sample = []
        params = net.parameters()
        for p, a in zip(params, analytic):
            flat = p.ravel()
            size = flat.size
            count = min(coords_per_tensor, size)
            coords = rng.choice(size, size=count, replace=False)
            for c in coords:
                original = flat[c]
                flat[c] = original + h
                up, _ = loss_and_grad(net, x, y)
                flat[c] = original - h
                down, _ = loss_and_grad(net, x, y)
                flat[c] = original
                f_sample.append((up - down) / (2.0 * h))
                a_sample.append(a.ravel()[c])
        a_vec = np.asarray(a_sample)
        f_vec = np.asarray(f_sample)
        denom = max(np.linalg.norm(a_vec), np.linalg.norm(f_vec), 1e-12)
        return np.linalg.norm(a_vec - f_vec) / denom

    def test_gradient_correctness(self):
        started = time.perf_counter()
        for seed in range(10):
            rng = np.random.default_rng(5000 + seed)

            tfidf = baseline_tfidf_net(seed=seed)
            x = rng.normal(size=(4, 10001))
            y = rng.integers(0, 2, size=4)
            err = self.sampled_relative_error(tfidf, x, y, rng)
            assert err < 1e-4, f"tfidf net seed {seed}: relative error {err:.2e}"

            wordvec = baseline_wordvec_net(seed=seed)
            x = rng.normal(size=(4, 600))
            y = rng.integers(0, 2, size=4)
            err = self.sampled_relative_error(wordvec, x, y, rng)
            assert err < 1e-4, f"wordvec net seed {seed}: relative error {err:.2e}"

        elapsed = time.perf_counter() - started
        assert elapsed < 30.0, f"gradient check took {elapsed:.1f}s"
        report("gradient correctness (10 seeds, both baseline nets, <1e-4)")


class TestPlantedEvidenceRetrieval:
    """Claim text equals gold explanation text: MRR and Recall@10 exactly 1.0."""

    def test_planted_evidence_retrieval(self):
        started = time.perf_counter()
        texts = [f"planted verified statement {i} about subject{i}" for i in range(40)]
        corpus = Corpus(
            claims=[
                ClaimRecord(f"c{i}", text, True, f"e{i}", date(2020, 6, 1))
                for i, text in enumerate(texts)
            ],
            explanations=[
                ExplanationRecord(id=f"e{i}", text=text) for i, text in enumerate(texts)
            ],
        )
        encoder = HashedEncoder(dimension=300)
        pipeline = make_planted_pipeline(corpus, encoder, StubVerifier(1.0))
        outcomes, _ = evaluate_retrieval(encoder, pipeline.index, corpus.claims, k=10)
        assert mrr(outcomes) == 1.0
        assert recall_at_10(outcomes) == 1.0

        elapsed = time.perf_counter() - started
        assert elapsed < 5.0, f"planted retrieval took {elapsed:.1f}s"
        report("planted-evidence retrieval (MRR = Recall@10 = 1.0 exactly)")


class TestBaselineLearnability:
    """TF-IDF baseline reaches >= 0.95 stage-A pairing accuracy within 20 epochs."""

    @staticmethod
    def two_topic_pairs(n_pairs=200, seed=11):
        health = [
            "vaccine", "immunity", "antibody", "trial",
            "dose", "booster", "clinic", "symptom",
        ]
        space = [
            "asteroid", "comet", "orbit", "telescope",
            "galaxy", "nebula", "rover", "lander",
        ]
        rng = np.random.default_rng(seed)

        def sentence(pool):
            words = rng.choice(pool, size=8, replace=True)
            return " ".join(str(w) for w in words)

        pairs = []
        for i in range(n_pairs):
            label = i % 2
            if label == 1:
                pool = health if i % 4 == 1 else space
                pairs.append(PairExample(sentence(pool), sentence(pool), 1, "A"))
            else:
                a, b = (health, space) if i % 4 == 0 else (space, health)
                pairs.append(PairExample(sentence(a), sentence(b), 0, "A"))
        return pairs

    def test_baseline_learnability(self):
        started = time.perf_counter()
        pairs = self.two_topic_pairs()
        assert len(pairs) == 200
        docs = [tokenize(p.claim_text) for p in pairs] + [
            tokenize(p.explanation_text) for p in pairs
        ]
        vocab = build_vocabulary(docs, stop_words=set())
        featurize = lambda c, e: tfidf_pair_features(c, e, vocab)

        net = baseline_tfidf_net(seed=0)
        train(net, pairs, featurize, TrainConfig(lr=0.001, batch_size=32, epochs=20, seed=0))
        acc = classification_accuracy(net, pairs, featurize)
        assert acc >= 0.95, f"stage-A pairing accuracy {acc:.3f} < 0.95"

        elapsed = time.perf_counter() - started
        assert elapsed < 60.0, f"learnability run took {elapsed:.1f}s"
        report(f"baseline end-to-end learnability (accuracy {acc:.3f} >= 0.95)")


class _TwoClaimEncoder:
    """Exact-similarity fixture: gold stored as [1,0]; claims on the unit circle."""

    dimension = 2
    descriptor = EncoderDescriptor("fixed", 2, "fixed:calibration")

    _vectors = {
        "claim a": np.array([0.9, np.sqrt(1.0 - 0.9 * 0.9)]),
        "claim b": np.array([0.7, np.sqrt(1.0 - 0.7 * 0.7)]),
    }

    def encode(self, text):
        return self._vectors[text]

    def encode_batch(self, texts):
        return np.stack([self.encode(t) for t in texts])


class TestCalibrationArithmetic:
    """t = mean - std over {0.9, 0.7} is 0.7; p_truth over {0.9, 0.3, 0.6} is 0.6."""

    def test_threshold_arithmetic(self):
        index = EmbeddingIndex(
            dimension=2,
            ids=["gold"],
            vectors=np.array([[1.0, 0.0]], dtype="<f4"),
            encoder_identity="fixed:calibration",
        )
        threshold = calibrate_threshold(
            index, _TwoClaimEncoder(), [("claim a", "gold"), ("claim b", "gold")]
        )
        assert threshold.mean == pytest.approx(0.8, abs=1e-12)
        assert threshold.std == pytest.approx(0.1, abs=1e-12)
        assert threshold.t == pytest.approx(0.7, abs=1e-12)
        report("calibration arithmetic: t({0.9, 0.7}) = 0.7")

    def test_probability_aggregation(self):
        explanations = [
            ExplanationRecord(id="e1", text="first explanation"),
            ExplanationRecord(id="e2", text="second explanation"),
            ExplanationRecord(id="e3", text="third explanation"),
        ]
        corpus = Corpus(claims=[], explanations=explanations)
        probs = {"first explanation": 0.9, "second explanation": 0.3, "third explanation": 0.6}
        verifier = StubVerifier(lambda c, e: probs[e], tau_b=0.5)
        pipeline = make_planted_pipeline(corpus, HashedEncoder(dimension=32), verifier)
        verdict = check_claim(pipeline, "any claim text")
        assert len(verdict.candidates) == 3
        assert verdict.p_truth == pytest.approx(0.6, abs=1e-12)
        assert verdict.label == LABEL_TRUE
        report("calibration arithmetic: p_truth({0.9, 0.3, 0.6}) = 0.6")


class TestDeterminism:
    """The ingest -> split -> train-a -> build-index -> eval chain is replayable."""

    CSV_HEADER = "false_claim,true_claim,explanation,date,source"

    @classmethod
    def write_csv(cls, path):
        rows = [cls.CSV_HEADER]
        for i in range(1, 25):
            day = f"2020-{(i - 1) % 5 + 1:02d}-{(i % 27) + 1:02d}"
            rows.append(
                f'"story {i} claims agent{i} stops strain{i}",'
                f'"review {i} finds agent{i} useless against strain{i}",'
                f'"fact checkers report agent{i} does nothing to strain{i}",{day},newsdesk'
            )
        for i in range(25, 31):
            rows.append(
                f'"story {i} claims agent{i} stops strain{i}",'
                f'"review {i} finds agent{i} useless against strain{i}",'
                f'"fact checkers report agent{i} does nothing to strain{i}",'
                f"2020-06-{i - 24:02d},newsdesk"
            )
        path.write_text("\n".join(rows) + "\n", encoding="utf-8")

    @classmethod
    def run_chain(cls, workdir, monkeypatch):
        monkeypatch.chdir(workdir)
        cls.write_csv(workdir / "raw.csv")
        steps = [
            ["ingest", "--csv", "raw.csv"],
            ["split", "--train-end", "2020-05-15", "--test-start", "2020-05-18",
             "--val-fraction", "0.25", "--seed", "13"],
            ["train-a", "--verifier", "tfidf", "--epochs", "3", "--seed", "13"],
            ["build-index", "--encoder", "hashed", "--hashed-dim", "64"],
            # the minimal chain ends here: eval scores retrieval only
            ["eval", "--encoder", "hashed", "--hashed-dim", "64",
             "--retrieval-only", "--out", "report_retrieval.json"],
            ["train-b", "--verifier", "tfidf", "--epochs", "3", "--seed", "13"],
            ["calibrate", "--encoder", "hashed", "--hashed-dim", "64",
             "--verifier", "tfidf"],
            ["eval", "--encoder", "hashed", "--hashed-dim", "64", "--verifier", "tfidf",
             "--out", "report.json"],
        ]
        for step in steps:
            assert main(step) == 0, f"step failed: {step}"

    def test_determinism(self, tmp_path, monkeypatch):
        for name in ("run1", "run2"):
            workdir = tmp_path / name
            workdir.mkdir()
            self.run_chain(workdir, monkeypatch)

        byte_identical = [
            "corpus.jsonl", "split.json", "vocab.json", "model_a.fcnn",
            "model_b.fcnn", "index.fcix", "thresholds.json",
        ]
        for name in byte_identical:
            first = (tmp_path / "run1" / name).read_bytes()
            second = (tmp_path / "run2" / name).read_bytes()
            assert first == second, f"{name} differs between runs"

        for report_name in ("report.json", "report_retrieval.json"):
            reports = []
            for name in ("run1", "run2"):
                raw = json.loads((tmp_path / name / report_name).read_text())
                raw.pop("latency", None)  # timings excluded by the criterion
                reports.append(json.dumps(raw, sort_keys=True))
            assert reports[0] == reports[1], f"{report_name} differs between runs"
        report("determinism: replayed chain artifacts byte-identical")


class TestRetrievalLatency:
    """Top-10 over 5,500 x 300-d: median < 10 ms, p95 < 25 ms, single thread."""

    def test_retrieval_latency(self):
        rng = np.random.default_rng(7)
        n, dim = 5500, 300
        index = EmbeddingIndex(
            dimension=dim,
            ids=[f"exp-{i:05d}" for i in range(n)],
            vectors=random_unit_rows(rng, n, dim).astype("<f4"),
            encoder_identity="bench:v1",
        )
        queries = rng.standard_normal((220, dim))
        for q in queries[:20]:  # warm-up
            query_top_k(index, q, k=10)

        samples_ms = []
        for q in queries[20:]:
            started = time.perf_counter()
            hits = query_top_k(index, q, k=10)
            samples_ms.append((time.perf_counter() - started) * 1000.0)
            assert len(hits) == 10
        median = float(np.median(samples_ms))
        p95 = float(np.percentile(samples_ms, 95))
        assert median < 10.0, f"median retrieval {median:.2f} ms >= 10 ms"
        assert p95 < 25.0, f"p95 retrieval {p95:.2f} ms >= 25 ms"
        report(f"retrieval latency (median {median:.2f} ms, p95 {p95:.2f} ms)")


class TestIndexRoundTrip:
    """save -> load -> query is bit-identical on 20 random indices."""

    def test_index_round_trip(self, tmp_path):
        rng = np.random.default_rng(404)
        for case in range(20):
            n = int(rng.integers(1, 300))
            dim = int(rng.integers(2, 64))
            vectors = random_unit_rows(rng, n, dim).astype("<f4")
            zero_rows = rng.choice(n, size=max(0, n // 10), replace=False)
            vectors[zero_rows] = 0.0
            index = EmbeddingIndex(
                dimension=dim,
                ids=[f"exp-{case}-{i}-α" for i in range(n)],
                vectors=vectors,
                encoder_identity=f"roundtrip:{case}",
            )
            path = tmp_path / f"case{case}.fcix"
            save_index(index, path)
            loaded = load_index(path)
            assert loaded.vectors.tobytes() == index.vectors.tobytes()
            assert loaded.ids == index.ids
            for _ in range(3):
                q = rng.standard_normal(dim)
                k = int(rng.integers(1, 12))
                assert query_top_k(loaded, q, k=k) == query_top_k(index, q, k=k)
        report("index round-trip (20 random indices, bit-identical)")
