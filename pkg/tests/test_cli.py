"""CLI workflows in a temp workspace: ingest through eval, exit codes, config."""

import json

import pytest

from factcheck.cli import main


@pytest.fixture
def workspace(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("FACTCHECK_CONFIG", raising=False)
    rows = ["false_claim,true_claim,explanation,date,source"]
    for i in range(1, 13):
        day = f"2020-{(i - 1) % 5 + 1:02d}-10"  # train period: Jan..May 10
        rows.append(
            f'"tale {i} says gadget{i} cures virus{i}",'
            f'"report {i} says gadget{i} does not cure virus{i}",'
            f'"checkers found gadget{i} has no effect on virus{i}",{day},newsdesk'
        )
    for i in range(13, 17):
        rows.append(
            f'"tale {i} says gadget{i} cures virus{i}",'
            f'"report {i} says gadget{i} does not cure virus{i}",'
            f'"checkers found gadget{i} has no effect on virus{i}",2020-06-0{i - 12},newsdesk'
        )
    (tmp_path / "raw.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    return tmp_path


def run(*argv):
    return main(list(argv))


def prepare_artifacts(extra_train=()):
    assert run("ingest", "--csv", "raw.csv") == 0
    assert run(
        "split", "--train-end", "2020-05-15", "--test-start", "2020-05-18",
        "--val-fraction", "0.25", "--seed", "7",
    ) == 0
    assert run(
        "train-a", "--verifier", "tfidf", "--epochs", "2", "--seed", "7", *extra_train
    ) == 0
    assert run("build-index", "--encoder", "hashed", "--hashed-dim", "48") == 0
    assert run("train-b", "--verifier", "tfidf", "--epochs", "2", "--seed", "7") == 0
    assert run(
        "calibrate", "--encoder", "hashed", "--hashed-dim", "48", "--verifier", "tfidf"
    ) == 0


class TestWorkflow:
    def test_full_chain_produces_artifacts(self, workspace, capsys):
        prepare_artifacts(extra_train=("--pairs-out", "pairs_a.jsonl"))
        for name in (
            "corpus.jsonl", "split.json", "vocab.json", "model_a.fcnn",
            "model_b.fcnn", "index.fcix", "thresholds.json", "pairs_a.jsonl",
        ):
            assert (workspace / name).exists(), name

        assert run(
            "check", "tale 3 says gadget3 cures virus3",
            "--encoder", "hashed", "--hashed-dim", "48", "--json",
        ) == 0
        out = capsys.readouterr().out
        verdict = json.loads(out[out.index("{"):])
        assert verdict["label"] in {"True", "False", "NoEvidence"}
        assert verdict["threshold_t"] == json.loads(
            (workspace / "thresholds.json").read_text()
        )["t"]

    def test_eval_full_report(self, workspace, capsys):
        prepare_artifacts()
        assert run(
            "eval", "--encoder", "hashed", "--hashed-dim", "48",
            "--verifier", "tfidf", "--json", "--out", "report.json",
        ) == 0
        report = json.loads((workspace / "report.json").read_text())
        assert set(report) >= {"mrr", "recall_at_10", "accuracy", "confusion"}
        assert report["n_claims"] == 8  # 4 test rows x 2 claims
        assert report["mrr"] > 0.0

    def test_eval_retrieval_only_before_training(self, workspace, capsys):
        assert run("ingest", "--csv", "raw.csv") == 0
        assert run(
            "split", "--train-end", "2020-05-15", "--test-start", "2020-05-18",
            "--seed", "3",
        ) == 0
        assert run("build-index", "--encoder", "hashed", "--hashed-dim", "48") == 0
        assert run("eval", "--encoder", "hashed", "--hashed-dim", "48", "--json") == 0
        out = capsys.readouterr().out
        report = json.loads(out[out.index("{"):])
        assert report["mode"] == "retrieval"
        assert 0.0 <= report["mrr"] <= 1.0

    def test_bench_counts_samples(self, workspace, capsys):
        prepare_artifacts()
        assert run(
            "bench", "--n", "7", "--encoder", "hashed", "--hashed-dim", "48", "--json"
        ) == 0
        out = capsys.readouterr().out
        summary = json.loads(out[out.index("{"):])
        assert summary["n_samples"] == 7
        assert summary["total"]["n"] == 7

    def test_wordvec_arch_with_hashed_encoder(self, workspace):
        assert run("ingest", "--csv", "raw.csv") == 0
        assert run(
            "split", "--train-end", "2020-05-15", "--test-start", "2020-05-18",
            "--seed", "2",
        ) == 0
        assert run(
            "train-b", "--verifier", "wordvec", "--encoder", "hashed",
            "--hashed-dim", "32", "--epochs", "2", "--seed", "2",
        ) == 0
        assert (workspace / "model_b.fcnn").exists()


class TestExitCodes:
    def test_unknown_flag_is_usage_error(self, workspace):
        with pytest.raises(SystemExit) as exc:
            run("ingest", "--nonsense")
        assert exc.value.code == 1

    def test_unknown_command_is_usage_error(self, workspace):
        with pytest.raises(SystemExit) as exc:
            run("frobnicate")
        assert exc.value.code == 1

    def test_missing_corpus_is_runtime_error(self, workspace):
        assert run("build-index", "--corpus", "missing.jsonl") == 2

    def test_empty_claim_is_usage_error(self, workspace):
        prepare_artifacts()
        assert run("check", "   ", "--encoder", "hashed", "--hashed-dim", "48") == 1

    def test_check_before_calibrate_is_runtime_error(self, workspace):
        assert run("ingest", "--csv", "raw.csv") == 0
        assert run(
            "split", "--train-end", "2020-05-15", "--test-start", "2020-05-18"
        ) == 0
        assert run("build-index", "--encoder", "hashed", "--hashed-dim", "48") == 0
        assert run("check", "some claim", "--encoder", "hashed", "--hashed-dim", "48") == 2

    def test_train_with_external_verifier_is_usage_error(self, workspace):
        assert run("ingest", "--csv", "raw.csv") == 0
        assert run(
            "split", "--train-end", "2020-05-15", "--test-start", "2020-05-18"
        ) == 0
        assert run("train-a", "--verifier", "external") == 1

    def test_serve_refuses_to_start_without_index(self, workspace):
        assert run("serve", "--encoder", "hashed") == 2

    def test_encoder_mismatch_detected(self, workspace):
        prepare_artifacts()
        # index was built with dim 48; querying with dim 32 must fail loudly
        assert run(
            "check", "tale 1", "--encoder", "hashed", "--hashed-dim", "32"
        ) == 2


class TestConfigFile:
    def test_config_supplies_defaults_and_flags_win(self, workspace, capsys):
        (workspace / "fc.conf").write_text(
            "# workspace config\n"
            "encoder = hashed\n"
            "hashed_dim = 48\n"
            "seed = 7\n",
            encoding="utf-8",
        )
        assert run("ingest", "--csv", "raw.csv", "--config", "fc.conf") == 0
        assert run(
            "split", "--train-end", "2020-05-15", "--test-start", "2020-05-18",
            "--val-fraction", "0.25", "--config", "fc.conf",
        ) == 0
        assert run("train-a", "--config", "fc.conf", "--epochs", "2") == 0
        assert run("build-index", "--config", "fc.conf") == 0
        # flag overrides config: dim 16 disagrees with the dim-48 index
        assert run(
            "train-b", "--config", "fc.conf", "--epochs", "2"
        ) == 0
        assert run("calibrate", "--config", "fc.conf") == 0
        assert run("check", "tale 2 gadget2", "--config", "fc.conf") == 0
        assert run(
            "check", "tale 2 gadget2", "--config", "fc.conf", "--hashed-dim", "16"
        ) == 2

    def test_env_var_supplies_config_path(self, workspace, monkeypatch, capsys):
        (workspace / "env.conf").write_text("hashed_dim = 48\n", encoding="utf-8")
        monkeypatch.setenv("FACTCHECK_CONFIG", str(workspace / "env.conf"))
        assert run("ingest", "--csv", "raw.csv") == 0
        assert run("build-index", "--encoder", "hashed") == 0
        out = capsys.readouterr().out
        assert "dimension 48" in out

    def test_bad_config_key_rejected(self, workspace):
        (workspace / "bad.conf").write_text("no_such_key = 1\n", encoding="utf-8")
        assert run("ingest", "--csv", "raw.csv", "--config", "bad.conf") == 2
