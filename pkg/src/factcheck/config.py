"""Application configuration and pipeline assembly.

Config files are plain ``key = value`` lines with ``#`` comments; CLI flags
override file values. The FACTCHECK_CONFIG environment variable supplies
the default config path.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from datetime import date
from pathlib import Path

from factcheck.corpus import Corpus, CorpusSplit, load_corpus
from factcheck.encoder import (
    DEFAULT_MAX_IN_FLIGHT,
    DEFAULT_TIMEOUT_S,
    ExternalEncoder,
    HashedEncoder,
    SidecarClient,
    load_word_vectors,
)
from factcheck.errors import ConfigError
from factcheck.featurizer import Vocabulary
from factcheck.index import Threshold, load_index
from factcheck.nn import load_net
from factcheck.pipeline import (
    BaselineTfidfVerifier,
    BaselineWordvecVerifier,
    CheckPipeline,
    ExternalVerifier,
)

logger = logging.getLogger(__name__)

ENV_CONFIG = "FACTCHECK_CONFIG"

ENCODER_KINDS = ("hashed", "wordvec", "external")
VERIFIER_KINDS = ("tfidf", "wordvec", "external")


@dataclass
class AppConfig:
    """Resolved settings for one command invocation."""

    corpus: str = "corpus.jsonl"
    split: str = "split.json"
    encoder: str = "hashed"
    hashed_dim: int = 300
    wordvec_path: str | None = None
    endpoint: str | None = None
    index: str = "index.fcix"
    vocab: str = "vocab.json"
    model_a: str = "model_a.fcnn"
    model_b: str = "model_b.fcnn"
    verifier: str = "tfidf"
    thresholds: str = "thresholds.json"
    k: int = 10
    seed: int = 0
    port: int = 8411


_INT_KEYS = {"hashed_dim", "k", "seed", "port"}


def parse_config_file(path: str | Path) -> dict:
    """Read ``key = value`` lines; unknown keys fail fast."""
    values: dict = {}
    known = set(AppConfig.__dataclass_fields__)
    for line_no, line in enumerate(Path(path).read_text("utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path} line {line_no}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if key not in known:
            raise ConfigError(f"{path} line {line_no}: unknown key {key!r}")
        if key in _INT_KEYS:
            try:
                values[key] = int(value)
            except ValueError:
                raise ConfigError(f"{path} line {line_no}: {key} must be an integer") from None
        else:
            values[key] = value
    return values


def resolve_config(file_values: dict, overrides: dict) -> AppConfig:
    """Merge config-file values with CLI overrides; overrides win."""
    merged = dict(file_values)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    unknown = set(merged) - set(AppConfig.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
    cfg = AppConfig(**merged)
    if cfg.encoder not in ENCODER_KINDS:
        raise ConfigError(f"encoder must be one of {ENCODER_KINDS}, got {cfg.encoder!r}")
    if cfg.verifier not in VERIFIER_KINDS:
        raise ConfigError(f"verifier must be one of {VERIFIER_KINDS}, got {cfg.verifier!r}")
    return cfg


def build_encoder(cfg: AppConfig):
    """Instantiate the configured claim/explanation encoder."""
    if cfg.encoder == "hashed":
        return HashedEncoder(dimension=cfg.hashed_dim)
    if cfg.encoder == "wordvec":
        if not cfg.wordvec_path:
            raise ConfigError("encoder 'wordvec' requires --wordvec-path")
        return load_word_vectors(cfg.wordvec_path)
    if not cfg.endpoint:
        raise ConfigError("encoder 'external' requires --endpoint")
    return ExternalEncoder(sidecar_client(cfg))


def sidecar_client(cfg: AppConfig) -> SidecarClient:
    if not cfg.endpoint:
        raise ConfigError("an external model requires --endpoint")
    return SidecarClient(
        cfg.endpoint, timeout=DEFAULT_TIMEOUT_S, max_in_flight=DEFAULT_MAX_IN_FLIGHT
    )


def build_verifier(cfg: AppConfig, encoder, tau_b: float):
    """Instantiate the configured stage-B verifier."""
    if cfg.verifier == "external":
        return ExternalVerifier(sidecar_client(cfg), tau_b)
    if not Path(cfg.model_b).exists():
        raise ConfigError(f"verifier checkpoint {cfg.model_b} not found (run train-b first)")
    if cfg.verifier == "tfidf":
        vocab_path = Path(cfg.vocab)
        if not vocab_path.exists():
            raise ConfigError(f"vocabulary file {vocab_path} not found (run train-a first)")
        return BaselineTfidfVerifier(load_net(cfg.model_b), Vocabulary.load(vocab_path), tau_b)
    return BaselineWordvecVerifier(load_net(cfg.model_b), encoder, tau_b)


def load_thresholds(path: str | Path) -> tuple[Threshold, float | None]:
    """Read the calibration file: similarity threshold plus optional tau_b."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"thresholds file {path} not found (run calibrate first)")
    try:
        raw = json.loads(path.read_text("utf-8"))
        threshold = Threshold(
            t=float(raw["t"]),
            mean=float(raw["mean"]),
            std=float(raw["std"]),
            n_calibration=int(raw["n_calibration"]),
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: bad thresholds file ({exc})") from None
    tau_b = raw.get("tau_b")
    return threshold, (float(tau_b) if tau_b is not None else None)


def save_thresholds(path: str | Path, threshold: Threshold, tau_b: float | None) -> None:
    payload = {
        "t": threshold.t,
        "mean": threshold.mean,
        "std": threshold.std,
        "n_calibration": threshold.n_calibration,
        "tau_b": tau_b,
    }
    Path(path).write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def load_split_claims(corpus: Corpus, path: str | Path) -> CorpusSplit:
    """Rebuild a CorpusSplit from a saved split file against a loaded corpus."""
    try:
        raw = json.loads(Path(path).read_text("utf-8"))
        by_id = {c.id: c for c in corpus.claims}
        parts = {}
        for name in ("train", "validation", "test"):
            parts[name] = [by_id[cid] for cid in raw[name]]
        return CorpusSplit(
            train=parts["train"],
            validation=parts["validation"],
            test=parts["test"],
            cutoff_train_end=date.fromisoformat(raw["cutoff_train_end"]),
            cutoff_test_start=date.fromisoformat(raw["cutoff_test_start"]),
        )
    except FileNotFoundError:
        raise ConfigError(f"split file {path} not found (run split first)") from None
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: bad split file ({exc})") from None


def save_split(split: CorpusSplit, extras: dict, path: str | Path) -> None:
    payload = {
        "cutoff_train_end": split.cutoff_train_end.isoformat(),
        "cutoff_test_start": split.cutoff_test_start.isoformat(),
        "train": [c.id for c in split.train],
        "validation": [c.id for c in split.validation],
        "test": [c.id for c in split.test],
    }
    payload.update(extras)
    Path(path).write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def build_pipeline(cfg: AppConfig) -> CheckPipeline:
    """Load every run-time artifact and wire the checking pipeline."""
    corpus = load_corpus(cfg.corpus)
    encoder = build_encoder(cfg)
    index = load_index(cfg.index)
    threshold, tau_b = load_thresholds(cfg.thresholds)
    verifier = build_verifier(cfg, encoder, tau_b if tau_b is not None else 0.5)
    return CheckPipeline(
        encoder=encoder,
        index=index,
        threshold=threshold,
        verifier=verifier,
        explanation_texts=corpus.explanation_texts(),
        k=cfg.k,
    )
