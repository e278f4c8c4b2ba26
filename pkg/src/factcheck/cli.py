"""Command-line interface: ingest, split, train, build, calibrate, check, serve.

Every subcommand is a thin wrapper over the library modules; the config
file (or FACTCHECK_CONFIG) supplies defaults and explicit flags win.
Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import fields as dataclass_fields
from datetime import date
from pathlib import Path

from factcheck.config import (
    ENV_CONFIG,
    AppConfig,
    build_encoder,
    build_pipeline,
    build_verifier,
    load_split_claims,
    load_thresholds,
    parse_config_file,
    resolve_config,
    save_split,
    save_thresholds,
)
from factcheck.corpus import (
    generate_stage_a_pairs,
    generate_stage_b_pairs,
    load_corpus,
    load_csv,
    save_corpus,
    temporal_split,
    write_pairs,
)
from factcheck.errors import FactCheckError
from factcheck.evaluation import (
    bench_latency,
    evaluate_pipeline,
    evaluate_retrieval,
    mrr,
    recall_at_k,
)
from factcheck.featurizer import Vocabulary, build_vocabulary, tokenize
from factcheck.index import build_index, calibrate_threshold, load_index, save_index
from factcheck.nn import (
    TrainConfig,
    baseline_tfidf_net,
    baseline_wordvec_net,
    classification_accuracy,
    save_net,
    train,
)
from factcheck.pipeline import (
    calibrate_verifier_boundary,
    check_claim,
    tfidf_pair_features,
    wordvec_pair_features,
)

logger = logging.getLogger(__name__)


class UsageError(Exception):
    """Bad flag combination detected after parsing."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_config_flags(parser, *groups: str) -> None:
    """Attach the shared configuration flags a subcommand needs."""
    parser.add_argument("--config", help=f"config file (default: ${ENV_CONFIG})")
    parser.add_argument("--corpus", help="corpus JSON-lines file")
    parser.add_argument("--seed", type=int, help="seed for every stochastic step")
    if "split" in groups:
        parser.add_argument("--split", help="split file from the split subcommand")
    if "encoder" in groups:
        parser.add_argument(
            "--encoder", choices=("hashed", "wordvec", "external"), help="claim encoder"
        )
        parser.add_argument("--hashed-dim", type=int, help="hashed encoder dimension")
        parser.add_argument("--wordvec-path", help="word-vector text file")
        parser.add_argument("--endpoint", help="external encoder base URL")
    if "index" in groups:
        parser.add_argument("--index", help="embedding index file")
    if "verifier" in groups:
        parser.add_argument(
            "--verifier", choices=("tfidf", "wordvec", "external"), help="verifier model kind"
        )
        parser.add_argument("--model-b", help="verifier checkpoint file")
        parser.add_argument("--vocab", help="vocabulary JSON file")
        parser.add_argument("--thresholds", help="calibration thresholds file")
        parser.add_argument("--k", type=int, help="retrieval depth before thresholding")


def _train_flags(parser) -> None:
    parser.add_argument("--epochs", type=int, default=20)
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--lr", type=float, default=0.001)
    parser.add_argument("--out", help="checkpoint output path")
    parser.add_argument("--pairs-out", help="also export the generated pairs as JSON-lines")


def _resolve(args) -> AppConfig:
    config_path = args.config or os.environ.get(ENV_CONFIG)
    file_values = parse_config_file(config_path) if config_path else {}
    keys = {f.name for f in dataclass_fields(AppConfig)}
    overrides = {k: getattr(args, k, None) for k in keys}
    return resolve_config(file_values, overrides)


def _parse_date(value: str, flag: str) -> date:
    try:
        return date.fromisoformat(value)
    except ValueError:
        raise UsageError(f"{flag} must be an ISO date (YYYY-MM-DD), got {value!r}") from None


def build_parser() -> _Parser:
    parser = _Parser(prog="factcheck", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="import or validate a corpus file")
    _add_config_flags(p)
    p.add_argument("--csv", help="CSV with false_claim,true_claim,explanation,date,source")
    p.add_argument("--out", help="output corpus JSON-lines path")

    p = sub.add_parser("split", help="temporal train/validation/test split")
    _add_config_flags(p, "split")
    p.add_argument("--train-end", required=True, help="last train date (inclusive)")
    p.add_argument("--test-start", required=True, help="first test date (inclusive)")
    p.add_argument("--val-fraction", type=float, default=0.1)
    p.add_argument("--out", help="split output path")

    p = sub.add_parser("train-a", help="train the relevance baseline on stage-A pairs")
    _add_config_flags(p, "split", "encoder", "verifier")
    _train_flags(p)
    p.add_argument("--negatives", type=int, default=1, help="negative pairs per positive")

    p = sub.add_parser("train-b", help="train the alignment verifier on stage-B pairs")
    _add_config_flags(p, "split", "encoder", "verifier")
    _train_flags(p)

    p = sub.add_parser("build-index", help="encode the knowledge base into an index file")
    _add_config_flags(p, "encoder", "index")
    p.add_argument("--out", help="index output path")

    p = sub.add_parser("calibrate", help="fit the similarity threshold and tau_b")
    _add_config_flags(p, "split", "encoder", "index", "verifier")
    p.add_argument("--out", help="thresholds output path")

    p = sub.add_parser("check", help="check one claim against the knowledge base")
    _add_config_flags(p, "encoder", "index", "verifier")
    p.add_argument("claim", help="claim text to check")
    p.add_argument("--json", action="store_true", help="print the verdict as JSON")

    p = sub.add_parser("eval", help="evaluate retrieval and verdict quality on the test split")
    _add_config_flags(p, "split", "encoder", "index", "verifier")
    p.add_argument("--json", action="store_true", help="print the report as JSON")
    p.add_argument("--csv", action="store_true", help="print the report as CSV")
    p.add_argument("--out", help="also write the JSON report to this path")
    p.add_argument(
        "--retrieval-only",
        action="store_true",
        help="skip the verifier and score retrieval alone",
    )

    p = sub.add_parser("bench", help="measure per-claim latency")
    _add_config_flags(p, "split", "encoder", "index", "verifier")
    p.add_argument("--n", type=int, default=100, help="number of timed checks")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("serve", help="run the HTTP checking service")
    _add_config_flags(p, "encoder", "index", "verifier")
    p.add_argument("--port", type=int, help="listen port")
    p.add_argument("--host", default="127.0.0.1")

    return parser


def _cmd_ingest(args, cfg: AppConfig) -> int:
    if args.csv:
        corpus = load_csv(args.csv)
        out = args.out or cfg.corpus
        save_corpus(corpus, out)
        print(f"wrote {out}")
    else:
        corpus = load_corpus(cfg.corpus)
    labeled = sum(1 for c in corpus.claims if c.veracity is not None)
    print(
        f"claims: {len(corpus.claims)} ({labeled} with veracity labels), "
        f"explanations: {len(corpus.explanations)}"
    )
    return 0


def _cmd_split(args, cfg: AppConfig) -> int:
    corpus = load_corpus(cfg.corpus)
    split = temporal_split(
        corpus,
        cutoff_train_end=_parse_date(args.train_end, "--train-end"),
        cutoff_test_start=_parse_date(args.test_start, "--test-start"),
        val_fraction=args.val_fraction,
        seed=cfg.seed,
    )
    out = args.out or cfg.split
    save_split(split, {"val_fraction": args.val_fraction, "seed": cfg.seed}, out)
    print(
        f"train: {len(split.train)}, validation: {len(split.validation)}, "
        f"test: {len(split.test)} -> {out}"
    )
    return 0


def _train_vocabulary(cfg: AppConfig, split, corpus) -> Vocabulary:
    """Vocabulary over the train period: claim texts plus their gold explanations."""
    vocab_path = Path(cfg.vocab)
    if vocab_path.exists():
        return Vocabulary.load(vocab_path)
    train_claims = split.train + split.validation
    docs = [tokenize(c.text) for c in train_claims]
    seen: set[str] = set()
    for c in train_claims:
        if c.gold_explanation_id not in seen:
            seen.add(c.gold_explanation_id)
            docs.append(tokenize(corpus.explanation(c.gold_explanation_id).text))
    vocab = build_vocabulary(docs)
    vocab.save(vocab_path)
    logger.info("built vocabulary of %d terms -> %s", vocab.size, vocab_path)
    return vocab


def _train_common(args, cfg: AppConfig, stage: str) -> int:
    if cfg.verifier == "external":
        raise UsageError(
            f"train-{stage.lower()} trains the baseline nets; "
            "external models are fine-tuned by the sidecar"
        )
    corpus = load_corpus(cfg.corpus)
    split = load_split_claims(corpus, cfg.split)

    if stage == "A":
        pairs = generate_stage_a_pairs(
            split.train, corpus.explanations, seed=cfg.seed, negatives_per_positive=args.negatives
        )
        val_pairs = (
            generate_stage_a_pairs(
                split.validation,
                corpus.explanations,
                seed=cfg.seed,
                negatives_per_positive=args.negatives,
            )
            if split.validation
            else None
        )
        default_out = cfg.model_a
    else:
        pairs = generate_stage_b_pairs(split.train, corpus.explanations)
        val_pairs = generate_stage_b_pairs(split.validation, corpus.explanations) or None
        default_out = cfg.model_b

    if args.pairs_out:
        write_pairs(pairs, args.pairs_out)
        logger.info("exported %d pairs -> %s", len(pairs), args.pairs_out)

    if cfg.verifier == "tfidf":
        vocab = _train_vocabulary(cfg, split, corpus)
        featurize = lambda c, e: tfidf_pair_features(c, e, vocab)
        net = baseline_tfidf_net(seed=cfg.seed)
    else:
        encoder = build_encoder(cfg)
        featurize = lambda c, e: wordvec_pair_features(c, e, encoder)
        net = baseline_wordvec_net(seed=cfg.seed, embedding_dim=encoder.dimension)

    config = TrainConfig(
        lr=args.lr, batch_size=args.batch_size, epochs=args.epochs, seed=cfg.seed
    )
    history = train(net, pairs, featurize, config, validation_pairs=val_pairs)

    out = args.out or default_out
    save_net(net, out)
    train_acc = classification_accuracy(net, pairs, featurize)
    line = (
        f"stage {stage}: {len(pairs)} pairs, {len(history)} epochs, "
        f"final loss {history[-1]:.4f}, train accuracy {train_acc:.3f}"
    )
    if val_pairs:
        line += f", val accuracy {classification_accuracy(net, val_pairs, featurize):.3f}"
    print(line)
    print(f"wrote {out}")
    return 0


def _cmd_build_index(args, cfg: AppConfig) -> int:
    corpus = load_corpus(cfg.corpus)
    encoder = build_encoder(cfg)
    index = build_index(corpus.explanations, encoder)
    out = args.out or cfg.index
    save_index(index, out)
    print(f"indexed {len(index)} explanations (dimension {index.dimension}) -> {out}")
    return 0


def _cmd_calibrate(args, cfg: AppConfig) -> int:
    corpus = load_corpus(cfg.corpus)
    split = load_split_claims(corpus, cfg.split)
    encoder = build_encoder(cfg)
    index = load_index(cfg.index)
    if index.encoder_identity != encoder.descriptor.identity:
        raise FactCheckError(
            f"index was built with encoder {index.encoder_identity!r}, "
            f"not {encoder.descriptor.identity!r}"
        )

    validation_pairs = [(c.text, c.gold_explanation_id) for c in split.validation]
    threshold = calibrate_threshold(index, encoder, validation_pairs)

    tau_b = None
    try:
        verifier = build_verifier(cfg, encoder, 0.5)
        stage_b = generate_stage_b_pairs(split.validation, corpus.explanations)
        tau_b = calibrate_verifier_boundary(verifier, stage_b)
    except (FactCheckError, ValueError) as exc:
        logger.warning("tau_b not calibrated (%s); the pipeline will default to 0.5", exc)

    out = args.out or cfg.thresholds
    save_thresholds(out, threshold, tau_b)
    tau_text = "none" if tau_b is None else f"{tau_b:.4f}"
    print(
        f"threshold t = {threshold.t:.4f} (mean {threshold.mean:.4f}, "
        f"std {threshold.std:.4f}, n = {threshold.n_calibration}), tau_b = {tau_text} -> {out}"
    )
    return 0


def _cmd_check(args, cfg: AppConfig) -> int:
    if not args.claim.strip():
        raise UsageError("claim text is empty")
    pipeline = build_pipeline(cfg)
    verdict = check_claim(pipeline, args.claim)
    if args.json:
        print(json.dumps(verdict.to_json_dict(), sort_keys=True, indent=2))
    else:
        print(f"claim: {verdict.claim}")
        if verdict.p_truth is None:
            print(f"label: {verdict.label}")
        else:
            print(
                f"label: {verdict.label}  (p_truth {verdict.p_truth:.4f} vs "
                f"tau_b {verdict.tau_b:.4f})"
            )
        print(f"similarity threshold t: {verdict.threshold_t:.4f}")
        if verdict.candidates:
            print("candidates:")
            for c in verdict.candidates:
                text = pipeline.explanation_texts[c.explanation_id]
                snippet = text if len(text) <= 100 else text[:97] + "..."
                print(
                    f"  {c.explanation_id}  similarity {c.similarity:.4f}  "
                    f"p_align {c.probability:.4f}"
                )
                print(f"    {snippet}")
        else:
            print("candidates: none above threshold")
    if verdict.error is not None:
        print(f"error: {verdict.error}", file=sys.stderr)
        return 2
    return 0


def _cmd_eval(args, cfg: AppConfig) -> int:
    corpus = load_corpus(cfg.corpus)
    split = load_split_claims(corpus, cfg.split)
    retrieval_only = args.retrieval_only or (
        cfg.verifier != "external" and not Path(cfg.model_b).exists()
    )

    if retrieval_only:
        if not args.retrieval_only:
            logger.warning("no verifier checkpoint at %s; scoring retrieval only", cfg.model_b)
        encoder = build_encoder(cfg)
        index = load_index(cfg.index)
        outcomes, info = evaluate_retrieval(encoder, index, split.test, k=cfg.k)
        payload = {
            "mode": "retrieval",
            "mrr": mrr(outcomes),
            "recall_at_10": recall_at_k(outcomes, 10),
            "n_claims": len(outcomes),
            "n_excluded": info["n_excluded"],
            "latency": info["latency"],
        }
        text = (
            f"MRR        {payload['mrr']:.4f}\n"
            f"Recall@10  {payload['recall_at_10']:.4f}\n"
            f"Claims     {payload['n_claims']}"
        )
        report_json = json.dumps(payload, sort_keys=True, indent=2)
    else:
        pipeline = build_pipeline(cfg)
        report = evaluate_pipeline(pipeline, split.test)
        payload = report.to_json_dict()
        text = report.to_text()
        report_json = report.to_json()
        if args.csv:
            print(report.to_csv())
            if args.out:
                Path(args.out).write_text(report_json + "\n", encoding="utf-8")
            return 0

    if args.json:
        print(report_json)
    else:
        print(text)
    if args.out:
        Path(args.out).write_text(report_json + "\n", encoding="utf-8")
    return 0


def _cmd_bench(args, cfg: AppConfig) -> int:
    pipeline = build_pipeline(cfg)
    claims: list[str]
    if Path(cfg.split).exists():
        corpus = load_corpus(cfg.corpus)
        split = load_split_claims(corpus, cfg.split)
        claims = [c.text for c in (split.test or split.train)]
    else:
        claims = [c.text for c in load_corpus(cfg.corpus).claims]
    if not claims:
        raise FactCheckError("no claims available to benchmark")
    summary = bench_latency(pipeline, claims, repetitions=args.n)
    if args.json:
        print(json.dumps(summary.to_json_dict(), sort_keys=True, indent=2))
    else:
        print(summary.to_text())
    return 0


def _cmd_serve(args, cfg: AppConfig) -> int:
    import uvicorn

    from factcheck.service import create_app

    pipeline = build_pipeline(cfg)  # refuse to start on any load failure
    app = create_app(pipeline)
    port = args.port if args.port is not None else cfg.port
    uvicorn.run(app, host=args.host, port=port, log_level="info")
    return 0


_HANDLERS = {
    "ingest": _cmd_ingest,
    "split": _cmd_split,
    "train-a": lambda args, cfg: _train_common(args, cfg, "A"),
    "train-b": lambda args, cfg: _train_common(args, cfg, "B"),
    "build-index": _cmd_build_index,
    "calibrate": _cmd_calibrate,
    "check": _cmd_check,
    "eval": _cmd_eval,
    "bench": _cmd_bench,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve(args)
        return _HANDLERS[args.command](args, cfg)
    except UsageError as exc:
        print(f"factcheck {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (FactCheckError, ValueError, OSError) as exc:
        print(f"factcheck {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
