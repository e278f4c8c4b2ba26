"""Ranking and classification metrics plus the evaluation and benchmark harness.

MRR averages the reciprocal rank of each claim's gold explanation (an
unretrieved gold contributes 0); Recall@10 is the fraction of claims whose
gold appears in the top 10. Verdict accuracy excludes NoEvidence claims
from the denominator and reports them separately.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from factcheck.corpus import ClaimRecord
from factcheck.index import query_top_k
from factcheck.pipeline import (
    LABEL_FALSE,
    LABEL_NO_EVIDENCE,
    LABEL_TRUE,
    CheckPipeline,
    Verdict,
    check_claim,
    verdict_from_hits,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RankingOutcome:
    """Rank of the gold explanation in a claim's scored list; None if absent."""

    claim_id: str
    gold_explanation_id: str
    rank: int | None

    def __post_init__(self):
        if self.rank is not None and self.rank < 1:
            raise ValueError("rank must be >= 1 or None")


def mrr(outcomes: Sequence[RankingOutcome]) -> float:
    """Mean reciprocal rank over all claims."""
    if not outcomes:
        raise ValueError("cannot compute MRR over zero outcomes")
    return sum(1.0 / o.rank for o in outcomes if o.rank is not None) / len(outcomes)


def recall_at_k(outcomes: Sequence[RankingOutcome], k: int = 10) -> float:
    """Fraction of claims whose gold explanation sits within the top k."""
    if not outcomes:
        raise ValueError("cannot compute recall over zero outcomes")
    hits = sum(1 for o in outcomes if o.rank is not None and o.rank <= k)
    return hits / len(outcomes)


def recall_at_10(outcomes: Sequence[RankingOutcome]) -> float:
    return recall_at_k(outcomes, 10)


@dataclass(frozen=True)
class Confusion:
    """Binary confusion counts with NoEvidence tracked outside the square."""

    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0
    no_evidence: int = 0

    def to_json_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "tn": self.tn,
            "fn": self.fn,
            "no_evidence": self.no_evidence,
        }


def accuracy(
    verdicts: Sequence[Verdict], gold_labels: Sequence[bool]
) -> tuple[float, Confusion]:
    """Verdict accuracy against gold veracity labels.

    NoEvidence verdicts are excluded from the denominator; accuracy is 0.0
    when every claim lacked evidence.
    """
    if len(verdicts) != len(gold_labels):
        raise ValueError(
            f"verdicts ({len(verdicts)}) and gold labels ({len(gold_labels)}) "
            "disagree in length"
        )
    tp = fp = tn = fn = no_evidence = 0
    for verdict, gold in zip(verdicts, gold_labels):
        if verdict.label == LABEL_NO_EVIDENCE:
            no_evidence += 1
        elif verdict.label == LABEL_TRUE:
            if gold:
                tp += 1
            else:
                fp += 1
        elif verdict.label == LABEL_FALSE:
            if gold:
                fn += 1
            else:
                tn += 1
        else:
            raise ValueError(f"unknown verdict label {verdict.label!r}")
    scored = len(verdicts) - no_evidence
    score = (tp + tn) / scored if scored > 0 else 0.0
    return score, Confusion(tp, fp, tn, fn, no_evidence)


def _summary(samples_ms: Sequence[float]) -> dict:
    arr = np.asarray(samples_ms, dtype=float)
    return {
        "median_ms": float(np.median(arr)),
        "p95_ms": float(np.percentile(arr, 95)),
        "n": int(arr.size),
    }


@dataclass
class EvalReport:
    """Aggregate metrics for one evaluation run."""

    mrr: float
    recall_at_10: float
    accuracy: float
    n_claims: int
    confusion: Confusion
    n_excluded: int = 0
    n_errors: int = 0
    latency: dict = field(default_factory=dict)

    def to_json_dict(self, include_timings: bool = True) -> dict:
        out = {
            "mrr": self.mrr,
            "recall_at_10": self.recall_at_10,
            "accuracy": self.accuracy,
            "n_claims": self.n_claims,
            "confusion": self.confusion.to_json_dict(),
            "n_excluded": self.n_excluded,
            "n_errors": self.n_errors,
        }
        if include_timings:
            out["latency"] = self.latency
        return out

    def to_json(self, include_timings: bool = True) -> str:
        return json.dumps(
            self.to_json_dict(include_timings), sort_keys=True, indent=2
        )

    def to_text(self) -> str:
        c = self.confusion
        rows = [
            ("MRR", f"{self.mrr:.4f}"),
            ("Recall@10", f"{self.recall_at_10:.4f}"),
            ("Accuracy", f"{self.accuracy:.4f}"),
            ("Claims", str(self.n_claims)),
            ("Confusion tp/fp/tn/fn", f"{c.tp}/{c.fp}/{c.tn}/{c.fn}"),
            ("NoEvidence", str(c.no_evidence)),
            ("Errors", str(self.n_errors)),
            ("Excluded (gold missing)", str(self.n_excluded)),
        ]
        width = max(len(name) for name, _ in rows)
        lines = [f"{name:<{width}}  {value}" for name, value in rows]
        for stage, summary in sorted(self.latency.items()):
            lines.append(
                f"{stage + ' latency':<{width}}  median {summary['median_ms']:.3f} ms, "
                f"p95 {summary['p95_ms']:.3f} ms"
            )
        return "\n".join(lines)

    def to_csv(self) -> str:
        c = self.confusion
        header = "mrr,recall_at_10,accuracy,n_claims,tp,fp,tn,fn,no_evidence,n_errors,n_excluded"
        row = (
            f"{self.mrr},{self.recall_at_10},{self.accuracy},{self.n_claims},"
            f"{c.tp},{c.fp},{c.tn},{c.fn},{c.no_evidence},{self.n_errors},{self.n_excluded}"
        )
        return header + "\n" + row


def evaluate_retrieval(
    encoder, index, test_claims: Sequence[ClaimRecord], k: int = 10
) -> tuple[list[RankingOutcome], dict]:
    """Rank every claim's gold explanation in the unfiltered top-k list.

    Stands alone so retrieval quality can be measured before any verifier
    exists. Claims whose gold explanation is missing from the index are
    excluded with a warning; the second return value reports counts and
    stage latency summaries.
    """
    indexed = set(index.ids)
    usable = []
    n_excluded = 0
    for claim in test_claims:
        if claim.gold_explanation_id not in indexed:
            logger.warning(
                "claim %s: gold explanation %s not in the knowledge base; excluded",
                claim.id,
                claim.gold_explanation_id,
            )
            n_excluded += 1
        else:
            usable.append(claim)
    if not usable:
        raise ValueError("no evaluable claims (gold explanations missing from index)")

    outcomes = []
    encode_ms: list[float] = []
    retrieve_ms: list[float] = []
    for claim in usable:
        started = time.perf_counter()
        embedding = encoder.encode(claim.text)
        encode_ms.append((time.perf_counter() - started) * 1000.0)

        started = time.perf_counter()
        hits = query_top_k(index, embedding, k=k)
        retrieve_ms.append((time.perf_counter() - started) * 1000.0)

        rank = next(
            (h.rank for h in hits if h.explanation_id == claim.gold_explanation_id), None
        )
        outcomes.append(RankingOutcome(claim.id, claim.gold_explanation_id, rank))

    info = {
        "n_excluded": n_excluded,
        "latency": {"encode": _summary(encode_ms), "retrieve": _summary(retrieve_ms)},
    }
    return outcomes, info


def evaluate_pipeline(
    pipeline: CheckPipeline, test_claims: Sequence[ClaimRecord]
) -> EvalReport:
    """Score retrieval and verdict quality over a labeled claim list.

    Ranking outcomes come from the unfiltered top-k lists; accuracy comes
    from the full thresholded pipeline. Claims whose gold explanation is
    missing from the knowledge base are excluded with a warning, and claims
    without veracity labels are likewise excluded.
    """
    usable: list[ClaimRecord] = []
    n_excluded = 0
    indexed = set(pipeline.index.ids)
    for claim in test_claims:
        if claim.gold_explanation_id not in indexed:
            logger.warning(
                "claim %s: gold explanation %s not in the knowledge base; excluded",
                claim.id,
                claim.gold_explanation_id,
            )
            n_excluded += 1
        elif claim.veracity is None:
            logger.warning("claim %s: no veracity label; excluded", claim.id)
            n_excluded += 1
        else:
            usable.append(claim)
    if not usable:
        raise ValueError("no evaluable claims (missing gold explanations or labels)")

    outcomes: list[RankingOutcome] = []
    verdicts: list[Verdict] = []
    stage_samples: dict[str, list[float]] = {"encode": [], "retrieve": [], "verify": []}
    n_errors = 0
    for claim in usable:
        try:
            started = time.perf_counter()
            embedding = pipeline.encoder.encode(claim.text)
            encode_ms = (time.perf_counter() - started) * 1000.0

            started = time.perf_counter()
            hits = query_top_k(pipeline.index, embedding, k=pipeline.k)
            retrieve_ms = (time.perf_counter() - started) * 1000.0

            rank = next(
                (h.rank for h in hits if h.explanation_id == claim.gold_explanation_id),
                None,
            )
            timings = {"encode": encode_ms, "retrieve": retrieve_ms}
            verdict = verdict_from_hits(pipeline, claim.text, hits, timings)
        except Exception as exc:
            logger.warning("claim %s failed: %s", claim.id, exc)
            n_errors += 1
            outcomes.append(RankingOutcome(claim.id, claim.gold_explanation_id, None))
            verdicts.append(
                Verdict(
                    claim=claim.text,
                    candidates=(),
                    p_truth=None,
                    label=LABEL_NO_EVIDENCE,
                    tau_b=pipeline.verifier.tau_b,
                    threshold_t=pipeline.threshold.t,
                    error=str(exc),
                )
            )
            continue
        if verdict.error is not None:
            n_errors += 1
        outcomes.append(RankingOutcome(claim.id, claim.gold_explanation_id, rank))
        verdicts.append(verdict)
        for stage in stage_samples:
            if stage in verdict.timings_ms:
                stage_samples[stage].append(verdict.timings_ms[stage])

    score, confusion = accuracy(verdicts, [bool(c.veracity) for c in usable])
    latency = {
        stage: _summary(samples) for stage, samples in stage_samples.items() if samples
    }
    return EvalReport(
        mrr=mrr(outcomes),
        recall_at_10=recall_at_k(outcomes, 10),
        accuracy=score,
        n_claims=len(usable),
        confusion=confusion,
        n_excluded=n_excluded,
        n_errors=n_errors,
        latency=latency,
    )


def peak_memory_mb() -> float | None:
    """Peak resident set size in MiB, or None where the platform hides it."""
    try:
        import resource
    except ImportError:
        return None
    usage = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    # Linux reports KiB; macOS reports bytes.
    import sys

    return usage / 1024.0 if sys.platform != "darwin" else usage / (1024.0 * 1024.0)


@dataclass
class LatencySummary:
    """Per-stage wall-clock summaries over a benchmark run."""

    stages: dict[str, dict]
    total: dict
    n_samples: int
    peak_memory_mb: float | None

    def to_json_dict(self) -> dict:
        return {
            "stages": self.stages,
            "total": self.total,
            "n_samples": self.n_samples,
            "peak_memory_mb": self.peak_memory_mb,
        }

    def to_text(self) -> str:
        lines = [f"{'stage':<10}  {'median':>12}  {'p95':>12}  {'n':>6}"]
        for stage in sorted(self.stages):
            s = self.stages[stage]
            lines.append(
                f"{stage:<10}  {s['median_ms']:>9.3f} ms  {s['p95_ms']:>9.3f} ms  {s['n']:>6}"
            )
        lines.append(
            f"{'total':<10}  {self.total['median_ms']:>9.3f} ms  "
            f"{self.total['p95_ms']:>9.3f} ms  {self.total['n']:>6}"
        )
        mem = "unavailable" if self.peak_memory_mb is None else f"{self.peak_memory_mb:.1f} MB"
        lines.append(f"peak resident memory: {mem}")
        return "\n".join(lines)


def bench_latency(
    pipeline: CheckPipeline, claims: Sequence[str], repetitions: int
) -> LatencySummary:
    """Time ``repetitions`` sequential checks, cycling through the claim list.

    Runs on the calling thread only, mirroring a single-core measurement.
    """
    if not claims:
        raise ValueError("need at least one claim to benchmark")
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")

    stage_samples: dict[str, list[float]] = {"encode": [], "retrieve": [], "verify": []}
    totals: list[float] = []
    for i in range(repetitions):
        claim = claims[i % len(claims)]
        started = time.perf_counter()
        verdict = check_claim(pipeline, claim)
        totals.append((time.perf_counter() - started) * 1000.0)
        for stage in stage_samples:
            if stage in verdict.timings_ms:
                stage_samples[stage].append(verdict.timings_ms[stage])

    return LatencySummary(
        stages={s: _summary(v) for s, v in stage_samples.items() if v},
        total=_summary(totals),
        n_samples=repetitions,
        peak_memory_mb=peak_memory_mb(),
    )
