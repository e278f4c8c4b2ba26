"""Knowledge-base loading, validation, temporal splitting, and pair generation.

The corpus file is UTF-8 JSON-lines, one record per line, discriminated by
``kind`` (``claim`` or ``explanation``). A CSV importer expands rows of
(false_claim, true_claim, explanation, date, source) into one explanation
plus up to two claim records.
"""

from __future__ import annotations

import csv
import json
import logging
import random
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable, Sequence

from factcheck.errors import CorpusError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExplanationRecord:
    """A verified fact-check paragraph; the evidence unit of the knowledge base."""

    id: str
    text: str
    date: date | None = None
    source: str | None = None


@dataclass(frozen=True)
class ClaimRecord:
    """A checkable assertion linked to its gold explanation.

    ``veracity`` is None for records that were never cross-validated; such
    records can train retrieval but not verification.
    """

    id: str
    text: str
    veracity: bool | None
    gold_explanation_id: str
    date: date


@dataclass(frozen=True)
class PairExample:
    """A (claim, explanation, label) training instance.

    Stage-A labels mean relevance; stage-B labels mean claim veracity
    relative to the gold explanation.
    """

    claim_text: str
    explanation_text: str
    label: int
    stage: str

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")
        if self.stage not in ("A", "B"):
            raise ValueError(f"stage must be 'A' or 'B', got {self.stage!r}")


@dataclass
class Corpus:
    """All loaded records with explanation cross-references resolved."""

    claims: list[ClaimRecord]
    explanations: list[ExplanationRecord]
    _by_id: dict[str, ExplanationRecord] = field(init=False, repr=False)

    def __post_init__(self):
        self._by_id = {e.id: e for e in self.explanations}

    def explanation(self, explanation_id: str) -> ExplanationRecord:
        try:
            return self._by_id[explanation_id]
        except KeyError:
            raise CorpusError(f"unknown explanation id {explanation_id!r}") from None

    def explanation_texts(self) -> dict[str, str]:
        return {e.id: e.text for e in self.explanations}


@dataclass
class CorpusSplit:
    """Temporal partition of the claim records; partitions are disjoint by id."""

    train: list[ClaimRecord]
    validation: list[ClaimRecord]
    test: list[ClaimRecord]
    cutoff_train_end: date
    cutoff_test_start: date


def _parse_date(value, line_no: int, required: bool) -> date | None:
    if value is None or value == "":
        if required:
            raise CorpusError(f"line {line_no}: missing required date")
        return None
    try:
        return date.fromisoformat(str(value))
    except ValueError:
        raise CorpusError(f"line {line_no}: bad date {value!r}, expected YYYY-MM-DD") from None


def _require_text(value, line_no: int) -> str:
    if not isinstance(value, str) or not value.strip():
        raise CorpusError(f"line {line_no}: empty or missing text")
    return value.strip()


def load_corpus(path: str | Path) -> Corpus:
    """Load and validate a JSON-lines corpus file.

    Raises CorpusError on malformed lines (with line number), duplicate ids,
    dangling gold references, or an empty corpus.
    """
    claims: list[ClaimRecord] = []
    explanations: list[ExplanationRecord] = []
    seen_ids: set[str] = set()

    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {line_no}: invalid JSON ({exc.msg})") from None
            if not isinstance(raw, dict):
                raise CorpusError(f"line {line_no}: expected a JSON object")

            kind = raw.get("kind")
            record_id = raw.get("id")
            if not record_id or not isinstance(record_id, str):
                raise CorpusError(f"line {line_no}: missing record id")
            if record_id in seen_ids:
                raise CorpusError(f"line {line_no}: duplicate id {record_id!r}")
            seen_ids.add(record_id)

            if kind == "explanation":
                explanations.append(
                    ExplanationRecord(
                        id=record_id,
                        text=_require_text(raw.get("text"), line_no),
                        date=_parse_date(raw.get("date"), line_no, required=False),
                        source=raw.get("source"),
                    )
                )
            elif kind == "claim":
                veracity = raw.get("veracity")
                if veracity is not None and not isinstance(veracity, bool):
                    raise CorpusError(f"line {line_no}: veracity must be true/false/null")
                gold = raw.get("gold_explanation_id")
                if not gold or not isinstance(gold, str):
                    raise CorpusError(f"line {line_no}: missing gold_explanation_id")
                claims.append(
                    ClaimRecord(
                        id=record_id,
                        text=_require_text(raw.get("text"), line_no),
                        veracity=veracity,
                        gold_explanation_id=gold,
                        date=_parse_date(raw.get("date"), line_no, required=True),
                    )
                )
            else:
                raise CorpusError(f"line {line_no}: unknown record kind {kind!r}")

    if not claims and not explanations:
        raise CorpusError(f"empty corpus: {path}")

    known = {e.id for e in explanations}
    for claim in claims:
        if claim.gold_explanation_id not in known:
            raise CorpusError(
                f"claim {claim.id!r} references missing explanation "
                f"{claim.gold_explanation_id!r}"
            )

    logger.info(
        "loaded corpus %s: %d claims, %d explanations", path, len(claims), len(explanations)
    )
    return Corpus(claims=claims, explanations=explanations)


def load_csv(path: str | Path) -> Corpus:
    """Import a CSV of (false_claim, true_claim, explanation, date, source) rows.

    Each row yields one explanation and up to two claims: the false claim
    (veracity False) and, when the cell is non-empty, the rephrased true
    claim (veracity True). Both claims reference the row's explanation.
    """
    required = {"false_claim", "true_claim", "explanation", "date"}
    claims: list[ClaimRecord] = []
    explanations: list[ExplanationRecord] = []

    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise CorpusError(f"empty corpus: {path}")
        missing = required - set(reader.fieldnames)
        if missing:
            raise CorpusError(f"CSV missing columns: {', '.join(sorted(missing))}")

        for row_no, row in enumerate(reader, start=1):
            line_no = row_no + 1  # header occupies line 1
            explanation_text = _require_text(row.get("explanation"), line_no)
            false_claim = _require_text(row.get("false_claim"), line_no)
            true_claim = (row.get("true_claim") or "").strip()
            row_date = _parse_date(row.get("date"), line_no, required=True)
            source = (row.get("source") or "").strip() or None

            exp_id = f"exp-{row_no:05d}"
            explanations.append(
                ExplanationRecord(id=exp_id, text=explanation_text, date=row_date, source=source)
            )
            claims.append(
                ClaimRecord(
                    id=f"claim-{row_no:05d}-f",
                    text=false_claim,
                    veracity=False,
                    gold_explanation_id=exp_id,
                    date=row_date,
                )
            )
            if true_claim:
                claims.append(
                    ClaimRecord(
                        id=f"claim-{row_no:05d}-t",
                        text=true_claim,
                        veracity=True,
                        gold_explanation_id=exp_id,
                        date=row_date,
                    )
                )

    if not explanations:
        raise CorpusError(f"empty corpus: {path}")
    logger.info(
        "imported %s: %d claims, %d explanations", path, len(claims), len(explanations)
    )
    return Corpus(claims=claims, explanations=explanations)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus as canonical JSON-lines (explanations first, then claims)."""
    lines = []
    for e in corpus.explanations:
        lines.append(
            {
                "kind": "explanation",
                "id": e.id,
                "text": e.text,
                "date": e.date.isoformat() if e.date else None,
                "source": e.source,
            }
        )
    for c in corpus.claims:
        lines.append(
            {
                "kind": "claim",
                "id": c.id,
                "text": c.text,
                "veracity": c.veracity,
                "gold_explanation_id": c.gold_explanation_id,
                "date": c.date.isoformat(),
            }
        )
    with open(path, "w", encoding="utf-8") as fh:
        for obj in lines:
            fh.write(json.dumps(obj, sort_keys=True, ensure_ascii=False) + "\n")


def temporal_split(
    corpus: Corpus,
    cutoff_train_end: date,
    cutoff_test_start: date,
    val_fraction: float = 0.1,
    seed: int = 0,
) -> CorpusSplit:
    """Split claims by date; carve validation out of the train period by seed.

    Claims dated strictly between the cutoffs belong to neither period and
    are excluded with a warning.
    """
    if cutoff_train_end >= cutoff_test_start:
        raise ValueError("cutoff_train_end must precede cutoff_test_start")
    if not 0.0 <= val_fraction <= 0.5:
        raise ValueError("val_fraction must lie in [0, 0.5]")

    train_period = [c for c in corpus.claims if c.date <= cutoff_train_end]
    test = [c for c in corpus.claims if c.date >= cutoff_test_start]
    excluded = [
        c for c in corpus.claims if cutoff_train_end < c.date < cutoff_test_start
    ]
    if excluded:
        logger.warning(
            "excluded %d claims dated between the cutoffs: %s",
            len(excluded),
            ", ".join(c.id for c in excluded),
        )
    if not train_period and not test:
        logger.warning("temporal split is empty: no claims within either period")

    n_val = int(len(train_period) * val_fraction)
    rng = random.Random(seed)
    val_ids = set(rng.sample(sorted(c.id for c in train_period), n_val))
    train = [c for c in train_period if c.id not in val_ids]
    validation = [c for c in train_period if c.id in val_ids]

    return CorpusSplit(
        train=train,
        validation=validation,
        test=test,
        cutoff_train_end=cutoff_train_end,
        cutoff_test_start=cutoff_test_start,
    )


def generate_stage_a_pairs(
    records: Sequence[ClaimRecord],
    explanations: Sequence[ExplanationRecord],
    seed: int = 0,
    negatives_per_positive: int = 1,
) -> list[PairExample]:
    """Relevance pairs: one positive per claim plus sampled negatives.

    Negatives draw uniformly from the non-gold explanations; the combined
    list is shuffled deterministically by the seed.
    """
    if not records:
        raise ValueError("cannot generate pairs from an empty record list")
    if negatives_per_positive < 0:
        raise ValueError("negatives_per_positive must be non-negative")
    if negatives_per_positive > 0 and len(explanations) < 2:
        raise CorpusError(
            "cannot sample negative pairs from a corpus with a single explanation"
        )

    by_id = {e.id: e for e in explanations}
    rng = random.Random(seed)
    pairs: list[PairExample] = []
    for claim in records:
        gold = by_id.get(claim.gold_explanation_id)
        if gold is None:
            raise CorpusError(
                f"claim {claim.id!r} references missing explanation "
                f"{claim.gold_explanation_id!r}"
            )
        pairs.append(PairExample(claim.text, gold.text, 1, "A"))
        for _ in range(negatives_per_positive):
            negative = rng.choice(explanations)
            while negative.id == gold.id:
                negative = rng.choice(explanations)
            pairs.append(PairExample(claim.text, negative.text, 0, "A"))

    rng.shuffle(pairs)
    return pairs


def generate_stage_b_pairs(
    records: Sequence[ClaimRecord],
    explanations: Sequence[ExplanationRecord],
) -> list[PairExample]:
    """Veracity pairs: (claim, gold explanation, 1 if the claim is true).

    Records without a veracity label are skipped with a warning.
    """
    by_id = {e.id: e for e in explanations}
    pairs: list[PairExample] = []
    skipped = 0
    for claim in records:
        if claim.veracity is None:
            skipped += 1
            continue
        gold = by_id.get(claim.gold_explanation_id)
        if gold is None:
            raise CorpusError(
                f"claim {claim.id!r} references missing explanation "
                f"{claim.gold_explanation_id!r}"
            )
        pairs.append(PairExample(claim.text, gold.text, int(claim.veracity), "B"))
    if skipped:
        logger.warning("skipped %d claims without veracity labels", skipped)
    return pairs


def write_pairs(pairs: Iterable[PairExample], path: str | Path) -> None:
    """Export pairs as JSON-lines for external training tools."""
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(
                json.dumps(
                    {
                        "claim": pair.claim_text,
                        "explanation": pair.explanation_text,
                        "label": pair.label,
                        "stage": pair.stage,
                    },
                    sort_keys=True,
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_pairs(path: str | Path) -> list[PairExample]:
    """Load pairs written by :func:`write_pairs`."""
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
                pairs.append(
                    PairExample(raw["claim"], raw["explanation"], raw["label"], raw["stage"])
                )
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise CorpusError(f"line {line_no}: bad pair record ({exc})") from None
    return pairs
