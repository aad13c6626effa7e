"""Corpus quality metrics: judged precision, reference recall, and F1.

Precision asks a judging backend whether each adjacent (trigger, consequence)
pair is plausible; verdicts are cached by (trigger, consequence, evaluator)
so duplicate pairs and re-runs never re-bill the backend. Recall checks which
unordered reference pairs from the catalog's causal relations appear as an
adjacency anywhere in the corpus.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .backend import (
    VERDICT_NO,
    VERDICT_UNPARSEABLE,
    VERDICT_YES,
    BackendError,
    SamplingParams,
    parse_yes_no,
)
from .catalog import ConceptCatalog
from .generation import Corpus
from .prompts import build_precision_prompt
from .store import atomic_write_text

logger = logging.getLogger(__name__)


class EvaluationError(Exception):
    """The evaluation cannot proceed (no judgeable pairs, empty reference, ...)."""


@dataclass(frozen=True)
class PairJudgment:
    """One backend verdict on whether ``trigger`` reasonably leads to ``consequence``."""

    trigger: str
    consequence: str
    verdict: str
    justification: str
    evaluator_id: str


@dataclass
class PrecisionResult:
    """Verdict counts over the corpus's adjacent pairs."""

    yes: int
    no: int
    unparseable: int
    failed: int
    total_pairs: int
    strict: bool

    @property
    def precision(self) -> float:
        denominator = self.yes + self.no + (self.unparseable if self.strict else 0)
        return self.yes / denominator if denominator else 0.0

    @property
    def completeness(self) -> float:
        return (self.total_pairs - self.failed) / self.total_pairs if self.total_pairs else 0.0


@dataclass
class RecallResult:
    """Reference-pair coverage counts."""

    matched: int
    attainable: int
    unattainable: int

    @property
    def recall(self) -> float:
        return self.matched / self.attainable if self.attainable else 0.0


@dataclass
class MetricsReport:
    """Assembled metrics plus the raw counts behind them."""

    precision: float | None
    recall: float | None
    f1: float | None
    counts: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "counts": dict(self.counts),
        }


def adjacent_pairs(corpus: Corpus) -> list[tuple[str, str]]:
    """Every adjacent ordered label pair in the corpus, duplicates preserved."""
    pairs: list[tuple[str, str]] = []
    for seq in corpus.sequences:
        labels = seq.labels
        pairs.extend((labels[i], labels[i + 1]) for i in range(len(labels) - 1))
    return pairs


def judge_pairs(
    pairs: list[tuple[str, str]],
    backend,
    sampling: SamplingParams | None = None,
    cache: dict | None = None,
    jobs: int = 1,
) -> tuple[list[PairJudgment | None], int]:
    """Judge each pair, reusing cached verdicts; returns (judgments, backend failures).

    Distinct pairs are judged once; duplicates share the verdict. A per-pair
    backend failure yields None for every occurrence of that pair.
    """
    sampling = sampling or SamplingParams()
    cache = cache if cache is not None else {}
    evaluator_id = getattr(backend, "backend_id", "")

    def judge_one(pair: tuple[str, str]) -> PairJudgment | None:
        prompt = build_precision_prompt(pair[0], pair[1])
        try:
            completion = backend.complete(prompt, sampling)
        except BackendError as exc:
            logger.warning("judgment failed for %r -> %r: %s", pair[0], pair[1], exc)
            return None
        verdict, justification = parse_yes_no(completion)
        return PairJudgment(pair[0], pair[1], verdict, justification, evaluator_id)

    pending = []
    seen = set()
    for pair in pairs:
        key = (pair[0], pair[1], evaluator_id)
        if key not in cache and key not in seen:
            seen.add(key)
            pending.append(pair)

    if jobs > 1 and pending:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            fresh = list(pool.map(judge_one, pending))
    else:
        fresh = [judge_one(pair) for pair in pending]

    failures = 0
    for pair, judgment in zip(pending, fresh):
        if judgment is not None:
            cache[(pair[0], pair[1], evaluator_id)] = judgment

    results: list[PairJudgment | None] = []
    for pair in pairs:
        judgment = cache.get((pair[0], pair[1], evaluator_id))
        if judgment is None:
            failures += 1
        results.append(judgment)
    return results, failures


def precision(
    corpus: Corpus,
    backend,
    sampling: SamplingParams | None = None,
    strict: bool = False,
    cache: dict | None = None,
    jobs: int = 1,
) -> PrecisionResult:
    """Judge every adjacent pair and count verdicts (occurrence-weighted)."""
    pairs = adjacent_pairs(corpus)
    if not pairs:
        raise EvaluationError("no judgeable pairs: every sequence has length 1")
    judgments, failures = judge_pairs(pairs, backend, sampling, cache, jobs)
    tally = {VERDICT_YES: 0, VERDICT_NO: 0, VERDICT_UNPARSEABLE: 0}
    for judgment in judgments:
        if judgment is not None:
            tally[judgment.verdict] += 1
    return PrecisionResult(
        yes=tally[VERDICT_YES],
        no=tally[VERDICT_NO],
        unparseable=tally[VERDICT_UNPARSEABLE],
        failed=failures,
        total_pairs=len(pairs),
        strict=strict,
    )


def recall(
    corpus: Corpus, reference: set[tuple[str, str]], catalog: ConceptCatalog
) -> RecallResult:
    """Fraction of unordered reference pairs adjacent (either way) in the corpus.

    Reference pairs with an endpoint unknown to the catalog cannot be
    generated and are counted separately as unattainable.
    """
    if not reference:
        raise EvaluationError("reference pair set is empty")
    known = set(catalog.concepts) | set(catalog.top_classes)
    attainable: set[frozenset] = set()
    unattainable: set[frozenset] = set()
    for cause, effect in reference:
        pair = frozenset((cause, effect))
        if cause in known and effect in known:
            attainable.add(pair)
        else:
            unattainable.add(pair)

    adjacent_ids: set[frozenset] = set()
    for first, second in adjacent_pairs(corpus):
        id_a = catalog.resolve_label(first)
        id_b = catalog.resolve_label(second)
        if id_a is not None and id_b is not None and id_a != id_b:
            adjacent_ids.add(frozenset((id_a, id_b)))

    matched = sum(1 for pair in attainable if pair in adjacent_ids)
    return RecallResult(
        matched=matched, attainable=len(attainable), unattainable=len(unattainable)
    )


def f1(p: float, r: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    if not 0.0 <= p <= 1.0 or not 0.0 <= r <= 1.0:
        raise ValueError("precision and recall must lie in [0, 1]")
    return 2.0 * p * r / (p + r) if p + r > 0.0 else 0.0


def assemble_report(
    precision_result: PrecisionResult | None, recall_result: RecallResult | None
) -> MetricsReport:
    """Combine available metric fragments into one report."""
    counts: dict = {}
    p_value = r_value = None
    if precision_result is not None:
        p_value = precision_result.precision
        counts.update(
            pairs_judged=precision_result.total_pairs - precision_result.failed,
            pairs_total=precision_result.total_pairs,
            yes=precision_result.yes,
            no=precision_result.no,
            unparseable=precision_result.unparseable,
            failed=precision_result.failed,
            completeness=precision_result.completeness,
        )
    if recall_result is not None:
        r_value = recall_result.recall
        counts.update(
            reference_pairs=recall_result.attainable,
            reference_matched=recall_result.matched,
            reference_unattainable=recall_result.unattainable,
        )
    f_value = f1(p_value, r_value) if p_value is not None and r_value is not None else None
    return MetricsReport(precision=p_value, recall=r_value, f1=f_value, counts=counts)


# ---------------------------------------------------------------------------
# Judgment files (the persistent cache)
# ---------------------------------------------------------------------------


def save_judgments(cache: dict, path: str) -> None:
    rows = [
        {
            "trigger": j.trigger,
            "consequence": j.consequence,
            "verdict": j.verdict,
            "justification": j.justification,
            "evaluator_id": j.evaluator_id,
        }
        for j in cache.values()
    ]
    rows.sort(key=lambda r: (r["trigger"], r["consequence"], r["evaluator_id"]))
    text = "".join(json.dumps(row, ensure_ascii=False) + "\n" for row in rows)
    atomic_write_text(path, text)


def load_judgments(path: str) -> dict:
    cache: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                judgment = PairJudgment(
                    trigger=row["trigger"],
                    consequence=row["consequence"],
                    verdict=row["verdict"],
                    justification=row.get("justification", ""),
                    evaluator_id=row.get("evaluator_id", ""),
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise EvaluationError(f"{path}: bad judgment at line {lineno}: {exc}") from exc
            cache[(judgment.trigger, judgment.consequence, judgment.evaluator_id)] = judgment
    return cache
