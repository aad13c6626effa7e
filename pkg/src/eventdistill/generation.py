"""Iterative event-sequence generation against a concept catalog.

Each sequence starts from a trigger label, asks the backend what usually
happens next, resolves the raw output against the catalog, and re-prompts
conjunctively over the growing history. A step retries up to the configured
budget on out-of-vocabulary output (or a disallowed consecutive repeat);
exhausting the budget ends the sequence.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .backend import BackendError, SamplingParams
from .catalog import ConceptCatalog
from .prompts import build_iterative_prompt, build_trigger_prompt

logger = logging.getLogger(__name__)

TERMINATION_MAX_LEN = "max_len_reached"
TERMINATION_RETRIES = "retries_exhausted"
TERMINATION_BACKEND_ERROR = "backend_error"
TERMINATIONS = frozenset(
    {TERMINATION_MAX_LEN, TERMINATION_RETRIES, TERMINATION_BACKEND_ERROR}
)


@dataclass
class GeneratorConfig:
    """Knobs of the generation loop; defaults mirror the shipped experiment settings."""

    min_len: int = 3
    max_len: int = 10
    max_step_retries: int = 3
    allow_consecutive_repeat: bool = False
    sampling: SamplingParams = field(default_factory=SamplingParams)

    def __post_init__(self):
        if self.min_len < 1:
            raise ValueError("min_len must be >= 1")
        if self.min_len > self.max_len:
            raise ValueError("min_len must not exceed max_len")
        if self.max_step_retries < 1:
            raise ValueError("max_step_retries must be >= 1")

    def as_dict(self) -> dict:
        return {
            "min_len": self.min_len,
            "max_len": self.max_len,
            "max_step_retries": self.max_step_retries,
            "allow_consecutive_repeat": self.allow_consecutive_repeat,
            "sampling": self.sampling.as_dict(),
        }


@dataclass
class GeneratedSequence:
    """One generation run: the trigger, the labels produced, and how it ended."""

    trigger: str
    labels: list[str]
    termination: str
    step_attempts: list[int]
    backend_id: str


@dataclass
class Corpus:
    """A collection of generated sequences plus the provenance needed to audit it."""

    sequences: list[GeneratedSequence]
    catalog_digest: str
    config: GeneratorConfig

    def label_sequences(self) -> list[list[str]]:
        return [list(seq.labels) for seq in self.sequences]


def generate_sequence(
    trigger: str, catalog: ConceptCatalog, cfg: GeneratorConfig, backend
) -> GeneratedSequence:
    """Generate one sequence seeded by ``trigger`` (which must resolve in the catalog).

    Resolved outputs are appended as their canonical top-level class label.
    Backend transport failures end the sequence with termination
    ``backend_error``, preserving the partial result.
    """
    trigger_id = catalog.resolve_label(trigger)
    if trigger_id is None:
        raise ValueError(f"trigger {trigger!r} does not resolve in the catalog")
    vocab = catalog.vocabulary()
    labels = [trigger]
    prev_canonical = catalog.top_class_label_for(trigger_id)
    step_attempts: list[int] = []
    backend_id = getattr(backend, "backend_id", "")
    termination = TERMINATION_MAX_LEN

    while len(labels) < cfg.max_len:
        if len(labels) == 1:
            prompt = build_trigger_prompt(vocab, trigger)
        else:
            prompt = build_iterative_prompt(vocab, labels)
        extended = False
        attempt = 0
        for attempt in range(1, cfg.max_step_retries + 1):
            try:
                completion = backend.complete(prompt, cfg.sampling)
            except BackendError as exc:
                logger.warning("backend error for trigger %r: %s", trigger, exc)
                step_attempts.append(attempt)
                return GeneratedSequence(
                    trigger, labels, TERMINATION_BACKEND_ERROR, step_attempts, backend_id
                )
            resolved = catalog.resolve_label(completion.text)
            canonical = (
                catalog.top_class_label_for(resolved) if resolved is not None else None
            )
            if canonical is None:
                continue
            if not cfg.allow_consecutive_repeat and canonical == prev_canonical:
                continue
            labels.append(canonical)
            prev_canonical = canonical
            extended = True
            break
        step_attempts.append(attempt)
        if not extended:
            termination = TERMINATION_RETRIES
            break

    return GeneratedSequence(trigger, labels, termination, step_attempts, backend_id)


def generate_corpus(
    catalog: ConceptCatalog,
    cfg: GeneratorConfig,
    backend,
    triggers: list[str] | None = None,
    samples_per_trigger: int = 1,
    jobs: int = 1,
) -> Corpus:
    """Generate one sequence per (trigger, sample), in deterministic trigger order.

    ``triggers`` defaults to every catalog event label. Per-sequence backend
    failures are recorded on the sequence, not raised.
    """
    if samples_per_trigger < 1:
        raise ValueError("samples_per_trigger must be >= 1")
    trigger_list = list(triggers) if triggers is not None else catalog.event_labels()
    tasks = [t for t in trigger_list for _ in range(samples_per_trigger)]

    if jobs > 1 and tasks:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            sequences = list(
                pool.map(lambda t: generate_sequence(t, catalog, cfg, backend), tasks)
            )
    else:
        sequences = [generate_sequence(t, catalog, cfg, backend) for t in tasks]

    failures = sum(1 for s in sequences if s.termination == TERMINATION_BACKEND_ERROR)
    short = sum(1 for s in sequences if len(s.labels) < cfg.min_len)
    logger.info(
        "generated %d sequence(s) from %d trigger(s): %d backend failure(s), "
        "%d below min_len",
        len(sequences),
        len(trigger_list),
        failures,
        short,
    )
    return Corpus(sequences=sequences, catalog_digest=catalog.digest(), config=cfg)


def corpus_stats(corpus: Corpus) -> dict:
    """Exact corpus statistics: counts, mean length, histograms, label frequencies."""
    lengths = [len(seq.labels) for seq in corpus.sequences]
    count = len(lengths)
    histogram: dict[int, int] = {}
    for n in lengths:
        histogram[n] = histogram.get(n, 0) + 1
    terminations: dict[str, int] = {}
    frequencies: dict[str, int] = {}
    for seq in corpus.sequences:
        terminations[seq.termination] = terminations.get(seq.termination, 0) + 1
        for label in seq.labels:
            frequencies[label] = frequencies.get(label, 0) + 1
    return {
        "count": count,
        "mean_len": (sum(lengths) / count) if count else 0.0,
        "len_histogram": dict(sorted(histogram.items())),
        "terminations": dict(sorted(terminations.items())),
        "label_frequencies": frequencies,
        "below_min_len": sum(1 for n in lengths if n < corpus.config.min_len),
    }
