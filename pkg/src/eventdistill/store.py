"""Corpus persistence and deterministic train/dev/test splitting.

Corpus files are line-oriented JSON (UTF-8): a header record carrying the
generator config and catalog digest, then one record per sequence:

    {"kind": "header", "catalog_digest": "...", "config": {...}}
    {"trigger": "...", "labels": [...], "termination": "...",
     "step_attempts": [...], "backend_id": "..."}

Saving is atomic (temp file + rename) and byte-stable: save -> load -> save
reproduces identical bytes.

Splits shuffle sequence indices with the portable generator documented in
``rng`` and size the parts as round-half-up(n * fraction) for dev and test,
remainder to train, so any implementation of the documented algorithm
reproduces the same partition from the same seed.
"""

from __future__ import annotations

import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass

from .backend import SamplingParams
from .generation import TERMINATIONS, Corpus, GeneratedSequence, GeneratorConfig
from .rng import XorShift64Star

logger = logging.getLogger(__name__)


class CorpusFormatError(Exception):
    """A corpus file record is malformed; the message carries the line number."""


@dataclass(frozen=True)
class SplitSpec:
    """Fractions and seed for a train/dev/test partition."""

    train: float = 0.70
    dev: float = 0.15
    test: float = 0.15
    seed: int = 0

    def __post_init__(self):
        for name, fraction in (("train", self.train), ("dev", self.dev), ("test", self.test)):
            if fraction <= 0.0:
                raise ValueError(f"{name} fraction must be positive")
        if abs(self.train + self.dev + self.test - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")


def atomic_write_text(path: str, text: str) -> None:
    """Write ``text`` to ``path`` via a temp file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _sequence_record(seq: GeneratedSequence) -> dict:
    return {
        "trigger": seq.trigger,
        "labels": list(seq.labels),
        "termination": seq.termination,
        "step_attempts": list(seq.step_attempts),
        "backend_id": seq.backend_id,
    }


def corpus_text(corpus: Corpus) -> str:
    """Canonical file serialization of a corpus."""
    lines = [
        json.dumps(
            {
                "kind": "header",
                "catalog_digest": corpus.catalog_digest,
                "config": corpus.config.as_dict(),
            },
            ensure_ascii=False,
        )
    ]
    lines.extend(
        json.dumps(_sequence_record(seq), ensure_ascii=False) for seq in corpus.sequences
    )
    return "\n".join(lines) + "\n"


def save_corpus(corpus: Corpus, path: str) -> None:
    atomic_write_text(path, corpus_text(corpus))


def _parse_config(raw: dict) -> GeneratorConfig:
    sampling = raw.get("sampling", {})
    return GeneratorConfig(
        min_len=raw.get("min_len", 3),
        max_len=raw.get("max_len", 10),
        max_step_retries=raw.get("max_step_retries", 3),
        allow_consecutive_repeat=raw.get("allow_consecutive_repeat", False),
        sampling=SamplingParams(
            top_k=sampling.get("top_k", 50),
            top_p=sampling.get("top_p", 0.95),
            max_new_tokens=sampling.get("max_new_tokens", 32),
            temperature=sampling.get("temperature", 1.0),
        ),
    )


def _parse_sequence(record: dict, lineno: int) -> GeneratedSequence:
    trigger = record.get("trigger")
    labels = record.get("labels")
    termination = record.get("termination")
    step_attempts = record.get("step_attempts", [])
    backend_id = record.get("backend_id", "")
    if not isinstance(trigger, str) or not trigger:
        raise CorpusFormatError(f"line {lineno}: missing or empty 'trigger'")
    if (
        not isinstance(labels, list)
        or not labels
        or not all(isinstance(x, str) and x for x in labels)
    ):
        raise CorpusFormatError(f"line {lineno}: 'labels' must be a non-empty string list")
    if termination not in TERMINATIONS:
        raise CorpusFormatError(f"line {lineno}: unknown termination {termination!r}")
    if not isinstance(step_attempts, list) or not all(
        isinstance(x, int) and x >= 0 for x in step_attempts
    ):
        raise CorpusFormatError(f"line {lineno}: 'step_attempts' must be a list of counts")
    if not isinstance(backend_id, str):
        raise CorpusFormatError(f"line {lineno}: 'backend_id' must be a string")
    return GeneratedSequence(trigger, labels, termination, step_attempts, backend_id)


def load_corpus(path: str, catalog=None) -> Corpus:
    """Load a corpus file; warn when its catalog digest differs from ``catalog``."""
    sequences: list[GeneratedSequence] = []
    digest = ""
    config = GeneratorConfig()
    saw_header = False
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"line {lineno}: invalid JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise CorpusFormatError(f"line {lineno}: record must be a JSON object")
            if record.get("kind") == "header":
                if saw_header:
                    raise CorpusFormatError(f"line {lineno}: duplicate header record")
                saw_header = True
                digest = record.get("catalog_digest", "")
                config = _parse_config(record.get("config", {}))
                continue
            sequences.append(_parse_sequence(record, lineno))
    if not saw_header:
        logger.warning("corpus %s has no header record; using default config", path)
    if catalog is not None and digest and digest != catalog.digest():
        logger.warning(
            "corpus %s was generated from a different catalog (digest %s != %s)",
            path,
            digest,
            catalog.digest(),
        )
    return Corpus(sequences=sequences, catalog_digest=digest, config=config)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_indices(n: int, spec: SplitSpec) -> tuple[list[int], list[int], list[int]]:
    """Partition range(n) into train/dev/test index lists (sorted within each part).

    Shuffles with the documented xorshift64* Fisher-Yates; dev and test take
    round-half-up(n * fraction) indices, train takes the remainder.
    """
    if n < 1:
        raise ValueError("cannot split an empty corpus")
    n_dev = _round_half_up(n * spec.dev)
    n_test = _round_half_up(n * spec.test)
    n_train = n - n_dev - n_test
    if n_train < 0:
        raise ValueError("split fractions leave no room for the training part")
    order = list(range(n))
    XorShift64Star(spec.seed).shuffle(order)
    train = sorted(order[:n_train])
    dev = sorted(order[n_train : n_train + n_dev])
    test = sorted(order[n_train + n_dev :])
    return train, dev, test


def split(corpus: Corpus, spec: SplitSpec) -> tuple[Corpus, Corpus, Corpus]:
    """Deterministically partition a corpus into (train, dev, test)."""
    train_idx, dev_idx, test_idx = split_indices(len(corpus.sequences), spec)

    def subset(indices: list[int]) -> Corpus:
        return Corpus(
            sequences=[corpus.sequences[i] for i in indices],
            catalog_digest=corpus.catalog_digest,
            config=corpus.config,
        )

    return subset(train_idx), subset(dev_idx), subset(test_idx)


def split_manifest(n: int, spec: SplitSpec) -> dict:
    """Machine-readable record of a split: seed, fractions, and index lists."""
    train, dev, test = split_indices(n, spec)
    return {
        "seed": spec.seed,
        "fractions": {"train": spec.train, "dev": spec.dev, "test": spec.test},
        "indices": {"train": train, "dev": dev, "test": test},
    }
