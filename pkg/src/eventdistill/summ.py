"""Summary Markov models over event-label sequences.

The probability that an interest label occurs at a position is modeled as a
Bernoulli conditioned on a *summary* of the last ``kappa`` events: which
influencing labels are present (binary kind) or their recency order (ordinal
kind). Tables are Laplace-smoothed with pseudocount ``alpha``; the structure
search greedily grows and then prunes the influencing set against a
penalized log-likelihood score. An order-k Markov chain baseline and a
seeded simulator for planted-model recovery experiments live here too.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .mining import SequenceDatabase
from .rng import XorShift64Star
from .store import atomic_write_text

logger = logging.getLogger(__name__)

KIND_BINARY = "binary"
KIND_ORDINAL = "ordinal"

_NEVER = 1 << 40  # recency of a label that has not occurred in the sequence yet
_MAX_VECTOR_ORDINAL = 12  # beyond this the ordinal code would overflow int64


class PlantedModelError(Exception):
    """A planted model's tables do not cover a summary reached during simulation."""


@dataclass(frozen=True)
class SummConfig:
    """Smoothing, penalty, window, and summary kind."""

    alpha: float = 0.1
    gamma: float = 0.5
    kappa: int = 4
    kind: str = KIND_BINARY

    def __post_init__(self):
        if self.alpha <= 0.0:
            raise ValueError("alpha must be positive")
        if self.gamma < 0.0:
            raise ValueError("gamma must be non-negative")
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")
        if self.kind not in (KIND_BINARY, KIND_ORDINAL):
            raise ValueError(f"unknown summary kind {self.kind!r}")

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "gamma": self.gamma,
            "kappa": self.kappa,
            "kind": self.kind,
        }


@dataclass
class SummModel:
    """Fitted (or planted) model: influencing set plus the conditional tables.

    ``theta`` maps (interest label, summary) to the occurrence probability;
    summaries are frozensets for the binary kind and recency-ordered label
    tuples for the ordinal kind. Raw counts are retained for audit.
    """

    interest_labels: tuple[str, ...]
    influencing_set: tuple[str, ...]
    config: SummConfig
    theta: dict[tuple[str, object], float]
    count_h: dict[object, int] = field(default_factory=dict)
    count_xh: dict[tuple[str, object], int] = field(default_factory=dict)

    def prob(self, label: str, summary: object) -> float:
        """Occurrence probability; unseen summaries fall back to alpha/(2*alpha) = 0.5."""
        return self.theta.get((label, summary), 0.5)


@dataclass
class LogLossReport:
    """Per-interest-label total log loss, their mean, and the signed log-likelihood."""

    per_label: dict[str, float]
    mean: float
    n_positions: int
    signed_total_loglik: float


def summarize(history: list[str], influencing, config: SummConfig):
    """Summary of the last ``kappa`` events of ``history``.

    Binary: frozenset of influencing labels present in the window. Ordinal:
    tuple of the distinct influencing labels in the window, most recent first.
    """
    window = history[-config.kappa :] if history else []
    if config.kind == KIND_BINARY:
        return frozenset(u for u in influencing if u in window)
    last: dict[str, int] = {}
    for i, event in enumerate(window):
        if event in influencing:
            last[event] = i
    return tuple(sorted(last, key=lambda u: -last[u]))


# ---------------------------------------------------------------------------
# Position index: flattened per-position view with cached recency arrays
# ---------------------------------------------------------------------------


class _PositionIndex:
    """One row per event position of a database, shared across scoring calls."""

    def __init__(self, db: SequenceDatabase, kappa: int):
        self.kappa = kappa
        self.sequences = db.sequences
        self.alphabet = db.alphabet
        self.events: list[str] = [event for seq in db.sequences for event in seq]
        self.n_positions = len(self.events)
        self._recency: dict[str, np.ndarray] = {}
        self._occurrence: dict[str, np.ndarray] = {}

    def occurrence(self, label: str) -> np.ndarray:
        cached = self._occurrence.get(label)
        if cached is None:
            cached = np.fromiter(
                (event == label for event in self.events), bool, self.n_positions
            )
            self._occurrence[label] = cached
        return cached

    def recency(self, label: str) -> np.ndarray:
        """Distance from each position back to the label's most recent prior occurrence."""
        cached = self._recency.get(label)
        if cached is None:
            values = np.full(self.n_positions, _NEVER, dtype=np.int64)
            offset = 0
            for seq in self.sequences:
                last = -1
                for i, event in enumerate(seq):
                    if last >= 0:
                        values[offset + i] = i - last
                    if event == label:
                        last = i
                offset += len(seq)
            self._recency[label] = values
            cached = values
        return cached


def _binary_codes(index: _PositionIndex, influencing: tuple[str, ...]) -> np.ndarray:
    codes = np.zeros(index.n_positions, dtype=np.int64)
    for j, label in enumerate(influencing):
        codes |= (index.recency(label) <= index.kappa).astype(np.int64) << j
    return codes


def _ordinal_codes(index: _PositionIndex, influencing: tuple[str, ...]) -> np.ndarray:
    m = len(influencing)
    if m == 0:
        return np.zeros(index.n_positions, dtype=np.int64)
    recency = np.stack([index.recency(label) for label in influencing])
    present = recency <= index.kappa
    codes = np.zeros(index.n_positions, dtype=np.int64)
    base = m + 1
    for j in range(m):
        # rank = number of present labels strictly more recent than label j
        rank = ((recency < recency[j]) & present).sum(axis=0)
        digit = np.where(present[j], rank + 1, 0)
        codes += digit * base**j
    return codes


def _decode_binary(code: int, influencing: tuple[str, ...]) -> frozenset:
    return frozenset(
        label for j, label in enumerate(influencing) if code & (1 << j)
    )


def _decode_ordinal(code: int, influencing: tuple[str, ...]) -> tuple[str, ...]:
    base = len(influencing) + 1
    placed: dict[int, str] = {}
    for j, label in enumerate(influencing):
        digit = (code // base**j) % base
        if digit:
            placed[digit - 1] = label
    return tuple(placed[rank] for rank in sorted(placed))


def _summaries_python(index: _PositionIndex, influencing: tuple[str, ...], config: SummConfig):
    """Per-position summaries without vectorized coding (large influencing sets)."""
    interned: dict[object, int] = {}
    objects: list[object] = []
    ids = np.empty(index.n_positions, dtype=np.int64)
    u_set = set(influencing)
    pos = 0
    for seq in index.sequences:
        last: dict[str, int] = {}
        for i, event in enumerate(seq):
            if config.kind == KIND_BINARY:
                summary: object = frozenset(
                    u for u, at in last.items() if i - at <= config.kappa
                )
            else:
                inside = sorted(
                    (i - at, u) for u, at in last.items() if i - at <= config.kappa
                )
                summary = tuple(u for _, u in inside)
            idx = interned.get(summary)
            if idx is None:
                idx = len(objects)
                interned[summary] = idx
                objects.append(summary)
            ids[pos] = idx
            pos += 1
            if event in u_set:
                last[event] = i
    return ids, objects


def _position_summaries(
    index: _PositionIndex, influencing: tuple[str, ...], config: SummConfig
) -> tuple[np.ndarray, list[object]]:
    """(position -> summary id) array plus the distinct summary objects."""
    m = len(influencing)
    if config.kind == KIND_BINARY and m <= 62:
        codes = _binary_codes(index, influencing)
        decode = lambda c: _decode_binary(int(c), influencing)  # noqa: E731
    elif config.kind == KIND_ORDINAL and m <= _MAX_VECTOR_ORDINAL:
        codes = _ordinal_codes(index, influencing)
        decode = lambda c: _decode_ordinal(int(c), influencing)  # noqa: E731
    else:
        return _summaries_python(index, influencing, config)
    unique, ids = np.unique(codes, return_inverse=True)
    return ids.astype(np.int64), [decode(c) for c in unique]


def _as_label_tuple(labels) -> tuple[str, ...]:
    return tuple(sorted(set(labels)))


def _validate_labels(index: _PositionIndex, labels: tuple[str, ...], name: str) -> None:
    missing = [label for label in labels if label not in index.alphabet]
    if missing:
        raise ValueError(f"{name} labels {missing!r} are not in the database alphabet")


def _counts(index: _PositionIndex, ids: np.ndarray, n_summaries: int, label: str):
    occurrence = index.occurrence(label)
    count_xh = np.bincount(ids[occurrence], minlength=n_summaries)
    return count_xh


def fit(
    train: SequenceDatabase,
    interest,
    influencing,
    config: SummConfig,
) -> SummModel:
    """Count-based table fit: theta = (count(x,h) + alpha) / (count(h) + 2*alpha)."""
    index = _PositionIndex(train, config.kappa)
    return _fit_indexed(index, _as_label_tuple(interest), _as_label_tuple(influencing), config)


def _fit_indexed(
    index: _PositionIndex,
    interest: tuple[str, ...],
    influencing: tuple[str, ...],
    config: SummConfig,
) -> SummModel:
    if index.n_positions == 0:
        raise ValueError("training set is empty")
    if not interest:
        raise ValueError("interest label set must be non-empty")
    _validate_labels(index, interest, "interest")
    _validate_labels(index, influencing, "influencing")
    ids, summaries = _position_summaries(index, influencing, config)
    count_h_vec = np.bincount(ids, minlength=len(summaries))
    theta: dict[tuple[str, object], float] = {}
    count_h: dict[object, int] = {}
    count_xh: dict[tuple[str, object], int] = {}
    alpha = config.alpha
    for k, summary in enumerate(summaries):
        count_h[summary] = int(count_h_vec[k])
    for x in interest:
        cxh = _counts(index, ids, len(summaries), x)
        for k, summary in enumerate(summaries):
            theta[(x, summary)] = float(
                (cxh[k] + alpha) / (count_h_vec[k] + 2.0 * alpha)
            )
            count_xh[(x, summary)] = int(cxh[k])
    return SummModel(
        interest_labels=interest,
        influencing_set=influencing,
        config=config,
        theta=theta,
        count_h=count_h,
        count_xh=count_xh,
    )


def score(data: SequenceDatabase, interest, influencing, config: SummConfig) -> float:
    """Penalized self-fit log-likelihood; higher is better.

    The penalty is gamma * |interest| * (#observed summaries) * ln(#positions).
    """
    index = _PositionIndex(data, config.kappa)
    return _score_indexed(index, _as_label_tuple(interest), _as_label_tuple(influencing), config)


def _score_indexed(
    index: _PositionIndex,
    interest: tuple[str, ...],
    influencing: tuple[str, ...],
    config: SummConfig,
) -> float:
    if index.n_positions == 0:
        raise ValueError("data set is empty")
    if not interest:
        raise ValueError("interest label set must be non-empty")
    ids, summaries = _position_summaries(index, influencing, config)
    count_h = np.bincount(ids, minlength=len(summaries)).astype(np.float64)
    alpha = config.alpha
    loglik = 0.0
    for x in interest:
        cxh = _counts(index, ids, len(summaries), x).astype(np.float64)
        theta = (cxh + alpha) / (count_h + 2.0 * alpha)
        loglik += float(np.sum(cxh * np.log(theta) + (count_h - cxh) * np.log1p(-theta)))
    n_params = len(interest) * len(summaries)
    return loglik - config.gamma * n_params * math.log(index.n_positions)


def learn(train: SequenceDatabase, interest, config: SummConfig) -> SummModel:
    """Greedy influencing-set search: forward additions, then backward removals.

    Only strict score improvements are accepted; candidates are visited in
    lexicographic order so ties resolve to the smallest label.
    """
    index = _PositionIndex(train, config.kappa)
    interest_t = _as_label_tuple(interest)
    if index.n_positions == 0:
        raise ValueError("training set is empty")
    _validate_labels(index, interest_t, "interest")
    candidates = sorted(index.alphabet)
    chosen: list[str] = []
    current = _score_indexed(index, interest_t, tuple(chosen), config)

    improved = True
    while improved:
        improved = False
        best_label, best_score = None, current
        for label in candidates:
            if label in chosen:
                continue
            trial = _score_indexed(
                index, interest_t, tuple(sorted(chosen + [label])), config
            )
            if trial > best_score:
                best_label, best_score = label, trial
        if best_label is not None:
            chosen.append(best_label)
            chosen.sort()
            current = best_score
            improved = True
            logger.debug("forward: added %r (score %.6f)", best_label, current)

    improved = True
    while improved and chosen:
        improved = False
        best_label, best_score = None, current
        for label in list(chosen):
            remaining = tuple(u for u in chosen if u != label)
            trial = _score_indexed(index, interest_t, remaining, config)
            if trial > best_score:
                best_label, best_score = label, trial
        if best_label is not None:
            chosen.remove(best_label)
            current = best_score
            improved = True
            logger.debug("backward: removed %r (score %.6f)", best_label, current)

    return _fit_indexed(index, interest_t, tuple(chosen), config)


def log_loss(model: SummModel, test: SequenceDatabase, interest=None) -> LogLossReport:
    """Total Bernoulli log loss per interest label on ``test``, plus their mean.

    Smoothing keeps every theta strictly inside (0, 1), so the loss is finite;
    summaries unseen during training fall back to 0.5.
    """
    labels = _as_label_tuple(interest) if interest is not None else model.interest_labels
    unknown = [x for x in labels if x not in model.interest_labels]
    if unknown:
        raise ValueError(f"labels {unknown!r} were not modeled")
    index = _PositionIndex(test, model.config.kappa)
    ids, summaries = _position_summaries(index, model.influencing_set, model.config)
    count_h = np.bincount(ids, minlength=len(summaries)).astype(np.float64)
    per_label: dict[str, float] = {}
    for x in labels:
        cxh = _counts(index, ids, len(summaries), x).astype(np.float64)
        theta = np.array([model.prob(x, s) for s in summaries], dtype=np.float64)
        loss = -float(np.sum(cxh * np.log(theta) + (count_h - cxh) * np.log1p(-theta)))
        per_label[x] = loss
    total = sum(per_label.values())
    return LogLossReport(
        per_label=per_label,
        mean=total / len(labels),
        n_positions=index.n_positions,
        signed_total_loglik=-total,
    )


# ---------------------------------------------------------------------------
# Order-k Markov chain baseline
# ---------------------------------------------------------------------------


@dataclass
class MarkovModel:
    """Order-k chain over the full alphabet with pseudocount smoothing."""

    order: int
    alpha: float
    alphabet: tuple[str, ...]
    context_counts: dict[tuple, int]
    transition_counts: dict[tuple, Counter]

    def next_prob(self, history: list[str], label: str) -> float:
        context = tuple(history[-self.order :]) if history else ()
        n = self.context_counts.get(context, 0)
        c = self.transition_counts.get(context, Counter()).get(label, 0)
        return (c + self.alpha) / (n + self.alpha * len(self.alphabet))

    def label_log_loss(self, test: SequenceDatabase, interest) -> LogLossReport:
        """Bernoulli loss per interest label using the chain's next-label probability."""
        labels = _as_label_tuple(interest)
        per_label = {x: 0.0 for x in labels}
        n_positions = 0
        for seq in test.sequences:
            for i, event in enumerate(seq):
                n_positions += 1
                history = seq[:i]
                for x in labels:
                    p = self.next_prob(history, x)
                    if event == x:
                        per_label[x] -= math.log(p)
                    else:
                        per_label[x] -= math.log1p(-p)
        total = sum(per_label.values())
        return LogLossReport(
            per_label=per_label,
            mean=total / len(labels),
            n_positions=n_positions,
            signed_total_loglik=-total,
        )

    def sequence_log_loss(self, test: SequenceDatabase) -> float:
        """Total categorical negative log-likelihood of the test sequences."""
        total = 0.0
        for seq in test.sequences:
            for i, event in enumerate(seq):
                total -= math.log(self.next_prob(seq[:i], event))
        return total


def markov_baseline(train: SequenceDatabase, order: int, alpha: float = 0.1) -> MarkovModel:
    """Fit the order-k chain; contexts shorter than ``order`` occur at sequence starts."""
    if order < 1:
        raise ValueError("order must be >= 1")
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    if not train.sequences or all(not s for s in train.sequences):
        raise ValueError("training set is empty")
    context_counts: dict[tuple, int] = {}
    transition_counts: dict[tuple, Counter] = {}
    for seq in train.sequences:
        for i, event in enumerate(seq):
            context = tuple(seq[max(0, i - order) : i])
            context_counts[context] = context_counts.get(context, 0) + 1
            transition_counts.setdefault(context, Counter())[event] += 1
    return MarkovModel(
        order=order,
        alpha=alpha,
        alphabet=tuple(sorted(train.alphabet)),
        context_counts=context_counts,
        transition_counts=transition_counts,
    )


# ---------------------------------------------------------------------------
# Planted models and simulation
# ---------------------------------------------------------------------------


def planted_binary_model(
    interest_label: str,
    influencers,
    theta_by_present: dict[frozenset, float],
    config: SummConfig,
) -> SummModel:
    """Build a binary-kind model with explicit tables for every influencer subset."""
    if config.kind != KIND_BINARY:
        raise ValueError("planted_binary_model requires a binary-kind config")
    influencing = _as_label_tuple(influencers)
    table = {frozenset(k): float(v) for k, v in theta_by_present.items()}
    theta: dict[tuple[str, object], float] = {}
    for r in range(1 << len(influencing)):
        subset = frozenset(
            label for j, label in enumerate(influencing) if r & (1 << j)
        )
        if subset not in table:
            raise PlantedModelError(f"no theta for influencer subset {sorted(subset)!r}")
        value = table[subset]
        if not 0.0 < value < 1.0:
            raise PlantedModelError("planted theta values must lie strictly in (0, 1)")
        theta[(interest_label, subset)] = value
    return SummModel(
        interest_labels=(interest_label,),
        influencing_set=influencing,
        config=config,
        theta=theta,
    )


def simulate(
    planted: SummModel,
    n_sequences: int,
    seq_len: int,
    seed: int,
    background: dict[str, float],
) -> SequenceDatabase:
    """Sample sequences from a planted model, deterministically from ``seed``.

    At each position the interest labels are tried in sorted order with their
    summary-conditional probability; if none fires, a background label is
    drawn. Background labels must be disjoint from the interest labels and
    their probabilities must sum to 1.
    """
    if n_sequences < 1 or seq_len < 1:
        raise ValueError("n_sequences and seq_len must be >= 1")
    if not background:
        raise ValueError("background distribution must be non-empty")
    overlap = set(background) & set(planted.interest_labels)
    if overlap:
        raise ValueError(f"background labels {sorted(overlap)!r} are interest labels")
    if any(p <= 0.0 for p in background.values()):
        raise ValueError("background probabilities must be positive")
    if abs(sum(background.values()) - 1.0) > 1e-9:
        raise ValueError("background probabilities must sum to 1")

    ordered_background = sorted(background.items())
    rng = XorShift64Star(seed)
    sequences: list[list[str]] = []
    for _ in range(n_sequences):
        labels: list[str] = []
        for _ in range(seq_len):
            summary = summarize(labels, planted.influencing_set, planted.config)
            event = None
            for x in planted.interest_labels:
                key = (x, summary)
                if key not in planted.theta:
                    raise PlantedModelError(
                        f"planted tables have no entry for ({x!r}, {summary!r})"
                    )
                if rng.uniform() < planted.theta[key]:
                    event = x
                    break
            if event is None:
                draw = rng.uniform()
                cumulative = 0.0
                event = ordered_background[-1][0]
                for label, p in ordered_background:
                    cumulative += p
                    if draw < cumulative:
                        event = label
                        break
            labels.append(event)
        sequences.append(labels)
    alphabet = (
        frozenset(planted.interest_labels)
        | frozenset(background)
        | frozenset(planted.influencing_set)
    )
    return SequenceDatabase(sequences=sequences, alphabet=alphabet)


# ---------------------------------------------------------------------------
# Model files
# ---------------------------------------------------------------------------


def _encode_summary(summary: object, influencing: tuple[str, ...], kind: str):
    if kind == KIND_BINARY:
        return "".join("1" if label in summary else "0" for label in influencing)
    return list(summary)


def _decode_summary(encoded, influencing: tuple[str, ...], kind: str):
    if kind == KIND_BINARY:
        return frozenset(
            label for label, bit in zip(influencing, encoded) if bit == "1"
        )
    return tuple(encoded)


def save_model(model: SummModel, path: str) -> None:
    """Write the model as JSON lines: a header record then sorted theta records."""
    header = {
        "kind": "header",
        "config": model.config.as_dict(),
        "interest_labels": list(model.interest_labels),
        "influencing_set": list(model.influencing_set),
    }
    rows = []
    for (x, summary), value in model.theta.items():
        rows.append(
            {
                "kind": "theta",
                "x": x,
                "summary": _encode_summary(summary, model.influencing_set, model.config.kind),
                "count_xh": model.count_xh.get((x, summary), 0),
                "count_h": model.count_h.get(summary, 0),
                "theta": value,
            }
        )
    rows.sort(key=lambda r: (r["x"], str(r["summary"])))
    lines = [json.dumps(header, ensure_ascii=False)]
    lines.extend(json.dumps(row, ensure_ascii=False) for row in rows)
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_model(path: str) -> SummModel:
    with open(path, encoding="utf-8") as fh:
        records = [json.loads(line) for line in fh if line.strip()]
    if not records or records[0].get("kind") != "header":
        raise ValueError(f"model file {path} lacks a header record")
    header = records[0]
    config = SummConfig(**header["config"])
    interest = tuple(header["interest_labels"])
    influencing = tuple(header["influencing_set"])
    theta: dict[tuple[str, object], float] = {}
    count_h: dict[object, int] = {}
    count_xh: dict[tuple[str, object], int] = {}
    for record in records[1:]:
        if record.get("kind") != "theta":
            raise ValueError(f"unexpected record kind {record.get('kind')!r} in {path}")
        summary = _decode_summary(record["summary"], influencing, config.kind)
        key = (record["x"], summary)
        theta[key] = float(record["theta"])
        count_xh[key] = int(record["count_xh"])
        count_h[summary] = int(record["count_h"])
    return SummModel(
        interest_labels=interest,
        influencing_set=influencing,
        config=config,
        theta=theta,
        count_h=count_h,
        count_xh=count_xh,
    )
