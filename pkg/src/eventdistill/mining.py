"""Frequent sequential pattern mining over label sequences.

Three miners share one contract: return every pattern whose support (the
number of database sequences containing it as an order-preserving, not
necessarily contiguous subsequence) meets the threshold, mapped to that
support. ``gsp`` is level-wise with apriori pruning, ``spade`` searches
depth-first over vertical id-lists, and ``brute_force_mine`` enumerates the
whole candidate space as a testing oracle. Steps carry a single label each,
so itemsets are singletons throughout.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from collections import Counter, defaultdict
from dataclasses import dataclass
from itertools import product

Pattern = tuple[str, ...]

BRUTE_FORCE_CANDIDATE_CAP = 2_000_000


class BruteForceSizeError(Exception):
    """The brute-force candidate space exceeds the safety cap."""


@dataclass(frozen=True)
class SequentialPattern:
    """An ordered label pattern and its per-sequence support count."""

    labels: Pattern
    support: int


@dataclass
class SequenceDatabase:
    """Label sequences plus their alphabet."""

    sequences: list[list[str]]
    alphabet: frozenset[str]

    def __post_init__(self):
        for seq in self.sequences:
            for label in seq:
                if label not in self.alphabet:
                    raise ValueError(f"label {label!r} not in database alphabet")

    @classmethod
    def from_sequences(cls, sequences: list[list[str]]) -> "SequenceDatabase":
        alphabet = frozenset(label for seq in sequences for label in seq)
        return cls(sequences=[list(s) for s in sequences], alphabet=alphabet)


def is_subsequence(alpha: list[str] | Pattern, beta: list[str] | Pattern) -> bool:
    """True iff alpha occurs in beta in order (gaps allowed). Empty alpha matches."""
    i = 0
    for item in beta:
        if i == len(alpha):
            return True
        if alpha[i] == item:
            i += 1
    return i == len(alpha)


def absolute_min_sup(n_sequences: int, fraction: float) -> int:
    """Convert a relative support fraction to an absolute count (rounded up, >= 1)."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError("support fraction must be in (0, 1]")
    return max(1, math.ceil(n_sequences * fraction))


def _check_min_sup(min_sup: int) -> None:
    if min_sup < 1:
        raise ValueError("min_sup must be >= 1")


def _frequent_singletons(db: SequenceDatabase, min_sup: int) -> dict[Pattern, int]:
    support = Counter()
    for seq in db.sequences:
        for label in set(seq):
            support[label] += 1
    return {(label,): count for label, count in support.items() if count >= min_sup}


def _apriori_consistent(candidate: Pattern, previous: set[Pattern]) -> bool:
    return all(
        candidate[:i] + candidate[i + 1 :] in previous for i in range(len(candidate))
    )


def _generate_candidates(previous: dict[Pattern, int], k: int) -> set[Pattern]:
    patterns = set(previous)
    if k == 2:
        return {(a[0], b[0]) for a in patterns for b in patterns}
    candidates = set()
    for left in patterns:
        for right in patterns:
            if left[1:] == right[:-1]:
                joined = left + (right[-1],)
                if _apriori_consistent(joined, patterns):
                    candidates.add(joined)
    return candidates


def gsp(db: SequenceDatabase, min_sup: int) -> dict[Pattern, int]:
    """Level-wise mining: join length-(k-1) survivors, prune, count, repeat."""
    _check_min_sup(min_sup)
    level = _frequent_singletons(db, min_sup)
    result = dict(level)
    k = 2
    while level:
        candidates = _generate_candidates(level, k)
        counts = dict.fromkeys(candidates, 0)
        for seq in db.sequences:
            for candidate in candidates:
                if is_subsequence(candidate, seq):
                    counts[candidate] += 1
        level = {c: n for c, n in counts.items() if n >= min_sup}
        result.update(level)
        k += 1
    return result


def spade(db: SequenceDatabase, min_sup: int) -> dict[Pattern, int]:
    """Vertical mining: per-label (sequence, position) id-lists joined depth-first.

    Each prefix keeps, per sequence, the earliest position at which it can
    end; extending joins against the id-list of the next label.
    """
    _check_min_sup(min_sup)
    positions: dict[str, dict[int, list[int]]] = defaultdict(dict)
    for sid, seq in enumerate(db.sequences):
        for pos, label in enumerate(seq):
            positions[label].setdefault(sid, []).append(pos)
    frequent = {
        label: ilist for label, ilist in positions.items() if len(ilist) >= min_sup
    }
    items = sorted(frequent)
    result: dict[Pattern, int] = {}

    def extend(pattern: Pattern, ends: dict[int, int]) -> None:
        for label in items:
            ilist = frequent[label]
            joined: dict[int, int] = {}
            for sid, last in ends.items():
                plist = ilist.get(sid)
                if plist is None:
                    continue
                nxt = bisect_right(plist, last)
                if nxt < len(plist):
                    joined[sid] = plist[nxt]
            if len(joined) >= min_sup:
                grown = pattern + (label,)
                result[grown] = len(joined)
                extend(grown, joined)

    for label in items:
        ends = {sid: plist[0] for sid, plist in frequent[label].items()}
        result[(label,)] = len(ends)
        extend((label,), ends)
    return result


def brute_force_mine(
    db: SequenceDatabase, min_sup: int, max_len: int
) -> dict[Pattern, int]:
    """Oracle miner: enumerate every label tuple up to ``max_len`` and count support.

    Guarded against combinatorial blowup; intended for desk-scale testing.
    """
    _check_min_sup(min_sup)
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    alphabet = sorted(db.alphabet)
    n_candidates = sum(len(alphabet) ** length for length in range(1, max_len + 1))
    if n_candidates > BRUTE_FORCE_CANDIDATE_CAP:
        raise BruteForceSizeError(
            f"{n_candidates} candidates exceed the cap of {BRUTE_FORCE_CANDIDATE_CAP}"
        )
    result: dict[Pattern, int] = {}
    for length in range(1, max_len + 1):
        for candidate in product(alphabet, repeat=length):
            support = sum(1 for seq in db.sequences if is_subsequence(candidate, seq))
            if support >= min_sup:
                result[candidate] = support
    return result


def sort_patterns(mined: dict[Pattern, int]) -> list[SequentialPattern]:
    """Canonical report order: support descending, then length, then lexicographic."""
    ordered = sorted(mined.items(), key=lambda kv: (-kv[1], len(kv[0]), kv[0]))
    return [SequentialPattern(labels=labels, support=support) for labels, support in ordered]


def pattern_report_tsv(mined: dict[Pattern, int]) -> str:
    """TSV rows of ``label1 -> label2 -> ...<TAB>support`` in canonical order."""
    lines = [
        f"{' -> '.join(p.labels)}\t{p.support}" for p in sort_patterns(mined)
    ]
    return "\n".join(lines) + ("\n" if lines else "")
