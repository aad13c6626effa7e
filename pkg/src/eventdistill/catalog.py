"""Event-concept catalog: the knowledge-graph export that drives generation.

The catalog file is line-oriented JSON (UTF-8), one record per line:

    {"kind": "class", "id": "...", "label": "..."}
    {"id": "...", "label": "...", "aliases": ["..."], "top_class_id": "..."}
    {"kind": "causal", "cause": "...", "effect": "...", "property": "has_cause"}

Concept records may omit ``kind`` (or set it to ``"concept"``). The loaded
catalog is immutable and safe to share across worker threads.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import string
from dataclasses import dataclass, field

logger = logging.getLogger(__name__)

CAUSAL_PROPERTIES = frozenset(
    {"has_cause", "has_immediate_cause", "has_contributing_factor", "has_effect"}
)

# Flanking punctuation stripped during normalization. Parentheses are kept so
# that labels with a parenthetical qualifier survive intact as lookup keys.
_FLANK_CHARS = "".join(c for c in string.punctuation if c not in "()") + " \t"
_PAREN_SUFFIX = re.compile(r"\s*\([^()]*\)\s*$")


class CatalogError(Exception):
    """Base class for catalog loading and validation failures."""


class CatalogParseError(CatalogError):
    """A record could not be parsed; the message carries the line number."""


class LabelCollisionError(CatalogError):
    """Two different concepts claim the same normalized label key."""


class DanglingReferenceError(CatalogError):
    """A record references an id that does not exist in the catalog."""


def normalize_label(text: str) -> str:
    """Normalize a label or raw model output into a lookup key.

    Lowercases, trims, collapses internal whitespace runs, and strips
    leading/trailing ASCII punctuation (parentheses excepted, so a trailing
    parenthetical qualifier is preserved).
    """
    t = " ".join(text.lower().split())
    t = t.strip(_FLANK_CHARS)
    return " ".join(t.split())


def label_keys(label: str) -> list[str]:
    """Lookup keys derived from one catalog label.

    The normalized label itself, plus a second key with any trailing
    parenthetical qualifier removed ("conflict (psychological)" also indexes
    as "conflict") since raw model output will not reproduce the qualifier.
    """
    base = normalize_label(label)
    keys = [base]
    stripped = normalize_label(_PAREN_SUFFIX.sub("", base))
    if stripped and stripped != base:
        keys.append(stripped)
    return keys


@dataclass(frozen=True)
class EventConcept:
    """One event class from the knowledge graph."""

    id: str
    canonical_label: str
    aliases: tuple[str, ...] = ()
    top_class_id: str | None = None


@dataclass(frozen=True)
class CausalPair:
    """An ordered (cause, effect) relation between two catalog ids."""

    cause_id: str
    effect_id: str
    property: str


@dataclass
class ConceptCatalog:
    """Indexed view of the catalog export.

    ``label_index`` maps normalized concept labels and aliases (plus derived
    parenthetical-stripped keys) to concept ids; ``_class_label_index`` is a
    fallback for top-level class labels that no concept record covers.
    """

    concepts: dict[str, EventConcept]
    top_classes: dict[str, str]
    causal_pairs: frozenset[CausalPair]
    label_index: dict[str, str]
    _class_label_index: dict[str, str] = field(default_factory=dict)

    # -- lookups ------------------------------------------------------------

    def resolve_label(self, text: str) -> str | None:
        """Map raw text to a catalog id, or None when out of vocabulary."""
        key = normalize_label(text)
        if not key:
            return None
        hit = self.label_index.get(key)
        if hit is not None:
            return hit
        return self._class_label_index.get(key)

    def top_class_label_for(self, concept_or_class_id: str) -> str | None:
        """Canonical top-level class label for a catalog id, if it has one."""
        if concept_or_class_id in self.top_classes:
            return self.top_classes[concept_or_class_id]
        concept = self.concepts.get(concept_or_class_id)
        if concept is None or concept.top_class_id is None:
            return None
        return self.top_classes.get(concept.top_class_id)

    def vocabulary(self) -> list[str]:
        """Top-level class labels, sorted by normalized form (the generation vocabulary)."""
        return sorted(self.top_classes.values(), key=normalize_label)

    def event_labels(self) -> list[str]:
        """Every distinct concept label (canonical and aliases), sorted by normalized form.

        These are the legal generation triggers.
        """
        labels = []
        for concept in self.concepts.values():
            labels.append(concept.canonical_label)
            labels.extend(concept.aliases)
        return sorted(set(labels), key=normalize_label)

    def causal_reference(self) -> set[tuple[str, str]]:
        """Deduplicated causal id pairs, closed under reversal.

        Relations are collected in either direction, so each pair is emitted
        both ways; pairs with an endpoint that has no top-level class are
        dropped (counted in a warning).
        """
        reference: set[tuple[str, str]] = set()
        dropped = 0
        for pair in self.causal_pairs:
            if (
                self.top_class_label_for(pair.cause_id) is None
                or self.top_class_label_for(pair.effect_id) is None
            ):
                dropped += 1
                continue
            reference.add((pair.cause_id, pair.effect_id))
            reference.add((pair.effect_id, pair.cause_id))
        if dropped:
            logger.warning(
                "causal_reference: dropped %d pair(s) lacking a top-level class", dropped
            )
        return reference

    def stats(self) -> dict[str, int]:
        distinct_labels = set()
        for concept in self.concepts.values():
            distinct_labels.add(normalize_label(concept.canonical_label))
            distinct_labels.update(normalize_label(a) for a in concept.aliases)
        return {
            "concepts": len(self.concepts),
            "top_classes": len(self.top_classes),
            "labels": len(distinct_labels),
            "causal_pairs": len(self.causal_pairs),
        }

    def digest(self) -> str:
        """Stable content hash, recorded in corpora generated from this catalog."""
        canon = {
            "classes": sorted(self.top_classes.items()),
            "concepts": sorted(
                (c.id, c.canonical_label, sorted(c.aliases), c.top_class_id or "")
                for c in self.concepts.values()
            ),
            "causal": sorted(
                (p.cause_id, p.effect_id, p.property) for p in self.causal_pairs
            ),
        }
        blob = json.dumps(canon, ensure_ascii=False, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]


def _parse_record(line: str, lineno: int) -> dict:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CatalogParseError(f"line {lineno}: invalid JSON: {exc}") from exc
    if not isinstance(record, dict):
        raise CatalogParseError(f"line {lineno}: record must be a JSON object")
    return record


def _require(record: dict, key: str, lineno: int) -> str:
    value = record.get(key)
    if not isinstance(value, str) or not value.strip():
        raise CatalogParseError(f"line {lineno}: missing or empty field {key!r}")
    return value


def load_catalog(path: str) -> ConceptCatalog:
    """Load, validate, and index a catalog file.

    Raises CatalogParseError (with line number) on malformed records,
    LabelCollisionError when two concepts share a normalized label key, and
    DanglingReferenceError for unresolved ids.
    """
    concepts: dict[str, EventConcept] = {}
    top_classes: dict[str, str] = {}
    causal: list[tuple[CausalPair, int]] = []

    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            record = _parse_record(line, lineno)
            kind = record.get("kind", "concept")
            if kind == "class":
                cid = _require(record, "id", lineno)
                label = _require(record, "label", lineno)
                if cid in top_classes:
                    raise CatalogParseError(f"line {lineno}: duplicate class id {cid!r}")
                top_classes[cid] = label
            elif kind == "causal":
                prop = _require(record, "property", lineno)
                if prop not in CAUSAL_PROPERTIES:
                    raise CatalogParseError(
                        f"line {lineno}: unknown causal property {prop!r}"
                    )
                cause = _require(record, "cause", lineno)
                effect = _require(record, "effect", lineno)
                if cause == effect:
                    raise CatalogParseError(
                        f"line {lineno}: causal pair relates {cause!r} to itself"
                    )
                causal.append((CausalPair(cause, effect, prop), lineno))
            elif kind == "concept":
                cid = _require(record, "id", lineno)
                label = _require(record, "label", lineno)
                aliases = record.get("aliases", [])
                if not isinstance(aliases, list) or not all(
                    isinstance(a, str) and a.strip() for a in aliases
                ):
                    raise CatalogParseError(
                        f"line {lineno}: field 'aliases' must be a list of non-empty strings"
                    )
                top_class_id = record.get("top_class_id") or None
                if cid in concepts:
                    raise CatalogParseError(f"line {lineno}: duplicate concept id {cid!r}")
                concepts[cid] = EventConcept(cid, label, tuple(aliases), top_class_id)
            else:
                raise CatalogParseError(f"line {lineno}: unknown record kind {kind!r}")

    label_index: dict[str, str] = {}
    key_owner: dict[str, tuple[str, str]] = {}  # key -> (concept id, source label)
    for concept in concepts.values():
        for source in (concept.canonical_label, *concept.aliases):
            for key in label_keys(source):
                owner = key_owner.get(key)
                if owner is not None and owner[0] != concept.id:
                    raise LabelCollisionError(
                        f"label key {key!r} (from {source!r}) of concept {concept.id!r} "
                        f"collides with {owner[1]!r} of concept {owner[0]!r}"
                    )
                if owner is None:
                    key_owner[key] = (concept.id, source)
                    label_index[key] = concept.id

    class_label_index: dict[str, str] = {}
    for cid, label in top_classes.items():
        for key in label_keys(label):
            if key not in label_index and key not in class_label_index:
                class_label_index[key] = cid

    known_ids = set(concepts) | set(top_classes)
    for concept in concepts.values():
        if concept.top_class_id is not None and concept.top_class_id not in top_classes:
            raise DanglingReferenceError(
                f"concept {concept.id!r} references unknown top class {concept.top_class_id!r}"
            )
    for pair, lineno in causal:
        for endpoint in (pair.cause_id, pair.effect_id):
            if endpoint not in known_ids:
                raise DanglingReferenceError(
                    f"line {lineno}: causal pair references unknown id {endpoint!r}"
                )

    return ConceptCatalog(
        concepts=concepts,
        top_classes=top_classes,
        causal_pairs=frozenset(pair for pair, _ in causal),
        label_index=label_index,
        _class_label_index=class_label_index,
    )
