"""Shared test data builders."""

from __future__ import annotations

import json

from eventdistill.catalog import ConceptCatalog, load_catalog

DEMO_CATALOG_RECORDS = [
    {"kind": "class", "id": "Q1", "label": "earthquake"},
    {"kind": "class", "id": "Q2", "label": "tsunami"},
    {"kind": "class", "id": "Q3", "label": "conflict"},
    {"kind": "class", "id": "Q4", "label": "famine"},
    {"kind": "class", "id": "Q5", "label": "nuclear disaster"},
    {"kind": "class", "id": "Q6", "label": "refugee crisis"},
    {"id": "Q1", "label": "earthquake", "aliases": ["quake"], "top_class_id": "Q1"},
    {"id": "Q2", "label": "tsunami", "aliases": [], "top_class_id": "Q2"},
    {
        "id": "Q3",
        "label": "conflict",
        "aliases": ["dispute", "conflict (psychological)"],
        "top_class_id": "Q3",
    },
    {"id": "Q4", "label": "famine", "aliases": [], "top_class_id": "Q4"},
    {"id": "Q5", "label": "nuclear disaster", "aliases": [], "top_class_id": "Q5"},
    {"id": "Q6", "label": "refugee crisis", "aliases": [], "top_class_id": "Q6"},
    {"kind": "causal", "cause": "Q1", "effect": "Q2", "property": "has_cause"},
    {"kind": "causal", "cause": "Q4", "effect": "Q6", "property": "has_effect"},
]


def catalog_text(records=None) -> str:
    records = DEMO_CATALOG_RECORDS if records is None else records
    return "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records)


def write_catalog(path, records=None) -> str:
    path = str(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(catalog_text(records))
    return path


def demo_catalog(tmp_path) -> ConceptCatalog:
    return load_catalog(write_catalog(tmp_path / "catalog.jsonl"))
