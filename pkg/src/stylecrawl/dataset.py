"""Labeled training corpora: bubbling-label propagation, default actionables,
site-level splitting, class balancing, and the line-delimited corpus format.

Corpus files are UTF-8 JSON lines: line 1 is a header object fixing the
schema version and the 68 ordered feature names; every following line is one
element record. Re-serializing a loaded corpus is byte-identical.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field, replace
from pathlib import Path

from .dom import (
    BINARY_SOURCE_PROPERTIES,
    FEATURE_NAMES,
    DomSnapshot,
    EventType,
    FeatureVector,
    LabeledElement,
)
from .errors import CannotSplitError, CorpusFormatError, EmptyClassError

CORPUS_SCHEMA_VERSION = 1

# Tags that are clickable without any script attached.
_INPUT_ACTIONABLE_TYPES = frozenset({"button", "submit", "image"})


@dataclass
class Corpus:
    """A bag of labeled element rows spanning one or more sites."""

    rows: list[LabeledElement]
    sites: set[str] = field(default_factory=set)
    provenance: str = ""

    def __post_init__(self) -> None:
        row_sites = {r.site_id for r in self.rows}
        if not self.sites:
            self.sites = row_sites
        elif not row_sites <= self.sites:
            raise ValueError(f"rows reference undeclared sites: {sorted(row_sites - self.sites)}")


@dataclass
class SplitCorpus:
    """Site-disjoint train/test halves of a corpus."""

    train: Corpus
    test: Corpus

    def __post_init__(self) -> None:
        overlap = self.train.sites & self.test.sites
        if overlap:
            raise ValueError(f"train/test share sites: {sorted(overlap)}")


def mark_default_actionables(snapshot: DomSnapshot) -> DomSnapshot:
    """Flag elements clickable without script: <a href=...>, <button>, and
    <input type=button|submit|image>."""
    new_elements = {}
    for eid, el in snapshot.elements.items():
        tag = el.tag_name.lower()
        default = (
            tag == "button"
            or (tag == "a" and "href" in el.attrs)
            or (tag == "input" and el.attrs.get("type", "").lower() in _INPUT_ACTIONABLE_TYPES)
        )
        new_elements[eid] = replace(el, is_default_actionable=default)
    return snapshot.with_elements(new_elements)


def propagate_labels(snapshot: DomSnapshot) -> DomSnapshot:
    """Push every direct listener down to all descendants (all five event types
    bubble) and add click for default actionables. Monotone and idempotent."""
    order = snapshot.preorder()
    inherited: dict[int, frozenset[EventType]] = {}
    new_elements = {}
    for eid in order:
        par = snapshot.parent[eid]
        above = inherited[par] if par is not None else frozenset()
        el = snapshot.elements[eid]
        inherited[eid] = above | el.direct_listeners
        effective = set(el.effective_labels or ()) | inherited[eid]
        if el.is_default_actionable:
            effective.add(EventType.CLICK)
        new_elements[eid] = replace(el, effective_labels=effective)
    return snapshot.with_elements(new_elements)


def balance(corpus: Corpus, event: EventType, seed: int) -> Corpus:
    """Under-sample negatives until both classes have equal counts.

    Positives are untouched and row order is preserved; which negatives are
    dropped depends only on the seed. If negatives are already the minority
    nothing is removed. Raises EmptyClassError when there are no positives.
    """
    pos_idx = [i for i, r in enumerate(corpus.rows) if event in (r.effective_labels or ())]
    pos_set = set(pos_idx)
    neg_idx = [i for i in range(len(corpus.rows)) if i not in pos_set]
    if not pos_idx:
        raise EmptyClassError(f"corpus has no positive rows for {event.value}")
    if len(neg_idx) > len(pos_idx):
        rng = random.Random(seed)
        shuffled = list(neg_idx)
        rng.shuffle(shuffled)
        neg_idx = shuffled[: len(pos_idx)]
    keep = sorted(set(pos_idx) | set(neg_idx))
    return Corpus(
        rows=[corpus.rows[i] for i in keep],
        sites=set(corpus.sites),
        provenance=corpus.provenance,
    )


def split_by_site(corpus: Corpus, test_fraction: float = 0.20, seed: int = 0) -> SplitCorpus:
    """Partition by site (never by row): ~test_fraction of sites go to test,
    rounding toward test with a minimum of one site per side."""
    sites = sorted(corpus.sites)
    if len(sites) < 2:
        raise CannotSplitError(f"need at least 2 sites to split, have {len(sites)}")
    n_test = min(len(sites) - 1, max(1, math.ceil(test_fraction * len(sites))))
    rng = random.Random(seed)
    rng.shuffle(sites)
    test_sites = set(sites[:n_test])
    train_sites = set(sites[n_test:])
    train_rows = [r for r in corpus.rows if r.site_id in train_sites]
    test_rows = [r for r in corpus.rows if r.site_id in test_sites]
    return SplitCorpus(
        train=Corpus(train_rows, train_sites, corpus.provenance),
        test=Corpus(test_rows, test_sites, corpus.provenance),
    )


def snapshot_rows(snapshot: DomSnapshot) -> list[LabeledElement]:
    """Corpus rows for one labeled snapshot, in document order."""
    return [snapshot.elements[eid] for eid in snapshot.preorder()]


def _event_list(events: "set[EventType] | None") -> list[str]:
    return [e.value for e in sorted(events or set(), key=lambda e: e.popularity)]


def _row_record(row: LabeledElement) -> dict:
    return {
        "site_id": row.site_id,
        "snapshot_id": row.snapshot_id,
        "element_id": row.element_id,
        "tag_name": row.tag_name,
        "attrs": {k: row.attrs[k] for k in sorted(row.attrs)},
        "features": row.features.values(),
        "style_sources": [row.features.source_values[p] for p in BINARY_SOURCE_PROPERTIES],
        "direct_listeners": _event_list(row.direct_listeners),
        "effective_labels": _event_list(row.effective_labels),
        "is_default_actionable": row.is_default_actionable,
    }


def _parse_row(record: dict, line_no: int) -> LabeledElement:
    try:
        sources = dict(zip(BINARY_SOURCE_PROPERTIES, record["style_sources"]))
        features = FeatureVector.from_values(record["features"], sources)
        return LabeledElement(
            element_id=int(record["element_id"]),
            features=features,
            direct_listeners={EventType(v) for v in record["direct_listeners"]},
            effective_labels={EventType(v) for v in record["effective_labels"]},
            is_default_actionable=bool(record["is_default_actionable"]),
            site_id=record["site_id"],
            snapshot_id=record["snapshot_id"],
            tag_name=record["tag_name"],
            attrs=dict(record["attrs"]),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise CorpusFormatError(f"line {line_no}: bad element record ({exc})") from exc


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    header = {
        "schema_version": CORPUS_SCHEMA_VERSION,
        "provenance": corpus.provenance,
        "sites": sorted(corpus.sites),
        "feature_names": list(FEATURE_NAMES),
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, separators=(",", ":")) + "\n")
        for row in corpus.rows:
            fh.write(json.dumps(_row_record(row), separators=(",", ":")) + "\n")


def load_corpus(path: str | Path) -> Corpus:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise CorpusFormatError("line 1: empty file, header record expected")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise CorpusFormatError(f"line 1: bad header ({exc})") from exc
    if header.get("schema_version") != CORPUS_SCHEMA_VERSION:
        raise CorpusFormatError(
            f"line 1: unsupported schema_version {header.get('schema_version')!r}"
        )
    if tuple(header.get("feature_names", ())) != FEATURE_NAMES:
        raise CorpusFormatError("line 1: feature_names do not match the 68-feature schema")
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            raise CorpusFormatError(f"line {i}: blank line inside corpus")
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusFormatError(f"line {i}: invalid record ({exc})") from exc
        rows.append(_parse_row(record, i))
    return Corpus(rows=rows, sites=set(header["sites"]), provenance=header["provenance"])
