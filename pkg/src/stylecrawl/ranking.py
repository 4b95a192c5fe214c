"""Style-novelty ranking: position-free style signatures, the global
examination registry of (signature, counter) pairs, and the push-back ordering
that sends never-seen-before styles to the front of the candidate queue.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, TypeVar

from .dom import BINARY_SOURCE_PROPERTIES, CSS_FEATURES, FeatureVector
from .errors import DataError, SchemaMismatchError

REGISTRY_SCHEMA_VERSION = 1

# Signature slots: the 51 retained CSS values followed by the 15 concrete
# binary-source values. Positional/structural features are excluded because
# they churn across states for the same logical element.
SIGNATURE_SCHEMA: tuple[str, ...] = CSS_FEATURES + BINARY_SOURCE_PROPERTIES


@dataclass(frozen=True)
class StyleSignature:
    """Element-wise comparable style fingerprint; hashable for exact matching."""

    values: tuple

    def __post_init__(self) -> None:
        if len(self.values) != len(SIGNATURE_SCHEMA):
            raise SchemaMismatchError(
                f"signature has {len(self.values)} slots, schema has {len(SIGNATURE_SCHEMA)}"
            )


def signature_of(fv: FeatureVector) -> StyleSignature:
    """Deterministic projection of a FeatureVector onto the signature schema."""
    values = tuple(fv.css[name] for name in CSS_FEATURES) + tuple(
        fv.source_values[name] for name in BINARY_SOURCE_PROPERTIES
    )
    return StyleSignature(values)


def delta(a: StyleSignature, b: StyleSignature) -> float:
    """Normalized Hamming distance in [0, 1]: unequal slots / total slots."""
    if len(a.values) != len(b.values):
        raise SchemaMismatchError("signatures have different schemas")
    unequal = sum(1 for x, y in zip(a.values, b.values) if x != y)
    return unequal / len(a.values)


C = TypeVar("C")


@dataclass
class RegistryEntry:
    signature: StyleSignature
    count: int


@dataclass
class ExaminationRegistry:
    """Session-global list of examined style classes with how often each was
    exercised. Single-writer; one registry per crawl session.

    With epsilon = 0 matching is exact signature equality (and entries are
    pairwise distinct); with epsilon > 0 a signature matches the first entry
    in insertion order at delta strictly below epsilon.
    """

    epsilon: float = 0.0
    entries: list[RegistryEntry] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.epsilon < 0:
            raise DataError("epsilon must be >= 0")
        self._exact_index: dict[StyleSignature, int] = {}
        for i, entry in enumerate(self.entries):
            self._exact_index.setdefault(entry.signature, i)  # first entry wins

    @property
    def total_examinations(self) -> int:
        return sum(e.count for e in self.entries)

    def match_index(self, sig: StyleSignature) -> int | None:
        """Index of the first matching entry, or None."""
        if self.epsilon == 0.0:
            return self._exact_index.get(sig)
        for i, entry in enumerate(self.entries):
            if delta(sig, entry.signature) < self.epsilon:
                return i
        return None

    def record(self, sig: StyleSignature) -> None:
        """Bump the matching entry's counter, or append (sig, 1)."""
        i = self.match_index(sig)
        if i is None:
            self._exact_index[sig] = len(self.entries)
            self.entries.append(RegistryEntry(sig, 1))
        else:
            self.entries[i].count += 1


def record_examination(registry: ExaminationRegistry, sig: StyleSignature) -> ExaminationRegistry:
    registry.record(sig)
    return registry


def rank_actionables(
    registry: ExaminationRegistry,
    candidates: Sequence[tuple[C, StyleSignature, Iterable]],
) -> list[tuple[C, StyleSignature, Iterable]]:
    """Reorder candidates by style novelty; always a permutation of the input.

    Never-matched signatures keep their original (document) order up front;
    matched ones follow, sorted by their entry's counter ascending with the
    original order breaking ties.
    """
    unseen = []
    seen = []  # (counter, original position, candidate)
    for pos, cand in enumerate(candidates):
        i = registry.match_index(cand[1])
        if i is None:
            unseen.append(cand)
        else:
            seen.append((registry.entries[i].count, pos, cand))
    seen.sort(key=lambda t: (t[0], t[1]))
    return unseen + [cand for _, _, cand in seen]


def save_registry(registry: ExaminationRegistry, path: str | Path) -> None:
    doc = {
        "schema_version": REGISTRY_SCHEMA_VERSION,
        "epsilon": registry.epsilon,
        "slots": len(SIGNATURE_SCHEMA),
        "entries": [
            {"values": list(e.signature.values), "count": e.count} for e in registry.entries
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, separators=(",", ":"), sort_keys=True)
        fh.write("\n")


def load_registry(path: str | Path) -> ExaminationRegistry:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"registry file {path} is not valid JSON: {exc}") from exc
    if doc.get("schema_version") != REGISTRY_SCHEMA_VERSION:
        raise DataError(f"unsupported registry schema_version {doc.get('schema_version')!r}")
    if doc.get("slots") != len(SIGNATURE_SCHEMA):
        raise SchemaMismatchError(
            f"registry signatures have {doc.get('slots')} slots, expected {len(SIGNATURE_SCHEMA)}"
        )
    entries = [
        RegistryEntry(StyleSignature(tuple(e["values"])), int(e["count"]))
        for e in doc.get("entries", [])
    ]
    return ExaminationRegistry(epsilon=float(doc.get("epsilon", 0.0)), entries=entries)
