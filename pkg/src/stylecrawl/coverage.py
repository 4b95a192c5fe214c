"""Character-based code coverage bookkeeping.

Coverage is tracked per script as a union of covered character intervals; the
simulator's weighted abstract units are the degenerate case of one script per
unit with a single [0, weight) interval. Ratios are computed against the
maximal set: the union of everything any compared run discovered.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

Interval = tuple[int, int]  # [start, end), end > start


class IntervalSet:
    """Sorted, disjoint, half-open integer intervals with union semantics."""

    __slots__ = ("_ivs",)

    def __init__(self, intervals: Iterable[Interval] = ()):
        self._ivs: list[Interval] = []
        for start, end in intervals:
            self.add(start, end)

    def add(self, start: int, end: int) -> int:
        """Union one interval in; returns how many new characters it added."""
        if end <= start:
            return 0
        before = self.size
        merged: list[Interval] = []
        placed = False
        for s, e in self._ivs:
            if e < start or s > end:  # disjoint (touching intervals merge)
                if not placed and s > end:
                    merged.append((start, end))
                    placed = True
                merged.append((s, e))
            else:
                start = min(start, s)
                end = max(end, e)
        if not placed:
            merged.append((start, end))
            merged.sort()
        self._ivs = merged
        return self.size - before

    def union(self, other: "IntervalSet") -> None:
        for s, e in other._ivs:
            self.add(s, e)

    def contains_set(self, other: "IntervalSet") -> bool:
        return all(self._covers(s, e) for s, e in other._ivs)

    def _covers(self, start: int, end: int) -> bool:
        return any(s <= start and end <= e for s, e in self._ivs)

    @property
    def size(self) -> int:
        return sum(e - s for s, e in self._ivs)

    def intervals(self) -> list[Interval]:
        return list(self._ivs)

    def __eq__(self, other) -> bool:
        return isinstance(other, IntervalSet) and self._ivs == other._ivs

    def __repr__(self) -> str:
        return f"IntervalSet({self._ivs!r})"


CoverageMap = Mapping[str, Iterable[Interval]]


@dataclass
class CoverageLedger:
    """Covered characters per script/unit, plus the (post-hoc) maximal set."""

    covered: dict[str, IntervalSet] = field(default_factory=dict)
    maximal: dict[str, IntervalSet] | None = None

    def add_range(self, script: str, start: int, end: int) -> int:
        return self.covered.setdefault(script, IntervalSet()).add(start, end)

    def add_unit(self, unit_id: str, weight: int) -> int:
        return self.add_range(unit_id, 0, weight)

    def merge(self, coverage: CoverageMap) -> int:
        """Union a cumulative coverage map in; returns newly covered chars."""
        added = 0
        for script, intervals in coverage.items():
            for start, end in intervals:
                added += self.add_range(script, start, end)
        return added

    @property
    def covered_chars(self) -> int:
        return sum(ivs.size for ivs in self.covered.values())

    @property
    def maximal_chars(self) -> int:
        if self.maximal is None:
            raise ValueError("maximal set not finalized")
        return sum(ivs.size for ivs in self.maximal.values())

    def set_maximal(self, maximal: dict[str, IntervalSet]) -> None:
        for script, ivs in self.covered.items():
            if script not in maximal or not maximal[script].contains_set(ivs):
                raise ValueError(f"covered set exceeds maximal set for {script!r}")
        self.maximal = {k: IntervalSet(v.intervals()) for k, v in maximal.items()}

    def ratio(self) -> float:
        """Covered chars over maximal-set chars (1.0 for an empty maximal set)."""
        total = self.maximal_chars
        return self.covered_chars / total if total else 1.0

    def as_map(self) -> dict[str, list[Interval]]:
        return {k: self.covered[k].intervals() for k in sorted(self.covered)}


def maximal_union(ledgers: Iterable[CoverageLedger]) -> dict[str, IntervalSet]:
    """The maximal set: per-script union of everything any run covered."""
    out: dict[str, IntervalSet] = {}
    for ledger in ledgers:
        for script, ivs in ledger.covered.items():
            out.setdefault(script, IntervalSet()).union(ivs)
    return out
