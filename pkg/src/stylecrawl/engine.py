"""The exploration loop: strategies, state abstraction, candidate extraction,
depth-first expansion with reset+replay backtracking, budgets, and the
state-flow graph the crawl leaves behind.

The engine is backend-agnostic: anything with reset/fire/coverage/clock works
(deterministic simulator or a live browser adapter). Strategies never see
ground-truth listeners; the two style-guided strategies look only at model
predictions and the style-novelty registry.
"""

from __future__ import annotations

import hashlib
import json
import random
import time
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Protocol, Sequence

from .coverage import CoverageLedger, CoverageMap
from .dom import EVENTS_BY_POPULARITY, DomSnapshot, EventType, FeatureVector
from .errors import BackendError, ConfigError, DataError, StaleCandidateError
from .ranking import ExaminationRegistry, StyleSignature, rank_actionables, signature_of

GRAPH_SCHEMA_VERSION = 1


def derive_seed(*parts) -> int:
    """Stable sub-seed from arbitrary parts (str hash is process-randomized)."""
    digest = hashlib.sha256("\x1f".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class Predictor(Protocol):
    def predict(self, fv: FeatureVector) -> tuple[bool, float]: ...


class Backend(Protocol):
    """What the engine needs from a crawl target."""

    def reset(self) -> DomSnapshot: ...

    def fire(self, element_id: int, event: EventType, payload: dict) -> DomSnapshot: ...

    def coverage(self) -> CoverageMap: ...

    def clock(self) -> float: ...


class StrategyKind(Enum):
    DEF = "def"  # default clickables only, preorder
    RND = "rnd"  # every element, seeded random order
    STYLE_CLK = "style-clk"  # click-model candidates, novelty-ranked
    STYLE_EVNTS = "style-evnts"  # all five models, novelty-ranked

    @classmethod
    def from_name(cls, name: str) -> "StrategyKind":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ConfigError(
                f"unknown strategy {name!r}; expected one of "
                f"{', '.join(k.value for k in cls)}"
            ) from None


@dataclass
class Strategy:
    """A strategy choice plus its per-session state (models, registry, seed)."""

    kind: StrategyKind
    seed: int = 0
    models: dict[EventType, Predictor] = field(default_factory=dict)
    epsilon: float = 0.0
    registry: ExaminationRegistry | None = None

    def __post_init__(self) -> None:
        if self.kind is StrategyKind.STYLE_CLK and EventType.CLICK not in self.models:
            raise ConfigError("style-clk strategy needs a click model")
        if self.kind is StrategyKind.STYLE_EVNTS:
            missing = [e.value for e in EventType if e not in self.models]
            if missing:
                raise ConfigError(f"style-evnts strategy needs all five models; missing {missing}")
        if self.uses_ranking and self.registry is None:
            self.registry = ExaminationRegistry(epsilon=self.epsilon)

    @property
    def uses_ranking(self) -> bool:
        return self.kind in (StrategyKind.STYLE_CLK, StrategyKind.STYLE_EVNTS)

    @classmethod
    def default_clickables(cls) -> "Strategy":
        return cls(StrategyKind.DEF)

    @classmethod
    def random_all(cls, seed: int = 0) -> "Strategy":
        return cls(StrategyKind.RND, seed=seed)

    @classmethod
    def style_click(cls, click_model: Predictor, epsilon: float = 0.0, seed: int = 0) -> "Strategy":
        return cls(
            StrategyKind.STYLE_CLK,
            seed=seed,
            models={EventType.CLICK: click_model},
            epsilon=epsilon,
        )

    @classmethod
    def style_events(
        cls, models: dict[EventType, Predictor], epsilon: float = 0.0, seed: int = 0
    ) -> "Strategy":
        return cls(StrategyKind.STYLE_EVNTS, seed=seed, models=dict(models), epsilon=epsilon)


@dataclass
class CrawlBudget:
    """Stop conditions; at least one bound must be set. The stock experiment
    budgets are 600 seconds or 100 actions."""

    max_wall_seconds: float | None = None
    max_actions: int | None = None

    def __post_init__(self) -> None:
        if self.max_wall_seconds is None and self.max_actions is None:
            raise ConfigError("budget needs max_wall_seconds and/or max_actions")
        if (self.max_wall_seconds is not None and self.max_wall_seconds <= 0) or (
            self.max_actions is not None and self.max_actions <= 0
        ):
            raise ConfigError("budget bounds must be positive")

    def exhausted(self, actions: int, elapsed_seconds: float) -> bool:
        if self.max_actions is not None and actions >= self.max_actions:
            return True
        if self.max_wall_seconds is not None and elapsed_seconds >= self.max_wall_seconds:
            return True
        return False


def abstract_state(snapshot: DomSnapshot) -> str:
    """State identity: SHA-256 of the canonical serialized DOM. Any DOM change
    is a new state."""
    return hashlib.sha256(snapshot.serialized_dom.encode("utf-8")).hexdigest()


@dataclass
class StateRecord:
    state_id: str  # equals the DOM hash
    order: int  # discovery index
    snapshot: DomSnapshot | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class GraphEdge:
    source: str
    element_id: int
    event: EventType
    target: str


@dataclass
class StateFlowGraph:
    initial: str
    states: dict[str, StateRecord] = field(default_factory=dict)
    edges: list[GraphEdge] = field(default_factory=list)

    def add_state(self, state_id: str, snapshot: DomSnapshot | None = None) -> bool:
        if state_id in self.states:
            return False
        self.states[state_id] = StateRecord(state_id, len(self.states), snapshot)
        return True

    def add_edge(self, source: str, element_id: int, event: EventType, target: str) -> None:
        if source not in self.states or target not in self.states:
            raise DataError("edge endpoints must exist in the graph")
        self.edges.append(GraphEdge(source, element_id, event, target))

    def discovery_order(self) -> list[str]:
        return [s.state_id for s in sorted(self.states.values(), key=lambda s: s.order)]


@dataclass(frozen=True)
class ActionRecord:
    """One fired event: the unit of the action budget."""

    index: int
    from_state: str
    element_id: int
    event: EventType
    payload: dict
    to_state: str
    new_state: bool
    covered_chars: int  # cumulative, sampled right after this action
    clock: float


@dataclass
class CrawlResult:
    graph: StateFlowGraph
    ledger: CoverageLedger
    actions: list[ActionRecord]
    strategy: StrategyKind
    seed: int
    registry: ExaminationRegistry | None
    incomplete: bool = False


class _Pending:
    """Unfired candidates of one state. DEF/RND consume a fixed queue; the
    style strategies re-rank remaining elements against the registry at every
    pick, which is what pushes just-examined look-alikes back."""

    def __init__(self, snapshot: DomSnapshot, strategy: Strategy):
        self.ranked = strategy.uses_ranking
        self.queue: deque[tuple[int, EventType]] = deque()
        self.entries: list[tuple[int, StyleSignature, deque[EventType]]] = []
        if self.ranked:
            for eid, sig, events in _style_candidates(snapshot, strategy):
                self.entries.append((eid, sig, deque(events)))
        else:
            self.queue.extend(_plain_candidates(snapshot, strategy))

    def has_next(self) -> bool:
        return bool(self.entries) if self.ranked else bool(self.queue)

    def pick(self, registry: ExaminationRegistry | None) -> tuple[int, EventType, StyleSignature | None]:
        if not self.ranked:
            eid, event = self.queue.popleft()
            return eid, event, None
        assert registry is not None
        ordered = rank_actionables(registry, self.entries)
        eid, sig, events = ordered[0]
        event = events.popleft()
        if not events:
            self.entries.remove((eid, sig, events))
        return eid, event, sig


def _plain_candidates(snapshot: DomSnapshot, strategy: Strategy) -> list[tuple[int, EventType]]:
    order = snapshot.preorder()
    if strategy.kind is StrategyKind.DEF:
        return [
            (eid, EventType.CLICK)
            for eid in order
            if snapshot.elements[eid].is_default_actionable
        ]
    # RND: all elements, shuffled by a per-state sub-seed so reruns reproduce
    rng = random.Random(derive_seed(strategy.seed, "rnd", abstract_state(snapshot)))
    shuffled = list(order)
    rng.shuffle(shuffled)
    return [(eid, EventType.CLICK) for eid in shuffled]


def _style_candidates(
    snapshot: DomSnapshot, strategy: Strategy
) -> list[tuple[int, StyleSignature, tuple[EventType, ...]]]:
    events = (
        (EventType.CLICK,)
        if strategy.kind is StrategyKind.STYLE_CLK
        else EVENTS_BY_POPULARITY
    )
    out = []
    for eid in snapshot.preorder():
        fv = snapshot.elements[eid].features
        predicted = tuple(
            ev for ev in events if strategy.models[ev].predict(fv)[0]
        )
        if predicted:
            out.append((eid, signature_of(fv), predicted))
    return out


def extract_candidates(snapshot: DomSnapshot, strategy: Strategy) -> list[tuple[int, EventType]]:
    """The state's full candidate ordering under the strategy (registry as-is):
    DEF = default actionables preorder; RND = everything shuffled by seed;
    style strategies = positive predictions, novelty-ranked, events expanded
    per element in popularity order."""
    pending = _Pending(snapshot, strategy)
    out = []
    while pending.has_next():
        eid, event, _ = pending.pick(strategy.registry)
        out.append((eid, event))
    return out


def choose_next_state(graph: StateFlowGraph, frontier: Iterable[str]) -> str:
    """Depth-first pick: the most recently discovered state that still has
    unfired candidates."""
    frontier_set = set(frontier)
    if not frontier_set:
        raise ValueError("frontier is empty")
    for state_id in reversed(graph.discovery_order()):
        if state_id in frontier_set:
            return state_id
    raise ValueError("frontier states are not in the graph")


def _payload_for(event: EventType, seed: int, action_index: int) -> dict:
    if event is EventType.MOUSEDOWN:
        rng = random.Random(derive_seed(seed, "payload", action_index))
        return {"button": rng.randint(0, 2)}
    return {}


def crawl(backend: Backend, strategy: Strategy, budget: CrawlBudget) -> CrawlResult:
    """Explore until the budget runs out or no unfired candidate remains.

    Every fired candidate is one logged action and one graph edge; replayed
    actions during backtracking consume wall time but no budgeted actions.
    """
    started = time.monotonic()
    ledger = CoverageLedger()
    snapshot = backend.reset()
    ledger.merge(backend.coverage())  # load-time coverage counts

    current = abstract_state(snapshot)
    graph = StateFlowGraph(initial=current)
    graph.add_state(current, snapshot)
    pending: dict[str, _Pending] = {current: _Pending(snapshot, strategy)}
    paths: dict[str, tuple[tuple[int, EventType, dict], ...]] = {current: ()}
    actions: list[ActionRecord] = []
    incomplete = False

    while not budget.exhausted(len(actions), time.monotonic() - started):
        if not pending[current].has_next():
            frontier = [s for s, p in pending.items() if p.has_next()]
            if not frontier:
                break
            target = choose_next_state(graph, frontier)
            try:
                snapshot = _goto(backend, paths[target], ledger)
            except BackendError:
                incomplete = True
                break
            if abstract_state(snapshot) != target:
                # live DOM drifted; this state is unreachable now
                pending.pop(target, None)
                continue
            current = target

        eid, event, sig = pending[current].pick(strategy.registry)
        if eid not in snapshot.elements:
            continue  # stale candidate, dropped silently
        payload = _payload_for(event, strategy.seed, len(actions))
        try:
            snapshot = backend.fire(eid, event, payload)
        except StaleCandidateError:
            continue
        except BackendError:
            incomplete = True
            break
        ledger.merge(backend.coverage())

        to_state = abstract_state(snapshot)
        new_state = graph.add_state(to_state, snapshot)
        if new_state:
            pending[to_state] = _Pending(snapshot, strategy)
            paths[to_state] = paths[current] + ((eid, event, payload),)
        graph.add_edge(current, eid, event, to_state)
        if strategy.uses_ranking and sig is not None:
            strategy.registry.record(sig)  # type: ignore[union-attr]
        actions.append(
            ActionRecord(
                index=len(actions),
                from_state=current,
                element_id=eid,
                event=event,
                payload=payload,
                to_state=to_state,
                new_state=new_state,
                covered_chars=ledger.covered_chars,
                clock=backend.clock(),
            )
        )
        current = to_state

    return CrawlResult(
        graph=graph,
        ledger=ledger,
        actions=actions,
        strategy=strategy.kind,
        seed=strategy.seed,
        registry=strategy.registry,
        incomplete=incomplete,
    )


def _goto(
    backend: Backend,
    path: Sequence[tuple[int, EventType, dict]],
    ledger: CoverageLedger,
) -> DomSnapshot:
    """Backtrack: reset to the initial state and replay the discovery path."""
    snapshot = backend.reset()
    for eid, event, payload in path:
        snapshot = backend.fire(eid, event, payload)
    ledger.merge(backend.coverage())
    return snapshot


def replay(backend: Backend, actions: Sequence[ActionRecord]) -> StateFlowGraph:
    """Re-drive a logged action sequence; returns the reconstructed graph.

    Raises BackendError if the backend's responses diverge from the log (a
    deterministic simulator never diverges).
    """
    snapshot = backend.reset()
    initial = abstract_state(snapshot)
    graph = StateFlowGraph(initial=initial)
    graph.add_state(initial, snapshot)
    paths: dict[str, tuple[tuple[int, EventType, dict], ...]] = {initial: ()}
    current = initial
    for rec in actions:
        if rec.from_state not in paths:
            raise BackendError(f"action {rec.index} starts from an undiscovered state")
        if current != rec.from_state:
            snapshot = backend.reset()
            if abstract_state(snapshot) != initial:
                raise BackendError("replay diverged: initial state changed")
            for eid, event, payload in paths[rec.from_state]:
                snapshot = backend.fire(eid, event, payload)
            if abstract_state(snapshot) != rec.from_state:
                raise BackendError(f"replay diverged reaching state {rec.from_state[:12]}")
            current = rec.from_state
        snapshot = backend.fire(rec.element_id, rec.event, rec.payload)
        to_state = abstract_state(snapshot)
        if to_state != rec.to_state:
            raise BackendError(
                f"replay diverged at action {rec.index}: got {to_state[:12]}, "
                f"log says {rec.to_state[:12]}"
            )
        if graph.add_state(to_state, snapshot):
            paths[to_state] = paths[current] + ((rec.element_id, rec.event, rec.payload),)
        graph.add_edge(current, rec.element_id, rec.event, to_state)
        current = to_state
    return graph


def save_graph(graph: StateFlowGraph, path: str | Path) -> None:
    doc = {
        "schema_version": GRAPH_SCHEMA_VERSION,
        "initial": graph.initial,
        "states": [{"id": s} for s in graph.discovery_order()],
        "edges": [
            {
                "source": e.source,
                "element": e.element_id,
                "event": e.event.value,
                "target": e.target,
            }
            for e in graph.edges
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, separators=(",", ":"), sort_keys=True)
        fh.write("\n")


def load_graph(path: str | Path) -> StateFlowGraph:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"graph file {path} is not valid JSON: {exc}") from exc
    if doc.get("schema_version") != GRAPH_SCHEMA_VERSION:
        raise DataError(f"unsupported graph schema_version {doc.get('schema_version')!r}")
    graph = StateFlowGraph(initial=doc["initial"])
    for state in doc["states"]:
        graph.add_state(state["id"])
    for edge in doc["edges"]:
        graph.add_edge(edge["source"], edge["element"], EventType(edge["event"]), edge["target"])
    return graph


def write_dot(graph: StateFlowGraph, path: str | Path) -> None:
    """Graphviz view: nodes are DOM-hash prefixes, edges carry element/event."""
    lines = ["digraph crawl {"]
    for state_id in graph.discovery_order():
        shape = "doublecircle" if state_id == graph.initial else "circle"
        lines.append(f'  "{state_id[:12]}" [shape={shape}];')
    for e in graph.edges:
        lines.append(
            f'  "{e.source[:12]}" -> "{e.target[:12]}" '
            f'[label="e{e.element_id}:{e.event.value}"];'
        )
    lines.append("}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
