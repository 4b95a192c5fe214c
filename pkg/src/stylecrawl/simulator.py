"""Deterministic mock-web-app backend for desk-scale strategy experiments.

A mock app declares styled elements per state, hidden ground-truth listeners,
a transition table, and weighted synthetic coverage units. Firing a declared
transition moves state and covers its units; firing anything else is a silent
no-op that still burns budget. Listeners are exposed only to the labeling
pipeline, never to strategies.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .coverage import CoverageMap
from .dataset import mark_default_actionables, propagate_labels
from .dom import (
    BoundingBox,
    DomSnapshot,
    EventType,
    LabeledElement,
    TreePosition,
    recompute_structural,
)
from .errors import AppSpecError, BackendError
from .features import DEFAULT_COMPUTED_STYLE, RawElementObservation, extract_features

APP_SCHEMA_VERSION = 1

_ROOT_BOX = BoundingBox(0.0, 0.0, 1024.0, 768.0)


@dataclass
class ElementDecl:
    """One element in a mock state. `style` overrides the computed defaults;
    `parent` is the preorder index of an earlier element (0 = the implicit
    body root). `listeners` is hidden ground truth."""

    tag: str = "div"
    attrs: dict[str, str] = field(default_factory=dict)
    style: dict[str, str] = field(default_factory=dict)
    box: BoundingBox = _ROOT_BOX
    listeners: set[EventType] = field(default_factory=set)
    parent: int = 0
    text: str = ""


TransitionKey = tuple[str, int, EventType]


@dataclass
class MockAppSpec:
    name: str
    initial_state: str
    states: dict[str, list[ElementDecl]]
    transitions: dict[TransitionKey, str] = field(default_factory=dict)
    units: dict[str, int] = field(default_factory=dict)  # unit id -> char weight
    coverage: dict[TransitionKey, tuple[str, ...]] = field(default_factory=dict)

    def validate(self) -> None:
        if self.initial_state not in self.states:
            raise AppSpecError(f"initial state {self.initial_state!r} is not declared")
        for state, decls in self.states.items():
            for i, decl in enumerate(decls, start=1):
                if not 0 <= decl.parent < i:
                    raise AppSpecError(
                        f"state {state!r} element {i}: parent {decl.parent} must be an "
                        f"earlier preorder index"
                    )
        for key, target in self.transitions.items():
            state, eid, event = key
            if state not in self.states:
                raise AppSpecError(f"transition {key}: unknown source state {state!r}")
            if target not in self.states:
                raise AppSpecError(f"transition {key}: target state {target!r} is not declared")
            decls = self.states[state]
            if not 1 <= eid <= len(decls):
                raise AppSpecError(f"transition {key}: element {eid} not declared in {state!r}")
            decl = decls[eid - 1]
            if event not in decl.listeners and not (
                event is EventType.CLICK and _is_default_actionable(decl)
            ):
                raise AppSpecError(
                    f"transition {key}: element has no {event.value} listener and is "
                    f"not a default actionable"
                )
        for key, unit_ids in self.coverage.items():
            if key not in self.transitions:
                raise AppSpecError(f"coverage entry {key} has no matching transition")
            for uid in unit_ids:
                if uid not in self.units:
                    raise AppSpecError(f"coverage entry {key} references unknown unit {uid!r}")


def _is_default_actionable(decl: ElementDecl) -> bool:
    tag = decl.tag.lower()
    return (
        tag == "button"
        or (tag == "a" and "href" in decl.attrs)
        or (tag == "input" and decl.attrs.get("type", "").lower() in ("button", "submit", "image"))
    )


def _render_dom(decls: list[ElementDecl]) -> str:
    """Canonical markup for state abstraction: structure, attributes, style
    overrides and text, nothing positional."""
    children: dict[int, list[int]] = {i: [] for i in range(len(decls) + 1)}
    for i, decl in enumerate(decls, start=1):
        children[decl.parent].append(i)

    def render(idx: int) -> str:
        if idx == 0:
            tag, attrs, style, text = "body", {}, {}, ""
        else:
            decl = decls[idx - 1]
            tag, attrs, style, text = decl.tag, decl.attrs, decl.style, decl.text
        parts = [tag]
        for key in sorted(attrs):
            parts.append(f'{key}="{attrs[key]}"')
        if style:
            inline = "; ".join(f"{k}: {style[k]}" for k in sorted(style))
            parts.append(f'style="{inline}"')
        inner = text + "".join(render(c) for c in children[idx])
        return f"<{' '.join(parts)}>{inner}</{tag}>"

    return render(0).strip()


def build_snapshot(
    spec: MockAppSpec, state: str, *, expose_listeners: bool, label: bool = False
) -> DomSnapshot:
    """Materialize one state as a DomSnapshot. With `label` the snapshot runs
    through default-actionable marking and label propagation (corpus mode)."""
    decls = spec.states[state]
    parent: dict[int, int | None] = {0: None}
    elements: dict[int, LabeledElement] = {}

    root_obs = RawElementObservation(dict(DEFAULT_COMPUTED_STYLE), _ROOT_BOX)
    elements[0] = LabeledElement(
        element_id=0,
        features=extract_features(root_obs, TreePosition()),
        site_id=spec.name,
        snapshot_id=state,
        tag_name="body",
    )
    for i, decl in enumerate(decls, start=1):
        parent[i] = decl.parent
        style = dict(DEFAULT_COMPUTED_STYLE)
        style.update(decl.style)
        obs = RawElementObservation(style, decl.box, parent_index=decl.parent)
        elements[i] = LabeledElement(
            element_id=i,
            features=extract_features(obs, TreePosition()),
            direct_listeners=set(decl.listeners) if expose_listeners else set(),
            site_id=spec.name,
            snapshot_id=state,
            tag_name=decl.tag,
            attrs=dict(decl.attrs),
        )

    snapshot = DomSnapshot(
        snapshot_id=f"{spec.name}/{state}",
        root_id=0,
        parent=parent,
        elements=elements,
        serialized_dom=_render_dom(decls),
    )
    snapshot = recompute_structural(snapshot)
    snapshot = mark_default_actionables(snapshot)
    if label:
        snapshot = propagate_labels(snapshot)
    return snapshot


class SimBackend:
    """Engine backend over a MockAppSpec. One instance = one crawl session;
    coverage accumulates across resets (backtracking must not lose it) and the
    clock ticks once per fired event."""

    def __init__(self, spec: MockAppSpec, *, expose_listeners: bool = False):
        spec.validate()
        self.spec = spec
        self.expose_listeners = expose_listeners
        self._state = spec.initial_state
        self._covered: dict[str, list[tuple[int, int]]] = {}
        self._ticks = 0
        self._snapshots: dict[str, DomSnapshot] = {}

    def _snapshot(self, state: str) -> DomSnapshot:
        if state not in self._snapshots:
            self._snapshots[state] = build_snapshot(
                self.spec, state, expose_listeners=self.expose_listeners
            )
        return self._snapshots[state]

    def reset(self) -> DomSnapshot:
        self._state = self.spec.initial_state
        return self._snapshot(self._state)

    def fire(self, element_id: int, event: EventType, payload: dict) -> DomSnapshot:
        decls = self.spec.states[self._state]
        if not 1 <= element_id <= len(decls):
            if element_id != 0:
                raise BackendError(
                    f"element {element_id} does not exist in state {self._state!r}"
                )
        self._ticks += 1
        key = (self._state, element_id, event)
        target = self.spec.transitions.get(key)
        if target is not None:
            for uid in self.spec.coverage.get(key, ()):
                self._covered[uid] = [(0, self.spec.units[uid])]
            self._state = target
        return self._snapshot(self._state)

    def coverage(self) -> CoverageMap:
        return dict(self._covered)

    def clock(self) -> float:
        return float(self._ticks)

    def labeled_snapshots(self) -> list[DomSnapshot]:
        """Ground-truth labeled snapshots of every state, for corpus building."""
        return [
            build_snapshot(self.spec, state, expose_listeners=True, label=True)
            for state in sorted(self.spec.states)
        ]


def fire(
    spec: MockAppSpec, state: str, element_id: int, event: EventType
) -> tuple[str, tuple[str, ...]]:
    """Pure transition lookup: (next state, newly coverable unit ids)."""
    decls = spec.states[state]
    if not 0 <= element_id <= len(decls):
        raise BackendError(f"element {element_id} does not exist in state {state!r}")
    key = (state, element_id, event)
    target = spec.transitions.get(key)
    if target is None:
        return state, ()
    return target, spec.coverage.get(key, ())


def generate_equivalence_app(m: int, s: int, seed: int = 0) -> MockAppSpec:
    """One state, m style classes x s clones each, all clickable. Clones of a
    class share a style signature (positions differ) and all map onto one
    coverage unit, so novelty-ranked clicking covers everything in m actions."""
    if m < 1 or s < 1:
        raise AppSpecError("m and s must be >= 1")
    rng = random.Random(seed)
    colors: set[tuple[int, int, int]] = set()
    while len(colors) < m:
        colors.add((rng.randint(0, 255), rng.randint(0, 255), rng.randint(16, 240)))
    palette = sorted(colors)

    decls: list[ElementDecl] = []
    transitions: dict[TransitionKey, str] = {}
    units: dict[str, int] = {}
    coverage: dict[TransitionKey, tuple[str, ...]] = {}
    for i in range(m):
        r, g, b = palette[i]
        style = {
            "cursor": "pointer",
            "background-color": f"rgb({r}, {g}, {b})",
        }
        units[f"u{i}"] = 100
        for j in range(s):
            eid = len(decls) + 1
            decls.append(
                ElementDecl(
                    tag="div",
                    style=dict(style),
                    box=BoundingBox(20.0 + 40.0 * j, 20.0 + 40.0 * i, 30.0, 30.0),
                    listeners={EventType.CLICK},
                    text="item",
                )
            )
            key = ("s0", eid, EventType.CLICK)
            transitions[key] = "s0"
            coverage[key] = (f"u{i}",)

    spec = MockAppSpec(
        name=f"equivalence-{m}x{s}",
        initial_state="s0",
        states={"s0": decls},
        transitions=transitions,
        units=units,
        coverage=coverage,
    )
    spec.validate()
    return spec


def save_app(spec: MockAppSpec, path: str | Path) -> None:
    doc = {
        "schema_version": APP_SCHEMA_VERSION,
        "name": spec.name,
        "initial_state": spec.initial_state,
        "states": {
            state: [
                {
                    "tag": d.tag,
                    "attrs": {k: d.attrs[k] for k in sorted(d.attrs)},
                    "style": {k: d.style[k] for k in sorted(d.style)},
                    "box": [d.box.x, d.box.y, d.box.width, d.box.height],
                    "listeners": sorted(e.value for e in d.listeners),
                    "parent": d.parent,
                    "text": d.text,
                }
                for d in decls
            ]
            for state, decls in sorted(spec.states.items())
        },
        "units": {k: spec.units[k] for k in sorted(spec.units)},
        "transitions": [
            {"state": k[0], "element": k[1], "event": k[2].value, "target": target}
            for k, target in sorted(spec.transitions.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2].value))
        ],
        "coverage": [
            {"state": k[0], "element": k[1], "event": k[2].value, "units": list(uids)}
            for k, uids in sorted(spec.coverage.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2].value))
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_app(path: str | Path) -> MockAppSpec:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise AppSpecError(f"app spec {path} does not exist") from None
    except json.JSONDecodeError as exc:
        raise AppSpecError(f"app spec {path} is not valid JSON: {exc}") from exc
    if doc.get("schema_version") != APP_SCHEMA_VERSION:
        raise AppSpecError(f"unsupported app schema_version {doc.get('schema_version')!r}")
    try:
        states = {
            state: [
                ElementDecl(
                    tag=d.get("tag", "div"),
                    attrs=dict(d.get("attrs", {})),
                    style=dict(d.get("style", {})),
                    box=BoundingBox(*[float(v) for v in d["box"]]),
                    listeners={EventType(v) for v in d.get("listeners", [])},
                    parent=int(d.get("parent", 0)),
                    text=d.get("text", ""),
                )
                for d in decls
            ]
            for state, decls in doc["states"].items()
        }
        transitions = {
            (t["state"], int(t["element"]), EventType(t["event"])): t["target"]
            for t in doc.get("transitions", [])
        }
        coverage = {
            (c["state"], int(c["element"]), EventType(c["event"])): tuple(c["units"])
            for c in doc.get("coverage", [])
        }
        spec = MockAppSpec(
            name=doc["name"],
            initial_state=doc["initial_state"],
            states=states,
            transitions=transitions,
            units={k: int(v) for k, v in doc.get("units", {}).items()},
            coverage=coverage,
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise AppSpecError(f"app spec {path} is malformed: {exc}") from exc
    spec.validate()
    return spec


def bundled_app_path(name: str) -> Path:
    """Resolve a fixture app shipped with the package (e.g. 'two-state-anchor')."""
    path = Path(__file__).parent / "fixtures" / "apps" / f"{name}.json"
    if not path.exists():
        raise AppSpecError(f"no bundled app named {name!r}")
    return path
