"""Shared builders for test data: feature vectors, snapshots, corpora."""

from __future__ import annotations

import random

from stylecrawl.dataset import Corpus
from stylecrawl.dom import (
    BoundingBox,
    DomSnapshot,
    EventType,
    FeatureVector,
    LabeledElement,
    TreePosition,
)
from stylecrawl.features import DEFAULT_COMPUTED_STYLE, RawElementObservation, extract_features

DEFAULT_BOX = BoundingBox(10.0, 10.0, 50.0, 20.0)


def fv(style: dict[str, str] | None = None, box: BoundingBox = DEFAULT_BOX,
       position: TreePosition = TreePosition()) -> FeatureVector:
    computed = dict(DEFAULT_COMPUTED_STYLE)
    if style:
        computed.update(style)
    return extract_features(RawElementObservation(computed, box), position)


def element(
    eid: int,
    tag: str = "div",
    listeners: set[EventType] | None = None,
    attrs: dict[str, str] | None = None,
    style: dict[str, str] | None = None,
    box: BoundingBox = DEFAULT_BOX,
    site_id: str = "site0",
    snapshot_id: str = "snap0",
) -> LabeledElement:
    return LabeledElement(
        element_id=eid,
        features=fv(style, box),
        direct_listeners=set(listeners or set()),
        site_id=site_id,
        snapshot_id=snapshot_id,
        tag_name=tag,
        attrs=dict(attrs or {}),
    )


def snapshot(parent: dict[int, int | None], elements: dict[int, LabeledElement] | None = None,
             dom: str | None = None, snapshot_id: str = "snap0") -> DomSnapshot:
    """Snapshot over an explicit parent map; elements default to plain divs."""
    if elements is None:
        elements = {eid: element(eid, snapshot_id=snapshot_id) for eid in parent}
    root = next(eid for eid, p in parent.items() if p is None)
    return DomSnapshot(
        snapshot_id=snapshot_id,
        root_id=root,
        parent=dict(parent),
        elements=elements,
        serialized_dom=dom if dom is not None else f"<doc id={snapshot_id} n={len(parent)}>",
    )


def random_parent_map(rng: random.Random, n: int) -> dict[int, int | None]:
    """Random preorder-indexed tree: each node's parent is an earlier node."""
    parent: dict[int, int | None] = {0: None}
    for i in range(1, n):
        parent[i] = rng.randrange(i)
    return parent


def brute_force_structural(parent: dict[int, int | None]) -> dict[int, tuple[int, int, int]]:
    """Independent oracle: (depth, descendants, height) per node by brute force."""

    def depth(node) -> int:
        d = 0
        while parent[node] is not None:
            node = parent[node]
            d += 1
        return d

    def descendants(node) -> list[int]:
        out = []
        stack = [node]
        while stack:
            cur = stack.pop()
            kids = [k for k, p in parent.items() if p == cur]
            out.extend(kids)
            stack.extend(kids)
        return out

    def height(node) -> int:
        kids = [k for k, p in parent.items() if p == node]
        return 0 if not kids else 1 + max(height(k) for k in kids)

    return {node: (depth(node), len(descendants(node)), height(node)) for node in parent}


def synth_corpus(
    n: int,
    seed: int,
    rule,
    *,
    event: EventType = EventType.CLICK,
    n_sites: int = 7,
    vary_boxes: bool = True,
) -> Corpus:
    """Rows whose labels follow `rule(fv) -> bool` exactly (the oracle)."""
    rng = random.Random(seed)
    rows = []
    for i in range(n):
        style = {
            "cursor": rng.choice(["auto", "pointer"]),
            "background-image": rng.choice(["none", "url(a.png)"]),
            "font-weight": rng.choice(["400", "700"]),
        }
        box = (
            BoundingBox(float(rng.randint(0, 800)), float(rng.randint(0, 600)), 50.0, 20.0)
            if vary_boxes
            else DEFAULT_BOX
        )
        vector = extract_features(
            RawElementObservation({**DEFAULT_COMPUTED_STYLE, **style}, box),
            TreePosition(rng.randint(0, 10), 0, 0),
        )
        label = rule(vector)
        rows.append(
            LabeledElement(
                element_id=i,
                features=vector,
                direct_listeners={event} if label else set(),
                site_id=f"site{i % n_sites}",
                snapshot_id="synthetic",
                tag_name="div",
            )
        )
    return Corpus(rows)


RULE_CURSOR = lambda v: v.css["cursor"] == "pointer"  # noqa: E731
RULE_XOR = lambda v: (v.css["cursor"] == "pointer") != v.binary["has_background"]  # noqa: E731
RULE_THREE = lambda v: (  # noqa: E731
    v.css["cursor"] == "pointer"
    and (v.css["font-weight"] == "700" or v.binary["has_background"])
)


class RulePredictor:
    """Oracle classifier built from a generator rule."""

    def __init__(self, rule):
        self.rule = rule

    def predict(self, vector) -> tuple[bool, float]:
        hit = bool(self.rule(vector))
        return (hit, 1.0 if hit else 0.0)


CURSOR_ORACLE = RulePredictor(RULE_CURSOR)


def random_app(rng: random.Random, max_states: int = 5, max_elements: int = 5):
    """A random but always-valid mock app for property tests."""
    from stylecrawl.simulator import ElementDecl, MockAppSpec

    n_states = rng.randint(1, max_states)
    state_names = [f"s{i}" for i in range(n_states)]
    styles = [
        {},
        {"cursor": "pointer"},
        {"background-color": "rgb(200, 60, 60)"},
        {"cursor": "pointer", "text-decoration-line": "underline"},
    ]
    states = {}
    transitions = {}
    units = {}
    coverage = {}
    for si, state in enumerate(state_names):
        decls = []
        for i in range(rng.randint(1, max_elements)):
            kind = rng.random()
            if kind < 0.3:
                decl = ElementDecl(
                    tag="a",
                    attrs={"href": f"#{i}"},
                    style=dict(rng.choice(styles)),
                    box=BoundingBox(float(10 * i), float(30 * si), 40.0, 16.0),
                    text=f"{state}-a{i}",
                )
            else:
                listeners = {
                    ev for ev in EventType if rng.random() < 0.35
                }
                decl = ElementDecl(
                    tag="div",
                    style=dict(rng.choice(styles)),
                    box=BoundingBox(float(10 * i), float(30 * si + 300), 40.0, 16.0),
                    listeners=listeners,
                    text=f"{state}-d{i}",
                )
            decls.append(decl)
        states[state] = decls
        for eid, decl in enumerate(decls, start=1):
            fireable = set(decl.listeners)
            if decl.tag == "a" and "href" in decl.attrs:
                fireable.add(EventType.CLICK)
            for ev in fireable:
                if rng.random() < 0.7:
                    target = rng.choice(state_names)
                    transitions[(state, eid, ev)] = target
                    if rng.random() < 0.8:
                        uid = f"u_{state}_{eid}_{ev.value}"
                        units[uid] = rng.randint(10, 200)
                        coverage[(state, eid, ev)] = (uid,)
    spec = MockAppSpec(
        name=f"random-{rng.randint(0, 10**6)}",
        initial_state=state_names[0],
        states=states,
        transitions=transitions,
        units=units,
        coverage=coverage,
    )
    spec.validate()
    return spec
