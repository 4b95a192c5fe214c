"""Shared domain types: events, element features, labeled elements, DOM snapshots.

The feature schema is fixed at 68 entries: 7 structural features, 51 computed
CSS values, and 10 binary "set to a non-default value" predictors. Everything
downstream (datasets, models, ranking signatures) is keyed to this schema.

All values here are treated as immutable after construction; transformations
return new objects.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

from .errors import MalformedSnapshotError


class EventType(Enum):
    """The five supported event types, ordered by popularity (click first)."""

    CLICK = "click"
    MOUSEOVER = "mouseover"
    MOUSEOUT = "mouseout"
    MOUSEDOWN = "mousedown"
    TOUCHSTART = "touchstart"

    @property
    def popularity(self) -> int:
        """Rank used to order multiple predicted events on one element."""
        return _POPULARITY[self]


_POPULARITY = {
    EventType.CLICK: 0,
    EventType.MOUSEOVER: 1,
    EventType.MOUSEOUT: 2,
    EventType.MOUSEDOWN: 3,
    EventType.TOUCHSTART: 4,
}

EVENTS_BY_POPULARITY: tuple[EventType, ...] = tuple(
    sorted(EventType, key=lambda e: e.popularity)
)


# Structural features: bounding box, depth, subtree complexity.
STRUCTURAL_FEATURES: tuple[str, ...] = (
    "box_x",
    "box_y",
    "box_width",
    "box_height",
    "dom_depth",
    "descendant_count",
    "subtree_height",
)

# The 51 computed CSS properties kept as raw values. opacity and flex-grow are
# numeric; everything else is a keyword-like string compared by equality.
CSS_FEATURES: tuple[str, ...] = (
    "align-content",
    "align-items",
    "align-self",
    "backface-visibility",
    "border-block-end-style",
    "border-block-start-style",
    "border-bottom-style",
    "border-collapse",
    "border-inline-end-style",
    "border-inline-start-style",
    "border-left-style",
    "border-right-style",
    "border-top-style",
    "box-sizing",
    "clear",
    "cursor",
    "display",
    "flex-direction",
    "flex-grow",
    "flex-wrap",
    "float",
    "font-style",
    "font-weight",
    "hyphens",
    "justify-content",
    "list-style-position",
    "list-style-type",
    "mix-blend-mode",
    "object-fit",
    "opacity",
    "outline-style",
    "overflow-wrap",
    "overflow-x",
    "overflow-y",
    "pointer-events",
    "position",
    "resize",
    "table-layout",
    "text-align",
    "text-decoration-line",
    "text-decoration-style",
    "text-overflow",
    "text-rendering",
    "text-size-adjust",
    "text-transform",
    "transform-style",
    "unicode-bidi",
    "user-select",
    "visibility",
    "white-space",
    "word-break",
)

NUMERIC_CSS_FEATURES: frozenset[str] = frozenset({"opacity", "flex-grow"})

# The 10 binary predictors ("is a non-default value set?").
BINARY_PREDICTORS: tuple[str, ...] = (
    "has_animation",
    "has_background",
    "has_border",
    "has_outline",
    "has_box_shadow",
    "has_text_decoration",
    "has_touch_action",
    "has_transform",
    "has_will_change",
    "has_z_index",
)

# Concrete source properties behind the binary predictors. Their raw computed
# values are carried on every FeatureVector so ranking signatures can use them.
BINARY_SOURCE_PROPERTIES: tuple[str, ...] = (
    "animation-name",
    "transition-property",
    "background-image",
    "background-color",
    "border-top-style",
    "border-right-style",
    "border-bottom-style",
    "border-left-style",
    "outline-style",
    "box-shadow",
    "text-decoration-line",
    "touch-action",
    "transform",
    "will-change",
    "z-index",
)

FEATURE_NAMES: tuple[str, ...] = STRUCTURAL_FEATURES + CSS_FEATURES + BINARY_PREDICTORS

# Per-feature value kind, used for (de)serialization and split handling.
# "float" | "int" | "str" | "bool"
FEATURE_KINDS: dict[str, str] = {}
for _name in STRUCTURAL_FEATURES[:4]:
    FEATURE_KINDS[_name] = "float"
for _name in STRUCTURAL_FEATURES[4:]:
    FEATURE_KINDS[_name] = "int"
for _name in CSS_FEATURES:
    FEATURE_KINDS[_name] = "float" if _name in NUMERIC_CSS_FEATURES else "str"
for _name in BINARY_PREDICTORS:
    FEATURE_KINDS[_name] = "bool"

NUMERIC_FEATURES: tuple[str, ...] = tuple(
    n for n in FEATURE_NAMES if FEATURE_KINDS[n] in ("float", "int")
)
CATEGORICAL_FEATURES: tuple[str, ...] = tuple(
    n for n in FEATURE_NAMES if FEATURE_KINDS[n] in ("str", "bool")
)


@dataclass(frozen=True)
class BoundingBox:
    """Rendered bounding box; x/y may be negative for off-viewport elements."""

    x: float
    y: float
    width: float
    height: float

    def __post_init__(self) -> None:
        if self.width < 0 or self.height < 0:
            raise ValueError(f"negative box size: {self.width}x{self.height}")

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.width / 2.0, self.y + self.height / 2.0)


@dataclass(frozen=True)
class TreePosition:
    """Structural placement of an element within its snapshot tree."""

    dom_depth: int = 0
    descendant_count: int = 0
    subtree_height: int = 0


@dataclass
class FeatureVector:
    """One element's 68 model features plus the binary-source raw values.

    `css` holds the 51 computed CSS values (opacity/flex-grow as floats),
    `binary` the 10 derived predictors, and `source_values` the 15 concrete
    computed values behind the predictors (ranking metadata, not a model
    feature -- the model feature count stays 68).
    """

    box: BoundingBox
    dom_depth: int
    descendant_count: int
    subtree_height: int
    css: dict[str, str | float]
    binary: dict[str, bool]
    source_values: dict[str, str]

    def __post_init__(self) -> None:
        if set(self.css) != set(CSS_FEATURES):
            missing = sorted(set(CSS_FEATURES) - set(self.css))
            extra = sorted(set(self.css) - set(CSS_FEATURES))
            raise ValueError(f"css feature set mismatch (missing={missing}, extra={extra})")
        if set(self.binary) != set(BINARY_PREDICTORS):
            raise ValueError("binary predictor set mismatch")
        if set(self.source_values) != set(BINARY_SOURCE_PROPERTIES):
            raise ValueError("binary source property set mismatch")
        if self.dom_depth < 0 or self.descendant_count < 0 or self.subtree_height < 0:
            raise ValueError("structural features must be non-negative")

    def values(self) -> list[float | int | str | bool]:
        """The 68 feature values in FEATURE_NAMES order."""
        out: list[float | int | str | bool] = [
            self.box.x,
            self.box.y,
            self.box.width,
            self.box.height,
            self.dom_depth,
            self.descendant_count,
            self.subtree_height,
        ]
        out.extend(self.css[name] for name in CSS_FEATURES)
        out.extend(self.binary[name] for name in BINARY_PREDICTORS)
        return out

    def with_position(self, pos: TreePosition) -> "FeatureVector":
        return replace(
            self,
            dom_depth=pos.dom_depth,
            descendant_count=pos.descendant_count,
            subtree_height=pos.subtree_height,
        )

    @classmethod
    def from_values(
        cls,
        values: list[float | int | str | bool],
        source_values: dict[str, str],
    ) -> "FeatureVector":
        if len(values) != len(FEATURE_NAMES):
            raise ValueError(f"expected {len(FEATURE_NAMES)} feature values, got {len(values)}")
        box = BoundingBox(
            float(values[0]), float(values[1]), float(values[2]), float(values[3])
        )
        css: dict[str, str | float] = {}
        for name, value in zip(CSS_FEATURES, values[7 : 7 + len(CSS_FEATURES)]):
            css[name] = float(value) if name in NUMERIC_CSS_FEATURES else str(value)
        binary = {
            name: bool(value)
            for name, value in zip(BINARY_PREDICTORS, values[7 + len(CSS_FEATURES) :])
        }
        return cls(
            box=box,
            dom_depth=int(values[4]),
            descendant_count=int(values[5]),
            subtree_height=int(values[6]),
            css=css,
            binary=binary,
            source_values=dict(source_values),
        )


@dataclass
class LabeledElement:
    """A snapshot element with its features and (possibly empty) label sets.

    `effective_labels` starts as a copy of `direct_listeners` and only grows
    (propagation, default-click), so direct ⊆ effective always holds.
    `tag_name` and `attrs` are metadata for the default-actionable rule and
    never enter the feature vector.
    """

    element_id: int
    features: FeatureVector
    direct_listeners: set[EventType] = field(default_factory=set)
    effective_labels: set[EventType] | None = None
    is_default_actionable: bool = False
    site_id: str = ""
    snapshot_id: str = ""
    tag_name: str = ""
    attrs: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.effective_labels is None:
            self.effective_labels = set(self.direct_listeners)
        elif not self.direct_listeners <= self.effective_labels:
            raise ValueError("direct_listeners must be a subset of effective_labels")


@dataclass
class DomSnapshot:
    """A page snapshot: a rooted element tree plus its canonical DOM string.

    `parent` maps element_id -> parent id (None for the root). Children are
    ordered by ascending element_id, which equals document order because ids
    are preorder indices.
    """

    snapshot_id: str
    root_id: int
    parent: dict[int, int | None]
    elements: dict[int, LabeledElement]
    serialized_dom: str

    def children_of(self, element_id: int) -> list[int]:
        return sorted(k for k, p in self.parent.items() if p == element_id)

    def preorder(self) -> list[int]:
        """Document-order ids; validates the tree on the way."""
        children: dict[int, list[int]] = {k: [] for k in self.parent}
        root = None
        for node, par in self.parent.items():
            if par is None:
                if root is not None:
                    raise MalformedSnapshotError(
                        f"snapshot {self.snapshot_id}: multiple roots ({root}, {node})"
                    )
                root = node
            else:
                if par not in self.parent:
                    raise MalformedSnapshotError(
                        f"snapshot {self.snapshot_id}: element {node} has unknown parent {par}"
                    )
                children[par].append(node)
        if root is None or root != self.root_id:
            raise MalformedSnapshotError(
                f"snapshot {self.snapshot_id}: root mismatch (declared {self.root_id})"
            )
        order: list[int] = []
        stack = [root]
        while stack:
            node = stack.pop()
            order.append(node)
            stack.extend(sorted(children[node], reverse=True))
        if len(order) != len(self.parent):
            orphans = sorted(set(self.parent) - set(order))
            raise MalformedSnapshotError(
                f"snapshot {self.snapshot_id}: unreachable elements {orphans} (cycle or orphan)"
            )
        if set(self.elements) != set(self.parent):
            raise MalformedSnapshotError(
                f"snapshot {self.snapshot_id}: element map and adjacency disagree"
            )
        return order

    def with_elements(self, elements: dict[int, LabeledElement]) -> "DomSnapshot":
        return replace(self, elements=elements)


def recompute_structural(snapshot: DomSnapshot) -> DomSnapshot:
    """Return a snapshot whose depth/descendant/height features match the tree.

    Raises MalformedSnapshotError if the adjacency is not a single rooted tree.
    Idempotent; all non-structural fields are left untouched.
    """
    order = snapshot.preorder()
    depth: dict[int, int] = {snapshot.root_id: 0}
    for node in order:
        if node == snapshot.root_id:
            continue
        depth[node] = depth[snapshot.parent[node]] + 1  # type: ignore[index]

    descendants: dict[int, int] = {k: 0 for k in order}
    height: dict[int, int] = {k: 0 for k in order}
    for node in reversed(order):  # children before parents in reverse preorder
        par = snapshot.parent[node]
        if par is not None:
            descendants[par] += descendants[node] + 1
            height[par] = max(height[par], height[node] + 1)

    new_elements = {}
    for eid, el in snapshot.elements.items():
        pos = TreePosition(depth[eid], descendants[eid], height[eid])
        new_elements[eid] = replace(el, features=el.features.with_position(pos))
    return snapshot.with_elements(new_elements)
