"""Turn raw per-element observations (computed styles + geometry) into FeatureVectors.

Browsers report hundreds of computed properties; only the 51 retained CSS
values and the 15 binary-predictor source properties are read here, everything
else is ignored. Missing required properties are an extraction error, never an
empty field.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Mapping

from .dom import (
    BINARY_PREDICTORS,
    BINARY_SOURCE_PROPERTIES,
    CSS_FEATURES,
    NUMERIC_CSS_FEATURES,
    BoundingBox,
    FeatureVector,
    TreePosition,
)
from .errors import IncompleteObservationError

# Every property extract_features must find in a computed-style map: the 51
# retained values plus the binary-predictor sources not already among them.
REQUIRED_PROPERTIES: tuple[str, ...] = CSS_FEATURES + tuple(
    p for p in BINARY_SOURCE_PROPERTIES if p not in CSS_FEATURES
)

# Computed-style defaults (CSS initial values as engines report them). Used by
# the simulator and test fixtures to build complete observations.
DEFAULT_COMPUTED_STYLE: dict[str, str] = {
    "align-content": "normal",
    "align-items": "normal",
    "align-self": "auto",
    "backface-visibility": "visible",
    "border-block-end-style": "none",
    "border-block-start-style": "none",
    "border-bottom-style": "none",
    "border-collapse": "separate",
    "border-inline-end-style": "none",
    "border-inline-start-style": "none",
    "border-left-style": "none",
    "border-right-style": "none",
    "border-top-style": "none",
    "box-sizing": "content-box",
    "clear": "none",
    "cursor": "auto",
    "display": "block",
    "flex-direction": "row",
    "flex-grow": "0",
    "flex-wrap": "nowrap",
    "float": "none",
    "font-style": "normal",
    "font-weight": "400",
    "hyphens": "manual",
    "justify-content": "normal",
    "list-style-position": "outside",
    "list-style-type": "disc",
    "mix-blend-mode": "normal",
    "object-fit": "fill",
    "opacity": "1",
    "outline-style": "none",
    "overflow-wrap": "normal",
    "overflow-x": "visible",
    "overflow-y": "visible",
    "pointer-events": "auto",
    "position": "static",
    "resize": "none",
    "table-layout": "auto",
    "text-align": "start",
    "text-decoration-line": "none",
    "text-decoration-style": "solid",
    "text-overflow": "clip",
    "text-rendering": "auto",
    "text-size-adjust": "auto",
    "text-transform": "none",
    "transform-style": "flat",
    "unicode-bidi": "normal",
    "user-select": "auto",
    "visibility": "visible",
    "white-space": "normal",
    "word-break": "normal",
    # binary-predictor sources not among the 51
    "animation-name": "none",
    "transition-property": "all",
    "background-image": "none",
    "background-color": "rgba(0, 0, 0, 0)",
    "box-shadow": "none",
    "touch-action": "auto",
    "transform": "none",
    "will-change": "auto",
    "z-index": "auto",
}

_RGBA_RE = re.compile(r"rgba?\(([^)]*)\)")


def is_transparent_color(value: str) -> bool:
    """True for the rendered default background (fully transparent)."""
    v = value.strip().lower()
    if v == "transparent":
        return True
    m = _RGBA_RE.fullmatch(v)
    if not m:
        return False
    parts = [p.strip() for p in re.split(r"[,/]", m.group(1)) if p.strip()]
    if len(parts) < 4:
        return False  # rgb(...) with no alpha channel is opaque
    try:
        alpha = float(parts[3].rstrip("%"))
    except ValueError:
        return False
    return alpha == 0.0


@dataclass(frozen=True)
class PredictorRule:
    """Detection rule for one binary predictor: which source properties it
    reads and whether their values count as "set to a non-default value"."""

    sources: tuple[str, ...]
    is_set: Callable[[Mapping[str, str]], bool]


def binary_predictor_defaults(strict_background: bool = False) -> dict[str, PredictorRule]:
    """The fixed predictor -> default-detection-rule table.

    `strict_background` restricts has_background to background-image only
    (the minimal reading); by default a non-transparent background-color also
    counts, since a solid color is the same usability cue as an image.
    """

    def _bg(style: Mapping[str, str]) -> bool:
        if style["background-image"] != "none":
            return True
        if strict_background:
            return False
        return not is_transparent_color(style["background-color"])

    sides = tuple(f"border-{s}-style" for s in ("top", "right", "bottom", "left"))
    return {
        "has_animation": PredictorRule(
            ("animation-name", "transition-property"),
            lambda s: s["animation-name"] != "none"
            or s["transition-property"] not in ("all", ""),
        ),
        "has_background": PredictorRule(("background-image", "background-color"), _bg),
        "has_border": PredictorRule(
            sides, lambda s: any(s[side] != "none" for side in sides)
        ),
        "has_outline": PredictorRule(
            ("outline-style",), lambda s: s["outline-style"] != "none"
        ),
        "has_box_shadow": PredictorRule(
            ("box-shadow",), lambda s: s["box-shadow"] != "none"
        ),
        "has_text_decoration": PredictorRule(
            ("text-decoration-line",), lambda s: s["text-decoration-line"] != "none"
        ),
        "has_touch_action": PredictorRule(
            ("touch-action",), lambda s: s["touch-action"] != "auto"
        ),
        "has_transform": PredictorRule(
            ("transform",), lambda s: s["transform"] != "none"
        ),
        "has_will_change": PredictorRule(
            ("will-change",), lambda s: s["will-change"] != "auto"
        ),
        "has_z_index": PredictorRule(("z-index",), lambda s: s["z-index"] != "auto"),
    }


@dataclass
class RawElementObservation:
    """What the page-side extractor reports for one element.

    `computed_style` must contain at least REQUIRED_PROPERTIES; extra
    properties are ignored. Tree placement (parent/children handles) is kept
    only as metadata; structural features come from the TreePosition argument.
    """

    computed_style: Mapping[str, str]
    bounding_box: BoundingBox
    parent_index: int | None = None
    child_indices: tuple[int, ...] = field(default_factory=tuple)


def extract_features(
    obs: RawElementObservation,
    position: TreePosition,
    *,
    strict_background: bool = False,
) -> FeatureVector:
    """Build the full 68-slot FeatureVector for one observed element.

    Pure: identical inputs yield identical vectors. Raises
    IncompleteObservationError naming the first missing required property.
    """
    style = obs.computed_style
    missing = [p for p in REQUIRED_PROPERTIES if p not in style]
    if missing:
        raise IncompleteObservationError(
            f"observation is missing computed style propert"
            f"{'y' if len(missing) == 1 else 'ies'}: {', '.join(missing)}"
        )

    css: dict[str, str | float] = {}
    for name in CSS_FEATURES:
        raw = style[name]
        if name in NUMERIC_CSS_FEATURES:
            try:
                css[name] = float(raw)
            except ValueError as exc:
                raise IncompleteObservationError(
                    f"property {name} has non-numeric value {raw!r}"
                ) from exc
        else:
            css[name] = raw

    rules = binary_predictor_defaults(strict_background=strict_background)
    binary = {name: rules[name].is_set(style) for name in BINARY_PREDICTORS}
    sources = {name: style[name] for name in BINARY_SOURCE_PROPERTIES}

    return FeatureVector(
        box=obs.bounding_box,
        dom_depth=position.dom_depth,
        descendant_count=position.descendant_count,
        subtree_height=position.subtree_height,
        css=css,
        binary=binary,
        source_values=sources,
    )
