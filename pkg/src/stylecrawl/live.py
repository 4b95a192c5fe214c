"""Live backend over the browser DevTools wire protocol (WebSocket).

Speaks the protocol directly: a reader thread pumps messages and correlates
responses to commands by id; the engine sees a strictly sequential API. Only
the Page/Runtime/DOM/DOMDebugger/Input/Profiler domains are used. Listener
harvesting exists for corpus collection only -- crawling strategies receive
snapshots without ground-truth listeners by construction.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from importlib import resources

from websockets.sync.client import connect as ws_connect

from .coverage import CoverageMap, IntervalSet
from .dataset import mark_default_actionables
from .dom import (
    BoundingBox,
    DomSnapshot,
    EventType,
    LabeledElement,
    TreePosition,
    recompute_structural,
)
from .errors import ConnectError, ProtocolError, StaleCandidateError
from .features import REQUIRED_PROPERTIES, RawElementObservation, extract_features

_MOUSE_BUTTONS = {0: "left", 1: "middle", 2: "right"}


def page_extractor_script() -> str:
    """The injected page-side extractor (built from the frontend package)."""
    return resources.files("stylecrawl").joinpath("data/page_extractor.js").read_text("utf-8")


@dataclass
class SessionConfig:
    connect_timeout: float = 10.0
    command_timeout: float = 30.0
    navigation_timeout: float = 30.0
    quiescence_ms: int = 500  # DOM-silence window after firing an event
    settle_max_ms: int = 5000


class BrowserSession:
    """One page-level DevTools session."""

    def __init__(self, conn, config: SessionConfig):
        self._conn = conn
        self.config = config
        self._next_id = 0
        self._lock = threading.Lock()
        self._pending: dict[int, dict] = {}
        # bounded: browsers chatter constantly and most events are never awaited
        self._events: deque[tuple[str, dict]] = deque(maxlen=1024)
        self._events_cv = threading.Condition()
        self._closed = False
        self._coverage: dict[str, IntervalSet] = {}
        self._snapshot_count = 0
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    # -- wire plumbing -----------------------------------------------------

    @classmethod
    def connect(cls, endpoint: str, config: SessionConfig | None = None) -> "BrowserSession":
        cfg = config or SessionConfig()
        try:
            conn = ws_connect(endpoint, open_timeout=cfg.connect_timeout, max_size=64 * 2**20)
        except Exception as exc:
            raise ConnectError(f"cannot open DevTools endpoint {endpoint}: {exc}") from exc
        session = cls(conn, cfg)
        for method in ("Page.enable", "Runtime.enable", "DOM.enable", "Profiler.enable"):
            session.send(method)
        session.send(
            "Profiler.startPreciseCoverage", {"callCount": False, "detailed": True}
        )
        return session

    def _pump(self) -> None:
        while not self._closed:
            try:
                raw = self._conn.recv()
            except Exception:
                break
            try:
                message = json.loads(raw)
            except json.JSONDecodeError:
                continue
            if "id" in message:
                with self._lock:
                    slot = self._pending.get(message["id"])
                if slot is not None:
                    slot["message"] = message
                    slot["event"].set()
            else:
                with self._events_cv:
                    self._events.append((message.get("method", ""), message.get("params", {})))
                    self._events_cv.notify_all()

    def send(self, method: str, params: dict | None = None, timeout: float | None = None) -> dict:
        """Issue one command and wait for its correlated response."""
        with self._lock:
            self._next_id += 1
            command_id = self._next_id
            slot = {"event": threading.Event(), "message": None}
            self._pending[command_id] = slot
        payload = {"id": command_id, "method": method, "params": params or {}}
        try:
            self._conn.send(json.dumps(payload))
        except Exception as exc:
            raise ProtocolError(f"send failed for {method}: {exc}") from exc
        if not slot["event"].wait(timeout or self.config.command_timeout):
            with self._lock:
                self._pending.pop(command_id, None)
            raise ProtocolError(f"timeout waiting for response to {method}")
        with self._lock:
            self._pending.pop(command_id, None)
        message = slot["message"]
        if "error" in message:
            err = message["error"]
            raise ProtocolError(f"{method} failed: {err.get('message')} ({err.get('code')})")
        return message.get("result", {})

    def wait_event(self, method: str, timeout: float) -> dict:
        deadline = time.monotonic() + timeout
        with self._events_cv:
            while True:
                for i, (name, params) in enumerate(self._events):
                    if name == method:
                        del self._events[i]
                        return params
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise ProtocolError(f"timeout waiting for event {method}")
                self._events_cv.wait(remaining)

    def close(self) -> None:
        self._closed = True
        try:
            self._conn.close()
        except Exception:
            pass

    # -- page operations ----------------------------------------------------

    def evaluate(self, expression: str):
        result = self.send(
            "Runtime.evaluate", {"expression": expression, "returnByValue": True}
        )
        if "exceptionDetails" in result:
            raise ProtocolError(f"script threw: {result['exceptionDetails'].get('text')}")
        return result.get("result", {}).get("value")

    def navigate(self, url: str) -> DomSnapshot:
        """Load the page, inject the extractor, and return the first snapshot."""
        self.send("Page.navigate", {"url": url})
        self.wait_event("Page.loadEventFired", self.config.navigation_timeout)
        self.evaluate(page_extractor_script())
        return self.extract_snapshot(url)

    def dom_hash(self) -> str:
        html = self.evaluate("document.documentElement.outerHTML")
        if not isinstance(html, str):
            raise ProtocolError("page did not return its DOM markup")
        return hashlib.sha256(html.strip().encode("utf-8")).hexdigest()

    def extract_snapshot(self, label: str = "") -> DomSnapshot:
        props = json.dumps(list(REQUIRED_PROPERTIES))
        payload = self.evaluate(f"JSON.parse(JSON.stringify(__pageExtract({props})))")
        if not isinstance(payload, dict) or "elements" not in payload:
            raise ProtocolError("page extractor returned no payload")
        html = self.evaluate("document.documentElement.outerHTML")
        self._snapshot_count += 1
        return _payload_to_snapshot(
            payload, str(html).strip(), f"{label}::{self._snapshot_count}"
        )

    def harvest_listeners(self, snapshot: DomSnapshot) -> tuple[DomSnapshot, set[int]]:
        """Fill direct_listeners from the debugger's listener query. Elements
        whose query fails are returned in the failed set (exclude from corpora).
        Corpus-collection only; never used while crawling."""
        doc = self.send("DOM.getDocument", {"depth": -1, "pierce": False})
        node_ids: list[int] = []

        def walk(node: dict) -> None:
            if node.get("nodeType") == 1:
                node_ids.append(node["nodeId"])
            for child in node.get("children", []):
                walk(child)

        walk(doc.get("root", {}))
        element_ids = snapshot.preorder()
        if len(node_ids) != len(element_ids):
            raise ProtocolError(
                f"listener harvest saw {len(node_ids)} elements, snapshot has {len(element_ids)}"
            )
        five = {e.value for e in EventType}
        failed: set[int] = set()
        new_elements = dict(snapshot.elements)
        for eid, node_id in zip(element_ids, node_ids):
            try:
                obj = self.send("DOM.resolveNode", {"nodeId": node_id})
                object_id = obj["object"]["objectId"]
                res = self.send("DOMDebugger.getEventListeners", {"objectId": object_id})
            except (ProtocolError, KeyError):
                failed.add(eid)
                continue
            types = {l.get("type") for l in res.get("listeners", [])}
            direct = {EventType(t) for t in types & five}
            el = new_elements[eid]
            new_elements[eid] = LabeledElement(
                element_id=el.element_id,
                features=el.features,
                direct_listeners=direct,
                effective_labels=set(el.effective_labels or set()) | direct,
                is_default_actionable=el.is_default_actionable,
                site_id=el.site_id,
                snapshot_id=el.snapshot_id,
                tag_name=el.tag_name,
                attrs=dict(el.attrs),
            )
        return snapshot.with_elements(new_elements), failed

    def dispatch(
        self, snapshot: DomSnapshot, element_id: int, event: EventType, payload: dict
    ) -> DomSnapshot:
        """Fire synthesized input at the element's box center, wait for the
        quiescence window, and return a fresh snapshot."""
        if element_id not in snapshot.elements:
            raise StaleCandidateError(f"element {element_id} not in current snapshot")
        count = self.evaluate("document.getElementsByTagName('*').length")
        if isinstance(count, (int, float)) and element_id >= int(count):
            raise StaleCandidateError(f"element {element_id} vanished from the page")
        x, y = snapshot.elements[element_id].features.box.center
        if event is EventType.CLICK:
            self._mouse("mousePressed", x, y, button="left", clickCount=1)
            self._mouse("mouseReleased", x, y, button="left", clickCount=1)
        elif event is EventType.MOUSEOVER:
            self._mouse("mouseMoved", x, y)
        elif event is EventType.MOUSEOUT:
            self._mouse("mouseMoved", x, y)
            self._mouse("mouseMoved", 0, 0)
        elif event is EventType.MOUSEDOWN:
            button = _MOUSE_BUTTONS.get(int(payload.get("button", 0)), "left")
            self._mouse("mousePressed", x, y, button=button, clickCount=1)
            self._mouse("mouseReleased", x, y, button=button, clickCount=1)
        elif event is EventType.TOUCHSTART:
            self.send(
                "Input.dispatchTouchEvent",
                {"type": "touchStart", "touchPoints": [{"x": x, "y": y}]},
            )
            self.send("Input.dispatchTouchEvent", {"type": "touchEnd", "touchPoints": []})
        self._settle()
        return self.extract_snapshot(snapshot.snapshot_id.split("::")[0])

    def _mouse(self, kind: str, x: float, y: float, **extra) -> None:
        params = {"type": kind, "x": x, "y": y}
        params.update(extra)
        self.send("Input.dispatchMouseEvent", params)

    def _settle(self) -> None:
        """Wait until the DOM hash is stable across one quiescence window."""
        deadline = time.monotonic() + self.config.settle_max_ms / 1000.0
        previous = self.dom_hash()
        while time.monotonic() < deadline:
            time.sleep(self.config.quiescence_ms / 1000.0)
            current = self.dom_hash()
            if current == previous:
                return
            previous = current

    def coverage_snapshot(self) -> CoverageMap:
        """Cumulative covered character ranges per script (inline included)."""
        result = self.send("Profiler.takePreciseCoverage")
        for script in result.get("result", []):
            key = script.get("url") or f"script:{script.get('scriptId')}"
            ivs = self._coverage.setdefault(key, IntervalSet())
            for fn in script.get("functions", []):
                for rng in fn.get("ranges", []):
                    if rng.get("count", 0) > 0:
                        ivs.add(int(rng["startOffset"]), int(rng["endOffset"]))
        return {key: ivs.intervals() for key, ivs in self._coverage.items()}


def _payload_to_snapshot(payload: dict, serialized_dom: str, snapshot_id: str) -> DomSnapshot:
    """Build a DomSnapshot from the extractor payload. Records carrying an
    error marker are skipped; their children re-attach to the grandparent."""
    try:
        records = {int(r["index"]): r for r in payload["elements"]}
        errored = {i for i, r in records.items() if "error" in r}

        def live_parent(idx: int):
            parent = records[idx].get("parent")
            while parent is not None and parent in errored:
                parent = records[parent].get("parent")
            return parent

        parent: dict[int, int | None] = {}
        elements: dict[int, LabeledElement] = {}
        for idx in sorted(records):
            if idx in errored:
                continue
            rec = records[idx]
            box = rec["box"]
            obs = RawElementObservation(
                computed_style=rec["styles"],
                bounding_box=BoundingBox(
                    float(box["x"]), float(box["y"]), float(box["w"]), float(box["h"])
                ),
            )
            parent[idx] = live_parent(idx)
            elements[idx] = LabeledElement(
                element_id=idx,
                features=extract_features(obs, TreePosition()),
                snapshot_id=snapshot_id,
                tag_name=rec.get("tag", ""),
                attrs={k: v for k, v in rec.get("attrs", {}).items() if v is not None},
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"malformed extractor payload: {exc}") from exc
    if not elements:
        raise ProtocolError("extractor payload held no usable elements")
    snapshot = DomSnapshot(
        snapshot_id=snapshot_id,
        root_id=min(elements),
        parent=parent,
        elements=elements,
        serialized_dom=serialized_dom,
    )
    snapshot = recompute_structural(snapshot)
    return mark_default_actionables(snapshot)


@dataclass
class LiveBackend:
    """Engine backend over one BrowserSession."""

    endpoint: str
    start_url: str
    config: SessionConfig = field(default_factory=SessionConfig)
    session: BrowserSession | None = None
    _snapshot: DomSnapshot | None = field(default=None, repr=False)
    _t0: float | None = None

    def reset(self) -> DomSnapshot:
        if self.session is None:
            self.session = BrowserSession.connect(self.endpoint, self.config)
        if self._t0 is None:
            self._t0 = time.monotonic()
        self._snapshot = self.session.navigate(self.start_url)
        return self._snapshot

    def fire(self, element_id: int, event: EventType, payload: dict) -> DomSnapshot:
        assert self.session is not None and self._snapshot is not None
        self._snapshot = self.session.dispatch(self._snapshot, element_id, event, payload)
        return self._snapshot

    def coverage(self) -> CoverageMap:
        assert self.session is not None
        return self.session.coverage_snapshot()

    def clock(self) -> float:
        return 0.0 if self._t0 is None else time.monotonic() - self._t0

    def close(self) -> None:
        if self.session is not None:
            self.session.close()
            self.session = None


def collect_site_rows(
    session: BrowserSession, url: str, site_id: str
) -> tuple[list[LabeledElement], set[int]]:
    """Corpus-collection pass over one URL: navigate, harvest listeners,
    propagate labels; returns rows (document order) and harvest failures."""
    from .dataset import propagate_labels, snapshot_rows

    snapshot = session.navigate(url)
    snapshot, failed = session.harvest_listeners(snapshot)
    snapshot = propagate_labels(snapshot)
    rows = []
    for row in snapshot_rows(snapshot):
        if row.element_id in failed:
            continue
        row.site_id = site_id
        rows.append(row)
    return rows, failed
