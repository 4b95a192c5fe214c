import threading

import pytest

from stylecrawl.dom import EventType
from stylecrawl.engine import abstract_state
from stylecrawl.errors import ConnectError, ProtocolError, StaleCandidateError
from stylecrawl.live import BrowserSession, LiveBackend, SessionConfig, page_extractor_script

from cdp_mock import (
    ANCHOR_BOX,
    BUTTON_BOX,
    HANDLER_RANGE,
    HOVER_BACKGROUND,
    HOVER_BOX,
    INLINE_SCRIPT_URL,
    LOAD_RANGE,
    MockCdpServer,
)

FAST = SessionConfig(connect_timeout=3, command_timeout=5, navigation_timeout=5,
                     quiescence_ms=10, settle_max_ms=200)


@pytest.fixture()
def server():
    with MockCdpServer() as s:
        yield s


@pytest.fixture()
def session(server):
    s = BrowserSession.connect(server.url, FAST)
    yield s
    s.close()


def page_one(session):
    return session.navigate("http://fixture/page-one")


class TestConnection:
    def test_unreachable_endpoint_raises_within_timeout(self):
        with pytest.raises(ConnectError):
            BrowserSession.connect("ws://127.0.0.1:9", SessionConfig(connect_timeout=2))

    def test_out_of_order_responses_correlate(self, session):
        # one slow command and one fast command in flight at once: the fast
        # response arrives first but must bind to the fast command
        results = {}

        def issue(tag, delay):
            results[tag] = session.send("Test.echo", {"tag": tag, "delay_ms": delay})

        slow = threading.Thread(target=issue, args=("slow", 150))
        fast = threading.Thread(target=issue, args=("fast", 0))
        slow.start()
        fast.start()
        slow.join()
        fast.join()
        assert results["slow"] == {"echo": "slow"}
        assert results["fast"] == {"echo": "fast"}

    def test_protocol_error_surfaces_method(self, session):
        with pytest.raises(ProtocolError, match="No.Such"):
            session.send("No.Such")


class TestSnapshotExtraction:
    def test_fixture_page_has_expected_elements(self, session):
        snap = page_one(session)
        order = snap.preorder()
        assert [snap.elements[i].tag_name for i in order] == ["html", "body", "a", "div", "button"]
        for eid in order:
            assert len(snap.elements[eid].features.values()) == 68

    def test_hand_computed_boxes_and_styles(self, session):
        snap = page_one(session)
        anchor = snap.elements[2]
        assert anchor.features.box.x == ANCHOR_BOX["x"]
        assert anchor.features.box.width == ANCHOR_BOX["w"]
        assert anchor.features.css["cursor"] == "pointer"
        hover = snap.elements[3]
        assert hover.features.source_values["background-color"] == HOVER_BACKGROUND
        assert hover.features.binary["has_background"]
        assert (hover.features.box.y, hover.features.box.height) == (HOVER_BOX["y"], HOVER_BOX["h"])
        button = snap.elements[4]
        assert button.features.box.width == BUTTON_BOX["w"]

    def test_default_actionables_marked(self, session):
        snap = page_one(session)
        assert snap.elements[2].is_default_actionable  # <a href>
        assert snap.elements[4].is_default_actionable  # <button>
        assert not snap.elements[3].is_default_actionable

    def test_structural_features_recomputed(self, session):
        snap = page_one(session)
        assert snap.elements[0].features.descendant_count == 4
        assert snap.elements[2].features.dom_depth == 2

    def test_extraction_is_read_only(self, session):
        page_one(session)
        before = session.dom_hash()
        session.extract_snapshot("again")
        after = session.dom_hash()
        assert before == after

    def test_extractor_script_is_bundled(self):
        script = page_extractor_script()
        assert "__pageExtract" in script


class TestHarvest:
    def test_both_attachment_styles_recovered(self, session):
        snap = page_one(session)
        harvested, failed = session.harvest_listeners(snap)
        assert failed == set()
        assert harvested.elements[4].direct_listeners == {EventType.CLICK}
        assert harvested.elements[3].direct_listeners == {EventType.MOUSEOVER}
        assert harvested.elements[2].direct_listeners == set()

    def test_failures_flagged_and_excluded(self, server):
        with MockCdpServer(fail_listener_nodes={103}) as failing:
            session = BrowserSession.connect(failing.url, FAST)
            try:
                snap = session.navigate("http://fixture/page-one")
                harvested, failed = session.harvest_listeners(snap)
                assert failed == {3}
                assert harvested.elements[4].direct_listeners == {EventType.CLICK}
            finally:
                session.close()

    def test_collect_site_rows_skips_failures(self, server):
        from stylecrawl.live import collect_site_rows

        with MockCdpServer(fail_listener_nodes={103}) as failing:
            session = BrowserSession.connect(failing.url, FAST)
            try:
                rows, failed = collect_site_rows(session, "http://fixture/page-one", "fixture")
                assert failed == {3}
                assert [r.element_id for r in rows] == [0, 1, 2, 4]
                button = rows[-1]
                assert EventType.CLICK in button.effective_labels
                assert all(r.site_id == "fixture" for r in rows)
            finally:
                session.close()


class TestDispatch:
    def test_click_on_anchor_navigates(self, session):
        snap = page_one(session)
        after = session.dispatch(snap, 2, EventType.CLICK, {})
        assert len(after.elements) == 3
        assert abstract_state(after) != abstract_state(snap)

    def test_click_on_button_mutates_dom(self, session):
        snap = page_one(session)
        after = session.dispatch(snap, 4, EventType.CLICK, {})
        assert abstract_state(after) != abstract_state(snap)
        assert len(after.elements) == len(snap.elements)

    def test_event_without_listener_keeps_hash(self, session):
        snap = page_one(session)
        after = session.dispatch(snap, 3, EventType.CLICK, {})  # div only hears mouseover
        assert abstract_state(after) == abstract_state(snap)

    def test_mouseover_runs_without_dom_change(self, session):
        snap = page_one(session)
        after = session.dispatch(snap, 3, EventType.MOUSEOVER, {})
        assert abstract_state(after) == abstract_state(snap)

    def test_mousedown_and_touchstart_accepted(self, session):
        snap = page_one(session)
        for event, payload in ((EventType.MOUSEDOWN, {"button": 2}), (EventType.TOUCHSTART, {})):
            after = session.dispatch(snap, 3, event, payload)
            assert abstract_state(after) == abstract_state(snap)

    def test_vanished_element_raises_stale(self, session):
        snap = page_one(session)
        moved = session.dispatch(snap, 2, EventType.CLICK, {})  # page two: 3 elements
        with pytest.raises(StaleCandidateError):
            session.dispatch(snap, 4, EventType.CLICK, {})  # stale page-one snapshot
        assert len(moved.elements) == 3

    def test_unknown_element_raises_stale(self, session):
        snap = page_one(session)
        with pytest.raises(StaleCandidateError):
            session.dispatch(snap, 99, EventType.CLICK, {})


class TestCoverage:
    def test_load_time_coverage_allowed(self, session):
        page_one(session)
        cov = session.coverage_snapshot()
        assert cov[INLINE_SCRIPT_URL] == [LOAD_RANGE]

    def test_handler_range_covered_after_click(self, session):
        snap = page_one(session)
        session.dispatch(snap, 4, EventType.CLICK, {})
        cov = session.coverage_snapshot()
        (merged,) = cov[INLINE_SCRIPT_URL]
        assert merged == (LOAD_RANGE[0], HANDLER_RANGE[1])

    def test_coverage_monotone_over_session(self, session):
        snap = page_one(session)
        sizes = []
        for eid in (3, 4, 2):
            session.dispatch(snap, eid, EventType.CLICK, {})
            cov = session.coverage_snapshot()
            sizes.append(sum(e - s for s, e in cov[INLINE_SCRIPT_URL]))
        assert sizes == sorted(sizes)


class TestLiveBackend:
    def test_backend_drives_engine_loop(self, server):
        from stylecrawl.engine import CrawlBudget, Strategy, crawl

        backend = LiveBackend(endpoint=server.url, start_url="http://fixture/page-one",
                              config=FAST)
        try:
            result = crawl(backend, Strategy.default_clickables(), CrawlBudget(max_actions=6))
            assert len(result.actions) <= 6
            assert len(result.graph.states) >= 2
            assert result.ledger.covered_chars > 0
            assert len(result.graph.edges) == len(result.actions)
        finally:
            backend.close()

    def test_style_strategy_crawls_live_without_ground_truth(self, server):
        from stylecrawl.engine import CrawlBudget, Strategy, crawl

        from helpers import CURSOR_ORACLE

        backend = LiveBackend(endpoint=server.url, start_url="http://fixture/page-one",
                              config=FAST)
        try:
            strategy = Strategy.style_click(CURSOR_ORACLE)
            result = crawl(backend, strategy, CrawlBudget(max_actions=8))
            # only the pointer-styled anchor is predicted; it leads to page two
            assert [a.element_id for a in result.actions] == [2]
            assert len(result.graph.states) == 2
            assert result.registry.total_examinations == 1
            # strategies never saw harvested listeners
            for record in result.graph.states.values():
                if record.snapshot is not None:
                    assert all(
                        not el.direct_listeners for el in record.snapshot.elements.values()
                    )
        finally:
            backend.close()
