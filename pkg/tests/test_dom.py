import random

import pytest

from stylecrawl.dom import (
    BINARY_PREDICTORS,
    CSS_FEATURES,
    EVENTS_BY_POPULARITY,
    FEATURE_KINDS,
    FEATURE_NAMES,
    STRUCTURAL_FEATURES,
    BoundingBox,
    EventType,
    FeatureVector,
    recompute_structural,
)
from stylecrawl.errors import MalformedSnapshotError

from helpers import brute_force_structural, element, fv, random_parent_map, snapshot


class TestEventType:
    def test_exactly_five_variants(self):
        assert len(EventType) == 5

    def test_popularity_total_order(self):
        assert EVENTS_BY_POPULARITY == (
            EventType.CLICK,
            EventType.MOUSEOVER,
            EventType.MOUSEOUT,
            EventType.MOUSEDOWN,
            EventType.TOUCHSTART,
        )
        ranks = [e.popularity for e in EVENTS_BY_POPULARITY]
        assert ranks == sorted(ranks) and len(set(ranks)) == 5


class TestFeatureSchema:
    def test_total_is_68(self):
        assert len(FEATURE_NAMES) == 68

    def test_breakdown_7_51_10(self):
        assert len(STRUCTURAL_FEATURES) == 7
        assert len(CSS_FEATURES) == 51
        assert len(BINARY_PREDICTORS) == 10

    def test_no_vendor_prefixes(self):
        assert not any(name.startswith("-") for name in FEATURE_NAMES)

    def test_every_feature_has_a_kind(self):
        assert set(FEATURE_KINDS) == set(FEATURE_NAMES)

    def test_values_round_trip_by_position(self):
        vector = fv({"cursor": "pointer", "opacity": "0.5"})
        values = vector.values()
        assert len(values) == 68
        rebuilt = FeatureVector.from_values(values, vector.source_values)
        assert rebuilt == vector


class TestBoundingBox:
    def test_negative_position_allowed(self):
        box = BoundingBox(-120.0, -45.0, 60.0, 20.0)
        assert box.x == -120.0

    @pytest.mark.parametrize("w,h", [(-1.0, 5.0), (5.0, -1.0)])
    def test_negative_size_rejected(self, w, h):
        with pytest.raises(ValueError):
            BoundingBox(0.0, 0.0, w, h)


class TestRecomputeStructural:
    def assert_matches_oracle(self, parent):
        snap = recompute_structural(snapshot(parent))
        expected = brute_force_structural(parent)
        for eid, (depth, desc, height) in expected.items():
            feats = snap.elements[eid].features
            assert (feats.dom_depth, feats.descendant_count, feats.subtree_height) == (
                depth,
                desc,
                height,
            )

    def test_single_element(self):
        snap = recompute_structural(snapshot({0: None}))
        feats = snap.elements[0].features
        assert (feats.dom_depth, feats.descendant_count, feats.subtree_height) == (0, 0, 0)

    def test_root_with_two_children(self):
        snap = recompute_structural(snapshot({0: None, 1: 0, 2: 0}))
        root = snap.elements[0].features
        assert (root.descendant_count, root.subtree_height) == (2, 1)
        assert snap.elements[1].features.dom_depth == 1
        assert snap.elements[2].features.dom_depth == 1

    def test_chain_of_four(self):
        parent = {0: None, 1: 0, 2: 1, 3: 2}
        self.assert_matches_oracle(parent)
        snap = recompute_structural(snapshot(parent))
        assert snap.elements[0].features.subtree_height == 3
        assert snap.elements[3].features.dom_depth == 3
        assert snap.elements[0].features.descendant_count == 3

    def test_random_trees_match_brute_force(self):
        rng = random.Random(11)
        for _ in range(25):
            self.assert_matches_oracle(random_parent_map(rng, rng.randint(1, 24)))

    def test_idempotent(self):
        rng = random.Random(12)
        snap = snapshot(random_parent_map(rng, 15))
        once = recompute_structural(snap)
        twice = recompute_structural(once)
        assert once == twice

    def test_descendant_sum_equals_depth_sum(self):
        # both sides count ancestor-descendant pairs
        rng = random.Random(13)
        for _ in range(25):
            snap = recompute_structural(snapshot(random_parent_map(rng, rng.randint(1, 30))))
            feats = [snap.elements[eid].features for eid in snap.elements]
            assert sum(f.descendant_count for f in feats) == sum(f.dom_depth for f in feats)

    def test_cycle_rejected(self):
        bad = snapshot({0: None, 1: 2, 2: 1})
        with pytest.raises(MalformedSnapshotError):
            recompute_structural(bad)

    def test_orphan_parent_rejected(self):
        bad = snapshot({0: None, 1: 99})
        with pytest.raises(MalformedSnapshotError):
            recompute_structural(bad)

    def test_second_root_rejected(self):
        bad = snapshot({0: None, 1: None})
        with pytest.raises(MalformedSnapshotError):
            recompute_structural(bad)

    def test_element_map_mismatch_rejected(self):
        snap = snapshot({0: None, 1: 0})
        snap = snap.with_elements({0: element(0)})
        with pytest.raises(MalformedSnapshotError):
            recompute_structural(snap)


class TestLabeledElement:
    def test_effective_defaults_to_direct(self):
        el = element(0, listeners={EventType.CLICK})
        assert el.effective_labels == {EventType.CLICK}
        el.effective_labels.add(EventType.MOUSEOVER)
        assert el.direct_listeners == {EventType.CLICK}

    def test_direct_must_be_subset_of_effective(self):
        with pytest.raises(ValueError):
            element(0).__class__(
                element_id=0,
                features=fv(),
                direct_listeners={EventType.CLICK},
                effective_labels=set(),
            )
