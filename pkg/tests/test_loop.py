from __future__ import annotations

import numpy as np
import pytest

from thma.descriptor import Detection, Source, pole_vector
from thma.errors import AlreadyDecided, MalformedDecision, NotFound
from thma.loop import (
    LoopMetrics,
    ReviewStatus,
    ReviewStore,
    RouteConfig,
    route,
)


def det(det_id: str, conf: float) -> Detection:
    vec = pole_vector(np.array([1.0, 0.0, 5.0]), np.array([1.0, 0.0, 0.0]))
    return Detection(id=det_id, descriptor=vec, confidence=conf, source=Source.MODEL)


def human_det(det_id: str) -> Detection:
    vec = pole_vector(np.array([1.5, 0.0, 5.0]), np.array([1.5, 0.0, 0.0]))
    return Detection(id=det_id, descriptor=vec, confidence=0.5, source=Source.MODEL)


# --- routing -----------------------------------------------------------------

def test_route_partition():
    accepted, queue = route([det("a", 0.95), det("b", 0.5)], RouteConfig(0.7))
    assert [d.id for d in accepted] == ["a"]
    assert [q.detection.id for q in queue] == ["b"]
    assert all(q.status == ReviewStatus.PENDING for q in queue)


def test_route_boundary_all_queued():
    accepted, queue = route([det("a", 1.0), det("b", 0.2)], RouteConfig(1.0))
    assert accepted == []
    assert len(queue) == 2


def test_route_order_preserved():
    dets = [det(f"d{i}", 0.05 * i) for i in range(20)]
    accepted, queue = route(dets, RouteConfig(0.5))
    assert [d.id for d in accepted] == [d.id for d in dets if d.confidence > 0.5]
    assert [q.detection.id for q in queue] == [d.id for d in dets if d.confidence <= 0.5]


def test_route_nine_of_ten_ratio(tmp_path):
    dets = [det(f"d{i}", 0.9) for i in range(9)] + [det("low", 0.1)]
    accepted, queue = route(dets, RouteConfig(0.7))
    store = ReviewStore(tmp_path / "s")
    store.record_route(accepted, queue)
    assert store.metrics().automation_ratio == 0.9


# --- decisions -----------------------------------------------------------------

@pytest.fixture
def store(tmp_path) -> ReviewStore:
    s = ReviewStore(tmp_path / "store")
    accepted, queue = route([det("a", 0.95), det("b", 0.5), det("c", 0.4)],
                            RouteConfig(0.7))
    s.record_route(accepted, queue)
    return s


def test_accept_decision(store):
    item = store.apply_decision("rv-b", "accept", reviewer="alice")
    assert item.status == ReviewStatus.ACCEPTED
    assert item.decided_at is not None
    assert item.reviewer == "alice"


def test_decisions_are_immutable(store):
    store.apply_decision("rv-b", "accept")
    with pytest.raises(AlreadyDecided):
        store.apply_decision("rv-b", "reject")


def test_unknown_item(store):
    with pytest.raises(NotFound):
        store.apply_decision("rv-nope", "accept")


def test_relabel_requires_payload(store):
    with pytest.raises(MalformedDecision):
        store.apply_decision("rv-b", "relabel")


def test_relabel_coerces_source_and_confidence(store):
    replacement = human_det("b-fixed")
    item = store.apply_decision("rv-b", "relabel", relabel=replacement)
    assert item.status == ReviewStatus.RELABELED
    assert item.relabel.source == Source.HUMAN
    assert item.relabel.confidence == 1.0


def test_unknown_decision_word(store):
    with pytest.raises(MalformedDecision):
        store.apply_decision("rv-b", "maybe")


# --- durability -------------------------------------------------------------------

def test_replay_restores_state(tmp_path):
    root = tmp_path / "store"
    s1 = ReviewStore(root)
    accepted, queue = route([det("a", 0.95), det("b", 0.5)], RouteConfig(0.7))
    s1.record_route(accepted, queue)
    s1.apply_decision("rv-b", "accept")

    s2 = ReviewStore(root)  # replay from the event log
    assert [d.id for d in s2.auto_accepted] == ["a"]
    assert s2.get_item("rv-b").status == ReviewStatus.ACCEPTED
    assert s2.metrics().total == 2


def test_torn_tail_line_is_ignored(tmp_path):
    root = tmp_path / "store"
    s1 = ReviewStore(root)
    accepted, queue = route([det("b", 0.5)], RouteConfig(0.7))
    s1.record_route(accepted, queue)
    with open(s1.events_path, "a", encoding="utf-8") as f:
        f.write('{"event":"decision","item_id":"rv-b"')  # crash mid-write, no newline
    s2 = ReviewStore(root)
    assert s2.get_item("rv-b").status == ReviewStatus.PENDING


def test_export_feedback_inclusion_rules(tmp_path):
    s = ReviewStore(tmp_path / "store")
    accepted, queue = route(
        [det("auto", 0.95), det("keep", 0.5), det("drop", 0.4), det("fix", 0.3)],
        RouteConfig(0.7),
    )
    s.record_route(accepted, queue)
    s.apply_decision("rv-keep", "accept")
    s.apply_decision("rv-drop", "reject")
    s.apply_decision("rv-fix", "relabel", relabel=human_det("fix-new"))

    feedback = s.export_feedback()
    ids = [d.id for d in feedback.items]
    assert ids == ["auto", "keep", "fix-new"]
    fixed = feedback.get("fix-new")
    assert fixed.source == Source.HUMAN and fixed.confidence == 1.0


def test_export_feedback_empty_store(tmp_path):
    s = ReviewStore(tmp_path / "store")
    assert len(s.export_feedback()) == 0


def test_metrics_zero_items(tmp_path):
    m = ReviewStore(tmp_path / "store").metrics()
    assert m == LoopMetrics(total=0, auto_accepted=0, reviewed=0,
                            automation_ratio=None, throughput_per_s=0.0, window_s=3600.0)


def test_metrics_unchanged_by_decisions(store):
    before = store.metrics(now=1e12)
    store.apply_decision("rv-b", "accept")
    store.apply_decision("rv-c", "reject")
    after = store.metrics(now=1e12)
    assert before == after  # routing, not review outcome, defines automation


def test_metrics_throughput_window(tmp_path):
    s = ReviewStore(tmp_path / "store")
    accepted, queue = route([det(f"d{i}", 0.9) for i in range(10)],
                            RouteConfig(0.5), now=1000.0)
    s.record_route(accepted, queue, now=1000.0)
    m = s.metrics(window_s=100.0, now=1050.0)
    assert m.throughput_per_s == 10 / 100.0
    stale = s.metrics(window_s=10.0, now=5000.0)
    assert stale.throughput_per_s == 0.0


def test_pending_listing_and_limit(store):
    assert [i.id for i in store.pending()] == ["rv-b", "rv-c"]
    assert len(store.pending(limit=1)) == 1
    store.apply_decision("rv-b", "accept")
    assert [i.id for i in store.pending()] == ["rv-c"]
    assert [i.id for i in store.items(ReviewStatus.ACCEPTED)] == ["rv-b"]
