"""Confidence routing, the durable review queue, feedback export and loop metrics.

Persistence is an append-only JSON-lines event log with an in-memory index
rebuilt on startup; a decision is acknowledged only after its event line is
flushed and fsynced, so every acknowledged decision survives a crash.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

from .descriptor import Detection, Source, detection_from_json, detection_to_json
from .distill import LabelSet
from .errors import AlreadyDecided, MalformedDecision, NotFound


@dataclass(frozen=True)
class RouteConfig:
    t_auto: float

    def __post_init__(self):
        if not 0.0 <= self.t_auto <= 1.0:
            raise ValueError("t_auto must be in [0, 1]")


class ReviewStatus(str, Enum):
    PENDING = "pending"
    ACCEPTED = "accepted"
    REJECTED = "rejected"
    RELABELED = "relabeled"


TERMINAL_STATUSES = {ReviewStatus.ACCEPTED, ReviewStatus.REJECTED, ReviewStatus.RELABELED}


@dataclass(frozen=True)
class ReviewItem:
    id: str
    detection: Detection
    status: ReviewStatus
    relabel: Detection | None = None
    created_at: float = 0.0
    decided_at: float | None = None
    reviewer: str | None = None

    def __post_init__(self):
        if self.status == ReviewStatus.RELABELED and self.relabel is None:
            raise MalformedDecision("relabeled item must carry a replacement detection")
        if self.decided_at is not None and self.status == ReviewStatus.PENDING:
            raise ValueError("pending item cannot have a decided timestamp")


def review_item_to_json(item: ReviewItem) -> dict:
    return {
        "id": item.id,
        "detection": detection_to_json(item.detection),
        "status": item.status.value,
        "relabel": None if item.relabel is None else detection_to_json(item.relabel),
        "created_at": item.created_at,
        "decided_at": item.decided_at,
        "reviewer": item.reviewer,
    }


def review_item_from_json(d: dict) -> ReviewItem:
    return ReviewItem(
        id=str(d["id"]),
        detection=detection_from_json(d["detection"]),
        status=ReviewStatus(d["status"]),
        relabel=None if d.get("relabel") is None else detection_from_json(d["relabel"]),
        created_at=float(d.get("created_at", 0.0)),
        decided_at=d.get("decided_at"),
        reviewer=d.get("reviewer"),
    )


def route(detections: list[Detection], cfg: RouteConfig,
          now: float | None = None) -> tuple[list[Detection], list[ReviewItem]]:
    """Partition detections: confidence strictly above t_auto goes to production,
    the rest becomes pending review items. Exact and order-preserving."""
    ts = time.time() if now is None else now
    accepted: list[Detection] = []
    queue: list[ReviewItem] = []
    for det in detections:
        if det.confidence > cfg.t_auto:
            accepted.append(det)
        else:
            queue.append(ReviewItem(id=f"rv-{det.id}", detection=det,
                                    status=ReviewStatus.PENDING, created_at=ts))
    return accepted, queue


@dataclass(frozen=True)
class LoopMetrics:
    total: int
    auto_accepted: int
    reviewed: int
    automation_ratio: float | None
    throughput_per_s: float
    window_s: float

    def to_json_dict(self) -> dict:
        return {
            "total": self.total,
            "auto_accepted": self.auto_accepted,
            "reviewed": self.reviewed,
            "automation_ratio": self.automation_ratio,
            "throughput_per_s": self.throughput_per_s,
            "window_s": self.window_s,
        }


class ReviewStore:
    """Event-sourced review state under one directory.

    ``events.jsonl`` is the single source of truth; ``store.json`` records the
    tile directory used to render review snippets. One writer lock serializes
    mutations; reads serve from the replayed in-memory index.
    """

    def __init__(self, root: str | Path, tiles_dir: str | Path | None = None):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.events_path = self.root / "events.jsonl"
        self._lock = threading.Lock()
        self._items: dict[str, ReviewItem] = {}
        self._item_order: list[str] = []
        self._auto: list[Detection] = []
        self._auto_times: list[float] = []
        meta_path = self.root / "store.json"
        if tiles_dir is not None:
            meta_path.write_text(json.dumps({"tiles_dir": str(Path(tiles_dir).resolve())}),
                                 encoding="utf-8")
        self.tiles_dir: Path | None = None
        if meta_path.exists():
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
            if meta.get("tiles_dir"):
                self.tiles_dir = Path(meta["tiles_dir"])
        self._replay()

    # --- persistence -------------------------------------------------------

    def _replay(self) -> None:
        if not self.events_path.exists():
            return
        with open(self.events_path, "r", encoding="utf-8") as f:
            for line in f:
                if not line.endswith("\n"):
                    break  # torn tail from a crash mid-write: never acknowledged
                line = line.strip()
                if not line:
                    continue
                self._apply(json.loads(line))

    def _apply(self, ev: dict) -> None:
        kind = ev["event"]
        if kind == "auto":
            self._auto.append(detection_from_json(ev["detection"]))
            self._auto_times.append(float(ev["t"]))
        elif kind == "enqueue":
            item = review_item_from_json(ev["item"])
            self._items[item.id] = item
            self._item_order.append(item.id)
        elif kind == "decision":
            item = self._items[ev["item_id"]]
            relabel = None if ev.get("relabel") is None else detection_from_json(ev["relabel"])
            self._items[item.id] = replace(
                item,
                status=ReviewStatus(ev["status"]),
                relabel=relabel,
                decided_at=float(ev["t"]),
                reviewer=ev.get("reviewer"),
            )
        else:
            raise ValueError(f"unknown event kind {kind!r}")

    def _append(self, ev: dict) -> None:
        line = json.dumps(ev, separators=(",", ":")) + "\n"
        with open(self.events_path, "a", encoding="utf-8") as f:
            f.write(line)
            f.flush()
            os.fsync(f.fileno())

    # --- mutations ---------------------------------------------------------

    def record_route(self, accepted: list[Detection], queue: list[ReviewItem],
                     now: float | None = None) -> None:
        ts = time.time() if now is None else now
        with self._lock:
            for det in accepted:
                ev = {"event": "auto", "t": ts, "detection": detection_to_json(det)}
                self._append(ev)
                self._apply(ev)
            for item in queue:
                ev = {"event": "enqueue", "t": ts, "item": review_item_to_json(item)}
                self._append(ev)
                self._apply(ev)

    def apply_decision(
        self,
        item_id: str,
        decision: str,
        relabel: Detection | None = None,
        reviewer: str | None = None,
        now: float | None = None,
    ) -> ReviewItem:
        """Decide a pending item; decisions are immutable once made."""
        status = {
            "accept": ReviewStatus.ACCEPTED,
            "reject": ReviewStatus.REJECTED,
            "relabel": ReviewStatus.RELABELED,
        }.get(decision)
        if status is None:
            raise MalformedDecision(f"unknown decision {decision!r}")
        if status == ReviewStatus.RELABELED and relabel is None:
            raise MalformedDecision("relabel decision requires a replacement detection")
        with self._lock:
            item = self._items.get(item_id)
            if item is None:
                raise NotFound(f"no review item {item_id!r}")
            if item.status != ReviewStatus.PENDING:
                raise AlreadyDecided(f"item {item_id!r} is already {item.status.value}")
            if relabel is not None:
                # the human replacement is authoritative
                relabel = replace(relabel, source=Source.HUMAN, confidence=1.0)
            ts = time.time() if now is None else now
            ev = {
                "event": "decision",
                "t": ts,
                "item_id": item_id,
                "status": status.value,
                "relabel": None if relabel is None else detection_to_json(relabel),
                "reviewer": reviewer,
            }
            self._append(ev)
            self._apply(ev)
            return self._items[item_id]

    # --- reads -------------------------------------------------------------

    def get_item(self, item_id: str) -> ReviewItem:
        item = self._items.get(item_id)
        if item is None:
            raise NotFound(f"no review item {item_id!r}")
        return item

    def items(self, status: ReviewStatus | None = None, limit: int | None = None) -> list[ReviewItem]:
        out = [self._items[i] for i in self._item_order]
        if status is not None:
            out = [i for i in out if i.status == status]
        return out if limit is None else out[:limit]

    def pending(self, limit: int | None = None) -> list[ReviewItem]:
        return self.items(ReviewStatus.PENDING, limit)

    @property
    def auto_accepted(self) -> list[Detection]:
        return list(self._auto)

    def export_feedback(self) -> LabelSet:
        """Auto-accepted detections, human-accepted items and relabel replacements.

        Rejected items are excluded and a relabeled item contributes its
        replacement, never the original. The result is a valid refinement
        ground-truth set for the next iteration.
        """
        out: list[Detection] = list(self._auto)
        for item_id in self._item_order:
            item = self._items[item_id]
            if item.status == ReviewStatus.ACCEPTED:
                out.append(item.detection)
            elif item.status == ReviewStatus.RELABELED:
                assert item.relabel is not None
                out.append(item.relabel)
        return LabelSet(tuple(out))

    def metrics(self, window_s: float = 3600.0, now: float | None = None) -> LoopMetrics:
        """Counts are defined at routing time; review outcomes do not change them."""
        if window_s <= 0:
            raise ValueError("window must be > 0")
        ts = time.time() if now is None else now
        total = len(self._auto) + len(self._item_order)
        auto = len(self._auto)
        reviewed = len(self._item_order)
        ratio = None if total == 0 else auto / total
        routed_times = self._auto_times + [self._items[i].created_at for i in self._item_order]
        recent = sum(1 for t in routed_times if ts - window_s < t <= ts)
        return LoopMetrics(
            total=total,
            auto_accepted=auto,
            reviewed=reviewed,
            automation_ratio=ratio,
            throughput_per_s=recent / window_s,
            window_s=window_s,
        )

    def tile_path(self, tile_id: str) -> Path | None:
        if self.tiles_dir is None:
            return None
        p = self.tiles_dir / f"{tile_id}.png"
        return p if p.exists() else None

    def tile_frame_base(self, tile_id: str) -> Path | None:
        if self.tiles_dir is None:
            return None
        base = self.tiles_dir / tile_id
        return base if base.with_suffix(".json").exists() else None
