"""Refined ground truth: intersect human labels with confident model output.

The refinement operator keeps the ground-truth items confirmed by a
low-confidence-thresholded model subset and adds unmatched high-confidence
model items: refined = (gt matched against S_low) union (S_high leftovers).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .descriptor import Detection, descriptor_distance, detection_from_json, detection_to_json
from .errors import ClassMismatch


@dataclass(frozen=True)
class LabelSet:
    items: tuple[Detection, ...]

    def __post_init__(self):
        items = tuple(self.items)
        object.__setattr__(self, "items", items)
        ids = [d.id for d in items]
        if len(set(ids)) != len(ids):
            raise ValueError("detection ids must be unique within a label set")

    def __len__(self) -> int:
        return len(self.items)

    def get(self, det_id: str) -> Detection:
        for d in self.items:
            if d.id == det_id:
                return d
        raise KeyError(det_id)


@dataclass(frozen=True)
class MatchConfig:
    distance_threshold: float
    t_low: float
    t_high: float

    def __post_init__(self):
        if self.distance_threshold <= 0:
            raise ValueError("distance_threshold must be > 0")
        if not (0.0 <= self.t_low <= 1.0 and 0.0 <= self.t_high <= 1.0):
            raise ValueError("thresholds must be in [0, 1]")
        if self.t_low > self.t_high:
            raise ValueError("t_low must be <= t_high")


class Provenance(str, Enum):
    CONFIRMED_GT = "confirmed_gt"
    HIGH_CONF_MODEL = "high_conf_model"


@dataclass(frozen=True)
class RefinedItem:
    detection: Detection
    provenance: Provenance


@dataclass(frozen=True)
class RefinedLabelSet:
    items: tuple[RefinedItem, ...]

    def __len__(self) -> int:
        return len(self.items)

    def to_label_set(self) -> LabelSet:
        return LabelSet(tuple(r.detection for r in self.items))


def threshold_subset(outputs: LabelSet, t: float) -> LabelSet:
    """Items with confidence strictly greater than t, order preserved."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("threshold must be in [0, 1]")
    return LabelSet(tuple(d for d in outputs.items if d.confidence > t))


def candidate_pairs(gt: LabelSet, outputs: LabelSet, cfg: MatchConfig) -> list[tuple[float, str, str]]:
    """(distance, gt id, output id) for same-class pairs within the distance gate."""
    cands = []
    for g in gt.items:
        gv = g.primary_vector()
        for o in outputs.items:
            ov = o.primary_vector()
            if gv.object_class != ov.object_class:
                continue
            try:
                d = descriptor_distance(gv, ov)
            except ClassMismatch:  # pragma: no cover - guarded above
                continue
            if d <= cfg.distance_threshold:
                cands.append((d, g.id, o.id))
    return cands


def match(gt: LabelSet, outputs: LabelSet, cfg: MatchConfig) -> list[tuple[str, str]]:
    """Greedy nearest-first one-to-one matching.

    Candidates are sorted ascending by distance with (gt id, output id) as the
    deterministic tie-break; a pair is accepted when both sides are still
    unmatched.
    """
    pairs = []
    used_gt: set[str] = set()
    used_out: set[str] = set()
    for _, gid, oid in sorted(candidate_pairs(gt, outputs, cfg)):
        if gid in used_gt or oid in used_out:
            continue
        used_gt.add(gid)
        used_out.add(oid)
        pairs.append((gid, oid))
    return pairs


def refine(gt: LabelSet, outputs: LabelSet, cfg: MatchConfig) -> RefinedLabelSet:
    """Refined ground truth over matched label sets.

    S_low / S_high are the strict confidence subsets of the model output. The
    result keeps the gt geometry for every gt item matched to an S_low member
    (ConfirmedGT) and appends the S_high items not matched to an included gt
    item (HighConfModel); a high-confidence duplicate of a confirmed object is
    dropped in favor of the gt representative.
    """
    s_low = threshold_subset(outputs, cfg.t_low)
    s_high = threshold_subset(outputs, cfg.t_high)
    pairs = match(gt, s_low, cfg)
    matched_gt_ids = {gid for gid, _ in pairs}
    matched_out_ids = {oid for _, oid in pairs}

    confirmed = [
        RefinedItem(g, Provenance.CONFIRMED_GT) for g in gt.items if g.id in matched_gt_ids
    ]
    extras = [
        RefinedItem(o, Provenance.HIGH_CONF_MODEL)
        for o in s_high.items
        if o.id not in matched_out_ids
    ]
    return RefinedLabelSet(tuple(confirmed + extras))


# ---------------------------------------------------------------------------
# JSON files
# ---------------------------------------------------------------------------

def label_set_to_file(labels: LabelSet, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps({"items": [detection_to_json(d) for d in labels.items]}, indent=2),
        encoding="utf-8",
    )


def label_set_from_file(path: str | Path) -> LabelSet:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return LabelSet(tuple(detection_from_json(d) for d in doc["items"]))


def refined_to_file(refined: RefinedLabelSet, path: str | Path) -> None:
    items = []
    for r in refined.items:
        d = detection_to_json(r.detection)
        d["provenance"] = r.provenance.value
        items.append(d)
    Path(path).write_text(json.dumps({"items": items}, indent=2), encoding="utf-8")


def refined_from_file(path: str | Path) -> RefinedLabelSet:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    items = tuple(
        RefinedItem(detection_from_json(d), Provenance(d["provenance"])) for d in doc["items"]
    )
    return RefinedLabelSet(items)
