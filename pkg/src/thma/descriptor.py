"""Unified multi-object descriptors and the geometry derivable from them.

Each object class has a fixed vector schema; poles carry apex/bottom points,
cones vertex/base-center/radius, signs center plus in-plane axes and half
extents, and the linear classes (barrier, curb, lane marking) are 3K-value
polylines. A multi-object descriptor bundles up to N+1 (activation, vector)
slots for co-located objects.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (
    ClassMismatch,
    DegenerateCone,
    DegenerateOrientation,
    InvalidAxes,
    InvalidDescriptor,
)

DEFAULT_MAX_EXTRA_SLOTS = 2          # N_max: slots per descriptor is N_max + 1
DEFAULT_POLYLINE_VERTICES = 8
YAW_EPSILON_M = 1e-6
AXIS_TOLERANCE = 1e-6


class ObjectClass(str, Enum):
    POLE = "pole"
    TRAFFIC_LIGHT = "traffic_light"
    TRAFFIC_SIGN = "traffic_sign"
    TRAFFIC_CONE = "traffic_cone"
    TUNNEL = "tunnel"
    BARRIER = "barrier"
    CURB = "curb"
    LANE_MARKING = "lane_marking"


class Source(str, Enum):
    MODEL = "model"
    HUMAN = "human"
    BASELINE = "baseline"


FIXED_SCHEMA_LENGTHS = {
    ObjectClass.POLE: 6,            # apex xyz, bottom xyz
    ObjectClass.TRAFFIC_CONE: 7,    # vertex xyz, base-center xyz, radius
    ObjectClass.TRAFFIC_SIGN: 11,   # center xyz, axis-u xyz, axis-v xyz, half-width, half-height
    ObjectClass.TRAFFIC_LIGHT: 9,   # center xyz, axis xyz, width, height, depth
    ObjectClass.TUNNEL: 8,          # entry-center xyz, exit-center xyz, width, height
}

POLYLINE_CLASSES = frozenset({ObjectClass.BARRIER, ObjectClass.CURB, ObjectClass.LANE_MARKING})


@dataclass(frozen=True)
class DescriptorVector:
    object_class: ObjectClass
    values: tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", values)
        if not all(math.isfinite(v) for v in values):
            raise InvalidDescriptor(f"{self.object_class.value}: non-finite values")
        cls = self.object_class
        if cls in FIXED_SCHEMA_LENGTHS:
            want = FIXED_SCHEMA_LENGTHS[cls]
            if len(values) != want:
                raise InvalidDescriptor(
                    f"{cls.value}: expected {want} values, got {len(values)}"
                )
        elif cls in POLYLINE_CLASSES:
            if len(values) % 3 != 0 or len(values) < 6:
                raise InvalidDescriptor(
                    f"{cls.value}: polyline needs 3K values with K >= 2, got {len(values)}"
                )
        if cls == ObjectClass.TRAFFIC_CONE and self.cone_radius <= 0:
            raise InvalidDescriptor("traffic_cone: radius must be > 0")
        if cls == ObjectClass.TRAFFIC_SIGN:
            u, v = self.sign_axis_u, self.sign_axis_v
            if abs(np.linalg.norm(u) - 1.0) > AXIS_TOLERANCE or abs(np.linalg.norm(v) - 1.0) > AXIS_TOLERANCE:
                raise InvalidAxes("traffic_sign: axes must be unit norm")
            if abs(float(np.dot(u, v))) > AXIS_TOLERANCE:
                raise InvalidAxes("traffic_sign: axes must be orthogonal")
            if self.sign_half_width <= 0 or self.sign_half_height <= 0:
                raise InvalidDescriptor("traffic_sign: half extents must be > 0")

    # --- typed views -------------------------------------------------------

    def _v3(self, i: int) -> np.ndarray:
        return np.array(self.values[i:i + 3], dtype=np.float64)

    @property
    def pole_apex(self) -> np.ndarray:
        return self._v3(0)

    @property
    def pole_bottom(self) -> np.ndarray:
        return self._v3(3)

    @property
    def cone_vertex(self) -> np.ndarray:
        return self._v3(0)

    @property
    def cone_base_center(self) -> np.ndarray:
        return self._v3(3)

    @property
    def cone_radius(self) -> float:
        return self.values[6]

    @property
    def sign_center(self) -> np.ndarray:
        return self._v3(0)

    @property
    def sign_axis_u(self) -> np.ndarray:
        return self._v3(3)

    @property
    def sign_axis_v(self) -> np.ndarray:
        return self._v3(6)

    @property
    def sign_half_width(self) -> float:
        return self.values[9]

    @property
    def sign_half_height(self) -> float:
        return self.values[10]

    @property
    def light_center(self) -> np.ndarray:
        return self._v3(0)

    @property
    def light_axis(self) -> np.ndarray:
        return self._v3(3)

    @property
    def tunnel_entry(self) -> np.ndarray:
        return self._v3(0)

    @property
    def tunnel_exit(self) -> np.ndarray:
        return self._v3(3)

    def polyline(self) -> np.ndarray:
        """(K, 3) vertices for the linear classes."""
        if self.object_class not in POLYLINE_CLASSES:
            raise InvalidDescriptor(f"{self.object_class.value} is not a polyline class")
        return np.array(self.values, dtype=np.float64).reshape(-1, 3)


def polyline_vector(object_class: ObjectClass, vertices: np.ndarray) -> DescriptorVector:
    vertices = np.asarray(vertices, dtype=np.float64)
    return DescriptorVector(object_class, tuple(vertices.reshape(-1).tolist()))


def pole_vector(apex, bottom) -> DescriptorVector:
    return DescriptorVector(ObjectClass.POLE, tuple(np.concatenate([apex, bottom]).tolist()))


@dataclass(frozen=True)
class MultiObjectDescriptor:
    """Bundle of (activation probability, vector) slots for co-located objects."""

    slots: tuple[tuple[float, DescriptorVector], ...]
    max_extra_slots: int = DEFAULT_MAX_EXTRA_SLOTS

    def __post_init__(self):
        slots = tuple((float(s), v) for s, v in self.slots)
        object.__setattr__(self, "slots", slots)
        if len(slots) > self.max_extra_slots + 1:
            raise InvalidDescriptor(
                f"at most {self.max_extra_slots + 1} slots allowed, got {len(slots)}"
            )
        for s, _ in slots:
            if not 0.0 <= s <= 1.0:
                raise InvalidDescriptor(f"activation {s} outside [0, 1]")


def activate(d: MultiObjectDescriptor, threshold: float) -> list[DescriptorVector]:
    """Vectors of the slots with activation strictly above the threshold, in slot order."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must be in [0, 1]")
    return [v for s, v in d.slots if s > threshold]


# ---------------------------------------------------------------------------
# derived geometry
# ---------------------------------------------------------------------------

def pole_yaw(v: DescriptorVector, epsilon: float = YAW_EPSILON_M) -> float:
    """Yaw of the apex relative to the bottom, in [-pi, pi)."""
    _require(v, ObjectClass.POLE)
    d = v.pole_apex - v.pole_bottom
    if math.hypot(d[0], d[1]) < epsilon:
        raise DegenerateOrientation("vertical pole: no horizontal displacement")
    yaw = math.atan2(d[1], d[0])
    return -math.pi if yaw >= math.pi else yaw


def sign_corners(v: DescriptorVector) -> np.ndarray:
    """The four corners, counterclockwise about u x v starting at (+u, +v); shape (4, 3)."""
    _require(v, ObjectClass.TRAFFIC_SIGN)
    c, u, ax_v = v.sign_center, v.sign_axis_u, v.sign_axis_v
    hw, hh = v.sign_half_width, v.sign_half_height
    return np.stack([
        c + hw * u + hh * ax_v,
        c - hw * u + hh * ax_v,
        c - hw * u - hh * ax_v,
        c + hw * u - hh * ax_v,
    ])


def cone_geometry(v: DescriptorVector, epsilon: float = YAW_EPSILON_M) -> tuple[float, np.ndarray]:
    """(height, unit axis) from base center toward the vertex."""
    _require(v, ObjectClass.TRAFFIC_CONE)
    d = v.cone_vertex - v.cone_base_center
    height = float(np.linalg.norm(d))
    if height < epsilon:
        raise DegenerateCone("cone vertex coincides with base center")
    return height, d / height


def _require(v: DescriptorVector, cls: ObjectClass) -> None:
    if v.object_class != cls:
        raise ClassMismatch(f"expected {cls.value}, got {v.object_class.value}")


# ---------------------------------------------------------------------------
# descriptor distance
# ---------------------------------------------------------------------------

def _features(v: DescriptorVector) -> tuple[list[np.ndarray], list[float]]:
    """Keypoints plus scalar extents characterizing a fixed-schema vector.

    Scalars participate so the distance is zero only for identical values
    (keypoints alone would ignore e.g. the cone radius).
    """
    cls = v.object_class
    if cls == ObjectClass.POLE:
        return [v.pole_apex, v.pole_bottom], []
    if cls == ObjectClass.TRAFFIC_CONE:
        return [v.cone_vertex, v.cone_base_center], [v.cone_radius]
    if cls == ObjectClass.TRAFFIC_SIGN:
        return list(sign_corners(v)), []
    if cls == ObjectClass.TRAFFIC_LIGHT:
        return [v.light_center, v.light_center + v.light_axis], list(v.values[6:9])
    if cls == ObjectClass.TUNNEL:
        return [v.tunnel_entry, v.tunnel_exit], list(v.values[6:8])
    raise InvalidDescriptor(f"{cls.value} has no keypoint schema")


def _point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    ab = b - a
    denom = float(np.dot(ab, ab))
    if denom == 0.0:
        return float(np.linalg.norm(p - a))
    t = float(np.clip(np.dot(p - a, ab) / denom, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * ab)))


def _point_polyline_distance(p: np.ndarray, poly: np.ndarray) -> float:
    return min(_point_segment_distance(p, poly[i], poly[i + 1]) for i in range(len(poly) - 1))


def descriptor_distance(a: DescriptorVector, b: DescriptorVector) -> float:
    """Symmetric, non-negative distance between same-class vectors.

    Keypoint classes: mean over corresponding features (Euclidean for
    keypoints, absolute difference for scalar extents). Polyline classes:
    symmetric mean vertex-to-segment distance.
    """
    if a.object_class != b.object_class:
        raise ClassMismatch(
            f"cannot compare {a.object_class.value} with {b.object_class.value}"
        )
    if a.object_class in POLYLINE_CLASSES:
        pa, pb = a.polyline(), b.polyline()
        d_ab = float(np.mean([_point_polyline_distance(p, pb) for p in pa]))
        d_ba = float(np.mean([_point_polyline_distance(p, pa) for p in pb]))
        return 0.5 * (d_ab + d_ba)
    kp_a, sc_a = _features(a)
    kp_b, sc_b = _features(b)
    terms = [float(np.linalg.norm(p - q)) for p, q in zip(kp_a, kp_b)]
    terms += [abs(x - y) for x, y in zip(sc_a, sc_b)]
    return float(np.mean(terms))


# ---------------------------------------------------------------------------
# detections and the JSON wire format
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Detection:
    id: str
    descriptor: DescriptorVector | MultiObjectDescriptor
    confidence: float
    source: Source
    tile_id: str | None = None

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")

    def primary_vector(self) -> DescriptorVector:
        """The single vector, or the highest-activation slot of a multi descriptor."""
        if isinstance(self.descriptor, DescriptorVector):
            return self.descriptor
        if not self.descriptor.slots:
            raise InvalidDescriptor(f"detection {self.id}: empty descriptor")
        return max(enumerate(self.descriptor.slots), key=lambda kv: (kv[1][0], -kv[0]))[1][1]

    @property
    def object_class(self) -> ObjectClass:
        return self.primary_vector().object_class


def detection_to_json(det: Detection) -> dict:
    out: dict = {"id": det.id, "confidence": det.confidence, "source": det.source.value}
    if isinstance(det.descriptor, DescriptorVector):
        out["class"] = det.descriptor.object_class.value
        out["values"] = list(det.descriptor.values)
    else:
        out["class"] = det.object_class.value
        out["slots"] = [
            {"s": s, "class": v.object_class.value, "values": list(v.values)}
            for s, v in det.descriptor.slots
        ]
    if det.tile_id is not None:
        out["tile_id"] = det.tile_id
    return out


def detection_from_json(d: dict) -> Detection:
    top_class = ObjectClass(d["class"])
    if "slots" in d and d["slots"] is not None:
        slots = tuple(
            (float(s["s"]), DescriptorVector(ObjectClass(s.get("class", top_class.value)),
                                             tuple(s["values"])))
            for s in d["slots"]
        )
        desc: DescriptorVector | MultiObjectDescriptor = MultiObjectDescriptor(
            slots, max_extra_slots=max(DEFAULT_MAX_EXTRA_SLOTS, len(slots) - 1)
        )
    else:
        desc = DescriptorVector(top_class, tuple(d["values"]))
    return Detection(
        id=str(d["id"]),
        descriptor=desc,
        confidence=float(d["confidence"]),
        source=Source(d.get("source", "model")),
        tile_id=d.get("tile_id"),
    )


def detections_to_file(dets: list[Detection], path: str | Path) -> None:
    Path(path).write_text(
        json.dumps({"items": [detection_to_json(d) for d in dets]}, indent=2), encoding="utf-8"
    )


def detections_from_file(path: str | Path) -> list[Detection]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return [detection_from_json(d) for d in doc["items"]]
