from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thma.descriptor import (
    Detection,
    DescriptorVector,
    MultiObjectDescriptor,
    ObjectClass,
    Source,
    activate,
    cone_geometry,
    descriptor_distance,
    detection_from_json,
    detection_to_json,
    pole_vector,
    pole_yaw,
    polyline_vector,
    sign_corners,
)
from thma.errors import (
    ClassMismatch,
    DegenerateCone,
    DegenerateOrientation,
    InvalidAxes,
    InvalidDescriptor,
)


def pole(apex, bottom) -> DescriptorVector:
    return pole_vector(np.array(apex, dtype=float), np.array(bottom, dtype=float))


def cone(vertex, center, radius) -> DescriptorVector:
    return DescriptorVector(ObjectClass.TRAFFIC_CONE, (*vertex, *center, radius))


def sign(center, u, v, hw, hh) -> DescriptorVector:
    return DescriptorVector(ObjectClass.TRAFFIC_SIGN, (*center, *u, *v, hw, hh))


# --- activation --------------------------------------------------------------

def test_activate_strict_threshold():
    d = MultiObjectDescriptor(slots=(
        (0.9, pole((1, 0, 5), (0, 0, 0))),
        (0.2, pole((2, 0, 5), (1, 0, 0))),
    ))
    out = activate(d, 0.5)
    assert len(out) == 1
    assert out[0] is d.slots[0][1]


def test_activate_threshold_zero_keeps_all_positive():
    d = MultiObjectDescriptor(slots=((0.9, pole((1, 0, 5), (0, 0, 0))),
                                     (0.1, pole((2, 0, 5), (1, 0, 0)))))
    assert len(activate(d, 0.0)) == 2


def test_activate_zero_scores_inert():
    d = MultiObjectDescriptor(slots=((0.0, pole((1, 0, 5), (0, 0, 0))),))
    assert activate(d, 0.0) == []


def test_activate_count_monotone_in_threshold():
    d = MultiObjectDescriptor(slots=(
        (0.9, pole((1, 0, 5), (0, 0, 0))),
        (0.5, pole((2, 0, 5), (1, 0, 0))),
        (0.1, pole((3, 0, 5), (2, 0, 0))),
    ), max_extra_slots=2)
    counts = [len(activate(d, t)) for t in (0.0, 0.3, 0.5, 0.7, 1.0)]
    assert counts == sorted(counts, reverse=True)


def test_slot_count_capped():
    slots = tuple((0.5, pole((i + 1, 0, 5), (i, 0, 0))) for i in range(4))
    with pytest.raises(InvalidDescriptor):
        MultiObjectDescriptor(slots=slots, max_extra_slots=2)


# --- pole yaw ------------------------------------------------------------------

def test_pole_yaw_east():
    assert pole_yaw(pole((1, 0, 5), (0, 0, 0))) == 0.0


def test_pole_yaw_north():
    assert pole_yaw(pole((0, 1, 5), (0, 0, 0))) == math.pi / 2


def test_pole_yaw_vertical_is_degenerate():
    with pytest.raises(DegenerateOrientation):
        pole_yaw(pole((0, 0, 5), (0, 0, 0)))


def test_pole_yaw_in_half_open_interval():
    assert pole_yaw(pole((-1, 0, 5), (0, 0, 0))) == -math.pi


@settings(max_examples=150, deadline=None)
@given(
    yaw=st.floats(-math.pi, math.pi - 1e-9),
    scale=st.floats(0.01, 100.0),
    theta=st.floats(-math.pi, math.pi),
)
def test_pole_yaw_scale_invariant_rotation_equivariant(yaw, scale, theta):
    bottom = np.array([2.0, -1.0, 0.0])
    apex = bottom + np.array([scale * math.cos(yaw), scale * math.sin(yaw), 5.0])
    base_yaw = pole_yaw(pole(apex, bottom))
    c, s = math.cos(theta), math.sin(theta)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    rotated = pole_yaw(pole(rot @ apex, rot @ bottom))
    diff = (rotated - base_yaw - theta + math.pi) % (2 * math.pi) - math.pi
    assert abs(diff) < 1e-9


# --- sign corners ---------------------------------------------------------------

def test_sign_corners_fixture():
    corners = sign_corners(sign((0, 0, 3), (1, 0, 0), (0, 0, 1), 1.0, 0.5))
    expect = np.array([[1, 0, 3.5], [-1, 0, 3.5], [-1, 0, 2.5], [1, 0, 2.5]], dtype=float)
    assert np.array_equal(corners, expect)


def test_sign_corners_degenerate_extents_rejected():
    with pytest.raises(InvalidDescriptor):
        sign((0, 0, 3), (1, 0, 0), (0, 0, 1), 0.0, 0.0)


def test_sign_parallel_axes_invalid():
    with pytest.raises(InvalidAxes):
        sign((0, 0, 3), (1, 0, 0), (1, 0, 0), 1.0, 0.5)


def test_sign_non_unit_axis_invalid():
    with pytest.raises(InvalidAxes):
        sign((0, 0, 3), (2, 0, 0), (0, 0, 1), 1.0, 0.5)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000))
def test_sign_corners_coplanar_centroid_exact(seed):
    rng = np.random.default_rng(seed)
    u = rng.normal(size=3)
    u /= np.linalg.norm(u)
    w = rng.normal(size=3)
    v = w - np.dot(w, u) * u
    v /= np.linalg.norm(v)
    center = rng.uniform(-50, 50, 3)
    hw, hh = rng.uniform(0.1, 3.0, 2)
    corners = sign_corners(sign(center, u, v, hw, hh))
    d1, d2, d3 = corners[1] - corners[0], corners[2] - corners[0], corners[3] - corners[0]
    assert abs(float(np.dot(np.cross(d1, d2), d3))) < 1e-9
    assert np.abs(corners.mean(axis=0) - center).max() < 1e-12


# --- cone geometry ---------------------------------------------------------------

def test_cone_axis_aligned():
    h, axis = cone_geometry(cone((0, 0, 0.7), (0, 0, 0), 0.2))
    assert h == 0.7
    assert axis.tolist() == [0.0, 0.0, 1.0]


def test_cone_345_triangle_exact():
    h, axis = cone_geometry(cone((3, 4, 0), (0, 0, 0), 0.2))
    assert h == 5.0
    assert axis.tolist() == [0.6, 0.8, 0.0]


def test_cone_degenerate():
    with pytest.raises(DegenerateCone):
        cone_geometry(cone((1, 1, 1), (1, 1, 1), 0.2))


def test_cone_radius_must_be_positive():
    with pytest.raises(InvalidDescriptor):
        cone((0, 0, 1), (0, 0, 0), 0.0)


# --- descriptor distance ----------------------------------------------------------

def test_distance_identity():
    p = pole((1, 2, 5), (1, 2, 0))
    assert descriptor_distance(p, p) == 0.0


def test_distance_pole_offset_mean():
    a = pole((1, 0, 5), (1, 0, 0))
    b = pole((2, 0, 5), (2, 0, 0))
    assert descriptor_distance(a, b) == 1.0


def test_distance_class_mismatch():
    with pytest.raises(ClassMismatch):
        descriptor_distance(pole((1, 0, 5), (0, 0, 0)), cone((0, 0, 1), (0, 0, 0), 0.2))


def test_distance_sees_cone_radius():
    a = cone((0, 0, 1), (0, 0, 0), 0.2)
    b = cone((0, 0, 1), (0, 0, 0), 0.5)
    assert descriptor_distance(a, b) > 0.0


def test_polyline_distance_symmetric_zero_for_identical():
    verts = np.array([[0, 0, 0], [5, 0.5, 0], [10, 0, 0]], dtype=float)
    a = polyline_vector(ObjectClass.LANE_MARKING, verts)
    b = polyline_vector(ObjectClass.LANE_MARKING, verts + [0.0, 0.3, 0.0])
    assert descriptor_distance(a, a) == 0.0
    assert descriptor_distance(a, b) == descriptor_distance(b, a)
    assert 0.0 < descriptor_distance(a, b) <= 0.3 + 1e-12


def _random_vec(rng, cls: ObjectClass) -> DescriptorVector:
    if cls == ObjectClass.POLE:
        return pole(rng.uniform(-10, 10, 3), rng.uniform(-10, 10, 3))
    if cls == ObjectClass.TRAFFIC_CONE:
        return cone(rng.uniform(-10, 10, 3), rng.uniform(-10, 10, 3), rng.uniform(0.05, 1.0))
    if cls == ObjectClass.TUNNEL:
        return DescriptorVector(cls, (*rng.uniform(-10, 10, 6), *rng.uniform(0.5, 10.0, 2)))
    if cls == ObjectClass.TRAFFIC_LIGHT:
        return DescriptorVector(cls, (*rng.uniform(-10, 10, 6), *rng.uniform(0.1, 2.0, 3)))
    raise AssertionError(cls)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000),
       st.sampled_from([ObjectClass.POLE, ObjectClass.TRAFFIC_CONE,
                        ObjectClass.TUNNEL, ObjectClass.TRAFFIC_LIGHT]))
def test_distance_symmetry_triangle_inequality(seed, cls):
    rng = np.random.default_rng(seed)
    a, b, c = (_random_vec(rng, cls) for _ in range(3))
    dab = descriptor_distance(a, b)
    dba = descriptor_distance(b, a)
    assert dab == dba
    assert dab >= 0.0
    assert dab <= descriptor_distance(a, c) + descriptor_distance(c, b) + 1e-12


# --- JSON wire format --------------------------------------------------------------

def test_detection_json_round_trip_single():
    det = Detection(id="d1", descriptor=pole((1, 0, 5), (0, 0, 0)),
                    confidence=0.8, source=Source.MODEL, tile_id="tile_00001")
    back = detection_from_json(detection_to_json(det))
    assert back == det


def test_detection_json_round_trip_multi():
    d = MultiObjectDescriptor(slots=(
        (0.9, pole((1, 0, 5), (0, 0, 0))),
        (0.4, cone((0, 0, 1), (0, 0, 0), 0.2)),
    ))
    det = Detection(id="d2", descriptor=d, confidence=0.5, source=Source.HUMAN)
    back = detection_from_json(detection_to_json(det))
    assert isinstance(back.descriptor, MultiObjectDescriptor)
    assert back.descriptor.slots[0][0] == 0.9
    assert back.descriptor.slots[1][1].object_class == ObjectClass.TRAFFIC_CONE
    assert back.primary_vector().object_class == ObjectClass.POLE


def test_descriptor_schema_length_enforced():
    with pytest.raises(InvalidDescriptor):
        DescriptorVector(ObjectClass.POLE, (1.0, 2.0, 3.0))
    with pytest.raises(InvalidDescriptor):
        DescriptorVector(ObjectClass.LANE_MARKING, (1.0, 2.0, 3.0))  # K < 2
    with pytest.raises(InvalidDescriptor):
        DescriptorVector(ObjectClass.POLE, (1.0, 2.0, 3.0, 4.0, 5.0, math.inf))
