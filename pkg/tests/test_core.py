"""Quaternion algebra, state records and random-stream determinism."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rallysim.core import (BallState, PaddleState, RngStream, SoccerGeometry,
                           TableGeometry, derive_stream, quat, quat_conj,
                           quat_component_distance, quat_from_axis_angle,
                           quat_from_two_vectors, quat_geodesic_angle,
                           quat_identity, quat_mul, quat_normalize,
                           quat_rotate, vec3)
from rallysim.errors import ConfigError

finite = st.floats(-10.0, 10.0, allow_nan=False)
unit_vec = st.lists(finite, min_size=3, max_size=3).filter(
    lambda v: np.linalg.norm(v) > 1e-3)


def _rand_quat(rng):
    return quat_normalize(rng.normal(size=4))


def test_vec3_accepts_components_and_sequences():
    assert np.array_equal(vec3(1, 2, 3), vec3([1.0, 2.0, 3.0]))
    with pytest.raises(ValueError):
        vec3([1.0, np.nan, 0.0])
    with pytest.raises(Exception):
        vec3([1.0, 2.0])


def test_quat_normalize_rejects_zero():
    with pytest.raises(ValueError):
        quat_normalize([0.0, 0.0, 0.0, 0.0])
    q = quat(2.0, 0.0, 0.0, 0.0)
    assert np.allclose(q, quat_identity())


@given(unit_vec, st.floats(-3.0, 3.0))
def test_axis_angle_rotates_by_the_requested_angle(axis, angle):
    q = quat_from_axis_angle(axis, angle)
    a = np.asarray(axis) / np.linalg.norm(axis)
    # any vector orthogonal to the axis rotates by exactly `angle`
    probe = np.cross(a, [1.0, 0.0, 0.0])
    if np.linalg.norm(probe) < 1e-6:
        probe = np.cross(a, [0.0, 1.0, 0.0])
    probe /= np.linalg.norm(probe)
    rotated = quat_rotate(q, probe)
    assert np.dot(probe, rotated) == pytest.approx(np.cos(angle), abs=1e-9)


@given(unit_vec)
def test_rotation_preserves_length(v):
    rng = np.random.default_rng(abs(hash(tuple(v))) % 2**32)
    q = _rand_quat(rng)
    assert np.linalg.norm(quat_rotate(q, v)) \
        == pytest.approx(np.linalg.norm(v), rel=1e-12)


def test_quat_mul_matches_composed_rotation():
    rng = np.random.default_rng(3)
    for _ in range(50):
        a, b = _rand_quat(rng), _rand_quat(rng)
        v = rng.normal(size=3)
        assert np.allclose(quat_rotate(quat_mul(a, b), v),
                           quat_rotate(a, quat_rotate(b, v)), atol=1e-12)


def test_quat_conj_inverts_unit_quaternions():
    rng = np.random.default_rng(4)
    q = _rand_quat(rng)
    assert np.allclose(quat_mul(q, quat_conj(q)), quat_identity(), atol=1e-12)


@given(unit_vec, unit_vec)
def test_from_two_vectors_maps_u_onto_v(u, v):
    q = quat_from_two_vectors(u, v)
    got = quat_rotate(q, np.asarray(u) / np.linalg.norm(u))
    want = np.asarray(v) / np.linalg.norm(v)
    assert np.allclose(got, want, atol=1e-9)


def test_from_two_vectors_antiparallel():
    q = quat_from_two_vectors([1.0, 0.0, 0.0], [-1.0, 0.0, 0.0])
    assert np.allclose(quat_rotate(q, [1.0, 0.0, 0.0]), [-1.0, 0.0, 0.0],
                       atol=1e-12)


def test_quat_distances_are_sign_invariant():
    rng = np.random.default_rng(5)
    a, b = _rand_quat(rng), _rand_quat(rng)
    assert quat_geodesic_angle(a, b) == quat_geodesic_angle(-a, b)
    assert quat_geodesic_angle(a, b) == quat_geodesic_angle(b, a)
    assert quat_component_distance(a, b) == quat_component_distance(-a, b)
    assert quat_geodesic_angle(a, a) == 0.0
    assert quat_component_distance(a, a) == 0.0


def test_paddle_normal_is_the_rotated_face_axis():
    q = quat_from_axis_angle([0.0, 0.0, 1.0], np.pi / 2.0)
    p = PaddleState(pos=[0, 0, 1], vel=[0, 0, 0], orient=q)
    assert np.allclose(p.normal, [0.0, 1.0, 0.0], atol=1e-12)


def test_state_records_validate_inputs():
    with pytest.raises(ValueError):
        BallState([0.0, 0.0, np.inf], [0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        PaddleState([0, 0, 0], [0, 0, 0], [0.0, 0.0, 0.0, 0.0])


def test_geometry_rejects_nonpositive_dimensions():
    with pytest.raises(ConfigError):
        TableGeometry(table_length=-1.0)
    with pytest.raises(ConfigError):
        SoccerGeometry(goal_width=0.0)
    g = TableGeometry()
    assert g.half_length == g.table_length / 2.0
    assert SoccerGeometry().half_width == pytest.approx(3.66)


def test_rng_streams_are_reproducible_and_distinct():
    a = RngStream(123, 7).generator.random(8)
    b = RngStream(123, 7).generator.random(8)
    c = RngStream(123, 8).generator.random(8)
    d = RngStream(124, 7).generator.random(8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_derive_stream_rejects_negative_indices():
    with pytest.raises(ValueError):
        derive_stream(0, -1)
    assert derive_stream(5, 2).stream_id == 2
