"""Flight closed forms, bounce model, event prediction and drag calibration."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import rk4_step

from rallysim.ballistics import (BounceModel, CalibrationResult, MediumModel,
                                 TrajectorySample, bounce, calibrate,
                                 flight_pos, flight_state, flight_vel,
                                 landing_time, predict_landing,
                                 predict_plane_crossing, step)
from rallysim.core import BallState, TableGeometry
from rallysim.errors import (Degenerate, InsufficientData, NoCrossing,
                             NoLanding)


def _rk4_flight(s, t, m, n=4000):
    p = s.pos[None, :].copy()
    v = s.vel[None, :].copy()
    for _ in range(n):
        p, v = rk4_step(p, v, t / n, m.g, m.k)
    return p[0], v[0]


def test_drag_free_flight_is_the_parabola():
    s = BallState([0.0, 0.0, 1.0], [3.0, -1.0, 2.0])
    m = MediumModel()
    t = 0.37
    want = s.pos + s.vel * t - np.array([0, 0, 0.5 * m.g * t * t])
    assert np.allclose(flight_pos(s, t, m), want, atol=1e-15)
    assert np.allclose(flight_vel(s, t, m),
                       s.vel - np.array([0, 0, m.g * t]), atol=1e-15)


def test_drag_flight_matches_independent_integration():
    s = BallState([0.2, -0.1, 1.3], [4.0, 1.0, 1.5])
    m = MediumModel(k=0.25)
    p_rk, v_rk = _rk4_flight(s, 0.6, m)
    assert np.allclose(flight_pos(s, 0.6, m), p_rk, atol=1e-11)
    assert np.allclose(flight_vel(s, 0.6, m), v_rk, atol=1e-11)


@given(st.floats(0.01, 1.5))
def test_flight_pos_at_zero_time_is_identity(t):
    s = BallState([1.0, 2.0, 3.0], [0.5, 0.5, 0.5])
    m = MediumModel(k=0.1)
    assert np.allclose(flight_pos(s, 0.0, m), s.pos)
    # consistency between the pos/vel closed forms: numeric derivative
    h = 1e-7
    d = (flight_pos(s, t + h, m) - flight_pos(s, t - h, m)) / (2 * h)
    assert np.allclose(d, flight_vel(s, t, m), atol=1e-6)


def test_step_drag_free_is_exact_and_drag_is_substepped():
    s = BallState([0.0, 0.0, 1.0], [2.0, 0.0, 1.0])
    m0 = MediumModel()
    assert np.allclose(step(s, 0.008, m0).pos, flight_pos(s, 0.008, m0))
    md = MediumModel(k=0.3)
    got = step(s, 0.01, md)
    assert np.allclose(got.pos, flight_pos(s, 0.01, md), atol=1e-4)
    with pytest.raises(ValueError):
        step(s, 0.0, md)


def test_medium_model_validation():
    with pytest.raises(ValueError):
        MediumModel(g=0.0)
    with pytest.raises(ValueError):
        MediumModel(k=-0.1)
    assert MediumModel().drag_free
    assert not MediumModel(k=0.5).drag_free


def test_bounce_reflects_normal_and_scales_tangential():
    s = BallState([0.0, 0.0, 0.78], [3.0, -1.0, -2.0])
    b = bounce(s, BounceModel(restitution=0.9, tangential_retention=0.8))
    assert np.allclose(b.vel, [2.4, -0.8, 1.8])
    assert np.array_equal(b.pos, s.pos)
    with pytest.raises(ValueError):
        bounce(BallState([0, 0, 1], [0, 0, 0.1]), BounceModel())
    with pytest.raises(ValueError):
        BounceModel(restitution=1.2)


def test_predict_landing_drag_free_quadratic():
    m = MediumModel()
    p = predict_landing([0.0, 0.0, 1.0], [1.0, 0.0, 0.0], 0.0, m)
    t = np.sqrt(2.0 / m.g)
    assert np.allclose(p, [t, 0.0, 0.0], atol=1e-12)
    assert landing_time([0.0, 0.0, 1.0], [1.0, 0.0, 0.0], 0.0, m) \
        == pytest.approx(t)


def test_predict_landing_rejects_unreachable_planes():
    with pytest.raises(ValueError):
        predict_landing([0.0, 0.0, 0.5], [1.0, 0.0, 0.0], 1.0, MediumModel())
    # a throw whose apex stays below the plane never lands on it
    with pytest.raises(NoLanding):
        landing_time([0.0, 0.0, 1.0], [0.0, 0.0, 0.5], 1.05,
                     MediumModel(k=5.0))


@given(st.floats(0.05, 0.4), st.floats(3.0, 6.0), st.floats(-1.0, 1.0))
def test_landing_is_on_the_plane_and_descending(k, vx, vz):
    m = MediumModel(k=k)
    s = BallState([-1.0, 0.2, 1.4], [vx, 0.3, vz])
    t = landing_time(s.pos, s.vel, 0.8, m)
    assert flight_pos(s, t, m)[2] == pytest.approx(0.8, abs=1e-9)
    assert flight_vel(s, t, m)[2] < 0.0


def test_plane_crossing_direct_and_after_one_bounce():
    geom = TableGeometry()
    m = MediumModel()
    plane = 1.22
    # high flat serve crosses before any bounce
    s = BallState([-1.0, 0.0, 1.4], [6.0, 0.0, 0.5])
    t, at = predict_plane_crossing(s, plane, m, geom)
    assert at.pos[0] == pytest.approx(plane, abs=1e-9)
    # slower serve must bounce once on the agent half first
    s2 = BallState([-1.2, 0.0, 1.45], [4.0, 0.0, -0.5])
    t2, at2 = predict_plane_crossing(s2, plane, m, geom)
    assert at2.pos[0] == pytest.approx(plane, abs=1e-9)
    assert t2 > t


def test_plane_crossing_detects_dropouts():
    geom = TableGeometry()
    m = MediumModel()
    # moving away from the plane
    with pytest.raises(NoCrossing):
        predict_plane_crossing(BallState([-1.0, 0.0, 1.4], [-1.0, 0.0, 0.0]),
                               1.22, m, geom)
    # too slow: two bounces before the plane
    with pytest.raises(NoCrossing):
        predict_plane_crossing(BallState([-1.3, 0.0, 1.0], [0.8, 0.0, -1.0]),
                               1.22, m, geom)


def test_calibrate_recovers_the_drag_coefficient():
    true = MediumModel(k=0.12)
    s0 = BallState([0.0, 0.0, 1.5], [4.0, 0.5, 1.0])
    samples = [TrajectorySample(t, flight_state(s0, t, true))
               for t in np.linspace(0.0, 0.6, 16)]
    fit = calibrate(samples)
    assert isinstance(fit, CalibrationResult)
    assert fit.model.k == pytest.approx(0.12, abs=1e-6)
    assert fit.residual < 1e-9


def test_calibrate_input_validation():
    s = BallState([0, 0, 1], [1, 0, 0])
    few = [TrajectorySample(0.1 * i, s) for i in range(3)]
    with pytest.raises(InsufficientData):
        calibrate(few)
    tight = [TrajectorySample(0.001 * i, s) for i in range(6)]
    with pytest.raises(InsufficientData):
        calibrate(tight)
    coincident = [TrajectorySample(0.1 * i, s) for i in range(6)]
    with pytest.raises(Degenerate):
        calibrate(coincident)
