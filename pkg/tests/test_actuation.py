"""Toy-arm actuation: activation solve, flatness round-trip, synergies."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import nnls_objective

from rallysim.actuation import (NNLS_LAMBDA, JointTarget, SynergyBasis,
                                ToyArm, activations_from_torque,
                                assemble_synergy_covariance,
                                default_synergy_basis, flatness_roundtrip,
                                forward_kinematics, pd_torque,
                                sample_synergy_action, synergy_mean)
from rallysim.core import RngStream
from rallysim.errors import DimensionMismatch

ARM = ToyArm()


def test_arm_validation():
    with pytest.raises(DimensionMismatch):
        ToyArm(moment_arms=np.ones((2, 5)))
    # rank-deficient moment arms
    R = np.array([[0.04, -0.04, 0.02, -0.02, 0.01, -0.01],
                  [0.04, -0.04, 0.02, -0.02, 0.01, -0.01]])
    with pytest.raises(ValueError):
        ToyArm(moment_arms=R)
    # a joint with no antagonist
    R2 = np.array([[0.04, 0.04, 0.02, 0.02, 0.01, 0.01],
                   [0.00, 0.00, 0.02, -0.02, 0.03, -0.03]])
    with pytest.raises(ValueError):
        ToyArm(moment_arms=R2)
    with pytest.raises(ValueError):
        ToyArm(torque_caps=np.array([1.0, 1.0, 1.0, 1.0, 1.0, -1.0]))


def test_gain_matrix_scales_columns_by_caps():
    G = ARM.gain_matrix
    assert G.shape == (2, 6)
    assert np.allclose(G, ARM.moment_arms * ARM.torque_caps)


def test_forward_kinematics_known_poses():
    straight = forward_kinematics(ARM, [0.0, 0.0])
    assert np.allclose(straight, [0.6, 0.0, 0.0])
    bent = forward_kinematics(ARM, [np.pi / 2.0, -np.pi / 2.0])
    assert np.allclose(bent, [0.3, 0.3, 0.0], atol=1e-12)
    with pytest.raises(ValueError):
        forward_kinematics(ARM, [3.0, 0.0])


def test_pd_torque_formula_and_gain_validation():
    target = JointTarget(z=[0.5, -0.5], z_dot=[0.0, 0.0])
    tau = pd_torque([0.0, 0.0], [1.0, -1.0], target, kp=10.0, kd=2.0)
    assert np.allclose(tau, [5.0 - 2.0, -5.0 + 2.0])
    with pytest.raises(ValueError):
        pd_torque([0, 0], [0, 0], target, kp=0.0, kd=1.0)


def test_activation_solve_is_feasible_and_bounded():
    tau = np.array([0.8, -0.5])
    res = activations_from_torque(ARM, tau)
    a = res.action.a
    assert np.all(a >= 0.0) and np.all(a <= 1.0)
    assert res.residual < 1e-3
    assert np.allclose(ARM.gain_matrix @ a, tau, atol=1e-3)


def test_activation_solve_zero_torque_prefers_rest():
    res = activations_from_torque(ARM, np.zeros(2))
    assert np.allclose(res.action.a, 0.0, atol=1e-9)
    assert res.objective == pytest.approx(0.0, abs=1e-12)


def test_activation_solve_saturates_on_infeasible_torque():
    big = np.array([1e4, 0.0])
    res = activations_from_torque(ARM, big)
    assert res.residual > 1.0
    # best effort: every positive-gain muscle for joint 0 fully on
    assert np.all(res.action.a[ARM.gain_matrix[0] > 0] > 0.99)


def test_activation_solve_validates_input():
    with pytest.raises(DimensionMismatch):
        activations_from_torque(ARM, np.zeros(3))
    with pytest.raises(ValueError):
        activations_from_torque(ARM, np.array([np.nan, 0.0]))


@settings(max_examples=60, deadline=None)
@given(st.floats(-2.0, 2.0), st.floats(-1.5, 1.5))
def test_activation_solve_beats_simple_competitors(t0, t1):
    """The bounded solve never scores worse than obvious feasible points."""
    tau = np.array([t0, t1])
    a = activations_from_torque(ARM, tau).action.a
    obj = nnls_objective(ARM.gain_matrix, tau, a, NNLS_LAMBDA)
    for guess in (np.zeros(6), np.full(6, 0.5), np.clip(a + 0.01, 0, 1)):
        assert obj <= nnls_objective(ARM.gain_matrix, tau, guess,
                                     NNLS_LAMBDA) + 1e-10


def test_flatness_roundtrip_flags_infeasible_trajectories():
    dt = 1e-3
    times = np.arange(0.0, 0.5, dt)
    # violent reference: required torques exceed the muscle span
    z_ref = np.column_stack([
        2.0 * np.sin(2.0 * np.pi * 8.0 * times),
        np.zeros_like(times),
    ])
    res = flatness_roundtrip(ARM, times, z_ref, np.array([0.4, 0.4]))
    assert res.infeasible_steps
    assert res.max_residual > 1e-8


def test_flatness_roundtrip_validates_sampling():
    with pytest.raises(ValueError):
        flatness_roundtrip(ARM, np.arange(0.0, 1.0, 0.01),
                           np.zeros((100, 2)), np.array([0.05, 0.03]))
    with pytest.raises(DimensionMismatch):
        flatness_roundtrip(ARM, np.arange(0.0, 0.1, 1e-3),
                           np.zeros((5, 2)), np.array([0.05, 0.03]))


# ---------------------------------------------------------------------------
# Synergy sampling
# ---------------------------------------------------------------------------

def test_default_basis_shape_and_covariance():
    basis = default_synergy_basis(RngStream(1))
    assert basis.group_names == ("hand", "arm", "torso", "pelvis")
    assert basis.n_muscles == 26
    cov = assemble_synergy_covariance(basis)
    assert cov.shape == (26, 26)
    assert np.allclose(cov, cov.T)
    assert np.linalg.eigvalsh(cov).min() > 0.0   # base noise keeps it PD


def test_basis_validation():
    W = np.ones((3, 2))
    S = np.eye(2)
    with pytest.raises(DimensionMismatch):
        SynergyBasis(("a",), (W,), (np.eye(3),), np.ones(3))
    with pytest.raises(DimensionMismatch):
        SynergyBasis(("a", "b"), (W,), (S,), np.ones(3))
    with pytest.raises(ValueError):
        SynergyBasis(("a",), (W,), (np.array([[1.0, 2.0], [0.0, 1.0]]),),
                     np.ones(3))
    with pytest.raises(ValueError):
        SynergyBasis(("a",), (W,), (-S,), np.ones(3))


def test_synergy_mean_is_the_stacked_weighted_modulation():
    basis = default_synergy_basis(RngStream(2))
    mods = [np.zeros(W.shape[1]) for W in basis.weights]
    assert np.allclose(synergy_mean(mods, basis), 0.0)
    mods[0] = np.ones(basis.weights[0].shape[1])
    mean = synergy_mean(mods, basis)
    n0 = basis.weights[0].shape[0]
    assert np.allclose(mean[:n0], basis.weights[0].sum(axis=1))
    assert np.allclose(mean[n0:], 0.0)
    with pytest.raises(DimensionMismatch):
        synergy_mean(mods[:-1], basis)


def test_sampling_is_clamped_and_reproducible():
    basis = default_synergy_basis(RngStream(3))
    mods = [np.full(W.shape[1], 0.5) for W in basis.weights]
    s1 = sample_synergy_action(mods, basis, RngStream(10))
    s2 = sample_synergy_action(mods, basis, RngStream(10))
    assert np.array_equal(s1.pre_clamp, s2.pre_clamp)
    assert np.all(s1.action.a >= 0.0) and np.all(s1.action.a <= 1.0)
    assert np.allclose(s1.action.a, np.clip(s1.pre_clamp, 0.0, 1.0))
    s3 = sample_synergy_action(mods, basis, RngStream(11))
    assert not np.array_equal(s1.pre_clamp, s3.pre_clamp)
