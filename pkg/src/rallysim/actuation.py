"""Toy-arm muscle actuation: PD joint control, torque-to-activation mapping
via bounded regularized least squares, and synergy-structured exploration
sampling."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import lsq_linear

from .core import RngStream
from .errors import DimensionMismatch
from .rewards import ActionVector

NNLS_LAMBDA = 1e-4


def _default_moment_arms() -> np.ndarray:
    # Two joints, six muscles, one antagonist pair per joint plus a shared
    # biarticular pair.
    return np.array([
        [0.040, -0.040, 0.030, -0.030, 0.000, 0.000],
        [0.000, 0.000, 0.020, -0.020, 0.030, -0.030],
    ])


@dataclass(frozen=True)
class ToyArm:
    link_lengths: np.ndarray = field(default_factory=lambda: np.array([0.3, 0.3]))
    moment_arms: np.ndarray = field(default_factory=_default_moment_arms)
    torque_caps: np.ndarray = field(
        default_factory=lambda: np.array([40.0, 40.0, 30.0, 30.0, 25.0, 25.0]))
    joint_limits: np.ndarray = field(
        default_factory=lambda: np.array([[-2.8, 2.8], [-2.8, 2.8]]))

    def __post_init__(self):
        links = np.asarray(self.link_lengths, dtype=float)
        R = np.asarray(self.moment_arms, dtype=float)
        caps = np.asarray(self.torque_caps, dtype=float)
        limits = np.asarray(self.joint_limits, dtype=float)
        object.__setattr__(self, "link_lengths", links)
        object.__setattr__(self, "moment_arms", R)
        object.__setattr__(self, "torque_caps", caps)
        object.__setattr__(self, "joint_limits", limits)
        if R.shape != (self.n_joints, self.n_muscles):
            raise DimensionMismatch("moment arm matrix shape mismatch")
        if np.any(caps <= 0):
            raise ValueError("torque caps must be positive")
        if np.linalg.matrix_rank(R) < self.n_joints:
            raise ValueError("moment arm matrix must have full row rank")
        for j in range(self.n_joints):
            row = R[j]
            if not (np.any(row > 0) and np.any(row < 0)):
                raise ValueError(f"joint {j} lacks an antagonist pair")

    @property
    def n_joints(self) -> int:
        return len(self.link_lengths)

    @property
    def n_muscles(self) -> int:
        return len(self.torque_caps)

    @property
    def gain_matrix(self) -> np.ndarray:
        """Activation-to-torque map R @ diag(caps)."""
        return self.moment_arms * self.torque_caps

    def check_limits(self, z) -> None:
        z = np.asarray(z, dtype=float)
        lo, hi = self.joint_limits[:, 0], self.joint_limits[:, 1]
        if np.any(z < lo - 1e-12) or np.any(z > hi + 1e-12):
            raise ValueError(f"joint angles {z} outside limits")


def forward_kinematics(arm: ToyArm, z) -> np.ndarray:
    """Planar end-effector position of the serial chain (third component 0)."""
    arm.check_limits(z)
    angles = np.cumsum(np.asarray(z, dtype=float))
    x = float(np.sum(arm.link_lengths * np.cos(angles)))
    y = float(np.sum(arm.link_lengths * np.sin(angles)))
    return np.array([x, y, 0.0])


@dataclass(frozen=True)
class JointTarget:
    z: np.ndarray
    z_dot: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "z", np.asarray(self.z, dtype=float))
        object.__setattr__(self, "z_dot", np.asarray(self.z_dot, dtype=float))


def pd_torque(z, z_dot, target: JointTarget, kp, kd) -> np.ndarray:
    """tau = kp * (z_t - z) + kd * (zdot_t - zdot), elementwise."""
    kp = np.asarray(kp, dtype=float)
    kd = np.asarray(kd, dtype=float)
    if np.any(kp <= 0) or np.any(kd <= 0):
        raise ValueError("PD gains must be positive")
    return kp * (target.z - np.asarray(z, dtype=float)) \
        + kd * (target.z_dot - np.asarray(z_dot, dtype=float))


@dataclass(frozen=True)
class ActivationResult:
    action: ActionVector
    residual: float
    objective: float


def activations_from_torque(arm: ToyArm, tau,
                            reg: float = NNLS_LAMBDA) -> ActivationResult:
    """Solve min_{0<=a<=1} ||G a - tau||^2 + reg * ||a||^2 for activations.

    Infeasible torques yield the best-effort projection with a nonzero
    residual."""
    tau = np.asarray(tau, dtype=float)
    if not np.all(np.isfinite(tau)):
        raise ValueError("torques must be finite")
    G = arm.gain_matrix
    if tau.shape != (G.shape[0],):
        raise DimensionMismatch("torque vector length mismatch")
    n = G.shape[1]
    if reg > 0:
        A = np.vstack([G, np.sqrt(reg) * np.eye(n)])
        b = np.concatenate([tau, np.zeros(n)])
    else:
        A, b = G, tau
    sol = lsq_linear(A, b, bounds=(0.0, 1.0), method="bvls", tol=1e-14)
    a = np.clip(sol.x, 0.0, 1.0)
    residual = float(np.linalg.norm(G @ a - tau))
    objective = residual ** 2 + reg * float(np.dot(a, a))
    return ActivationResult(ActionVector(a), residual, objective)


@dataclass(frozen=True)
class RoundtripResult:
    max_deviation: float
    max_residual: float
    infeasible_steps: tuple[int, ...]


def flatness_roundtrip(arm: ToyArm, times, z_ref, inertia,
                       residual_tol: float = 1e-8,
                       reg: float = NNLS_LAMBDA) -> RoundtripResult:
    """Reconstruct a joint trajectory through the activation map.

    Required torques come from finite-difference accelerations against the
    diagonal-inertia model; activations are solved per step and the arm is
    re-simulated forward from the initial state.  Returns the maximum joint
    angle deviation and which steps had infeasible torques.
    """
    times = np.asarray(times, dtype=float)
    z_ref = np.asarray(z_ref, dtype=float)
    inertia = np.asarray(inertia, dtype=float)
    if z_ref.shape[0] != times.shape[0]:
        raise DimensionMismatch("times and trajectory length mismatch")
    dt = float(times[1] - times[0])
    if dt <= 0 or dt > 1e-3 + 1e-12:
        raise ValueError("trajectory must be sampled at dt <= 1e-3")

    z_ddot = np.gradient(np.gradient(z_ref, dt, axis=0), dt, axis=0)
    torques = inertia * z_ddot

    accels = np.empty_like(z_ddot)
    infeasible = []
    max_residual = 0.0
    for i, tau in enumerate(torques):
        res = activations_from_torque(arm, tau, reg=reg)
        accels[i] = (arm.gain_matrix @ res.action.a) / inertia
        max_residual = max(max_residual, res.residual)
        if res.residual > residual_tol:
            infeasible.append(i)

    # velocity-Verlet re-simulation from the initial state
    z = z_ref[0].copy()
    v = (z_ref[1] - z_ref[0]) / dt
    deviation = 0.0
    for i in range(len(times) - 1):
        z = z + v * dt + 0.5 * accels[i] * dt * dt
        v = v + 0.5 * (accels[i] + accels[i + 1]) * dt
        deviation = max(deviation, float(np.max(np.abs(z - z_ref[i + 1]))))
    return RoundtripResult(deviation, max_residual, tuple(infeasible))


# ---------------------------------------------------------------------------
# Synergy-structured exploration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SynergyBasis:
    """Per-group synergy weights and covariances, plus base exploration
    noise over all muscles."""

    group_names: tuple[str, ...]
    weights: tuple[np.ndarray, ...]        # per group: n_muscles_g x n_syn_g
    covariances: tuple[np.ndarray, ...]    # per group: n_syn_g x n_syn_g
    base_cov: np.ndarray                   # n_total x n_total (or diagonal)

    def __post_init__(self):
        weights = tuple(np.asarray(W, dtype=float) for W in self.weights)
        covs = tuple(np.asarray(S, dtype=float) for S in self.covariances)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "covariances", covs)
        if len(weights) != len(self.group_names) or len(covs) != len(weights):
            raise DimensionMismatch("group count mismatch")
        total = sum(W.shape[0] for W in weights)
        base = np.asarray(self.base_cov, dtype=float)
        if base.ndim == 1:
            if base.shape[0] != total:
                raise DimensionMismatch("base covariance length mismatch")
            base = np.diag(base)
        elif base.shape != (total, total):
            raise DimensionMismatch("base covariance shape mismatch")
        object.__setattr__(self, "base_cov", base)
        for W, S in zip(weights, covs):
            if S.shape != (W.shape[1], W.shape[1]):
                raise DimensionMismatch("synergy covariance shape mismatch")
            _check_psd(S, "group covariance")
        _check_psd(base, "base covariance")

    @property
    def n_muscles(self) -> int:
        return sum(W.shape[0] for W in self.weights)


def _check_psd(S: np.ndarray, name: str, tol: float = 1e-10) -> None:
    if not np.allclose(S, S.T, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(S).min() < -tol:
        raise ValueError(f"{name} must be positive semidefinite")


def default_synergy_basis(rng: Optional[RngStream] = None,
                          noise_scale: float = 0.05) -> SynergyBasis:
    """Scaled-down default: hand 6/4, arm 6/4, torso 12/8, pelvis 2/2
    (muscles / synergies per group)."""
    gen = (rng or RngStream(0)).generator
    sizes = {"hand": (6, 4), "arm": (6, 4), "torso": (12, 8), "pelvis": (2, 2)}
    names, weights, covs = [], [], []
    for name, (n_m, n_s) in sizes.items():
        names.append(name)
        weights.append(np.abs(gen.normal(0.3, 0.15, size=(n_m, n_s))))
        diag = gen.uniform(0.5, 1.5, size=n_s) * noise_scale ** 2
        covs.append(np.diag(diag))
    total = sum(n for n, _ in sizes.values())
    base = np.full(total, (0.5 * noise_scale) ** 2)
    return SynergyBasis(tuple(names), tuple(weights), tuple(covs), base)


def assemble_synergy_covariance(basis: SynergyBasis) -> np.ndarray:
    """Block-diagonal W_g Sigma_g W_g^T per group plus the base noise."""
    blocks = [W @ S @ W.T for W, S in zip(basis.weights, basis.covariances)]
    n = basis.n_muscles
    cov = np.zeros((n, n))
    off = 0
    for B in blocks:
        m = B.shape[0]
        cov[off:off + m, off:off + m] = B
        off += m
    cov += basis.base_cov
    return 0.5 * (cov + cov.T)


@dataclass(frozen=True)
class SynergySample:
    action: ActionVector
    pre_clamp: np.ndarray


def synergy_mean(modulations: Sequence[np.ndarray], basis: SynergyBasis) -> np.ndarray:
    if len(modulations) != len(basis.weights):
        raise DimensionMismatch("one modulation vector per group required")
    parts = []
    for W, x in zip(basis.weights, modulations):
        x = np.asarray(x, dtype=float)
        if x.shape != (W.shape[1],):
            raise DimensionMismatch("modulation length mismatch")
        parts.append(W @ x)
    return np.concatenate(parts)


def sample_synergy_action(modulations: Sequence[np.ndarray],
                          basis: SynergyBasis, rng: RngStream,
                          size: Optional[int] = None):
    """Draw from N(concat(W_g x_g), Sigma_syn + Sigma_o), clamped to [0, 1].

    The pre-clamp draw is kept so Gaussian statistics stay testable.  With
    ``size`` given, returns the (size, n) pre-clamp sample matrix instead.
    """
    mean = synergy_mean(modulations, basis)
    cov = assemble_synergy_covariance(basis)
    gen = rng.generator
    try:
        np.linalg.cholesky(cov + 1e-300 * np.eye(len(cov)))
        method = "cholesky"
    except np.linalg.LinAlgError:
        method = "eigh"  # singular (e.g. zero) covariance
    if size is not None:
        return gen.multivariate_normal(mean, cov, size=size, method=method)
    raw = gen.multivariate_normal(mean, cov, method=method)
    return SynergySample(ActionVector(np.clip(raw, 0.0, 1.0)), raw)
