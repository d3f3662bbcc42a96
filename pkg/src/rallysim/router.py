"""Gaussian process classification for stroke routing.

A binary GPC with RBF kernel, logistic likelihood and Laplace approximation
estimates each sub-policy's success probability from incoming-serve
features; serves are routed to the most confident policy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from sklearn.base import BaseEstimator

from .errors import NonConverged, SingleClass


def rbf_kernel(A, B, lengthscale: float, variance: float) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    sq = np.sum(A ** 2, axis=1)[:, None] + np.sum(B ** 2, axis=1)[None, :] \
        - 2.0 * A @ B.T
    return variance * np.exp(-0.5 * np.maximum(sq, 0.0) / lengthscale ** 2)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class GaussianProcessSuccessClassifier(BaseEstimator):
    """Binary Laplace-approximation GPC over serve features.

    Hyperparameters are fixed (no marginal-likelihood optimization); the
    posterior mode is found by Newton iteration.
    """

    def __init__(self, lengthscale: float = 1.0, variance: float = 1.0,
                 jitter: float = 1e-8, max_iter: int = 100, tol: float = 1e-8):
        self.lengthscale = lengthscale
        self.variance = variance
        self.jitter = jitter
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y, dtype=float).ravel()
        y = np.where(y > 0, 1.0, -1.0)
        if X.shape[0] != y.shape[0]:
            raise ValueError("X and y length mismatch")
        if X.shape[0] < 2 or len(np.unique(y)) < 2:
            raise SingleClass("need at least two points with both labels")

        K = rbf_kernel(X, X, self.lengthscale, self.variance)
        K[np.diag_indices_from(K)] += self.jitter
        n = len(y)
        f = np.zeros(n)
        converged = False
        for _ in range(self.max_iter):
            pi = _sigmoid(f)
            t = (y + 1.0) / 2.0
            grad = t - pi                       # d log p(y|f) / df
            W = pi * (1.0 - pi)
            sw = np.sqrt(W)
            B = np.eye(n) + sw[:, None] * K * sw[None, :]
            L = cholesky(B, lower=True)
            b = W * f + grad
            a = b - sw * cho_solve((L, True), sw * (K @ b))
            f = K @ a
            if np.max(np.abs(grad - a)) < self.tol:
                converged = True
                break
        if not converged:
            raise NonConverged("Laplace mode finding did not converge")

        pi = _sigmoid(f)
        self.X_ = X
        self.y_ = y
        self.f_ = f
        self.grad_ = (y + 1.0) / 2.0 - pi
        self.sqrt_w_ = np.sqrt(pi * (1.0 - pi))
        B = np.eye(n) + np.outer(self.sqrt_w_, self.sqrt_w_) * K
        self.L_ = cholesky(B, lower=True)
        return self

    def predict_success(self, features) -> float:
        """Laplace predictive success probability, strictly inside (0, 1)."""
        return float(self.predict_proba(np.atleast_2d(features))[0, 1])

    def predict_proba(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        ks = rbf_kernel(self.X_, X, self.lengthscale, self.variance)
        mu = ks.T @ self.grad_
        v = solve_triangular(self.L_, self.sqrt_w_[:, None] * ks, lower=True)
        var = np.maximum(self.variance + self.jitter - np.sum(v ** 2, axis=0),
                         1e-12)
        # probit-style correction of the logistic integral
        p = _sigmoid(mu / np.sqrt(1.0 + np.pi * var / 8.0))
        p = np.clip(p, 1e-12, 1.0 - 1e-12)
        return np.column_stack([1.0 - p, p])

    def predict(self, X) -> np.ndarray:
        return np.where(self.predict_proba(X)[:, 1] >= 0.5, 1, -1)


def fit(X, y, lengthscale: float = 1.0, variance: float = 1.0,
        **kwargs) -> GaussianProcessSuccessClassifier:
    model = GaussianProcessSuccessClassifier(lengthscale=lengthscale,
                                             variance=variance, **kwargs)
    return model.fit(X, y)


def predict_success(model: GaussianProcessSuccessClassifier, features) -> float:
    return model.predict_success(features)


def route(models: Sequence[GaussianProcessSuccessClassifier], features) -> int:
    """Index of the most confident policy; ties break to the lowest index."""
    if not models:
        raise ValueError("need at least one model")
    probs = [m.predict_success(features) for m in models]
    return int(np.argmax(probs))


# ---------------------------------------------------------------------------
# Persistence: flat, diffable text artifact
# ---------------------------------------------------------------------------

def save_model(model: GaussianProcessSuccessClassifier, path) -> None:
    payload = {
        "lengthscale": model.lengthscale,
        "variance": model.variance,
        "jitter": model.jitter,
        "inputs": model.X_.tolist(),
        "labels": model.y_.tolist(),
        "mode": model.f_.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_model(path) -> GaussianProcessSuccessClassifier:
    with open(path) as fh:
        payload = json.load(fh)
    model = GaussianProcessSuccessClassifier(
        lengthscale=payload["lengthscale"], variance=payload["variance"],
        jitter=payload["jitter"])
    return model.fit(np.array(payload["inputs"]), np.array(payload["labels"]))
