"""Exact Gaussian-process regression with an anisotropic squared-exponential kernel."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize
from scipy.stats import norm

JITTER = 1e-8
MAX_JITTER = 1e-2
LENGTH_BOUNDS = (1e-2, 1e1)
AMPLITUDE_BOUNDS = (1e-2, 1e2)


class IllConditioned(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class Hyperparameters:
    lengthscales: np.ndarray
    amplitude: float = 1.0  # prior variance of the standardized targets

    def as_dict(self) -> dict:
        return {"lengthscales": [float(v) for v in self.lengthscales], "amplitude": float(self.amplitude)}


def se_kernel(X1, X2, hyp: Hyperparameters) -> np.ndarray:
    A = np.asarray(X1, float) / hyp.lengthscales
    B = np.asarray(X2, float) / hyp.lengthscales
    d2 = np.sum(A * A, 1)[:, None] + np.sum(B * B, 1)[None, :] - 2.0 * A @ B.T
    return hyp.amplitude * np.exp(-0.5 * np.maximum(d2, 0.0))


def _factor(K: np.ndarray, jitter: float = JITTER):
    """Cholesky factor with jitter escalated by decades up to ``MAX_JITTER``."""
    n = K.shape[0]
    j = jitter
    while j <= MAX_JITTER * (1 + 1e-9):
        try:
            return cholesky(K + j * np.eye(n), lower=True), j
        except np.linalg.LinAlgError:
            j *= 10.0
    raise IllConditioned("kernel matrix not positive definite even with jitter 1e-2")


@dataclass
class GaussianProcess:
    """GP posterior on standardized targets.

    Inputs are expected in normalized coordinates (the unit cube); targets
    are standardized internally and predictions are mapped back.
    """

    X: np.ndarray
    y: np.ndarray
    hyp: Hyperparameters
    jitter: float = JITTER

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, float))
        self.y = np.asarray(self.y, float).ravel()
        if len(self.y) < 1:
            raise ValueError("need at least one training point")
        self.mu = float(np.mean(self.y))
        sd = float(np.std(self.y))
        self.sd = sd if sd > 0 else 1.0
        z = (self.y - self.mu) / self.sd
        K = se_kernel(self.X, self.X, self.hyp)
        self.L, self.jitter_used = _factor(K, self.jitter)
        self.alpha = cho_solve((self.L, True), z)

    def predict(self, Xq) -> tuple[np.ndarray, np.ndarray]:
        Xq = np.atleast_2d(np.asarray(Xq, float))
        Ks = se_kernel(Xq, self.X, self.hyp)
        mean = Ks @ self.alpha
        v = solve_triangular(self.L, Ks.T, lower=True)
        var = np.maximum(self.hyp.amplitude - np.sum(v * v, 0), 0.0)
        return self.mu + self.sd * mean, self.sd * np.sqrt(var)


def negative_log_marginal_likelihood(theta, X, z) -> float:
    """theta = [log lengthscales..., log amplitude]."""
    hyp = Hyperparameters(np.exp(theta[:-1]), float(np.exp(theta[-1])))
    K = se_kernel(X, X, hyp)
    try:
        L, _ = _factor(K)
    except IllConditioned:
        return 1e25
    alpha = cho_solve((L, True), z)
    return float(0.5 * z @ alpha + np.sum(np.log(np.diag(L))) + 0.5 * len(z) * math.log(2 * math.pi))


def fit_hyperparameters(X, y, rng: np.random.Generator | None = None, restarts: int = 4,
                        initial: Hyperparameters | None = None) -> Hyperparameters:
    """Maximum marginal likelihood with bounded L-BFGS-B and a few seeded restarts."""
    X = np.atleast_2d(np.asarray(X, float))
    y = np.asarray(y, float)
    sd = float(np.std(y)) or 1.0
    z = (y - np.mean(y)) / sd
    d = X.shape[1]
    lo = [math.log(LENGTH_BOUNDS[0])] * d + [math.log(AMPLITUDE_BOUNDS[0])]
    hi = [math.log(LENGTH_BOUNDS[1])] * d + [math.log(AMPLITUDE_BOUNDS[1])]
    starts = [np.array([math.log(0.3)] * d + [0.0])]
    if initial is not None:
        starts.append(np.log(np.r_[initial.lengthscales, initial.amplitude]))
    rng = rng or np.random.default_rng(0)
    for _ in range(restarts):
        starts.append(rng.uniform(lo, hi))
    best = None
    for s in starts:
        res = minimize(negative_log_marginal_likelihood, np.clip(s, lo, hi), args=(X, z),
                       method="L-BFGS-B", bounds=list(zip(lo, hi)))
        if best is None or res.fun < best.fun:
            best = res
    theta = np.clip(best.x, lo, hi)
    return Hyperparameters(np.exp(theta[:-1]), float(np.exp(theta[-1])))


def gp_posterior(train_points, train_values, query, hyp: Hyperparameters | None = None):
    """Posterior (mean, stddev) at ``query``; hyperparameters are fitted when not given."""
    X = np.atleast_2d(np.asarray(train_points, float))
    if hyp is None:
        hyp = fit_hyperparameters(X, train_values)
    return GaussianProcess(X, train_values, hyp).predict(query)


def expected_improvement(mean, stddev, best_value):
    """Closed-form EI for minimization. Zero wherever stddev is zero and mean >= best."""
    mean = np.asarray(mean, float)
    sd = np.asarray(stddev, float)
    if np.any(sd < 0):
        raise ValueError("stddev must be >= 0")
    imp = best_value - mean
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sd > 0, imp / np.where(sd > 0, sd, 1.0), 0.0)
    ei = np.where(sd > 0, imp * norm.cdf(z) + sd * norm.pdf(z), np.maximum(imp, 0.0))
    ei = np.maximum(ei, 0.0)
    return float(ei) if ei.ndim == 0 else ei
