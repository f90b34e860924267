"""Continuous-discrete unscented Kalman filter with noise sigma points."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .belief import GaussianBelief, MeasurementUpdateReport, kalman_gain
from .errors import ContractError, DimensionError
from .numerics import apply_diffusion, cholesky_lower, integrate_ode, symmetrize


@dataclass(frozen=True)
class UkfParams:
    """Scaling parameters ``alpha``, ``beta`` and ``kappa``."""

    alpha: float = 1.0
    beta: float = 2.0
    kappa: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ContractError("alpha must lie in (0, 1]")
        if self.beta < 0.0:
            raise ContractError("beta must be nonnegative")
        if self.kappa < 0.0:
            raise ContractError("kappa must be nonnegative")


@dataclass(frozen=True)
class UnscentedWeights:
    n: int
    c: float
    lam: float
    wm: np.ndarray
    wc: np.ndarray


def ukf_weights(params, n):
    """Spread ``c = alpha^2 (n + kappa)``, ``lambda = c - n`` and the weights."""
    if n < 1:
        raise ContractError("dimension must be at least 1")
    c = params.alpha**2 * (n + params.kappa)
    lam = c - n
    if n + lam <= 0.0:
        raise ContractError("degenerate sigma-point scaling: n + lambda <= 0")
    wi = 1.0 / (2.0 * (n + lam))
    wm = np.full(2 * n + 1, wi)
    wc = np.full(2 * n + 1, wi)
    wm[0] = lam / (n + lam)
    wc[0] = wm[0] + 1.0 - params.alpha**2 + params.beta
    return UnscentedWeights(n, c, lam, wm, wc)


@dataclass(frozen=True)
class SigmaSet:
    """Sigma points, one per row; ``noise`` holds total Wiener increments.

    In a time-update set the first ``2 n_x + 1`` rows have zero noise and the
    remaining ``2 n_w`` rows are copies of the mean with ``+/-`` increments.
    """

    points: np.ndarray
    noise: Optional[np.ndarray] = None


def ukf_sigma_points(mean, cov, c):
    """``mean`` followed by ``mean +/- sqrt(c)`` times each Cholesky column."""
    if c <= 0:
        raise ContractError("sigma-point spread must be positive")
    mean = np.asarray(mean, dtype=float)
    S = np.sqrt(c) * cholesky_lower(cov)
    pts = np.empty((2 * mean.size + 1, mean.size))
    pts[0] = mean
    pts[1 : mean.size + 1] = mean + S.T
    pts[mean.size + 1 :] = mean - S.T
    return SigmaSet(pts)


def weighted_mean(points, wm):
    # sum(wm) == 1, so expanding around point 0 avoids cancellation between
    # the large positive and negative weights of a small alpha
    return points[0] + wm[1:] @ (points[1:] - points[0])


def weighted_cov(a, a_mean, b, b_mean, wc):
    da = a - a_mean
    db = b - b_mean
    return (wc[:, None] * da).T @ db


def time_update_sigma_set(belief, n_w, weights, dt):
    n_x = belief.mean.size
    base = ukf_sigma_points(belief.mean, belief.cov, weights.c).points
    noise_pts = np.repeat(belief.mean[None, :], 2 * n_w, axis=0)
    pts = np.vstack([base, noise_pts])
    inc = np.zeros((pts.shape[0], n_w))
    step = np.sqrt(weights.c * dt) * np.eye(n_w)
    inc[2 * n_x + 1 : 2 * n_x + 1 + n_w] = step
    inc[2 * n_x + 1 + n_w :] = -step
    return SigmaSet(pts, inc)


def ukf_time_update(belief, model, u, d, t_next, n_steps, params):
    """Propagate ``2 (n_x + n_w) + 1`` sigma points to ``t_next``.

    State sigma points follow the drift. Noise sigma points start at the mean
    and receive a total Wiener increment of ``+/- sqrt(c dt) e_i`` over the
    interval, spread uniformly in time; with a deterministic increment their
    SDE is an ODE with constant forcing, integrated with the same RK4 scheme.
    """
    dt = t_next - belief.t
    if dt <= 0:
        raise ContractError("t_next must be after the belief time")
    weights = ukf_weights(params, model.n_x + model.n_w)
    sset = time_update_sigma_set(belief, model.n_w, weights, dt)
    rate = sset.noise / dt
    forced = np.flatnonzero(np.any(rate != 0.0, axis=1))

    def rhs(t, X):
        dX = np.array(model.f(t, X, u, d), dtype=float)
        G = model.sigma(t, X[forced], u, d)
        dX[forced] += apply_diffusion(G, rate[forced])
        return dX

    X = integrate_ode(rhs, sset.points, belief.t, t_next, n_steps)
    mean = weighted_mean(X, weights.wm)
    cov = weighted_cov(X, mean, X, mean, weights.wc)
    return GaussianBelief(mean, symmetrize(cov), t_next)


def ukf_measurement_update(belief, y, model, params):
    """Condition on ``y`` with fresh sigma points drawn from ``belief``."""
    y = np.asarray(y, dtype=float)
    if y.shape != (model.n_y,):
        raise DimensionError(f"measurement has shape {y.shape}, expected ({model.n_y},)")
    weights = ukf_weights(params, model.n_x)
    X = ukf_sigma_points(belief.mean, belief.cov, weights.c).points
    Z = np.asarray(model.h(belief.t, X), dtype=float)
    z_mean = weighted_mean(Z, weights.wm)
    Rzz = symmetrize(weighted_cov(Z, z_mean, Z, z_mean, weights.wc))
    Re = symmetrize(Rzz + model.R)
    Rxy = weighted_cov(X, belief.mean, Z, z_mean, weights.wc)
    K = kalman_gain(Rxy, Re)
    e = y - z_mean
    x_new = belief.mean + K @ e
    P_new = belief.cov - K @ Re @ K.T
    report = MeasurementUpdateReport(e, Re, K, z_mean)
    return GaussianBelief(x_new, symmetrize(P_new), belief.t), report
