"""Continuous-discrete bootstrap particle filter with systematic resampling."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .errors import ContractError, DegenerateWeightsError, DimensionError
from .particles import init_particles, propagate_particles

WEIGHT_SUM_TOL = 1e-9


def pf_init(initial, n_particles, rng, t=0.0, noise=None):
    return init_particles(initial, n_particles, rng, t=t, noise=noise)


def pf_time_update(pset, model, u, d, t_next, n_steps, workers=1):
    return propagate_particles(pset, model, u, d, t_next, n_steps, workers=workers)


def gaussian_log_likelihood(E, R):
    """Log density of ``N(0, R)`` at each row of ``E``."""
    E = np.atleast_2d(np.asarray(E, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    L = np.linalg.cholesky(R)
    W = np.linalg.solve(L, E.T)
    maha = np.sum(W * W, axis=0)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return -0.5 * (R.shape[0] * np.log(2.0 * np.pi) + logdet + maha)


def normalize_log_weights(logw):
    """Normalized weights from log weights via max subtraction."""
    logw = np.asarray(logw, dtype=float)
    if np.any(np.isnan(logw)):
        raise DegenerateWeightsError("NaN log-likelihood")
    top = np.max(logw)
    if not np.isfinite(top):
        raise DegenerateWeightsError("all particle likelihoods are zero")
    w = np.exp(logw - top)
    return w / w.sum()


def pf_likelihood_weights(pset, y, model):
    """Normalized Gaussian likelihood weights of the particles given ``y``.

    Prior weights attached to the set (when resampling was skipped) are
    multiplied in.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (model.n_y,):
        raise DimensionError(f"measurement has shape {y.shape}, expected ({model.n_y},)")
    Z = np.asarray(model.h(pset.t, pset.particles), dtype=float)
    logw = gaussian_log_likelihood(y - Z, model.R)
    if pset.weights is not None:
        with np.errstate(divide="ignore"):
            logw = logw + np.log(pset.weights)
    return normalize_log_weights(logw)


def systematic_resample_indices(weights, q1):
    """Indices ``l`` with ``q_i`` in ``(s_{l-1}, s_l]`` for ``q_i = (i + q1) / N``."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size < 1:
        raise DimensionError("weights must be a non-empty vector")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ContractError("weights must be finite and nonnegative")
    total = w.sum()
    if abs(total - 1.0) > WEIGHT_SUM_TOL:
        raise ContractError(f"weights sum to {total!r}, not 1")
    N = w.size
    s = np.cumsum(w)
    s[-1] = max(s[-1], 1.0)
    q = (np.arange(N) + q1) / N
    idx = np.searchsorted(s, q, side="left")
    return np.minimum(idx, N - 1)


def systematic_resample(pset, weights, rng, q1=None):
    """Equally weighted set holding ``m_i`` copies of particle ``i``.

    A single uniform ``q1`` in ``(0, 1]`` is drawn from ``rng`` unless given.
    """
    if q1 is None:
        q1 = 1.0 - float(rng.uniform())
    if weights.shape != (pset.size,):
        raise DimensionError("one weight per particle is required")
    idx = systematic_resample_indices(weights, q1)
    return replace(pset, particles=pset.particles[idx], weights=None)


def effective_sample_size(weights):
    return 1.0 / np.sum(np.square(weights))


def pf_measurement_update(pset, y, model, rng, ess_threshold=None):
    """Weight by the measurement likelihood, then resample systematically.

    With ``ess_threshold`` set, resampling is skipped while the effective
    sample size stays at or above ``ess_threshold * N_p`` and the weights are
    carried on the set instead. The default resamples at every measurement.
    """
    w = pf_likelihood_weights(pset, y, model)
    if ess_threshold is not None and effective_sample_size(w) >= ess_threshold * pset.size:
        return replace(pset, weights=w)
    return systematic_resample(pset, w, rng)
