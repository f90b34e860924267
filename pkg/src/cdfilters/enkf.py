"""Continuous-discrete ensemble Kalman filter (perturbed measurements)."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .belief import kalman_gain
from .errors import ContractError, DimensionError
from .numerics import sample_mvn, symmetrize
from .particles import ParticleSet, init_particles, propagate_particles

CROSS_COVARIANCE_MODES = ("predicted", "perturbed")


def enkf_init(initial, n_particles, rng, t=0.0, noise=None):
    """Ensemble sampled from the initial distribution."""
    return init_particles(initial, n_particles, rng, t=t, noise=noise)


def enkf_time_update(pset, model, u, d, t_next, n_steps, workers=1):
    """Propagate each ensemble member with its own Wiener path."""
    return propagate_particles(pset, model, u, d, t_next, n_steps, workers=workers)


def enkf_measurement_update(pset, y, model, rng, perturbations=None, cross_covariance="predicted"):
    """Kalman-correct every member against a perturbed copy of ``y``.

    ``perturbations`` pins the measurement-noise draws (shape ``(N_p, n_y)``);
    otherwise they are sampled from ``N(0, R)`` with ``rng``.
    ``cross_covariance`` selects the measurement deviations paired with the
    state deviations: the members' predicted measurements (``"predicted"``,
    the default) or the perturbed measurements (``"perturbed"``).
    """
    if cross_covariance not in CROSS_COVARIANCE_MODES:
        raise ContractError(f"cross_covariance must be one of {CROSS_COVARIANCE_MODES}")
    y = np.asarray(y, dtype=float)
    if y.shape != (model.n_y,):
        raise DimensionError(f"measurement has shape {y.shape}, expected ({model.n_y},)")
    X = pset.particles
    N = X.shape[0]
    Z = np.asarray(model.h(pset.t, X), dtype=float)
    if perturbations is None:
        V = sample_mvn(np.zeros(model.n_y), model.R, rng, size=N)
    else:
        V = np.asarray(perturbations, dtype=float)
        if V.shape != (N, model.n_y):
            raise DimensionError("perturbations must have shape (N_p, n_y)")
    Y = y + V

    x_mean = X.mean(axis=0)
    z_mean = Z.mean(axis=0)
    DX = X - x_mean
    DZ = Z - z_mean
    Rzz = symmetrize(DZ.T @ DZ / (N - 1))
    Ryy = symmetrize(Rzz + model.R)
    if cross_covariance == "predicted":
        Rxy = DX.T @ DZ / (N - 1)
    else:
        DY = Y - Y.mean(axis=0)
        Rxy = DX.T @ DY / (N - 1)
    K = kalman_gain(Rxy, Ryy)
    E = Y - Z
    return replace(pset, particles=X + E @ K.T, weights=None)
