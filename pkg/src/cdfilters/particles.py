"""Particle ensembles and their stochastic propagation (shared by EnKF and PF)."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .belief import GaussianBelief
from .errors import ContractError, DimensionError, IntegrationError
from .numerics import (
    PresampledNoise,
    RandomNoise,
    RngStream,
    ensemble_moments,
    integrate_sde_em,
    sample_mvn,
)


@dataclass(frozen=True)
class ParticleSet:
    """``N_p`` particles (rows) at time ``t``.

    ``noise`` is the process-noise stream; each time update draws one block
    of shape ``(N_p, n_steps, n_w)`` from it, and particle ``i`` always uses
    row ``i`` of that block. ``weights`` is ``None`` for an equally weighted
    set.
    """

    particles: np.ndarray
    t: float
    noise: RngStream
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        X = np.asarray(self.particles, dtype=float)
        if X.ndim != 2 or X.shape[0] < 2:
            raise DimensionError("a particle set needs an (N_p, n_x) array with N_p >= 2")
        if not np.all(np.isfinite(X)):
            raise ContractError("particles must be finite")
        object.__setattr__(self, "particles", X)
        object.__setattr__(self, "t", float(self.t))

    @property
    def size(self):
        return self.particles.shape[0]

    def moments(self):
        """``(mean, cov)`` of the set (weighted if weights are attached)."""
        if self.weights is None:
            return ensemble_moments(self.particles)
        w = self.weights
        mean = w @ self.particles
        D = self.particles - mean
        cov = (w[:, None] * D).T @ D / (1.0 - w @ w)
        return mean, 0.5 * (cov + cov.T)

    def belief(self):
        mean, cov = self.moments()
        return GaussianBelief(mean, cov, self.t)


def init_particles(initial, n_particles, rng, t=0.0, noise=None):
    """``n_particles`` draws from ``N(initial.mean, initial.cov)``."""
    if n_particles < 2:
        raise ContractError("need at least two particles")
    X = sample_mvn(initial.mean, initial.cov, rng, size=n_particles)
    return ParticleSet(X, t, noise if noise is not None else rng.child(0))


def _chunks(n, workers):
    bounds = np.linspace(0, n, max(1, min(workers, n)) + 1).astype(int)
    return [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def propagate_particles(pset, model, u, d, t_next, n_steps, workers=1):
    """Euler-Maruyama propagation of every particle to ``t_next``.

    The whole noise block is drawn before the particles are split across
    ``workers`` threads, so results are bit-identical for any worker count.
    """
    X = pset.particles
    h = (t_next - pset.t) / n_steps
    if not h > 0:
        raise ContractError("t_next must be after the particle-set time")
    n_w = model.n_w
    block = RandomNoise(pset.noise).increments((X.shape[0],), n_w, n_steps, h, t_next - pset.t)

    def drift(t, x):
        return model.f(t, x, u, d)

    def diffusion(t, x):
        return model.sigma(t, x, u, d)

    def run(bounds):
        a, b = bounds
        try:
            return integrate_sde_em(drift, diffusion, X[a:b], pset.t, t_next, n_steps, PresampledNoise(block[a:b]))
        except IntegrationError as exc:
            member = None if exc.member is None else a + exc.member
            raise IntegrationError(exc.step, member) from exc

    parts = _chunks(X.shape[0], workers)
    if len(parts) == 1:
        out = run(parts[0])
    else:
        with ThreadPoolExecutor(max_workers=len(parts)) as pool:
            out = np.concatenate(list(pool.map(run, parts)))
    return replace(pset, particles=out, t=t_next)
