"""Linear-algebra, integration and random-sampling primitives.

Every state argument may be a single vector of shape ``(n,)`` or a batch of
vectors of shape ``(..., n)``; batched evaluation is elementwise along the
leading axes, so a member's result does not depend on which batch it was
integrated in.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack

from .errors import ContractError, DimensionError, FactorizationError, IntegrationError

log = logging.getLogger(__name__)

SYMMETRY_RTOL = 1e-9
JITTER_REL = 1e-12
JITTER_ESCALATIONS = 3


def symmetrize(P):
    """Return ``(P + P.T) / 2``."""
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {P.shape}")
    return 0.5 * (P + P.T)


def _potrf(P):
    L, info = lapack.dpotrf(P, lower=1, clean=1)
    return L, int(info)


def cholesky_lower(P, jitter=0.0):
    """Lower Cholesky factor of ``P + jitter * I``.

    If the factorization fails, the jitter is raised to
    ``1e-12 * trace(P) / n`` and escalated tenfold up to three times before a
    :class:`FactorizationError` is raised. An all-zero matrix factors to the
    zero matrix exactly.
    """
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {P.shape}")
    if jitter < 0:
        raise ContractError("jitter must be nonnegative")
    n = P.shape[0]
    scale = np.linalg.norm(P)
    if np.linalg.norm(P - P.T) > SYMMETRY_RTOL * max(scale, 1.0):
        raise ContractError("matrix is not symmetric")
    if not np.all(np.isfinite(P)):
        raise ContractError("matrix has non-finite entries")
    P = symmetrize(P)
    if jitter == 0.0 and not P.any():
        return np.zeros_like(P)

    eye = np.eye(n)
    L, info = _potrf(P + jitter * eye)
    if info == 0:
        return L

    first_pivot = info
    trace = np.trace(P)
    if trace > 0:
        extra = JITTER_REL * trace / n
        for _ in range(JITTER_ESCALATIONS + 1):
            L, info = _potrf(P + (jitter + extra) * eye)
            if info == 0:
                log.debug("cholesky succeeded with added jitter %.3e", extra)
                return L
            extra *= 10.0
    raise FactorizationError(first_pivot)


@dataclass
class RngStream:
    """Seeded normal/uniform stream identified by ``(seed, stream_id)``.

    Identical ``(seed, stream_id)`` pairs produce identical draw sequences.
    A stream is single-owner mutable state.
    """

    seed: int
    stream_id: int = 0
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id),))
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def standard_normal(self, size=None):
        return self._gen.standard_normal(size)

    def uniform(self, size=None):
        return self._gen.random(size)

    def child(self, k):
        """Independent stream derived from this one's identity, not its state."""
        return RngStream(self.seed, self.stream_id * 1_000_003 + 7919 * (k + 1))


class NoiseSource:
    """Wiener increments consumed by :func:`integrate_sde_em`."""

    def increments(self, batch_shape, n_noise, n_steps, h, span):
        """Array of shape ``batch_shape + (n_steps, n_noise)``."""
        raise NotImplementedError


@dataclass
class RandomNoise(NoiseSource):
    """Increments ``N(0, h I)`` drawn from ``stream`` in member-major order."""

    stream: RngStream

    def increments(self, batch_shape, n_noise, n_steps, h, span):
        z = self.stream.standard_normal(tuple(batch_shape) + (n_steps, n_noise))
        return np.sqrt(h) * z


@dataclass
class DeterministicNoise(NoiseSource):
    """Delivers ``total`` over the interval, ``total * h / span`` per step."""

    total: np.ndarray

    def increments(self, batch_shape, n_noise, n_steps, h, span):
        total = np.asarray(self.total, dtype=float)
        if total.shape[-1] != n_noise:
            raise DimensionError("total increment has wrong noise dimension")
        per_step = np.broadcast_to(total, tuple(batch_shape) + (n_noise,)) * (h / span)
        return np.broadcast_to(per_step[..., None, :], tuple(batch_shape) + (n_steps, n_noise))


@dataclass
class PresampledNoise(NoiseSource):
    """Explicit per-step increments, shape ``batch_shape + (n_steps, n_noise)``."""

    values: np.ndarray

    def increments(self, batch_shape, n_noise, n_steps, h, span):
        values = np.asarray(self.values, dtype=float)
        expected = tuple(batch_shape) + (n_steps, n_noise)
        if values.shape != expected:
            raise DimensionError(f"presampled increments have shape {values.shape}, expected {expected}")
        return values


def apply_diffusion(G, dw):
    """``G @ dw`` per member, summed over noise channels in a fixed order."""
    out = G[..., :, 0] * dw[..., None, 0]
    for j in range(1, G.shape[-1]):
        out = out + G[..., :, j] * dw[..., None, j]
    return out


def _check_span(t0, t1, n_steps):
    if int(n_steps) != n_steps or n_steps < 1:
        raise ContractError("n_steps must be a positive integer")
    if not t1 > t0:
        raise ContractError("integration interval must satisfy t1 > t0")
    return (t1 - t0) / n_steps


def _raise_nonfinite(x, step):
    bad = ~np.isfinite(x)
    member = None
    if x.ndim > 1:
        rows = np.argwhere(bad.reshape(-1, x.shape[-1]).any(axis=1))
        member = int(rows[0, 0])
    raise IntegrationError(step, member)


def integrate_ode(rhs, x0, t0, t1, n_steps):
    """Classical fixed-step RK4 for ``dx/dt = rhs(t, x)``, returns ``x(t1)``."""
    h = _check_span(t0, t1, n_steps)
    x = np.array(x0, dtype=float)
    t = float(t0)
    for j in range(int(n_steps)):
        k1 = rhs(t, x)
        k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2)
        k4 = rhs(t + h, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            _raise_nonfinite(x, j)
        t = t0 + (j + 1) * h
    return x


def integrate_sde_em(drift, diffusion, x0, t0, t1, n_steps, noise):
    """Euler-Maruyama for ``dx = drift(t, x) dt + diffusion(t, x) dw``.

    ``diffusion`` returns an array of shape ``(..., n_x, n_w)``.
    """
    h = _check_span(t0, t1, n_steps)
    x = np.array(x0, dtype=float)
    t = float(t0)
    G = diffusion(t, x)
    n_noise = G.shape[-1]
    dw = noise.increments(x.shape[:-1], n_noise, int(n_steps), h, t1 - t0)
    for j in range(int(n_steps)):
        if j:
            G = diffusion(t, x)
        x = x + h * drift(t, x) + apply_diffusion(G, dw[..., j, :])
        if not np.all(np.isfinite(x)):
            _raise_nonfinite(x, j)
        t = t0 + (j + 1) * h
    return x


def sample_mvn(mean, cov, rng, size=None):
    """Draw ``mean + L z`` with ``L = cholesky_lower(cov)``.

    With ``size=None`` a single vector is returned, otherwise an array of
    shape ``(size, n)``.
    """
    mean = np.asarray(mean, dtype=float)
    L = cholesky_lower(cov)
    shape = mean.shape if size is None else (int(size),) + mean.shape
    z = rng.standard_normal(shape)
    return mean + z @ L.T


def ensemble_moments(particles):
    """Sample mean and ``N - 1`` divisor covariance of an ``(N, n)`` array."""
    X = np.asarray(particles, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DimensionError("ensemble moments need at least two particles")
    mean = X.mean(axis=0)
    D = X - mean
    cov = symmetrize(D.T @ D / (X.shape[0] - 1))
    return mean, cov


def is_psd(P, floor=1e-10):
    """True when the smallest eigenvalue is at least ``-floor * trace``."""
    P = symmetrize(P)
    if not np.all(np.isfinite(P)):
        return False
    lo = np.linalg.eigvalsh(P)[0]
    return lo >= -floor * max(abs(np.trace(P)), np.finfo(float).tiny)
