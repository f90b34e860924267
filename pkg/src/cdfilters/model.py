"""Continuous-discrete stochastic model description.

A model is ``dx = f(t, x, u, d, theta) dt + sigma(t, x, u, d, theta) dw`` with
discrete measurements ``y_k = h(t_k, x_k, theta) + v_k``, ``v_k ~ N(0, R)``.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Optional

import numpy as np

from .errors import ContractError, DimensionError, EvaluationError


def jacobian_fd(func, x, rel_step=1e-6):
    """Central-difference Jacobian of ``func`` at ``x``.

    Column ``j`` uses the step ``rel_step * max(|x_j|, 1)``.
    """
    if rel_step <= 0:
        raise ContractError("rel_step must be positive")
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(func(x), dtype=float)
    if not np.all(np.isfinite(f0)):
        raise EvaluationError("function is not finite at the expansion point")
    J = np.empty((f0.size, x.size))
    for j in range(x.size):
        delta = rel_step * max(abs(x[j]), 1.0)
        xp = x.copy()
        xm = x.copy()
        xp[j] += delta
        xm[j] -= delta
        fp = np.asarray(func(xp), dtype=float)
        fm = np.asarray(func(xm), dtype=float)
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise EvaluationError(f"function is not finite when perturbing component {j}")
        J[:, j] = (fp - fm) / (2.0 * delta)
    return J


@dataclass(frozen=True)
class InitialBelief:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (mean.size, mean.size):
            raise DimensionError("initial covariance does not match the mean")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


class ExogenousSignal:
    """Piecewise-constant (zero-order hold) signal.

    ``ExogenousSignal([(0, [1.0]), (60, [2.0])])`` is ``[1.0]`` on ``[0, 60)``
    and ``[2.0]`` from 60 onwards. Before the first switch time the first
    value is held.
    """

    def __init__(self, points):
        points = [(float(t), np.atleast_1d(np.asarray(v, dtype=float))) for t, v in points]
        if not points:
            raise ContractError("a signal needs at least one value")
        times = [t for t, _ in points]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ContractError("switch times must be strictly increasing")
        if len({v.shape for _, v in points}) != 1:
            raise DimensionError("signal values must share one shape")
        self.times = times
        self.values = [v for _, v in points]

    @classmethod
    def constant(cls, value):
        return cls([(0.0, value)])

    def __call__(self, t):
        i = bisect.bisect_right(self.times, t) - 1
        return self.values[max(i, 0)]

    def __repr__(self):
        pts = ", ".join(f"{t:g}: {v.tolist()}" for t, v in zip(self.times, self.values))
        return f"ExogenousSignal({pts})"


def _vectorize(func, n_in):
    """Lift a single-vector function to batches by looping over members."""

    def lifted(t, x, *args):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return np.asarray(func(t, x, *args), dtype=float)
        flat = x.reshape(-1, n_in)
        out = np.stack([np.asarray(func(t, row, *args), dtype=float) for row in flat])
        return out.reshape(x.shape[:-1] + out.shape[1:])

    return lifted


@dataclass(frozen=True)
class ModelDescriptor:
    """Drift, diffusion and measurement functions plus noise data.

    Callables take ``(t, x, u, d, theta)`` (drift, diffusion and the drift
    Jacobian) or ``(t, x, theta)`` (measurement and its Jacobian). When
    ``vectorized`` is true they must accept ``x`` with extra leading batch
    axes; otherwise they are wrapped in a per-member loop.
    """

    n_x: int
    n_w: int
    n_y: int
    drift: Callable
    diffusion: Callable
    measurement: Callable
    R: np.ndarray
    theta: Any = None
    n_u: int = 0
    n_d: int = 0
    drift_jacobian: Optional[Callable] = None
    measurement_jacobian: Optional[Callable] = None
    vectorized: bool = True
    fd_step: float = 1e-6
    name: str = field(default="model", compare=False)

    def __post_init__(self):
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        if R.shape != (self.n_y, self.n_y):
            raise DimensionError(f"R must be {self.n_y}x{self.n_y}")
        if not np.allclose(R, R.T):
            raise ContractError("R must be symmetric")
        object.__setattr__(self, "R", R)
        if not self.vectorized:
            object.__setattr__(self, "drift", _vectorize(self.drift, self.n_x))
            object.__setattr__(self, "diffusion", _vectorize(self.diffusion, self.n_x))
            object.__setattr__(self, "measurement", _vectorize(self.measurement, self.n_x))
            object.__setattr__(self, "vectorized", True)

    def f(self, t, x, u=None, d=None):
        return self.drift(t, x, u, d, self.theta)

    def sigma(self, t, x, u=None, d=None):
        return self.diffusion(t, x, u, d, self.theta)

    def h(self, t, x):
        return self.measurement(t, x, self.theta)

    def A(self, t, x, u=None, d=None):
        """State Jacobian of the drift, analytic if available."""
        if self.drift_jacobian is not None:
            return np.asarray(self.drift_jacobian(t, x, u, d, self.theta), dtype=float)
        return jacobian_fd(lambda z: self.f(t, z, u, d), x, self.fd_step)

    def C(self, t, x):
        """State Jacobian of the measurement function, analytic if available."""
        if self.measurement_jacobian is not None:
            return np.asarray(self.measurement_jacobian(t, x, self.theta), dtype=float)
        return jacobian_fd(lambda z: self.h(t, z), x, self.fd_step)

    def with_changes(self, **changes):
        return replace(self, **changes)


def check_jacobians(model, states, u=None, d=None, t=0.0, atol=1e-6, rtol=1e-5):
    """Compare analytic Jacobians with central differences at ``states``.

    Returns the largest violation ratio ``|diff| / (atol + rtol * |fd|)``;
    values at most 1 mean agreement.
    """
    worst = 0.0
    for x in np.atleast_2d(states):
        pairs = []
        if model.drift_jacobian is not None:
            fd = jacobian_fd(lambda z: model.f(t, z, u, d), x, model.fd_step)
            pairs.append((model.A(t, x, u, d), fd))
        if model.measurement_jacobian is not None:
            fd = jacobian_fd(lambda z: model.h(t, z), x, model.fd_step)
            pairs.append((model.C(t, x), fd))
        for analytic, fd in pairs:
            ratio = np.abs(analytic - fd) / (atol + rtol * np.abs(fd))
            worst = max(worst, float(ratio.max()))
    return worst
