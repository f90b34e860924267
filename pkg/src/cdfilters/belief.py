from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, SingularInnovationError


@dataclass(frozen=True)
class GaussianBelief:
    """Mean and covariance of the state at time ``t``."""

    mean: np.ndarray
    cov: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise DimensionError(f"belief mean {mean.shape} and cov {cov.shape} disagree")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "t", float(self.t))

    @classmethod
    def from_initial(cls, initial, t=0.0):
        return cls(initial.mean.copy(), initial.cov.copy(), t)


@dataclass(frozen=True)
class MeasurementUpdateReport:
    innovation: np.ndarray
    innovation_cov: np.ndarray
    gain: np.ndarray
    predicted_measurement: np.ndarray


def kalman_gain(cross_cov, innovation_cov):
    """``cross_cov @ inv(innovation_cov)`` without forming the inverse."""
    S = np.asarray(innovation_cov, dtype=float)
    if not np.all(np.isfinite(S)):
        raise SingularInnovationError("innovation covariance is not finite")
    try:
        cond = np.linalg.cond(S)
        if not np.isfinite(cond) or cond > 1e15:
            raise SingularInnovationError(f"innovation covariance is singular (cond={cond:.3e})")
        return np.linalg.solve(S.T, np.asarray(cross_cov, dtype=float).T).T
    except np.linalg.LinAlgError as exc:
        raise SingularInnovationError(str(exc)) from exc
