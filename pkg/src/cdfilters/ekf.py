"""Continuous-discrete extended Kalman filter."""

from __future__ import annotations

import numpy as np

from .belief import GaussianBelief, MeasurementUpdateReport, kalman_gain
from .errors import CovarianceError, DimensionError
from .numerics import integrate_ode, is_psd, symmetrize

PSD_FLOOR = 1e-10


def ekf_time_update(belief, model, u, d, t_next, n_steps):
    """Integrate the mean and covariance ODEs from ``belief.t`` to ``t_next``.

    The mean follows ``dx/dt = f`` and the covariance follows
    ``dP/dt = A P + P A' + sigma sigma'``, with ``A`` re-evaluated at the
    current mean in every Runge-Kutta stage. Both are integrated as one
    stacked system.
    """
    n = model.n_x

    def rhs(t, z):
        x = z[:n]
        P = z[n:].reshape(n, n)
        A = model.A(t, x, u, d)
        G = model.sigma(t, x, u, d)
        AP = A @ P
        dP = AP + AP.T + G @ G.T
        return np.concatenate([model.f(t, x, u, d), dP.ravel()])

    z0 = np.concatenate([belief.mean, belief.cov.ravel()])
    z1 = integrate_ode(rhs, z0, belief.t, t_next, n_steps)
    P = symmetrize(z1[n:].reshape(n, n))
    if not is_psd(P, PSD_FLOOR):
        raise CovarianceError(f"predicted covariance lost positive semi-definiteness at t={t_next}")
    return GaussianBelief(z1[:n], P, t_next)


def ekf_measurement_update(belief, y, model, joseph=True):
    """Condition ``belief`` on the measurement ``y``.

    The covariance uses Joseph's form unless ``joseph=False``, in which case
    the subtraction form ``P - K Re K'`` is used.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (model.n_y,):
        raise DimensionError(f"measurement has shape {y.shape}, expected ({model.n_y},)")
    x, P, t = belief.mean, belief.cov, belief.t
    y_pred = np.asarray(model.h(t, x), dtype=float)
    C = model.C(t, x)
    e = y - y_pred
    Re = symmetrize(C @ P @ C.T + model.R)
    K = kalman_gain(P @ C.T, Re)
    x_new = x + K @ e
    if joseph:
        IKC = np.eye(model.n_x) - K @ C
        P_new = IKC @ P @ IKC.T + K @ model.R @ K.T
    else:
        P_new = P - K @ Re @ K.T
    report = MeasurementUpdateReport(e, Re, K, y_pred)
    return GaussianBelief(x_new, symmetrize(P_new), t), report
