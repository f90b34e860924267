"""Modified four-tank system with Ornstein-Uhlenbeck disturbance flows.

State ``x = (m1, m2, m3, m4, F3, F4)``: liquid masses [g] and disturbance
flows into tanks 3 and 4 [cm3/s]. Inputs ``u = (F1, F2)`` are the pump
flows; ``d = (Fbar3, Fbar4)`` are the nominal disturbance flows the OU
states revert to. Tank 3 drains into tank 1 and tank 4 into tank 2; pump 1
feeds tank 1 (fraction ``gamma1``) and tank 4, pump 2 feeds tank 2
(fraction ``gamma2``) and tank 3.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .model import ExogenousSignal, ModelDescriptor

N_X, N_U, N_D, N_W, N_Y = 6, 2, 2, 2, 4
_TINY = np.finfo(float).tiny


@dataclass(frozen=True)
class FourTankParams:
    A: tuple = (380.1327, 380.1327, 380.1327, 380.1327)  # tank cross sections [cm2]
    a: tuple = (1.2272, 1.2272, 1.2272, 1.2272)  # outlet areas [cm2]
    gamma1: float = 0.58
    gamma2: float = 0.68
    g: float = 981.0  # [cm/s2]
    rho: float = 1.0  # [g/cm3]
    lambda1: float = 0.1  # [1/s]
    lambda2: float = 0.1
    sigma1: float = 5.0
    sigma2: float = 5.0
    fbar3: tuple = ((0.0, 150.0),)  # (switch time [s], nominal flow [cm3/s])
    fbar4: tuple = ((0.0, 150.0),)
    meas_std: float = 1.0  # level sensor standard deviation [cm]

    def __post_init__(self):
        for name in ("A", "a"):
            vals = np.asarray(getattr(self, name), dtype=float)
            if vals.shape != (4,) or np.any(vals <= 0):
                raise ContractError(f"{name} must be four positive areas")
            object.__setattr__(self, name, tuple(vals.tolist()))
        if not (0 < self.gamma1 < 1 and 0 < self.gamma2 < 1):
            raise ContractError("valve fractions must lie in (0, 1)")
        if self.g <= 0 or self.rho <= 0:
            raise ContractError("g and rho must be positive")
        if min(self.lambda1, self.lambda2) < 0 or min(self.sigma1, self.sigma2) < 0:
            raise ContractError("lambda and sigma must be nonnegative")
        if self.meas_std <= 0:
            raise ContractError("meas_std must be positive")
        for name in ("fbar3", "fbar4"):
            prof = tuple((float(t), float(v)) for t, v in getattr(self, name))
            object.__setattr__(self, name, prof)

    def disturbance_signal(self):
        """Nominal flows ``(Fbar3, Fbar4)`` as one piecewise-constant signal."""
        f3 = ExogenousSignal(self.fbar3)
        f4 = ExogenousSignal(self.fbar4)
        times = sorted({t for t, _ in self.fbar3} | {t for t, _ in self.fbar4})
        return ExogenousSignal([(t, [f3(t)[0], f4(t)[0]]) for t in times])


@dataclass(frozen=True)
class _Consts:
    """Precomputed constants; the drift is ``x Mx + q Mq + b(u, d)``."""

    rhoA: np.ndarray
    a: np.ndarray
    two_g_over_rhoA: np.ndarray
    half_slope: np.ndarray
    rho: float
    g1: float
    g2: float
    lam: np.ndarray
    Mx: np.ndarray = field(repr=False)
    Mq: np.ndarray = field(repr=False)
    S: np.ndarray = field(repr=False)


def _consts(p):
    rho = p.rho
    rhoA = rho * np.asarray(p.A)
    # q_i = a_i sqrt(2 g h_i); tank 3 drains into 1, tank 4 into 2
    Mq = np.zeros((4, N_X))
    Mq[0, 0] = Mq[1, 1] = Mq[2, 2] = Mq[3, 3] = -rho
    Mq[2, 0] = Mq[3, 1] = rho
    Mx = np.zeros((N_X, N_X))
    Mx[4, 2] = Mx[5, 3] = rho
    Mx[4, 4] = -p.lambda1
    Mx[5, 5] = -p.lambda2
    S = np.zeros((N_X, N_W))
    S[4, 0] = p.sigma1
    S[5, 1] = p.sigma2
    return _Consts(
        rhoA=rhoA,
        a=np.asarray(p.a),
        two_g_over_rhoA=2.0 * p.g / rhoA,
        half_slope=0.5 * np.asarray(p.a) * np.sqrt(2.0 * p.g / rhoA),
        rho=rho,
        g1=p.gamma1,
        g2=p.gamma2,
        lam=np.array([p.lambda1, p.lambda2]),
        Mx=Mx,
        Mq=Mq,
        S=S,
    )


def _outflows(x, c):
    return c.a * np.sqrt(c.two_g_over_rhoA * np.maximum(x[..., :4], 0.0))


def _forcing(u, d, c):
    F1, F2 = float(u[0]), float(u[1])
    r = c.rho
    return np.array(
        [
            r * c.g1 * F1,
            r * c.g2 * F2,
            r * (1.0 - c.g2) * F2,
            r * (1.0 - c.g1) * F1,
            c.lam[0] * float(d[0]),
            c.lam[1] * float(d[1]),
        ]
    )


def four_tank_drift(t, x, u, d, p):
    """Mass balances for the tanks and OU reversion for the disturbances."""
    c = p if isinstance(p, _Consts) else _consts(p)
    x = np.asarray(x, dtype=float)
    return x @ c.Mx + _outflows(x, c) @ c.Mq + _forcing(u, d, c)


def four_tank_drift_jacobian(t, x, u, d, p):
    c = p if isinstance(p, _Consts) else _consts(p)
    x = np.asarray(x, dtype=float)
    m = x[:4]
    # dq_i/dm_i = a_i g / (rho A_i sqrt(2 g h_i)), taken as 0 where the clamp is active
    dq = c.half_slope / np.sqrt(np.maximum(m, _TINY)) * (m > 0)
    J = c.Mx.T.copy()
    J[:, :4] += c.Mq.T * dq
    return J


def four_tank_diffusion(t, x, u, d, p):
    """Additive noise on the disturbance states only."""
    c = p if isinstance(p, _Consts) else _consts(p)
    x = np.asarray(x)
    return np.broadcast_to(c.S, x.shape[:-1] + c.S.shape)


def four_tank_measurement(t, x, p):
    """Liquid levels ``m_i / (rho A_i)`` [cm] of all four tanks."""
    c = p if isinstance(p, _Consts) else _consts(p)
    return np.asarray(x, dtype=float)[..., :4] / c.rhoA


def four_tank_measurement_jacobian(t, x, p):
    c = p if isinstance(p, _Consts) else _consts(p)
    C = np.zeros((N_Y, N_X))
    C[np.arange(4), np.arange(4)] = 1.0 / c.rhoA
    return C


def four_tank_model(params=None):
    """:class:`ModelDescriptor` for the four-tank system with ``params``."""
    params = params or FourTankParams()
    c = _consts(params)
    return ModelDescriptor(
        n_x=N_X,
        n_w=N_W,
        n_y=N_Y,
        n_u=N_U,
        n_d=N_D,
        drift=four_tank_drift,
        diffusion=four_tank_diffusion,
        measurement=four_tank_measurement,
        R=params.meas_std**2 * np.eye(N_Y),
        theta=c,
        drift_jacobian=four_tank_drift_jacobian,
        measurement_jacobian=four_tank_measurement_jacobian,
        name="four-tank",
    )


def four_tank_steady_state(params, u, fbar):
    """State at which all derivatives vanish for pump flows ``u`` and flows ``fbar``."""
    p = params
    q3 = (1.0 - p.gamma2) * u[1] + fbar[0]
    q4 = (1.0 - p.gamma1) * u[0] + fbar[1]
    q1 = p.gamma1 * u[0] + q3
    q2 = p.gamma2 * u[1] + q4
    q = np.array([q1, q2, q3, q4])
    h = (q / np.asarray(p.a)) ** 2 / (2.0 * p.g)
    m = p.rho * np.asarray(p.A) * h
    return np.concatenate([m, np.asarray(fbar, dtype=float)])
