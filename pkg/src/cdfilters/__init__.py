"""Continuous-discrete state estimation: EKF, UKF, EnKF and particle filter."""

from .belief import GaussianBelief, MeasurementUpdateReport
from .ekf import ekf_measurement_update, ekf_time_update
from .enkf import enkf_init, enkf_measurement_update, enkf_time_update
from .errors import *  # noqa: F401,F403
from .filters import (
    FILTER_KINDS,
    EnsembleKalmanFilter,
    ExtendedKalmanFilter,
    ParticleFilter,
    UnscentedKalmanFilter,
)
from .fourtank import FourTankParams, four_tank_model, four_tank_steady_state
from .model import ExogenousSignal, InitialBelief, ModelDescriptor, jacobian_fd
from .numerics import (
    DeterministicNoise,
    PresampledNoise,
    RandomNoise,
    RngStream,
    cholesky_lower,
    integrate_ode,
    integrate_sde_em,
)
from .particles import ParticleSet
from .pf import pf_init, pf_measurement_update, pf_time_update, systematic_resample
from .ukf import UkfParams, ukf_measurement_update, ukf_time_update, ukf_weights

__version__ = "0.1.0"
