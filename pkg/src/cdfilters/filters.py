"""Stateful wrappers giving the four filters one predict/update interface.

The wrappers hold the current belief (or particle set) and the filter's
random streams; the numerical work is done by the functional updates in
:mod:`cdfilters.ekf`, :mod:`cdfilters.ukf`, :mod:`cdfilters.enkf` and
:mod:`cdfilters.pf`.
"""

from __future__ import annotations

from .belief import GaussianBelief
from .ekf import ekf_measurement_update, ekf_time_update
from .enkf import enkf_init, enkf_measurement_update, enkf_time_update
from .numerics import RngStream
from .pf import pf_init, pf_measurement_update, pf_time_update
from .ukf import UkfParams, ukf_measurement_update, ukf_time_update

FILTER_KINDS = ("ekf", "ukf", "enkf", "pf")

# stream ids (offset by stream_base) for a filter's random draws
INIT_STREAM, PROCESS_STREAM, MEASUREMENT_STREAM = 0, 1, 2


class ExtendedKalmanFilter:
    kind = "ekf"

    def __init__(self, model, initial, t0=0.0):
        self.model = model
        self.state = GaussianBelief.from_initial(initial, t0)

    def predict(self, u, d, t_next, n_steps):
        self.state = ekf_time_update(self.state, self.model, u, d, t_next, n_steps)

    def update(self, y):
        self.state, self.report = ekf_measurement_update(self.state, y, self.model)

    @property
    def belief(self):
        return self.state


class UnscentedKalmanFilter(ExtendedKalmanFilter):
    kind = "ukf"

    def __init__(self, model, initial, params=None, t0=0.0):
        super().__init__(model, initial, t0)
        self.params = params or UkfParams()

    def predict(self, u, d, t_next, n_steps):
        self.state = ukf_time_update(self.state, self.model, u, d, t_next, n_steps, self.params)

    def update(self, y):
        self.state, self.report = ukf_measurement_update(self.state, y, self.model, self.params)


class EnsembleKalmanFilter:
    kind = "enkf"

    def __init__(
        self, model, initial, n_particles, seed, t0=0.0, workers=1, cross_covariance="predicted", stream_base=0
    ):
        self.model = model
        self.workers = workers
        self.cross_covariance = cross_covariance
        self.measurement_rng = RngStream(seed, stream_base + MEASUREMENT_STREAM)
        self.state = enkf_init(
            initial,
            n_particles,
            RngStream(seed, stream_base + INIT_STREAM),
            t=t0,
            noise=RngStream(seed, stream_base + PROCESS_STREAM),
        )

    def predict(self, u, d, t_next, n_steps):
        self.state = enkf_time_update(self.state, self.model, u, d, t_next, n_steps, self.workers)

    def update(self, y):
        self.state = enkf_measurement_update(
            self.state, y, self.model, self.measurement_rng, cross_covariance=self.cross_covariance
        )

    @property
    def belief(self):
        return self.state.belief()


class ParticleFilter(EnsembleKalmanFilter):
    kind = "pf"

    def __init__(self, model, initial, n_particles, seed, t0=0.0, workers=1, ess_threshold=None, stream_base=0):
        self.model = model
        self.workers = workers
        self.ess_threshold = ess_threshold
        self.measurement_rng = RngStream(seed, stream_base + MEASUREMENT_STREAM)
        self.state = pf_init(
            initial,
            n_particles,
            RngStream(seed, stream_base + INIT_STREAM),
            t=t0,
            noise=RngStream(seed, stream_base + PROCESS_STREAM),
        )

    def predict(self, u, d, t_next, n_steps):
        self.state = pf_time_update(self.state, self.model, u, d, t_next, n_steps, self.workers)

    def update(self, y):
        self.state = pf_measurement_update(
            self.state, y, self.model, self.measurement_rng, ess_threshold=self.ess_threshold
        )
