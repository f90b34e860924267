"""Truth simulation, filter runs, MAPE and the four-filter benchmark."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import ConfigError, DimensionError, EstimationError, UndefinedMapeError
from ..filters import (
    FILTER_KINDS,
    EnsembleKalmanFilter,
    ExtendedKalmanFilter,
    ParticleFilter,
    UnscentedKalmanFilter,
)
from ..fourtank import four_tank_model
from ..model import ExogenousSignal, InitialBelief
from ..numerics import RandomNoise, RngStream, integrate_sde_em, sample_mvn

# stream ids used by the truth simulation; filters use 10 * (index + 1) + {0, 1, 2}
SIM_INIT_STREAM, SIM_PROCESS_STREAM, SIM_MEASUREMENT_STREAM = 100, 101, 102

MASS_STATES = (0, 1, 2, 3)
DISTURBANCE_STATES = (4, 5)


@dataclass
class Trajectory:
    """Truth and measurements on the sample grid.

    Row ``k`` of ``x`` is the state at ``t[k]``; ``y[0]`` is NaN because the
    first measurement arrives at ``t[1]``.
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray


@dataclass
class RunRecord:
    kind: str
    t: np.ndarray
    mean: np.ndarray
    cov_diag: np.ndarray
    truth: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None
    tu_time: float = 0.0
    mu_time: float = 0.0
    covs: list = field(default_factory=list, repr=False)
    mape_x: float = float("nan")
    mape_d: float = float("nan")


def simulate(model, initial, times, n_sim, inputs=None, disturbances=None, seed=0, draw_initial=True):
    """Euler-Maruyama truth on the grid ``times`` plus noisy measurements.

    ``inputs`` and ``disturbances`` are :class:`ExogenousSignal` objects held
    over each sample interval. With ``draw_initial`` false the simulation
    starts at the initial mean.
    """
    times = np.asarray(times, dtype=float)
    u_sig = inputs or ExogenousSignal.constant(np.zeros(max(model.n_u, 1)))
    d_sig = disturbances or ExogenousSignal.constant(np.zeros(max(model.n_d, 1)))
    if draw_initial:
        x = sample_mvn(initial.mean, initial.cov, RngStream(seed, SIM_INIT_STREAM))
    else:
        x = np.array(initial.mean, dtype=float)
    noise = RandomNoise(RngStream(seed, SIM_PROCESS_STREAM))
    meas_rng = RngStream(seed, SIM_MEASUREMENT_STREAM)
    n = times.size
    X = np.empty((n, model.n_x))
    Y = np.full((n, model.n_y), np.nan)
    X[0] = x
    zero = np.zeros(model.n_y)
    for k in range(1, n):
        t0, t1 = times[k - 1], times[k]
        u, d = u_sig(t0), d_sig(t0)
        x = integrate_sde_em(
            lambda t, z: model.f(t, z, u, d),
            lambda t, z: model.sigma(t, z, u, d),
            x,
            t0,
            t1,
            n_sim,
            noise,
        )
        X[k] = x
        Y[k] = model.h(t1, x) + sample_mvn(zero, model.R, meas_rng)
    return Trajectory(times, X, Y)


def make_filter(kind, model, initial, t0=0.0, ukf=None, n_particles=0, seed=0, workers=1, **options):
    """Stateful filter of ``kind`` with its own random streams."""
    if kind == "ekf":
        return ExtendedKalmanFilter(model, initial, t0)
    if kind == "ukf":
        return UnscentedKalmanFilter(model, initial, ukf, t0)
    if kind not in ("enkf", "pf"):
        raise ConfigError(f"unknown filter {kind!r}")
    if n_particles < 2:
        raise ConfigError(f"{kind} needs at least two particles")
    base = 10 * (FILTER_KINDS.index(kind) + 1)
    cls = EnsembleKalmanFilter if kind == "enkf" else ParticleFilter
    return cls(model, initial, n_particles, seed, t0=t0, workers=workers, stream_base=base, **options)


def estimate(filt, times, measurements, n_est, inputs=None, disturbances=None, update=True, keep_covs=False):
    """Alternate time and measurement updates over the grid ``times``.

    ``measurements[k]`` is used at ``times[k]`` for ``k >= 1``. Returns a
    :class:`RunRecord` with the filtered mean and covariance diagonal at each
    sample instant and the accumulated wall-clock time of each phase.
    """
    times = np.asarray(times, dtype=float)
    Y = np.asarray(measurements, dtype=float)
    if Y.shape[0] != times.size:
        raise DimensionError("one measurement row per sample instant is required")
    model = filt.model
    u_sig = inputs or ExogenousSignal.constant(np.zeros(max(model.n_u, 1)))
    d_sig = disturbances or ExogenousSignal.constant(np.zeros(max(model.n_d, 1)))
    n = times.size
    mean = np.empty((n, model.n_x))
    diag = np.empty((n, model.n_x))
    covs = []
    b = filt.belief
    mean[0], diag[0] = b.mean, np.diag(b.cov)
    if keep_covs:
        covs.append(b.cov)
    tu = mu = 0.0
    clock = time.perf_counter
    for k in range(1, n):
        t0 = times[k - 1]
        u, d = u_sig(t0), d_sig(t0)
        try:
            start = clock()
            filt.predict(u, d, times[k], n_est)
            tu += clock() - start
            if update:
                start = clock()
                filt.update(Y[k])
                mu += clock() - start
        except EstimationError as exc:
            exc.sample = k  # where the run stopped
            raise
        b = filt.belief
        mean[k], diag[k] = b.mean, np.diag(b.cov)
        if keep_covs:
            covs.append(b.cov)
    return RunRecord(filt.kind, times, mean, diag, y=Y, tu_time=tu, mu_time=mu, covs=covs)


def compute_mape(truth, estimates, indices=None):
    """Mean absolute percentage error over the state columns ``indices``."""
    X = np.atleast_2d(np.asarray(truth, dtype=float))
    Xh = np.atleast_2d(np.asarray(estimates, dtype=float))
    if X.shape != Xh.shape:
        raise DimensionError(f"truth {X.shape} and estimates {Xh.shape} differ in shape")
    if indices is not None:
        cols = list(indices)
        X, Xh = X[:, cols], Xh[:, cols]
    if X.size == 0:
        raise DimensionError("MAPE over an empty selection")
    zero = np.argwhere(X == 0.0)
    if zero.size:
        k, i = zero[0]
        raise UndefinedMapeError(f"truth is exactly zero at sample {k}, state {i}")
    return float(np.mean(np.abs(X - Xh) / np.abs(X)) * 100.0)


# ---------------------------------------------------------------- config level


def run_simulation(config, model=None, seed=None):
    """Truth trajectory and measurements for the four-tank ``config``."""
    model = model or four_tank_model(config.simulation)
    initial = InitialBelief(config.initial_mean(), config.initial_cov())
    return simulate(
        model,
        initial,
        config.sample_times(),
        config.n_sim,
        inputs=config.input_signal(),
        disturbances=config.simulation.disturbance_signal(),
        seed=config.seed if seed is None else seed,
    )


def run_estimation(config, measurements, kind, model=None, seed=None, truth=None, update=True, keep_covs=False):
    """Run filter ``kind`` with its estimator-side model on ``measurements``.

    With ``truth`` given (an array on the sample grid) MAPE_x and MAPE_d are
    filled in over samples ``1..N``.
    """
    fc = config.filter(kind)
    params = config.estimator_params(kind)
    model = model or four_tank_model(params)
    initial = InitialBelief(config.initial_mean(), config.initial_cov())
    options = {}
    if kind == "enkf":
        options["cross_covariance"] = fc.cross_covariance
    if kind == "pf":
        options["ess_threshold"] = fc.ess_threshold
    filt = make_filter(
        kind,
        model,
        initial,
        t0=config.t0,
        ukf=fc.ukf,
        n_particles=fc.n_particles,
        seed=config.seed if seed is None else seed,
        workers=fc.workers,
        **options,
    )
    rec = estimate(
        filt,
        config.sample_times(),
        measurements,
        config.n_est,
        inputs=config.input_signal(),
        disturbances=params.disturbance_signal(),
        update=update,
        keep_covs=keep_covs,
    )
    if truth is not None:
        rec.truth = np.asarray(truth, dtype=float)
        rec.mape_x = compute_mape(rec.truth[1:], rec.mean[1:], MASS_STATES)
        rec.mape_d = compute_mape(rec.truth[1:], rec.mean[1:], DISTURBANCE_STATES)
    return rec


TABLE_ROWS = (
    ("time TU [s]", "tu_time"),
    ("time MU [s]", "mu_time"),
    ("MAPE_x [%]", "mape_x"),
    ("MAPE_d [%]", "mape_d"),
)


@dataclass
class BenchmarkResult:
    kinds: tuple
    seeds: list
    records: dict  # kind -> list of RunRecord, one per repetition

    def values(self, kind, attr):
        return np.array([getattr(r, attr) for r in self.records[kind]])

    def summary(self, kind, attr):
        v = self.values(kind, attr)
        std = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
        return float(np.mean(v)), std, float(np.median(v))

    def table(self):
        """Rows ``(label, {kind: (mean, std, median)})`` in report order."""
        return [(label, {k: self.summary(k, attr) for k in self.kinds}) for label, attr in TABLE_ROWS]

    def write_csv(self, path):
        header = ["metric"]
        for k in self.kinds:
            header += [k, f"{k}_std", f"{k}_median"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for label, cells in self.table():
                row = [label]
                for k in self.kinds:
                    row += [f"{v:.6g}" for v in cells[k]]
                w.writerow(row)


def run_benchmark(config, reps=None, seed=None, kinds=FILTER_KINDS, progress=None):
    """All ``kinds`` on shared truth and measurements, ``reps`` seeds in a row.

    Repetition ``r`` uses seed ``seed + r`` for both the simulation and the
    filters' random streams.
    """
    reps = config.reps if reps is None else int(reps)
    if reps < 1:
        raise ConfigError("reps must be at least 1")
    seed = config.seed if seed is None else int(seed)
    records = {k: [] for k in kinds}
    seeds = [seed + r for r in range(reps)]
    for s in seeds:
        traj = run_simulation(config, seed=s)
        for kind in kinds:
            rec = run_estimation(config, traj.y, kind, seed=s, truth=traj.x)
            records[kind].append(rec)
            if progress:
                progress(s, rec)
    return BenchmarkResult(tuple(kinds), seeds, records)


# ---------------------------------------------------------------- CSV files


def write_trajectory_csv(path, traj):
    n_x, n_y = traj.x.shape[1], traj.y.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{i + 1}" for i in range(n_x)] + [f"y{i + 1}" for i in range(n_y)])
        for t, x, y in zip(traj.t, traj.x, traj.y):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in x] + [repr(float(v)) for v in y])


def read_trajectory_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    xs = [i for i, name in enumerate(header) if name.startswith("x")]
    ys = [i for i, name in enumerate(header) if name.startswith("y")]
    if header[0] != "t" or not xs or not ys:
        raise ConfigError(f"{path} is not a trajectory file")
    return Trajectory(body[:, 0], body[:, xs], body[:, ys])


def write_record_csv(path, rec):
    n_x = rec.mean.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"xhat{i + 1}" for i in range(n_x)] + [f"Pdiag{i + 1}" for i in range(n_x)])
        for t, m, p in zip(rec.t, rec.mean, rec.cov_diag):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in m] + [repr(float(v)) for v in p])


def output_path(out, name):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out / name
