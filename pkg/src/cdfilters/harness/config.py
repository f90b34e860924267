"""Experiment configuration and its INI-style file format.

Sections: ``[experiment]``, ``[simulation-model]``, ``[estimator-model]`` and
one per filter (``[ekf]``, ``[ukf]``, ``[enkf]``, ``[pf]``). Filter sections
hold the filter's tuning plus any model keys that override
``[estimator-model]`` for that filter only. Unknown sections and keys are
errors.

Value syntax: numbers; comma-separated lists (``A = 380, 380, 380, 380``);
piecewise-constant profiles as ``time:value`` pairs
(``fbar3 = 0:100, 600:300, 1200:200``) or a single constant.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import ConfigError
from ..fourtank import FourTankParams, four_tank_steady_state
from ..model import ExogenousSignal
from ..ukf import UkfParams

FILTER_SECTIONS = ("ekf", "ukf", "enkf", "pf")
MODEL_KEYS = tuple(f.name for f in fields(FourTankParams))
PROFILE_KEYS = ("fbar3", "fbar4")
VECTOR_KEYS = ("A", "a")


@dataclass(frozen=True)
class FilterConfig:
    kind: str
    model_overrides: dict = field(default_factory=dict)
    ukf: UkfParams = field(default_factory=UkfParams)
    n_particles: int = 0
    workers: int = 1
    cross_covariance: str = "predicted"
    ess_threshold: Optional[float] = None


FILTER_KEYS = {
    "ekf": (),
    "ukf": ("alpha", "beta", "kappa"),
    "enkf": ("n_particles", "workers", "cross_covariance"),
    "pf": ("n_particles", "workers", "ess_threshold"),
}


@dataclass(frozen=True)
class ExperimentConfig:
    n_samples: int = 120
    ts: float = 15.0
    t0: float = 0.0
    n_sim: int = 1000
    n_est: int = 100
    seed: int = 0
    reps: int = 5
    u1: tuple = ((0.0, 300.0),)  # pump flow profiles [cm3/s]
    u2: tuple = ((0.0, 300.0),)
    x0: Optional[tuple] = None  # None: steady state of the simulation model at t0
    p0: tuple = (200.0**2,) * 4 + (10.0**2,) * 2  # diagonal of the initial covariance
    simulation: FourTankParams = field(default_factory=FourTankParams)
    estimator: FourTankParams = field(default_factory=FourTankParams)
    filters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_samples < 1 or self.n_sim < 1 or self.n_est < 1:
            raise ConfigError("n_samples, n_sim and n_est must be at least 1")
        if not self.ts > 0:
            raise ConfigError("ts must be positive")
        if len(self.p0) != 6:
            raise ConfigError("p0 needs six diagonal entries")
        if self.x0 is not None and len(self.x0) != 6:
            raise ConfigError("x0 needs six entries")

    def input_signal(self):
        u1, u2 = ExogenousSignal(self.u1), ExogenousSignal(self.u2)
        times = sorted({t for t, _ in self.u1} | {t for t, _ in self.u2})
        return ExogenousSignal([(t, [u1(t)[0], u2(t)[0]]) for t in times])

    def initial_mean(self):
        if self.x0 is not None:
            return np.asarray(self.x0, dtype=float)
        u = self.input_signal()(self.t0)
        fbar = self.simulation.disturbance_signal()(self.t0)
        return four_tank_steady_state(self.simulation, u, fbar)

    def initial_cov(self):
        return np.diag(np.asarray(self.p0, dtype=float))

    def filter(self, kind):
        if kind not in FILTER_SECTIONS:
            raise ConfigError(f"unknown filter {kind!r}")
        return self.filters.get(kind, FilterConfig(kind))

    def estimator_params(self, kind):
        return replace(self.estimator, **self.filter(kind).model_overrides)

    def sample_times(self):
        return self.t0 + self.ts * np.arange(self.n_samples + 1)


def four_tank_config():
    """The modified four-tank experiment: 30 min, 120 samples, 1000/100 steps."""
    sim = FourTankParams(
        lambda1=0.1,
        lambda2=0.1,
        sigma1=5.0,
        sigma2=5.0,
        fbar3=((0.0, 100.0), (600.0, 300.0), (1200.0, 200.0)),
        fbar4=((0.0, 300.0), (600.0, 200.0), (1200.0, 100.0)),
        meas_std=2.0,
    )
    est = replace(sim, fbar3=((0.0, 150.0),), fbar4=((0.0, 150.0),))
    kalman = {"lambda1": 0.0, "lambda2": 0.0}
    ensemble = {"lambda1": 2.0e-3, "lambda2": 2.0e-3, "sigma1": 5.0, "sigma2": 5.0}
    filters = {
        "ekf": FilterConfig("ekf", {**kalman, "sigma1": 5.0, "sigma2": 5.0}),
        "ukf": FilterConfig("ukf", {**kalman, "sigma1": 1.0, "sigma2": 1.0}, ukf=UkfParams(0.001, 2.0, 0.0)),
        "enkf": FilterConfig("enkf", dict(ensemble), n_particles=250),
        "pf": FilterConfig("pf", dict(ensemble), n_particles=1000),
    }
    return ExperimentConfig(simulation=sim, estimator=est, filters=filters)


# ---------------------------------------------------------------- parsing


def _floats(text):
    try:
        return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse number list {text!r}") from exc


def _profile(text):
    items = [s.strip() for s in text.split(",") if s.strip()]
    if len(items) == 1 and ":" not in items[0]:
        return ((0.0, float(items[0])),)
    out = []
    for item in items:
        if ":" not in item:
            raise ConfigError(f"profile entries must be time:value, got {item!r}")
        t, v = item.split(":", 1)
        out.append((float(t), float(v)))
    return tuple(out)


def _model_value(key, text):
    try:
        if key in PROFILE_KEYS:
            return _profile(text)
        if key in VECTOR_KEYS:
            return tuple(_floats(text))
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r}") from exc


def _model_section(section, base):
    values = {}
    for key, text in section.items():
        if key not in MODEL_KEYS:
            raise ConfigError(f"unknown key {key!r} in [{section.name}]")
        values[key] = _model_value(key, text)
    try:
        return replace(base, **values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section.name}]: {exc}") from exc


EXPERIMENT_KEYS = {
    "n_samples": int,
    "ts": float,
    "t0": float,
    "n_sim": int,
    "n_est": int,
    "seed": int,
    "reps": int,
    "u1": _profile,
    "u2": _profile,
    "x0": lambda s: tuple(_floats(s)),
    "p0": lambda s: tuple(_floats(s)),
}


def parse_config(text, base=None):
    """Parse configuration text; keys not given keep the values of ``base``."""
    base = base if base is not None else four_tank_config()
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    known = {"experiment", "simulation-model", "estimator-model", *FILTER_SECTIONS}
    for name in parser.sections():
        if name not in known:
            raise ConfigError(f"unknown section [{name}]")

    changes = {}
    if parser.has_section("experiment"):
        for key, text_value in parser["experiment"].items():
            if key not in EXPERIMENT_KEYS:
                raise ConfigError(f"unknown key {key!r} in [experiment]")
            try:
                changes[key] = EXPERIMENT_KEYS[key](text_value)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {text_value!r}") from exc
    if parser.has_section("simulation-model"):
        changes["simulation"] = _model_section(parser["simulation-model"], base.simulation)
    if parser.has_section("estimator-model"):
        changes["estimator"] = _model_section(parser["estimator-model"], base.estimator)

    filters = dict(base.filters)
    for kind in FILTER_SECTIONS:
        if not parser.has_section(kind):
            continue
        fc = base.filter(kind)
        overrides = dict(fc.model_overrides)
        tuning = {}
        for key, text_value in parser[kind].items():
            if key in MODEL_KEYS:
                overrides[key] = _model_value(key, text_value)
            elif key in FILTER_KEYS[kind]:
                tuning[key] = text_value
            else:
                raise ConfigError(f"unknown key {key!r} in [{kind}]")
        try:
            if kind == "ukf":
                ukf = fc.ukf
                fc = replace(
                    fc,
                    ukf=UkfParams(
                        float(tuning.get("alpha", ukf.alpha)),
                        float(tuning.get("beta", ukf.beta)),
                        float(tuning.get("kappa", ukf.kappa)),
                    ),
                )
            if "n_particles" in tuning:
                fc = replace(fc, n_particles=int(tuning["n_particles"]))
            if "workers" in tuning:
                fc = replace(fc, workers=int(tuning["workers"]))
            if "cross_covariance" in tuning:
                fc = replace(fc, cross_covariance=tuning["cross_covariance"].strip())
            if "ess_threshold" in tuning:
                raw = tuning["ess_threshold"].strip().lower()
                fc = replace(fc, ess_threshold=None if raw in ("", "none", "off") else float(raw))
        except ValueError as exc:
            raise ConfigError(f"[{kind}]: {exc}") from exc
        filters[kind] = replace(fc, model_overrides=overrides)
    changes["filters"] = filters
    try:
        return replace(base, **changes)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path=None):
    """Read a configuration file; ``None`` returns :func:`four_tank_config`."""
    if path is None:
        return four_tank_config()
    return parse_config(Path(path).read_text(encoding="utf-8"))


def _num(v):
    text = repr(float(v))  # shortest round-tripping form
    return text[:-2] if text.endswith(".0") else text


def _fmt(value):
    if isinstance(value, tuple) and value and isinstance(value[0], tuple):
        return ", ".join(f"{_num(t)}:{_num(v)}" for t, v in value)
    if isinstance(value, tuple):
        return ", ".join(_num(v) for v in value)
    if isinstance(value, float):
        return _num(value)
    return str(value)


def config_to_text(cfg):
    """Serialize ``cfg`` in the format read by :func:`parse_config`."""
    lines = ["[experiment]"]
    for key in EXPERIMENT_KEYS:
        value = getattr(cfg, key)
        if value is None:
            continue
        lines.append(f"{key} = {_fmt(value)}")
    for name, params in (("simulation-model", cfg.simulation), ("estimator-model", cfg.estimator)):
        lines += ["", f"[{name}]"]
        lines += [f"{key} = {_fmt(getattr(params, key))}" for key in MODEL_KEYS]
    for kind in FILTER_SECTIONS:
        fc = cfg.filter(kind)
        lines += ["", f"[{kind}]"]
        if kind == "ukf":
            lines += [f"alpha = {_num(fc.ukf.alpha)}", f"beta = {_num(fc.ukf.beta)}", f"kappa = {_num(fc.ukf.kappa)}"]
        if kind in ("enkf", "pf"):
            lines += [f"n_particles = {fc.n_particles}", f"workers = {fc.workers}"]
        if kind == "enkf":
            lines.append(f"cross_covariance = {fc.cross_covariance}")
        if kind == "pf":
            lines.append(f"ess_threshold = {'none' if fc.ess_threshold is None else _num(fc.ess_threshold)}")
        lines += [f"{key} = {_fmt(value)}" for key, value in fc.model_overrides.items()]
    return "\n".join(lines) + "\n"
