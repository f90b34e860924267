import csv
from dataclasses import replace

import numpy as np
import pytest

from cdfilters import InitialBelief
from cdfilters.errors import ConfigError, UndefinedMapeError
from cdfilters.filters import FILTER_KINDS
from cdfilters.fourtank import four_tank_model
from cdfilters.harness import (
    compute_mape,
    config_to_text,
    estimate,
    load_config,
    make_filter,
    four_tank_config,
    parse_config,
    run_benchmark,
    run_estimation,
    run_simulation,
    simulate,
)
from cdfilters.harness.cli import main
from cdfilters.harness.experiment import DISTURBANCE_STATES, MASS_STATES
from cdfilters.numerics import integrate_ode
from cdfilters.ukf import UkfParams

from oracles import linear_model

SMALL = """
[experiment]
n_samples = 6
n_sim = 60
n_est = 12
[enkf]
n_particles = 40
[pf]
n_particles = 80
"""


@pytest.fixture(scope="module")
def small():
    return parse_config(SMALL)


# ---------------------------------------------------------------- config


def test_four_tank_configuration_values():
    c = four_tank_config()
    assert (c.n_samples, c.ts, c.n_sim, c.n_est) == (120, 15.0, 1000, 100)
    assert c.sample_times()[-1] == 1800.0
    assert c.filter("ukf").ukf == UkfParams(0.001, 2.0, 0.0)
    assert c.filter("enkf").n_particles == 250 and c.filter("pf").n_particles == 1000
    assert c.simulation.lambda1 == 0.1 and c.simulation.sigma1 == 5.0
    assert {v for _, v in c.simulation.fbar3} == {100.0, 200.0, 300.0}
    assert c.estimator.fbar3 == ((0.0, 150.0),) and c.estimator.fbar4 == ((0.0, 150.0),)
    for kind, lam, sig in [("ekf", 0.0, 5.0), ("ukf", 0.0, 1.0), ("enkf", 2e-3, 5.0), ("pf", 2e-3, 5.0)]:
        p = c.estimator_params(kind)
        assert (p.lambda1, p.lambda2, p.sigma1, p.sigma2) == (lam, lam, sig, sig)


def test_config_round_trip(small):
    assert parse_config(config_to_text(small)) == small
    assert parse_config(config_to_text(four_tank_config())) == four_tank_config()


def test_shipped_config_file_matches_default():
    from pathlib import Path

    path = Path(__file__).resolve().parents[1] / "configs" / "four_tank.ini"
    assert load_config(path) == four_tank_config()
    assert load_config(None) == four_tank_config()


@pytest.mark.parametrize(
    "text",
    [
        "[bogus]\nx = 1\n",
        "[experiment]\nbogus = 1\n",
        "[simulation-model]\nheight = 3\n",
        "[ekf]\nn_particles = 3\n",
        "[experiment]\nn_samples = 0\n",
        "[experiment]\nts = -1\n",
        "[experiment]\nn_sim = many\n",
        "[simulation-model]\ngamma1 = 1.5\n",
        "[simulation-model]\nfbar3 = 0:100, 50\n",
        "[ukf]\nalpha = 0\n",
        "no section",
    ],
)
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_filter_sections_override_estimator_model():
    from cdfilters.harness import ExperimentConfig

    text = "[estimator-model]\nsigma1 = 3\n[pf]\nsigma1 = 7\nlambda1 = 0.01\n"
    c = parse_config(text, base=ExperimentConfig())
    assert c.estimator_params("ekf").sigma1 == 3.0
    assert c.estimator_params("pf").sigma1 == 7.0 and c.estimator_params("pf").lambda1 == 0.01


# ---------------------------------------------------------------- MAPE


def test_mape_examples():
    assert compute_mape([[1.0, 2.0]], [[1.0, 2.0]]) == 0.0
    assert compute_mape([[100.0], [200.0]], [[90.0], [220.0]]) == pytest.approx(10.0)
    with pytest.raises(UndefinedMapeError):
        compute_mape([[0.0], [1.0]], [[0.0], [1.0]])


def test_mape_index_subsets():
    X = np.array([[100.0, 0.0, 10.0]])
    Xh = np.array([[110.0, 5.0, 10.0]])
    assert compute_mape(X, Xh, [0, 2]) == pytest.approx(5.0)
    with pytest.raises(UndefinedMapeError):
        compute_mape(X, Xh, [1])


# ---------------------------------------------------------------- simulation


def test_simulation_deterministic(small):
    a, b = run_simulation(small, seed=4), run_simulation(small, seed=4)
    assert a.x.tobytes() == b.x.tobytes() and a.y.tobytes() == b.y.tobytes()
    c = run_simulation(small, seed=5)
    assert not np.array_equal(a.x, c.x)
    assert a.x.shape == (7, 6) and a.y.shape == (7, 4)
    assert np.all(np.isnan(a.y[0])) and np.all(np.isfinite(a.y[1:]))


def test_noise_free_simulation_measures_ode_solution(small):
    p = replace(small.simulation, sigma1=0.0, sigma2=0.0)
    m = four_tank_model(p).with_changes(R=np.zeros((4, 4)))
    x0 = small.initial_mean() * 1.2
    times = small.sample_times()
    u, d = small.input_signal(), p.disturbance_signal()
    traj = simulate(m, InitialBelief(x0, np.zeros((6, 6))), times, 2000, u, d, seed=0)
    for k in range(1, len(times)):
        np.testing.assert_array_equal(traj.y[k], m.h(times[k], traj.x[k]))
    ref = integrate_ode(lambda t, x: m.f(t, x, u(0), d(0)), x0, times[0], times[-1], 400)
    np.testing.assert_allclose(traj.x[-1], ref, rtol=1e-4)


def test_disturbance_follows_profile():
    c = four_tank_config()
    traj = run_simulation(c, seed=0)
    # OU lag 1/lambda = 10 s, so the flow settles well inside each 600 s segment
    for t_end, level in [(585.0, 100.0), (1185.0, 300.0), (1800.0, 200.0)]:
        k = int(t_end / c.ts)
        sd = np.sqrt(125.0)
        assert abs(traj.x[k, 4] - level) < 4 * sd


# ---------------------------------------------------------------- estimation


@pytest.mark.parametrize("kind", FILTER_KINDS)
def test_noise_free_filters_track_truth(small, kind):
    quiet = replace(small.simulation, sigma1=0.0, sigma2=0.0)
    m = four_tank_model(quiet)
    x0 = small.initial_mean()
    times = small.sample_times()
    u, d = small.input_signal(), quiet.disturbance_signal()
    truth = simulate(m, InitialBelief(x0, np.zeros((6, 6))), times, 3000, u, d, seed=0, draw_initial=False)
    filt = make_filter(kind, m, InitialBelief(x0, np.zeros((6, 6))), ukf=UkfParams(), n_particles=10, seed=0)
    rec = estimate(filt, times, truth.y, 3000, u, d)
    np.testing.assert_allclose(rec.mean, truth.x, rtol=2e-5)


def test_run_record_layout(small):
    traj = run_simulation(small, seed=1)
    for kind in FILTER_KINDS:
        rec = run_estimation(small, traj.y, kind, seed=1, truth=traj.x)
        assert rec.mean.shape == (7, 6) and rec.cov_diag.shape == (7, 6)
        assert rec.tu_time >= 0 and rec.mu_time >= 0
        assert np.isfinite(rec.mape_x) and np.isfinite(rec.mape_d)
        if kind in ("ekf", "ukf"):
            np.testing.assert_array_equal(rec.mean[0], small.initial_mean())


def test_benchmark_reproducible_and_shared_measurements(small):
    a = run_benchmark(small, reps=2, seed=3)
    b = run_benchmark(small, reps=2, seed=3)
    for kind in FILTER_KINDS:
        np.testing.assert_array_equal(a.values(kind, "mape_x"), b.values(kind, "mape_x"))
        np.testing.assert_array_equal(a.values(kind, "mape_d"), b.values(kind, "mape_d"))
    for r in range(2):
        ys = [a.records[k][r].y for k in FILTER_KINDS]
        assert all(np.array_equal(ys[0], y, equal_nan=True) for y in ys[1:])
    assert a.seeds == [3, 4]


def test_filter_errors_carry_sample_index():
    m = linear_model([[0.0]], [[0.0]], [[1.0]], [[0.0]])
    filt = make_filter("ekf", m, InitialBelief([0.0], [[0.0]]))
    times = np.arange(4.0)
    with pytest.raises(Exception) as info:
        estimate(filt, times, np.zeros((4, 1)), 2)
    assert info.value.sample == 1


def test_time_update_only_ekf_is_worse():
    c = four_tank_config()
    full, open_loop = [], []
    for seed in range(5):
        traj = run_simulation(c, seed=seed)
        for update, out in [(True, full), (False, open_loop)]:
            rec = run_estimation(c, traj.y, "ekf", seed=seed, truth=traj.x, update=update)
            out.append(rec.mape_x + rec.mape_d)
    assert np.mean(open_loop) >= np.mean(full)


# ---------------------------------------------------------------- CLI


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_cli_end_to_end(tmp_path, capsys):
    cfg = tmp_path / "small.ini"
    cfg.write_text(SMALL)
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfg), "--seed", "2", "--out", str(out)]) == 0
    sim = _rows(out / "simulation.csv")
    assert sim[0] == ["t"] + [f"x{i}" for i in range(1, 7)] + [f"y{i}" for i in range(1, 5)]
    assert len(sim) == 8
    args = ["estimate", "--config", str(cfg), "--filter", "ukf", "--out", str(out)]
    assert main(args + ["--measurements", str(out / "simulation.csv")]) == 0
    est = _rows(out / "estimate_ukf.csv")
    assert est[0] == ["t"] + [f"xhat{i}" for i in range(1, 7)] + [f"Pdiag{i}" for i in range(1, 7)]
    assert len(est) == 8
    assert main(["benchmark", "--config", str(cfg), "--reps", "2", "--out", str(out)]) == 0
    bench = _rows(out / "benchmark.csv")
    assert [r[0] for r in bench[1:]] == ["time TU [s]", "time MU [s]", "MAPE_x [%]", "MAPE_d [%]"]
    assert bench[0][1:4] == ["ekf", "ekf_std", "ekf_median"]
    assert "MAPE_x" in capsys.readouterr().out


def test_cli_reports_bad_config(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[experiment]\nwhatever = 1\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    assert "whatever" in capsys.readouterr().err


def test_mass_and_disturbance_index_sets():
    assert MASS_STATES == (0, 1, 2, 3) and DISTURBANCE_STATES == (4, 5)
