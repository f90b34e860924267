import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdfilters import InitialBelief, ModelDescriptor
from cdfilters.errors import ContractError, DegenerateWeightsError
from cdfilters.numerics import RngStream
from cdfilters.particles import ParticleSet
from cdfilters.pf import (
    effective_sample_size,
    gaussian_log_likelihood,
    normalize_log_weights,
    pf_init,
    pf_likelihood_weights,
    pf_measurement_update,
    pf_time_update,
    systematic_resample,
    systematic_resample_indices,
)

from oracles import linear_model


def scalar(r=1.0):
    return linear_model([[0.0]], [[1.0]], [[1.0]], [[r]])


def test_time_update_static_without_noise():
    m = linear_model(np.zeros((2, 2)), np.zeros((2, 1)), np.eye(2), np.eye(2))
    s = pf_init(InitialBelief([1.0, 2.0], np.eye(2)), 10, RngStream(0))
    np.testing.assert_array_equal(pf_time_update(s, m, None, None, 2.0, 5).particles, s.particles)


def test_time_update_reproducible():
    s = lambda: pf_init(InitialBelief([0.0], [[1.0]]), 100, RngStream(4))  # noqa: E731
    a = pf_time_update(s(), scalar(), None, None, 1.0, 10)
    b = pf_time_update(s(), scalar(), None, None, 1.0, 10)
    assert a.particles.tobytes() == b.particles.tobytes()


def test_wiener_variance_growth():
    n = 10_000
    s = pf_init(InitialBelief([0.0], [[0.0]]), n, RngStream(12))
    out = pf_time_update(s, scalar(), None, None, 2.5, 25)
    var = out.particles[:, 0].var(ddof=1)
    assert abs(var - 2.5) < 5 * 2.5 * np.sqrt(2.0 / (n - 1))


def test_log_likelihood_density_value():
    assert np.exp(gaussian_log_likelihood([[0.0]], [[1.0]]))[0] == pytest.approx(1.0 / np.sqrt(2 * np.pi), rel=1e-14)
    assert np.exp(gaussian_log_likelihood([[0.0]], [[1.0]]))[0] == pytest.approx(0.398942, abs=1e-6)


def test_log_likelihood_matches_direct_density():
    rng = np.random.default_rng(2)
    R = np.array([[2.0, 0.3], [0.3, 0.5]])
    E = rng.normal(size=(20, 2))
    direct = np.exp(-0.5 * np.einsum("ij,jk,ik->i", E, np.linalg.inv(R), E)) / (2 * np.pi * np.sqrt(np.linalg.det(R)))
    np.testing.assert_allclose(np.exp(gaussian_log_likelihood(E, R)), direct, rtol=1e-12)
    w_log = normalize_log_weights(gaussian_log_likelihood(E, R))
    np.testing.assert_allclose(w_log, direct / direct.sum(), rtol=1e-12)
    assert abs(w_log.sum() - 1.0) < 1e-12


def test_identical_particles_uniform_weights():
    s = ParticleSet(np.full((4, 1), 3.0), 0.0, RngStream(0))
    np.testing.assert_allclose(pf_likelihood_weights(s, [1.0], scalar()), 0.25, rtol=1e-15)


def test_likelihood_ratio_two():
    # 0.5 e^2 / R = ln 2 with R = 1: e = sqrt(2 ln 2)
    e = np.sqrt(2 * np.log(2))
    s = ParticleSet(np.array([[1.0], [1.0 + e]]), 0.0, RngStream(0))
    np.testing.assert_allclose(pf_likelihood_weights(s, [1.0], scalar()), [2 / 3, 1 / 3], rtol=1e-12)


def test_sharp_likelihood_does_not_underflow():
    s = ParticleSet(np.array([[0.0], [1.0], [50.0]]), 0.0, RngStream(0))
    w = pf_likelihood_weights(s, [50.0], scalar(r=1e-6))
    np.testing.assert_allclose(w, [0.0, 0.0, 1.0])


def test_degenerate_weights():
    with pytest.raises(DegenerateWeightsError):
        normalize_log_weights(np.full(3, -np.inf))
    with pytest.raises(DegenerateWeightsError):
        normalize_log_weights(np.array([0.0, np.nan]))


def test_resample_point_mass():
    for q1 in (0.0, 0.3, 0.999):
        np.testing.assert_array_equal(systematic_resample_indices(np.array([1.0, 0, 0, 0]), q1), [0, 0, 0, 0])


def test_resample_uniform_keeps_each_once():
    for q1 in (1e-9, 0.5, 1.0):
        np.testing.assert_array_equal(systematic_resample_indices(np.full(5, 0.2), q1), np.arange(5))


def test_resample_hand_enumeration():
    idx = systematic_resample_indices(np.array([0.5, 0.5, 0.0, 0.0]), 0.5)
    np.testing.assert_array_equal(idx, [0, 0, 1, 1])


def test_resample_rejects_unnormalized():
    with pytest.raises(ContractError):
        systematic_resample_indices(np.array([0.5, 0.6]), 0.1)
    with pytest.raises(ContractError):
        systematic_resample_indices(np.array([1.5, -0.5]), 0.1)


def _weights(seed, n, sparsity):
    rng = np.random.default_rng(seed)
    w = rng.exponential(size=n) * (rng.uniform(size=n) > sparsity)
    if w.sum() == 0:
        w[0] = 1.0
    return w / w.sum()


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 256), st.floats(0.0, 0.9), st.floats(0.0, 1.0, exclude_min=True))
def test_resample_multiplicity_bound(seed, n, sparsity, q1):
    w = _weights(seed, n, sparsity)
    counts = np.bincount(systematic_resample_indices(w, q1), minlength=n)
    assert counts.sum() == n
    lo, hi = np.floor(n * w - 1e-9), np.ceil(n * w + 1e-9)
    assert np.all((counts >= lo) & (counts <= hi))


def test_resample_never_fabricates_states():
    X = np.random.default_rng(1).normal(size=(40, 2))
    s = ParticleSet(X, 0.0, RngStream(0))
    out = systematic_resample(s, _weights(3, 40, 0.5), RngStream(2))
    assert out.size == 40
    rows = {tuple(r) for r in X}
    assert all(tuple(r) in rows for r in out.particles)


def test_constant_measurement_resample_is_identity():
    m = ModelDescriptor(
        n_x=1, n_w=1, n_y=1, drift=None, diffusion=None, measurement=lambda t, x, th: np.zeros(np.shape(x)), R=[[1.0]]
    )
    X = np.random.default_rng(0).normal(size=(30, 1))
    s = ParticleSet(X, 0.0, RngStream(0))
    out = pf_measurement_update(s, [4.0], m, RngStream(7))
    np.testing.assert_array_equal(out.particles, X)


def test_measurement_update_reproducible():
    X = np.random.default_rng(0).normal(size=(50, 1))
    a = pf_measurement_update(ParticleSet(X, 0.0, RngStream(0)), [0.3], scalar(), RngStream(5))
    b = pf_measurement_update(ParticleSet(X, 0.0, RngStream(0)), [0.3], scalar(), RngStream(5))
    assert a.particles.tobytes() == b.particles.tobytes()


def test_measurement_update_matches_kalman_posterior():
    n = 100_000
    s = pf_init(InitialBelief([0.0], [[1.0]]), n, RngStream(31))
    out = pf_measurement_update(s, [1.0], scalar(r=0.5), RngStream(32))
    mean, _ = out.moments()
    k_mean, k_var = 1.0 / 1.5, 1.0 - 1.0 / 1.5
    assert abs(mean[0] - k_mean) < 5 * np.sqrt(k_var / n)


def test_ess_gate_keeps_weights():
    X = np.linspace(-1, 1, 20)[:, None]
    s = ParticleSet(X, 0.0, RngStream(0))
    kept = pf_measurement_update(s, [0.0], scalar(r=100.0), RngStream(1), ess_threshold=0.5)
    assert kept.weights is not None
    np.testing.assert_array_equal(kept.particles, X)
    assert effective_sample_size(kept.weights) > 19.9
    resampled = pf_measurement_update(s, [0.0], scalar(r=1e-3), RngStream(1), ess_threshold=0.5)
    assert resampled.weights is None
