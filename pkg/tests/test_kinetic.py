import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfwealth.kinetic import (
    ExchangeParams,
    WealthPopulation,
    dsmc_run,
    empirical_moment,
    exchange_pair,
    exchange_param_problems,
    fit_variance_rate,
    moment_rate,
)
from cfwealth.stats import fit_exponential_tail

lams = st.floats(0.01, 0.99)


def test_pair_examples():
    rng = np.random.default_rng(0)
    assert exchange_pair(1.0, 1.0, ExchangeParams(0.3), rng) == (1.0, 1.0)
    assert exchange_pair(2.0, 0.0, ExchangeParams(0.5), rng) == (1.0, 1.0)


@given(st.floats(0, 1e6), st.floats(0, 1e6), lams)
def test_pair_conserves_without_noise(v, w, lam):
    a, b = exchange_pair(v, w, ExchangeParams(lam), np.random.default_rng(0))
    assert a + b == pytest.approx(v + w, rel=1e-15, abs=1e-300)
    assert a >= 0 and b >= 0


@given(st.floats(0, 1e3), st.floats(0, 1e3), lams, st.sampled_from(["two_point", "uniform"]), st.floats(0, 1), st.integers(0, 2**32))
def test_noisy_pair_stays_non_negative(v, w, lam, noise, frac, seed):
    sigma = frac * (1 - lam) / (1.0 if noise == "two_point" else np.sqrt(3.0))
    a, b = exchange_pair(v, w, ExchangeParams(lam, noise, sigma), np.random.default_rng(seed))
    assert a >= -1e-12 * (v + w) and b >= -1e-12 * (v + w)


def test_param_validation_messages():
    assert "lambda must lie in (0,1)" in exchange_param_problems(1.2, "zero", 0.0)
    msgs = exchange_param_problems(0.3, "two_point", 0.8)
    assert any("1 - lambda" in m and "non-negative" in m for m in msgs)
    with pytest.raises(ValueError):
        ExchangeParams(0.3, "cauchy", 0.1)


@given(lams, st.sampled_from(["two_point", "uniform"]))
def test_noise_has_stated_variance(lam, noise):
    sigma = 0.5 * (1 - lam) / np.sqrt(3.0)
    eta = ExchangeParams(lam, noise, sigma).draw_noise(np.random.default_rng(1), 200_000)
    assert abs(eta.mean()) < 5 * sigma / np.sqrt(eta.size) + 1e-12
    assert eta.std() == pytest.approx(sigma, rel=0.02)


def test_moment_rate_examples():
    assert moment_rate(1, 0.37) == pytest.approx(0.0, abs=1e-15)
    assert moment_rate(2, 0.25) == pytest.approx(-0.375)
    assert moment_rate(60, 0.5) == pytest.approx(-1.0, abs=1e-15)


@given(lams)
def test_second_moment_rate_identity(lam):
    assert moment_rate(2, lam) == pytest.approx(-2 * lam * (1 - lam), abs=1e-14)


def test_empirical_moment_examples():
    assert empirical_moment(WealthPopulation([3.0, 1.0]), 0) == 1.0
    assert empirical_moment(WealthPopulation([1.0, 1.0, 1.0]), 1) == 1.0
    assert empirical_moment(WealthPopulation([0.0, 2.0]), 2) == 2.0


def test_population_validation():
    with pytest.raises(ValueError):
        WealthPopulation([1.0])
    with pytest.raises(ValueError):
        WealthPopulation([1.0, -1.0])


def test_mean_conserved_and_series_shape():
    rng = np.random.default_rng(2)
    pop = WealthPopulation.exponential(2000, rng)
    out, series = dsmc_run(pop, 10.0, ExchangeParams(0.2), rng, record_dt=0.5, moments=(0.5, 3))
    m1 = np.array(series.m1)
    assert np.max(np.abs(m1 / m1[0] - 1)) <= 1e-12
    assert series.as_array().shape == (len(series.t), 5)
    assert out.time == pytest.approx(10.0)


def test_variance_decay_rate():
    rng = np.random.default_rng(3)
    pop = WealthPopulation.exponential(10**4, rng)
    _, series = dsmc_run(pop, 5.0, ExchangeParams(0.25), rng, record_dt=0.1)
    assert fit_variance_rate(series, 1.0, 5.0) == pytest.approx(-0.375, rel=0.1)


def test_noisy_steady_state_tail():
    rng = np.random.default_rng(4)
    pop = WealthPopulation.exponential(10**4, rng)
    out, _ = dsmc_run(pop, 50.0, ExchangeParams(0.3, "two_point", 0.2), rng, record_dt=5.0)
    fit = fit_exponential_tail(out.wealths, 0.8)
    assert fit.rate < 0 and fit.r_squared >= 0.9


def test_run_backwards_rejected():
    pop = WealthPopulation([1.0, 1.0], time=2.0)
    with pytest.raises(ValueError):
        dsmc_run(pop, 1.0, ExchangeParams(0.3), np.random.default_rng(0))
