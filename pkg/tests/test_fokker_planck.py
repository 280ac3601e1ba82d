import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from cfwealth.errors import StepSizeError
from cfwealth.fokker_planck import (
    DensityField,
    FpConfig,
    fp_solve,
    fp_step,
    generator_matrix,
    projected_step_change,
    stationary_residual,
    stationary_solution,
    uniform_bump,
)

configs = st.builds(
    FpConfig,
    gamma=st.floats(0.05, 4.0),
    mean_wealth=st.floats(0.2, 3.0),
    w_max=st.just(40.0),
    cells=st.sampled_from([16, 64, 200]),
    dt=st.floats(1e-4, 10.0),
)


def random_field(cfg, seed):
    g = np.random.default_rng(seed).random(cfg.cells)
    return DensityField(g / (g.sum() * cfg.h), cfg.edges)


def test_config_validation():
    for bad in (dict(gamma=0), dict(w_max=0.5), dict(cells=8), dict(dt=-1)):
        with pytest.raises(ValueError):
            FpConfig(**bad)


def test_equilibrium_is_kept():
    cfg = FpConfig()
    g0 = stationary_solution(cfg, kind="nodal")
    assert np.max(np.abs(fp_step(g0, cfg).cell_averages - g0.cell_averages)) < 1e-8


@given(configs, st.integers(0, 2**32))
@settings(max_examples=60, deadline=None)
def test_step_conserves_mass_and_sign(cfg, seed):
    f = random_field(cfg, seed)
    out = fp_step(f, cfg)
    assert abs(out.mass() - f.mass()) < 1e-12
    assert np.all(out.cell_averages >= 0)


@given(configs)
@settings(max_examples=40, deadline=None)
def test_generator_is_conservative_m_matrix(cfg):
    a = generator_matrix(cfg)
    off = a - np.diag(np.diag(a))
    assert np.all(off >= 0)
    np.testing.assert_allclose(a.sum(axis=0), 0.0, atol=1e-9 * np.abs(a).max())


@given(configs)
@settings(max_examples=40, deadline=None)
def test_nodal_profile_is_discrete_equilibrium(cfg):
    g = stationary_solution(cfg, kind="nodal").cell_averages
    a = generator_matrix(cfg)
    assert np.max(np.abs(a @ g)) <= 1e-9 * np.abs(a).max() * g.max()


def test_diffusion_spreads_bump():
    cfg = FpConfig(gamma=0.05, dt=0.001, cells=512, w_max=10.0)
    f = uniform_bump(cfg, 0.95, 1.05)
    var0 = f.variance()
    for _ in range(5):
        f = fp_step(f, cfg)
    assert f.variance() > var0
    assert f.mass() == pytest.approx(1.0, abs=1e-12)


def test_step_size_error_carries_suggestion():
    err = StepSizeError("x", suggested_dt=0.5)
    assert err.suggested_dt == 0.5


def test_stationary_shape():
    cfg = FpConfig(cells=5000)
    g = stationary_solution(cfg, kind="nodal")
    mode = g.centers[np.argmax(g.cell_averages)]
    assert mode == pytest.approx(0.5, abs=cfg.h)
    assert stationary_solution(FpConfig()).mean() == pytest.approx(1.0, rel=0.02)
    assert stationary_solution(FpConfig()).mass() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("gamma, m", [(1, 1), (0.5, 2), (2, 0.3)])
def test_closed_form_has_zero_flux(gamma, m):
    assert oracles.fp_zero_flux_residual(gamma, m) == 0
    w = np.linspace(0.05, 30, 50)
    np.testing.assert_allclose(stationary_residual(w, gamma, m), 0.0, atol=1e-12)


def test_residual_detects_wrong_exponent():
    assert np.max(np.abs(stationary_residual(np.linspace(0.1, 5, 10), 1.0, 1.0, a=3.0))) > 0.1


def test_relaxation_from_uniform():
    cfg = FpConfig()
    _, diag = fp_solve(uniform_bump(cfg, 0.0, 2.0), cfg, 30.0, record_every=50)
    l1 = np.array(diag.l1_to_stationary)
    assert l1[-1] < 0.02
    half = l1[len(l1) // 2:]
    assert np.all(np.diff(half) <= 1e-15)
    np.testing.assert_allclose(diag.mass, 1.0, atol=1e-10)


def test_equilibrium_run_stays_put():
    cfg = FpConfig()
    g0 = stationary_solution(cfg, kind="nodal")
    _, diag = fp_solve(g0, cfg, 5.0, record_every=10, reference=g0)
    assert max(diag.l1_to_stationary) < 1e-6


def test_final_step_lands_on_t_end():
    cfg = FpConfig(dt=0.3)
    _, diag = fp_solve(uniform_bump(cfg, 0.0, 2.0), cfg, 1.0)
    assert diag.t[-1] == pytest.approx(1.0)


def test_projection_mismatch_is_second_order_once_resolved():
    # the profile varies on a scale ~0.1 near w = 0.2, so h must be well below that
    changes = [projected_step_change(FpConfig(cells=c)) for c in (2048, 4096, 8192)]
    ratios = [changes[k] / changes[k + 1] for k in range(2)]
    assert all(3.0 <= r <= 5.0 for r in ratios)
