"""End-to-end acceptance checks, one test per criterion, at the stated tolerances.

Every test records a PASS/FAIL line that is repeated in the pytest terminal
summary. Seeds are fixed so reruns are identical.
"""

import time

import numpy as np
import pytest

import oracles
from cfwealth.chain_dc import apply_route, deterministic_route, dc_step_batch, run_dc_array
from cfwealth.chain_dd import (
    DiscretePoint,
    build_transition_matrix,
    dd_transition_prob,
    enumerate_states,
    rank_state,
    run_dd,
    state_count,
    stationary_distribution,
)
from cfwealth.fokker_planck import FpConfig, fp_solve, projected_step_change, uniform_bump
from cfwealth.kinetic import ExchangeParams, WealthPopulation, dsmc_run, fit_variance_rate, moment_rate
from cfwealth.simplex import BetaMarginalSpec, SimplexPoint, beta_cdf, uniform_simplex_array
from cfwealth.stats import (
    convergence_trend_ok,
    dd_dc_convergence,
    fit_exponential_tail,
    fit_log_survival,
    ks_statistic,
    return_time_survival,
    total_variation,
)

SEED = 20261015


def rng_for(criterion, k=0):
    return np.random.default_rng(np.random.SeedSequence(SEED, spawn_key=(criterion, k)))


def beta_battery(samples):
    """Per-coordinate KS against Beta(1, N-1); returns (all passed, worst statistic/critical ratio)."""
    n_agents = samples.shape[1]
    spec = BetaMarginalSpec.uniform_marginal(n_agents)
    results = [ks_statistic(samples[:, k], lambda x: beta_cdf(spec, x)) for k in range(n_agents)]
    worst = max(r.statistic / r.critical_value for r in results)
    return all(r.passed for r in results), worst


def test_doubly_stochastic_kernel(report):
    t0 = time.perf_counter()
    worst = {}
    for n_agents, n_coins in [(2, 5), (3, 4), (3, 8), (4, 4)]:
        mat = build_transition_matrix(n_agents, n_coins)
        worst[(n_agents, n_coins)] = max(np.abs(mat.sum(axis=1) - 1).max(), np.abs(mat.sum(axis=0) - 1).max())
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-12 and elapsed < 5
    detail = ", ".join(f"{k}: {v:.3g}" for k, v in worst.items())
    assert report(1, ok, f"max |row/col sum - 1| {detail} (tol 1e-12); {elapsed:.2f}s")


def test_uniform_invariant_law(report):
    t0 = time.perf_counter()
    mat = build_transition_matrix(3, 4)
    start = rng_for(2).dirichlet(np.ones(15))
    pi = stationary_distribution(mat, initial=start)
    uniform = np.full(15, 1 / 15)
    tv_power = total_variation(pi, uniform)
    traj = run_dd(DiscretePoint((0, 0, 4)), 10**6, rng_for(2, 1))
    freq = np.bincount([rank_state(r) for r in traj.tolist()], minlength=15) / traj.shape[0]
    tv_traj = total_variation(freq, uniform)
    elapsed = time.perf_counter() - t0
    ok = tv_power < 1e-10 and tv_traj < 0.01 and elapsed < 30
    assert report(
        2, ok, f"power-iteration TV {tv_power:.3g} (tol 1e-10), trajectory TV {tv_traj:.3g} (tol 0.01); {elapsed:.2f}s"
    )


def test_oracle_equivalence(report):
    cases = [(2, 5), (3, 4), (3, 8), (4, 4), (6, 5), (3, 40), (4, 20)]
    worst = 0.0
    pairs = 0
    for n_agents, n_coins in cases:
        assert state_count(n_agents, n_coins) <= 2000
        states, kernel = oracles.dd_kernel_exact(n_agents, n_coins)
        points = enumerate_states(n_agents, n_coins)
        for a, pa in zip(states, points):
            for b, pb in zip(states, points):
                worst = max(worst, abs(dd_transition_prob(pa, pb) - float(kernel.get((a, b), 0))))
                pairs += 1
    ok = worst <= 1e-14
    assert report(3, ok, f"{pairs} state pairs over {len(cases)} spaces, max deviation {worst:.3g} (tol 1e-14)")


def test_beta_marginal_at_equilibrium(report):
    t0 = time.perf_counter()
    parts = []
    ok = True
    for n_agents in (3, 5, 8):
        traj = run_dc_array(np.full(n_agents, 1 / n_agents), 10**6, rng_for(4, n_agents), thin=n_agents**2)
        kept = traj[traj.shape[0] // 10:]
        passed, worst = beta_battery(kept)
        ok &= passed
        parts.append(f"N={n_agents}: worst D/crit {worst:.3f} over {kept.shape[0]} samples")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 60
    assert report(4, ok, "; ".join(parts) + f"; {elapsed:.2f}s")


def test_uniform_sampler(report):
    t0 = time.perf_counter()
    parts = []
    ok = True
    for n_agents in (3, 5, 8):
        passed, worst = beta_battery(uniform_simplex_array(n_agents, 10**5, rng_for(5, n_agents)))
        ok &= passed
        parts.append(f"N={n_agents}: worst D/crit {worst:.3f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 5
    assert report(5, ok, "; ".join(parts) + f"; {elapsed:.2f}s")


def test_one_step_invariance(report):
    parts = []
    ok = True
    for n_agents in (3, 5, 8):
        x = uniform_simplex_array(n_agents, 10**5, rng_for(6, n_agents))
        passed, worst = beta_battery(dc_step_batch(x, rng_for(6, 100 + n_agents)))
        ok &= passed
        parts.append(f"N={n_agents}: worst D/crit {worst:.3f}")
    assert report(6, ok, "; ".join(parts))


def test_deterministic_routing(report):
    worst_err = 0.0
    fractions_ok = True
    lengths_ok = True
    for n_agents in range(2, 7):
        rng = rng_for(7, n_agents)
        for _ in range(1000):
            src = SimplexPoint.from_weights(rng.exponential(size=n_agents))
            tgt = SimplexPoint.from_weights(rng.exponential(size=n_agents))
            plan = deterministic_route(src, tgt)
            lengths_ok &= len(plan) == n_agents - 1
            fractions_ok &= all(0.0 <= m <= 1.0 for _, _, m in plan)
            worst_err = max(worst_err, float(np.abs(apply_route(src, plan).coords - tgt.coords).sum()))
    ok = worst_err < 1e-10 and fractions_ok and lengths_ok
    assert report(7, ok, f"5000 routes, max l1 error {worst_err:.3g} (tol 1e-10), fractions in [0,1]: {fractions_ok}, N-1 steps: {lengths_ok}")


def test_dd_to_dc_convergence(report):
    t0 = time.perf_counter()
    pts = dd_dc_convergence([10, 100, 1000], 3, 5, 10**4, rng_for(8))
    trend, rho = convergence_trend_ok(pts)
    elapsed = time.perf_counter() - t0
    ok = trend and elapsed < 60
    dists = ", ".join(f"n={p.n}: {p.distance:.4f}" for p in pts)
    assert report(8, ok, f"KS distances {dists}; spearman {rho:.2f}; {elapsed:.2f}s")


def test_geometric_return_tails(report):
    traj = run_dc_array(np.full(3, 1 / 3), 10**6, rng_for(9))
    inside = lambda x: np.abs(x - 1 / 3).sum(axis=1) <= 0.1
    surv = return_time_survival(traj, inside, vectorized=True)
    excursions = int(inside(traj).sum()) - 1
    fit = fit_log_survival(surv, excursions)
    ok = fit.rate < 0 and fit.r_squared >= 0.95
    assert report(9, ok, f"{excursions} excursions, slope {fit.rate:.4g}, R^2 {fit.r_squared:.4f} (need < 0, >= 0.95)")


@pytest.mark.parametrize("lam", [0.1, 0.25, 0.4])
def test_kinetic_moments(report, lam):
    t0 = time.perf_counter()
    rng = rng_for(10, int(lam * 100))
    pop = WealthPopulation.exponential(10**4, rng)
    _, series = dsmc_run(pop, 10.0, ExchangeParams(lam), rng, record_dt=0.1)
    m1 = np.array(series.m1)
    drift = float(np.max(np.abs(m1 / m1[0] - 1)))
    rate = fit_variance_rate(series, 1.0, 5.0)
    s2 = moment_rate(2, lam)
    elapsed = time.perf_counter() - t0
    ok = drift <= 1e-12 and abs(rate / s2 - 1) <= 0.1 and elapsed < 60
    assert report(
        10, ok, f"lambda={lam}: mean drift {drift:.2g} (tol 1e-12), variance rate {rate:.4f} vs S(2) {s2:.4f}; {elapsed:.2f}s"
    )


def test_exponential_tail(report):
    rng = rng_for(11)
    pop = WealthPopulation.exponential(10**4, rng)
    out, _ = dsmc_run(pop, 50.0, ExchangeParams(0.3, "two_point", 0.2), rng, record_dt=1.0)
    fit = fit_exponential_tail(out.wealths, 0.8)
    ok = fit.rate < 0 and fit.r_squared >= 0.9
    assert report(11, ok, f"tail rate {fit.rate:.3f}, R^2 {fit.r_squared:.4f} (need < 0, >= 0.9)")


def test_fokker_planck_stationarity(report):
    t0 = time.perf_counter()
    cfg = FpConfig(gamma=1.0, mean_wealth=1.0, w_max=50.0, cells=256, dt=0.01)
    _, diag = fp_solve(uniform_bump(cfg, 0.0, 2.0), cfg, 30.0, record_every=100)
    mass_drift = float(np.max(np.abs(np.array(diag.mass) - diag.mass[0])))
    l1 = diag.l1_to_stationary[-1]
    changes = [projected_step_change(FpConfig(1.0, 1.0, 50.0, c, 0.01)) for c in (64, 128, 256)]
    ratios = [changes[0] / changes[1], changes[1] / changes[2]]
    elapsed = time.perf_counter() - t0
    ok = mass_drift <= 1e-9 and l1 < 0.02 and all(3 <= r <= 5 for r in ratios) and elapsed < 60
    assert report(
        12,
        ok,
        f"mass drift {mass_drift:.2g} (tol 1e-9), L1 {l1:.4f} (tol 0.02), "
        f"refinement ratios 64->128 {ratios[0]:.2f}, 128->256 {ratios[1]:.2f} (need 4 +- 1); {elapsed:.2f}s",
    )
