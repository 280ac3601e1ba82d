"""Wealth-exchange models on the simplex: discrete and continuous coagulation-fragmentation
chains, a kinetic exchange simulator, a Fokker-Planck solver and the statistics that check them."""

from .chain_dc import (
    DcStepRecord,
    RoutePlan,
    apply_route,
    coag_frag,
    dc_step,
    deterministic_route,
    hitting_time,
    run_dc,
    run_dc_array,
)
from .chain_dd import (
    DiscretePoint,
    build_transition_matrix,
    dd_step,
    dd_transition_prob,
    enumerate_states,
    preimage_cardinality,
    rank_state,
    run_dd,
    stationary_distribution,
    unrank_state,
)
from .fokker_planck import DensityField, FpConfig, fp_solve, fp_step, stationary_solution
from .kinetic import ExchangeParams, WealthPopulation, dsmc_run, moment_rate
from .simplex import BetaMarginalSpec, DirichletSpec, SimplexPoint, beta_cdf, dirichlet_log_density, sample_uniform_simplex
from .stats import (
    EmpiricalSample,
    dd_dc_convergence,
    fit_exponential_tail,
    fit_log_survival,
    ks_statistic,
    return_time_survival,
    total_variation,
)

__version__ = "0.1.0"
