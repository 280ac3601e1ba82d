"""Agent-based simulation of binary wealth exchange with propensity to invest ``lam``.

An interaction between wealths ``v`` and ``w`` produces::

    v* = (1 - lam) v + lam w + eta~ v
    w* = (1 - lam) w + lam v + eta  w

with ``eta``, ``eta~`` i.i.d. draws from a bounded, mean-zero noise law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

NOISE_KINDS = ("zero", "two_point", "uniform")


@dataclass(frozen=True)
class ExchangeParams:
    lam: float
    noise: str = "zero"
    sigma: float = 0.0

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ValueError("; ".join(problems))

    def problems(self) -> list[str]:
        return exchange_param_problems(self.lam, self.noise, self.sigma)

    @property
    def noise_half_width(self) -> float:
        if self.noise == "two_point":
            return self.sigma
        if self.noise == "uniform":
            return self.sigma * math.sqrt(3.0)
        return 0.0

    def draw_noise(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.noise == "zero":
            return np.zeros(size)
        if self.noise == "two_point":
            return np.where(rng.random(size) < 0.5, -self.sigma, self.sigma)
        h = self.noise_half_width
        return rng.uniform(-h, h, size)


def exchange_param_problems(lam, noise, sigma) -> list[str]:
    """Human-readable violations of the exchange-parameter invariants (empty when valid)."""
    out = []
    if not (isinstance(lam, (int, float)) and 0 < lam < 1):
        out.append("lambda must lie in (0,1)")
    if noise not in NOISE_KINDS:
        out.append(f"noise must be one of {', '.join(NOISE_KINDS)}")
        return out
    if not (isinstance(sigma, (int, float)) and sigma >= 0):
        out.append("sigma must be non-negative")
        return out
    if noise == "zero" and sigma != 0:
        out.append("sigma must be 0 for zero noise")
    if noise == "zero" or not isinstance(lam, (int, float)):
        return out
    bound = 1 - lam
    if noise == "two_point" and sigma > bound:
        out.append(f"two_point noise needs sigma <= 1 - lambda = {bound:g} so wealths stay non-negative")
    if noise == "uniform" and sigma * math.sqrt(3.0) > bound:
        out.append(
            f"uniform noise needs sigma*sqrt(3) <= 1 - lambda = {bound:g} so wealths stay non-negative"
        )
    return out


@dataclass
class WealthPopulation:
    wealths: np.ndarray
    time: float = 0.0
    initial_mean: float = field(default=float("nan"))

    def __post_init__(self):
        w = np.array(self.wealths, dtype=float)
        if w.ndim != 1 or w.size < 2:
            raise ValueError("need at least two agents")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("wealths must be finite and non-negative")
        self.wealths = w
        if math.isnan(self.initial_mean):
            self.initial_mean = math.fsum(w) / w.size

    @classmethod
    def exponential(cls, n_agents: int, rng: np.random.Generator, mean: float = 1.0) -> "WealthPopulation":
        return cls(rng.exponential(mean, n_agents))

    @property
    def size(self) -> int:
        return self.wealths.size


def exchange_pair(v: float, w: float, params: ExchangeParams, rng: np.random.Generator) -> tuple[float, float]:
    eta_v, eta_w = params.draw_noise(rng, 2)
    lam = params.lam
    v_star = (1 - lam) * v + lam * w + eta_v * v
    w_star = (1 - lam) * w + lam * v + eta_w * w
    return float(v_star), float(w_star)


def moment_rate(s: float, lam: float) -> float:
    """``(1 - lam)**s + lam**s - 1``: exponential rate of the ``s``-th moment without noise."""
    if s <= 0:
        raise ValueError("s must be positive")
    if not 0 < lam < 1:
        raise ValueError("lambda must lie in (0,1)")
    return (1 - lam) ** s + lam**s - 1


def empirical_moment(pop, s: float) -> float:
    w = pop.wealths if isinstance(pop, WealthPopulation) else np.asarray(pop, dtype=float)
    if s < 0:
        raise ValueError("s must be non-negative")
    return float(np.mean(w**s))


@dataclass
class MomentSeries:
    s_values: tuple
    t: list = field(default_factory=list)
    m1: list = field(default_factory=list)
    m2: list = field(default_factory=list)
    ms: list = field(default_factory=list)

    def record(self, t: float, w: np.ndarray):
        self.t.append(t)
        self.m1.append(math.fsum(w) / w.size)
        self.m2.append(float(np.mean(w * w)))
        self.ms.append([float(np.mean(w**s)) for s in self.s_values])

    def as_array(self) -> np.ndarray:
        cols = [np.array(self.t), np.array(self.m1), np.array(self.m2)]
        if self.s_values:
            cols.append(np.array(self.ms).reshape(len(self.t), -1))
        return np.column_stack(cols)

    @property
    def variance(self) -> np.ndarray:
        return np.array(self.m2) - np.array(self.m1) ** 2


def dsmc_run(
    pop: WealthPopulation,
    t_end: float,
    params: ExchangeParams,
    rng: np.random.Generator,
    record_dt: float = 0.1,
    moments: Sequence[float] = (),
) -> tuple[WealthPopulation, MomentSeries]:
    """Direct simulation of the exchange process up to kinetic time ``t_end``.

    Each event picks a uniformly random unordered pair and advances time by
    ``2 / N``. Moments are recorded at the start and whenever an event crosses
    a multiple of ``record_dt``.
    """
    if t_end < pop.time:
        raise ValueError("t_end precedes the population time")
    n_agents = pop.size
    dt_event = 2.0 / n_agents
    n_events = int(round((t_end - pop.time) / dt_event))
    lam = params.lam
    keep = 1 - lam
    w = pop.wealths.tolist()
    series = MomentSeries(tuple(moments))
    series.record(pop.time, pop.wealths)
    events_per_record = max(1, int(round(record_dt / dt_event)))
    done = 0
    chunk = 1 << 15
    while done < n_events:
        m = min(chunk, n_events - done)
        ii = rng.integers(n_agents, size=m)
        jj = rng.integers(n_agents - 1, size=m)
        jj += jj >= ii
        eta_i = params.draw_noise(rng, m).tolist()
        eta_j = params.draw_noise(rng, m).tolist()
        for k, (i, j) in enumerate(zip(ii.tolist(), jj.tolist())):
            v = w[i]
            u = w[j]
            w[i] = keep * v + lam * u + eta_i[k] * v
            w[j] = keep * u + lam * v + eta_j[k] * u
            if (done + k + 1) % events_per_record == 0:
                series.record(pop.time + (done + k + 1) * dt_event, np.array(w))
        done += m
    final_t = pop.time + n_events * dt_event
    if series.t[-1] != final_t:
        series.record(final_t, np.array(w))
    out = WealthPopulation(np.array(w), final_t, pop.initial_mean)
    return out, series


def fit_variance_rate(series: MomentSeries, t_lo: float, t_hi: float) -> float:
    """Slope of ``log(M2 - M1^2)`` against time on ``[t_lo, t_hi]``."""
    t = np.array(series.t)
    var = series.variance
    sel = (t >= t_lo) & (t <= t_hi) & (var > 0)
    if sel.sum() < 3:
        raise ValueError("not enough recorded points in the fitting window")
    return float(np.polyfit(t[sel], np.log(var[sel]), 1)[0])
