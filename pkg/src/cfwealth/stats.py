"""Goodness-of-fit, distances and tail diagnostics used to certify equilibrium claims."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np
from scipy import stats as sps

from .chain_dc import dc_step_batch
from .chain_dd import dd_step_batch, sample_uniform_states
from .errors import InsufficientDataError
from .simplex import SimplexPoint, uniform_simplex_array

# asymptotic Kolmogorov distribution: P(sqrt(n) D > 1.628) = 0.01
KS_CRIT_1PCT = 1.628


@dataclass(frozen=True)
class EmpiricalSample:
    values: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size == 0:
            raise InsufficientDataError("empty sample")
        object.__setattr__(self, "values", v)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float).ravel()
            if w.shape != v.shape:
                raise ValueError("weights must match values in length")
            if np.any(w <= 0):
                raise ValueError("weights must be positive")
            object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.values.size


def _as_sample(sample) -> EmpiricalSample:
    return sample if isinstance(sample, EmpiricalSample) else EmpiricalSample(sample)


class KsResult(NamedTuple):
    statistic: float
    critical_value: float
    n: int

    @property
    def passed(self) -> bool:
        return self.statistic < self.critical_value


@dataclass(frozen=True)
class TailFit:
    rate: float
    intercept: float
    r_squared: float
    support_lo: float


def _ecdf(sample: EmpiricalSample):
    """Distinct sorted values with the ECDF just after and just before each."""
    order = np.argsort(sample.values, kind="stable")
    x = sample.values[order]
    w = np.ones_like(x) if sample.weights is None else sample.weights[order]
    cum = np.cumsum(w) / w.sum()
    last = np.r_[np.flatnonzero(np.diff(x)), x.size - 1]
    xs = x[last]
    after = cum[last]
    before = np.r_[0.0, after[:-1]]
    return xs, after, before


def ks_statistic(sample, cdf: Callable) -> KsResult:
    """One-sample Kolmogorov-Smirnov distance ``sup |F_n - F|``.

    ``cdf`` is called once on the array of distinct sample values. Ties and
    weights are handled by evaluating the ECDF on both sides of every jump.
    """
    s = _as_sample(sample)
    xs, after, before = _ecdf(s)
    f = np.asarray(cdf(xs), dtype=float)
    d = max(np.max(after - f), np.max(f - before), 0.0)
    n = len(s)
    return KsResult(float(d), KS_CRIT_1PCT / math.sqrt(n), n)


def ks_two_sample(a, b) -> KsResult:
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise InsufficientDataError("empty sample")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    d = float(np.max(np.abs(fa - fb)))
    crit = KS_CRIT_1PCT * math.sqrt((a.size + b.size) / (a.size * b.size))
    return KsResult(d, crit, min(a.size, b.size))


def total_variation(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {q.shape}")
    for name, v in (("p", p), ("q", q)):
        if abs(v.sum() - 1.0) > 1e-9:
            raise ValueError(f"{name} does not sum to 1")
    return float(0.5 * np.abs(p - q).sum())


def return_times(inside: np.ndarray) -> np.ndarray:
    """Gaps between consecutive visits in a boolean occupation sequence."""
    inside = np.asarray(inside, dtype=bool)
    if inside.size == 0 or not inside[0]:
        raise ValueError("trajectory must start inside the set")
    visits = np.flatnonzero(inside)
    if visits.size < 2:
        raise InsufficientDataError("no completed excursion")
    return np.diff(visits)


def survival_function(times: np.ndarray) -> list[tuple[int, float]]:
    """``[(t, P(tau > t)) for t = 0 .. max(tau)]``."""
    times = np.asarray(times, dtype=np.int64)
    counts = np.bincount(times)
    surv = 1.0 - np.cumsum(counts) / times.size
    return [(t, float(max(s, 0.0))) for t, s in enumerate(surv)]


def return_time_survival(trajectory, set_predicate: Callable, vectorized: bool = False) -> list[tuple[int, float]]:
    """Empirical survival of return times to a set, pooled over all excursions.

    ``trajectory`` is a sequence of ``SimplexPoint`` or a 2-D array of rows. With
    ``vectorized=True`` the predicate receives the whole array and must return
    one boolean per row.
    """
    if isinstance(trajectory, np.ndarray):
        arr = trajectory
    else:
        arr = np.array([p.coords if isinstance(p, SimplexPoint) else p for p in trajectory])
    if vectorized:
        inside = np.asarray(set_predicate(arr), dtype=bool)
    else:
        inside = np.fromiter((bool(set_predicate(row)) for row in arr), dtype=bool, count=len(arr))
    return survival_function(return_times(inside))


def _line_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    res = sps.linregress(x, y)
    r2 = float(res.rvalue**2) if np.isfinite(res.rvalue) else 0.0
    return float(res.slope), float(res.intercept), min(max(r2, 0.0), 1.0)


def fit_log_survival(survival: Sequence[tuple[int, float]], n_samples: int, min_surviving: int = 50) -> TailFit:
    """Least-squares line through ``(t, log S(t))`` where at least ``min_surviving`` samples remain."""
    t = np.array([p[0] for p in survival], dtype=float)
    s = np.array([p[1] for p in survival], dtype=float)
    keep = s * n_samples >= min_surviving
    if keep.sum() < 3:
        raise InsufficientDataError("fewer than 3 survival points with enough samples")
    slope, icpt, r2 = _line_fit(t[keep], np.log(s[keep]))
    return TailFit(slope, icpt, r2, float(t[keep][0]))


def fit_exponential_tail(sample, quantile_lo: float = 0.5, min_points: int = 100) -> TailFit:
    """Fit ``log P(X > x) ~ rate * x + intercept`` above the ``quantile_lo`` quantile."""
    if not 0 < quantile_lo < 1:
        raise ValueError("quantile_lo must lie in (0, 1)")
    x = np.sort(_as_sample(sample).values)
    n = x.size
    cutoff = np.quantile(x, quantile_lo)
    # survival just after the k-th order statistic; the largest point (S = 0) is dropped
    surv = (n - np.arange(1, n + 1)) / n
    keep = (x >= cutoff) & (surv > 0)
    if keep.sum() < min_points:
        raise InsufficientDataError(f"only {int(keep.sum())} tail points above the cutoff")
    slope, icpt, r2 = _line_fit(x[keep], np.log(surv[keep]))
    return TailFit(slope, icpt, r2, float(cutoff))


class ConvergencePoint(NamedTuple):
    n: int
    distance: float


def dd_dc_convergence(
    n_list: Iterable[int],
    n_agents: int,
    k_steps: int,
    replicas: int,
    rng: np.random.Generator,
    coordinate: int = 0,
) -> list[ConvergencePoint]:
    """Two-sample KS distance between ``X^(n)_k / n`` and the continuous chain at step ``k``.

    Both chains start from the uniform law on their own simplex, drawn
    independently, so each row runs ``replicas`` copies of each chain.
    """
    if replicas < 100:
        raise InsufficientDataError("need at least 100 replicas")
    out = []
    for n in n_list:
        if n < 1:
            raise ValueError("every n must be at least 1")
        dd = sample_uniform_states(n_agents, n, replicas, rng)
        dc = uniform_simplex_array(n_agents, replicas, rng)
        for _ in range(k_steps):
            dd = dd_step_batch(dd, rng)
            dc = dc_step_batch(dc, rng)
        d = ks_two_sample(dd[:, coordinate] / n, dc[:, coordinate]).statistic
        out.append(ConvergencePoint(int(n), d))
    return out


def convergence_trend_ok(points: Sequence[ConvergencePoint]) -> tuple[bool, float]:
    """Distance at the largest n is no larger than at the smallest, and Spearman rho <= 0."""
    pts = sorted(points)
    ns = [p.n for p in pts]
    ds = [p.distance for p in pts]
    rho = float(sps.spearmanr(ns, ds).statistic) if len(pts) > 2 else -1.0
    return (ds[-1] <= ds[0] and rho <= 0), rho
