"""Points on the probability simplex and the reference laws used as equilibrium targets."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special

from .errors import DomainError, InvalidDimensionError, NonFiniteDensityError

SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SimplexPoint:
    """Wealth fractions of ``N`` agents.

    The constructor is the single normalisation chokepoint: coordinates are
    divided by their sum unless that sum already equals one to within
    ``SUM_TOL``. Skipping the division in that case keeps coordinates that a
    dynamics step did not touch bit-identical.
    """

    coords: np.ndarray

    def __post_init__(self):
        x = np.array(self.coords, dtype=float)
        if x.ndim != 1 or x.size < 2:
            raise InvalidDimensionError(f"need at least 2 coordinates, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("coordinates must be finite")
        if np.any(x < 0):
            raise ValueError("coordinates must be non-negative")
        total = math.fsum(x)
        if total <= 0 or not math.isfinite(total):
            raise ValueError("coordinate sum must be positive and finite")
        if abs(total - 1.0) > SUM_TOL:
            x = x / total
        x.setflags(write=False)
        object.__setattr__(self, "coords", x)

    @classmethod
    def from_weights(cls, weights: Sequence[float]) -> "SimplexPoint":
        return cls(np.asarray(weights, dtype=float))

    @property
    def n_agents(self) -> int:
        return self.coords.size

    def is_interior(self) -> bool:
        return bool(np.all(self.coords > 0))

    def __len__(self):
        return self.coords.size

    def __getitem__(self, k):
        return self.coords[k]

    def __iter__(self):
        return iter(self.coords.tolist())

    def __repr__(self):
        return f"SimplexPoint({self.coords.tolist()!r})"


@dataclass(frozen=True)
class BetaMarginalSpec:
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"beta shapes must be positive, got a={self.a}, b={self.b}")

    @classmethod
    def uniform_marginal(cls, n_agents: int) -> "BetaMarginalSpec":
        """Law of one coordinate of a uniform point on the ``n_agents`` simplex."""
        if n_agents < 2:
            raise InvalidDimensionError("n_agents must be at least 2")
        return cls(1.0, float(n_agents - 1))


@dataclass(frozen=True)
class DirichletSpec:
    alphas: tuple

    def __post_init__(self):
        alphas = tuple(float(a) for a in self.alphas)
        if len(alphas) < 2:
            raise InvalidDimensionError("Dirichlet needs at least 2 shape parameters")
        if not all(a > 0 for a in alphas):
            raise ValueError("Dirichlet shapes must all be positive")
        object.__setattr__(self, "alphas", alphas)


def _check_rng(rng):
    if not isinstance(rng, np.random.Generator):
        raise TypeError("rng must be a numpy.random.Generator")


def uniform_simplex_array(n_agents: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``size`` uniform points on the simplex as rows of an array.

    Each row is ``W / sum(W)`` with ``W_i = -log(U_i)`` i.i.d. unit exponentials.
    """
    if n_agents < 2:
        raise InvalidDimensionError(f"n_agents must be at least 2, got {n_agents}")
    _check_rng(rng)
    # 1 - U lies in (0, 1], so the log is finite
    w = -np.log1p(-rng.random((size, n_agents)))
    return w / w.sum(axis=1, keepdims=True)


def sample_uniform_simplex(n_agents: int, rng: np.random.Generator) -> SimplexPoint:
    """One uniform draw from the simplex of dimension ``n_agents - 1``."""
    return SimplexPoint(uniform_simplex_array(n_agents, 1, rng)[0])


def beta_cdf(spec: BetaMarginalSpec, x):
    """Regularised incomplete beta function ``I_x(a, b)``.

    Works elementwise on arrays. When ``a == 1`` the closed form
    ``1 - (1 - x)**b`` is returned, and ``x**a`` when ``b == 1``.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(np.isnan(xa)) or np.any(xa < 0) or np.any(xa > 1):
        raise DomainError("beta_cdf is defined on [0, 1]")
    if spec.a == 1.0:
        out = 1.0 - (1.0 - xa) ** spec.b
    elif spec.b == 1.0:
        out = xa ** spec.a
    else:
        out = special.betainc(spec.a, spec.b, xa)
    return float(out) if out.ndim == 0 else out


def dirichlet_log_density(spec: DirichletSpec, p: SimplexPoint) -> float:
    alphas = np.array(spec.alphas)
    x = p.coords
    if alphas.size != x.size:
        raise InvalidDimensionError(
            f"{alphas.size} shape parameters for a point with {x.size} coordinates"
        )
    on_face = x == 0
    if np.any(on_face & (alphas < 1)):
        raise NonFiniteDensityError("density diverges on a face where some alpha < 1")
    log_norm = special.gammaln(alphas.sum()) - special.gammaln(alphas).sum()
    exps = alphas - 1
    with np.errstate(divide="ignore"):
        logs = np.where(exps == 0, 0.0, exps * np.log(np.where(on_face, 1.0, x)))
    if np.any(on_face & (alphas > 1)):
        return -math.inf
    return float(log_norm + logs.sum())
