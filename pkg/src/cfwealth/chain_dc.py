"""Coagulation-fragmentation chain on the continuous simplex, plus deterministic routing.

A step picks an ordered pair ``(i, j)``, pools ``s = x_i + x_j`` and splits it
as ``x_i = u s``, ``x_j = (1 - u) s`` with ``u ~ U[0, 1]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InteriorRequiredError, InvalidDimensionError
from .simplex import SimplexPoint

_CHUNK = 1 << 16


@dataclass(frozen=True)
class DcStepRecord:
    i: int
    j: int
    u: float

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError("i and j must differ")
        if not 0.0 <= self.u <= 1.0:
            raise ValueError(f"fragmentation fraction {self.u} outside [0, 1]")


@dataclass(frozen=True)
class RoutePlan:
    """Ordered ``(i, j, m)`` coagulation-fragmentation moves; indices are original labels."""

    steps: tuple

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)


def coag_frag(x: np.ndarray, i: int, j: int, u: float) -> np.ndarray:
    """Return a copy of ``x`` with ``x_i = u s`` and ``x_j = s - x_i``, ``s = x_i + x_j``."""
    out = np.array(x, dtype=float, copy=True)
    s = out[i] + out[j]
    xi = u * s
    out[i] = xi
    # s - u s instead of (1 - u) s keeps x_i + x_j equal to s up to one rounding
    out[j] = s - xi
    return out


def _draw_pairs(n_agents: int, size: int, rng: np.random.Generator):
    i = rng.integers(n_agents, size=size)
    j = rng.integers(n_agents - 1, size=size)
    j += j >= i
    return i, j


def dc_step(state: SimplexPoint, rng: np.random.Generator) -> tuple[SimplexPoint, DcStepRecord]:
    n_agents = state.n_agents
    i = int(rng.integers(n_agents))
    j = int(rng.integers(n_agents - 1))
    if j >= i:
        j += 1
    u = float(rng.random())
    return SimplexPoint(coag_frag(state.coords, i, j, u)), DcStepRecord(i, j, u)


def dc_step_batch(states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One step for each row of ``states`` (independent replicas)."""
    states = np.array(states, dtype=float, copy=True)
    r, n_agents = states.shape
    rows = np.arange(r)
    i, j = _draw_pairs(n_agents, r, rng)
    u = rng.random(r)
    s = states[rows, i] + states[rows, j]
    xi = u * s
    states[rows, i] = xi
    states[rows, j] = s - xi
    return states


def run_dc_array(initial, steps: int, rng: np.random.Generator, thin: int = 1) -> np.ndarray:
    """Trajectory as an array with one row per kept state (every ``thin``-th, initial included)."""
    if steps < 0 or thin < 1:
        raise ValueError("need steps >= 0 and thin >= 1")
    x0 = initial.coords if isinstance(initial, SimplexPoint) else np.asarray(initial, dtype=float)
    n_agents = x0.size
    x = x0.tolist()
    out = np.empty((steps // thin + 1, n_agents))
    out[0] = x
    row = 1
    done = 0
    while done < steps:
        m = min(_CHUNK, steps - done)
        ii, jj = _draw_pairs(n_agents, m, rng)
        uu = rng.random(m)
        for t, (i, j, u) in enumerate(zip(ii.tolist(), jj.tolist(), uu.tolist()), start=done + 1):
            s = x[i] + x[j]
            xi = u * s
            x[i] = xi
            x[j] = s - xi
            if t % thin == 0:
                out[row] = x
                row += 1
        done += m
    return out


def run_dc(initial: SimplexPoint, steps: int, rng: np.random.Generator, thin: int = 1) -> list[SimplexPoint]:
    return [SimplexPoint(row) for row in run_dc_array(initial, steps, rng, thin)]


def hitting_time(
    initial,
    in_set: Callable[[np.ndarray], bool],
    max_steps: int,
    rng: np.random.Generator,
) -> int | None:
    """First step ``t >= 0`` at which the chain is in the set, or ``None`` if not reached."""
    x0 = initial.coords if isinstance(initial, SimplexPoint) else np.asarray(initial, dtype=float)
    x = np.array(x0, dtype=float)
    if in_set(x):
        return 0
    n_agents = x.size
    done = 0
    while done < max_steps:
        m = min(4096, max_steps - done)
        ii, jj = _draw_pairs(n_agents, m, rng)
        uu = rng.random(m)
        for t, (i, j, u) in enumerate(zip(ii.tolist(), jj.tolist(), uu.tolist()), start=done + 1):
            s = x[i] + x[j]
            xi = u * s
            x[i] = xi
            x[j] = s - xi
            if in_set(x):
                return t
        done += m
    return None


def deterministic_route(source: SimplexPoint, target: SimplexPoint) -> RoutePlan:
    """Build ``N - 1`` moves taking ``source`` exactly to ``target``.

    A carrier coordinate (initially label 0) walks through the fresh labels in
    increasing order. Each move pools the carrier with a fresh label ``q`` and
    pins one of the two to its target value. The carrier is pinned when
    possible, and the carrier then moves on to ``q``. Otherwise ``q`` is
    pinned. For ``N = 3`` with feasible identity order this is the two-step map
    that keeps the third coordinate out of the first move.

    A valid move always exists. If neither the carrier nor any fresh label
    could be pinned, summing the violated inequalities would make the target
    mass exceed the current mass.
    """
    x = source.coords.astype(float).copy()
    t = target.coords
    n_agents = x.size
    if t.size != n_agents:
        raise InvalidDimensionError("source and target have different dimensions")
    if not (source.is_interior() and target.is_interior()):
        raise InteriorRequiredError("deterministic routing needs interior source and target")
    carrier = 0
    fresh = list(range(1, n_agents))
    steps = []
    while fresh:
        move = None
        for q in fresh:
            pool = x[carrier] + x[q]
            if t[carrier] <= pool:
                move = (carrier, q, q)
                break
        if move is None:
            for q in fresh:
                if t[q] <= x[carrier] + x[q]:
                    move = (q, carrier, q)
                    break
        if move is None:  # pragma: no cover - excluded by the mass argument above
            raise RuntimeError("no admissible routing move")
        i, j, used = move
        pool = x[i] + x[j]
        m = min(1.0, t[i] / pool)
        x = coag_frag(x, i, j, m)
        steps.append((int(i), int(j), float(m)))
        fresh.remove(used)
        if i == carrier:
            carrier = j
    return RoutePlan(tuple(steps))


def apply_route(source: SimplexPoint, plan: RoutePlan) -> SimplexPoint:
    x = source.coords.astype(float).copy()
    n_agents = x.size
    for i, j, m in plan:
        if not (0 <= i < n_agents and 0 <= j < n_agents) or i == j:
            raise IndexError(f"move ({i}, {j}) invalid for {n_agents} coordinates")
        if not 0.0 <= m <= 1.0:
            raise ValueError(f"fraction {m} outside [0, 1]")
        x = coag_frag(x, i, j, m)
    return SimplexPoint(x)
