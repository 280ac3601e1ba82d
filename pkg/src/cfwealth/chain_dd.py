"""Coagulation-fragmentation chain on the integer simplex ``{n in N_0^N : sum(n) = n_coins}``.

One step picks an ordered pair ``(i, j)``, ``i != j``, pools ``n_i + n_j`` coins
and gives agent ``i`` a uniform integer in ``{0, ..., (n_i + n_j - 1) v 0}``;
agent ``j`` receives the rest. Indices are 0-based throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy import sparse

from .errors import (
    ConvergenceError,
    EmptyPreimageError,
    InvalidDimensionError,
    StateSpaceTooLargeError,
)

DEFAULT_STATE_CAP = 10**6


@dataclass(frozen=True)
class DiscretePoint:
    counts: tuple

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if len(counts) < 2:
            raise InvalidDimensionError("need at least 2 agents")
        if any(c < 0 for c in counts):
            raise ValueError(f"counts must be non-negative: {counts}")
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return sum(self.counts)

    @property
    def n_agents(self) -> int:
        return len(self.counts)

    def __len__(self):
        return len(self.counts)

    def __getitem__(self, k):
        return self.counts[k]


@dataclass(frozen=True)
class DdStepRecord:
    i: int
    j: int
    new_i: int
    new_j: int


def _fragment(state: tuple, i: int, j: int, new_i: int) -> tuple:
    s = state[i] + state[j]
    out = list(state)
    out[i] = new_i
    out[j] = s - new_i
    return tuple(out)


def dd_step(state: DiscretePoint, rng: np.random.Generator) -> tuple[DiscretePoint, DdStepRecord]:
    n_agents = state.n_agents
    i = int(rng.integers(n_agents))
    j = int(rng.integers(n_agents - 1))
    if j >= i:
        j += 1
    s = state.counts[i] + state.counts[j]
    new_i = int(rng.integers(max(s, 1)))
    new = _fragment(state.counts, i, j, new_i)
    return DiscretePoint(new), DdStepRecord(i, j, new_i, s - new_i)


def run_dd(initial: DiscretePoint, steps: int, rng: np.random.Generator, thin: int = 1) -> np.ndarray:
    """Simulate ``steps`` transitions; return every ``thin``-th state (initial included) as rows."""
    if steps < 0 or thin < 1:
        raise ValueError("need steps >= 0 and thin >= 1")
    n_agents = initial.n_agents
    x = list(initial.counts)
    out = np.empty((steps // thin + 1, n_agents), dtype=np.int64)
    out[0] = x
    row = 1
    chunk = 1 << 16
    done = 0
    while done < steps:
        m = min(chunk, steps - done)
        ii = rng.integers(n_agents, size=m)
        jj = rng.integers(n_agents - 1, size=m)
        jj += jj >= ii
        uu = rng.random(m)
        for t, (i, j, u) in enumerate(zip(ii.tolist(), jj.tolist(), uu.tolist()), start=done + 1):
            s = x[i] + x[j]
            # floor(u * s) is uniform on {0, ..., s - 1}; s == 0 leaves both at 0
            a = int(u * s)
            x[i] = a
            x[j] = s - a
            if t % thin == 0:
                out[row] = x
                row += 1
        done += m
    return out


def dd_step_batch(states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Advance independent replicas (rows of an integer array) by one step each."""
    states = np.array(states, dtype=np.int64, copy=True)
    r, n_agents = states.shape
    rows = np.arange(r)
    i = rng.integers(n_agents, size=r)
    j = rng.integers(n_agents - 1, size=r)
    j += j >= i
    s = states[rows, i] + states[rows, j]
    new_i = rng.integers(np.maximum(s, 1))
    states[rows, i] = new_i
    states[rows, j] = s - new_i
    return states


def _check_same_space(a: DiscretePoint, b: DiscretePoint):
    if a.n_agents != b.n_agents:
        raise InvalidDimensionError(f"{a.n_agents} vs {b.n_agents} agents")


def dd_transition_prob(frm: DiscretePoint, to: DiscretePoint) -> float:
    """Exact one-step probability ``P(frm -> to)``.

    Sums over ordered pairs ``(i, j)`` the weight
    ``1/(N(N-1)) * (1{n_i+n_j >= 1, n'_j >= 1} / (n_i+n_j) + 1{n_i+n_j = 0})``
    subject to ``n'_i + n'_j = n_i + n_j`` and ``n'_k = n_k`` elsewhere.
    Pairs that cannot satisfy the constraints contribute zero and are skipped.
    """
    _check_same_space(frm, to)
    # the step conserves coins, so a change of total is simply unreachable
    if frm.total != to.total:
        return 0.0
    a, b = frm.counts, to.counts
    n_agents = len(a)
    diff = [k for k in range(n_agents) if a[k] != b[k]]
    if len(diff) > 2:
        return 0.0
    pair_weight = 1.0 / (n_agents * (n_agents - 1))
    if len(diff) == 2:
        pairs = [(diff[0], diff[1]), (diff[1], diff[0])]
    elif len(diff) == 1:
        # total is conserved, so a single differing coordinate is impossible
        return 0.0
    else:
        pairs = [(i, j) for i in range(n_agents) for j in range(n_agents) if i != j]
    total = 0.0
    for i, j in pairs:
        s = a[i] + a[j]
        if s != b[i] + b[j]:
            continue
        if s == 0:
            total += pair_weight
        elif b[j] >= 1:
            total += pair_weight / s
    return total


def preimage_cardinality(to: DiscretePoint, i: int, j: int) -> int:
    """Number of states that reach ``to`` by coagulating and fragmenting ``(i, j)``.

    Every state agreeing with ``to`` off ``{i, j}`` and with the same pair sum
    ``s`` qualifies, so the count is ``s + 1``. Note this is one more than
    ``s v 1``, which is why column sums of the kernel exceed one at states
    where ``n'_j >= 1``.
    """
    if i == j:
        raise ValueError("i and j must differ")
    if to.counts[j] == 0 and to.counts[i] >= 1:
        raise EmptyPreimageError(f"agent {j} picked second cannot end with 0 coins when agent {i} has some")
    return to.counts[i] + to.counts[j] + 1


def state_count(n_agents: int, n_coins: int) -> int:
    return math.comb(n_coins + n_agents - 1, n_agents - 1)


def _check_size(n_agents: int, n_coins: int, cap: int) -> int:
    if n_agents < 2:
        raise InvalidDimensionError("n_agents must be at least 2")
    if n_coins < 0:
        raise ValueError("n_coins must be non-negative")
    size = state_count(n_agents, n_coins)
    if size > cap:
        raise StateSpaceTooLargeError(f"{size} states exceeds cap {cap}")
    return size


def _compositions(n_agents: int, n_coins: int) -> Iterator[tuple]:
    if n_agents == 1:
        yield (n_coins,)
        return
    for first in range(n_coins + 1):
        for rest in _compositions(n_agents - 1, n_coins - first):
            yield (first,) + rest


def enumerate_states(n_agents: int, n_coins: int, cap: int = DEFAULT_STATE_CAP) -> list[DiscretePoint]:
    """All states in lexicographic order."""
    _check_size(n_agents, n_coins, cap)
    return [DiscretePoint(c) for c in _compositions(n_agents, n_coins)]


def rank_state(counts: Sequence[int]) -> int:
    """Lexicographic index of ``counts`` among states with the same length and total."""
    n_agents = len(counts)
    remaining = sum(counts)
    rank = 0
    for k in range(n_agents - 1):
        c = counts[k]
        dims = n_agents - k
        # states whose k-th coordinate is below c (hockey-stick identity)
        rank += math.comb(remaining + dims - 1, dims - 1) - math.comb(remaining - c + dims - 1, dims - 1)
        remaining -= c
    return rank


def unrank_state(rank: int, n_agents: int, n_coins: int) -> tuple:
    if not 0 <= rank < state_count(n_agents, n_coins):
        raise IndexError(f"rank {rank} out of range")
    counts = []
    remaining = n_coins
    for k in range(n_agents - 1):
        dims = n_agents - k
        c = 0
        while True:
            block = math.comb(remaining - c + dims - 2, dims - 2)
            if rank < block:
                break
            rank -= block
            c += 1
        counts.append(c)
        remaining -= c
    counts.append(remaining)
    return tuple(counts)


def build_transition_matrix(n_agents: int, n_coins: int, cap: int = DEFAULT_STATE_CAP, as_sparse: bool = False):
    """Matrix ``M[a, b] = dd_transition_prob(state_a, state_b)`` in lexicographic state order.

    Only targets that differ from the source in at most one pair of coordinates
    can carry mass, so each row evaluates the exact probability on those
    candidates alone.
    """
    size = _check_size(n_agents, n_coins, cap)
    rows, cols, vals = [], [], []
    for a, counts in enumerate(_compositions(n_agents, n_coins)):
        frm = DiscretePoint(counts)
        targets = {counts}
        for i in range(n_agents):
            for j in range(i + 1, n_agents):
                s = counts[i] + counts[j]
                for new_i in range(s + 1):
                    targets.add(_fragment(counts, i, j, new_i))
        for t in targets:
            p = dd_transition_prob(frm, DiscretePoint(t))
            if p > 0:
                rows.append(a)
                cols.append(rank_state(t))
                vals.append(p)
    mat = sparse.csr_matrix((vals, (rows, cols)), shape=(size, size))
    return mat if as_sparse else mat.toarray()


def stationary_distribution(matrix, tol: float = 1e-13, max_iter: int = 10**6, initial=None) -> np.ndarray:
    """Power iteration ``pi <- pi M`` until successive iterates are within ``tol`` in total variation.

    Starts from the uniform vector unless ``initial`` is given. The result is a
    fixed point of the iteration; it says nothing about uniqueness.
    """
    m = matrix if sparse.issparse(matrix) else np.asarray(matrix, dtype=float)
    size = m.shape[0]
    if m.shape != (size, size):
        raise ValueError("matrix must be square")
    pi = np.full(size, 1.0 / size) if initial is None else np.asarray(initial, dtype=float).copy()
    mt = m.T
    for _ in range(max_iter):
        nxt = mt @ pi
        if 0.5 * np.abs(nxt - pi).sum() < tol:
            return nxt
        pi = nxt
    raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations")


def sample_uniform_states(n_agents: int, n_coins: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draws from the integer simplex via stars and bars (rows of an array)."""
    slots = n_coins + n_agents - 1
    bars = np.empty((size, n_agents - 1), dtype=np.int64)
    todo = np.arange(size)
    while todo.size:
        draw = np.sort(rng.integers(slots, size=(todo.size, n_agents - 1)), axis=1)
        ok = np.all(np.diff(draw, axis=1) > 0, axis=1) if n_agents > 2 else np.ones(todo.size, bool)
        bars[todo[ok]] = draw[ok]
        todo = todo[~ok]
    edges = np.hstack([np.full((size, 1), -1), bars, np.full((size, 1), slots)])
    return np.diff(edges, axis=1) - 1
