"""Finite ergodic Markov chains.

Sampling, stationary distributions, mixing times, and empirical transition
estimation for chains over modes ``0 .. s-1``. Transition matrices are
row stochastic: ``T[i, j]`` is the probability of jumping from mode ``i``
to mode ``j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapExceeded, NotErgodic, ShapeMismatch

_ROW_SUM_TOL = 1e-12
_STATIONARY_TOL = 1e-10


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class MarkovChain:
    """Row-stochastic transition matrix over a finite mode set.

    Parameters
    ----------
    T : (s, s) array
        Row-stochastic transition probabilities. Every entry must lie in
        [0, 1] and each row must sum to 1 within 1e-12.
    """

    T: np.ndarray
    s: int = field(init=False)

    def __post_init__(self):
        T = np.asarray(self.T, dtype=float)
        if T.ndim != 2 or T.shape[0] != T.shape[1]:
            raise ShapeMismatch(f"transition matrix must be square, got {T.shape}")
        if T.shape[0] < 1:
            raise ShapeMismatch("chain needs at least one mode")
        if np.any(T < -_ROW_SUM_TOL) or np.any(T > 1 + _ROW_SUM_TOL):
            raise ValueError("transition probabilities must lie in [0, 1]")
        rows = T.sum(axis=1)
        if np.any(np.abs(rows - 1.0) > _ROW_SUM_TOL):
            raise ValueError(f"rows must sum to 1 within {_ROW_SUM_TOL}, got sums {rows}")
        object.__setattr__(self, "T", _freeze(T))
        object.__setattr__(self, "s", T.shape[0])


@dataclass(frozen=True)
class StationaryDistribution:
    """Invariant mode distribution of an ergodic chain."""

    pi: np.ndarray
    pi_min: float = field(init=False)

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        if np.any(pi < 0) or abs(pi.sum() - 1.0) > _STATIONARY_TOL:
            raise ValueError("stationary vector must be a probability distribution")
        object.__setattr__(self, "pi", _freeze(pi))
        object.__setattr__(self, "pi_min", float(pi.min()))


@dataclass(frozen=True)
class TransitionEstimate:
    """Empirical transition estimate with the counts behind it.

    ``chain.T[j] * visit_counts[j]`` recovers the integer transition counts
    for every visited row; rows in ``unvisited`` were never left from and
    are filled with the uniform distribution.
    """

    chain: MarkovChain
    transition_counts: np.ndarray
    visit_counts: np.ndarray
    unvisited: tuple[int, ...]


def _support_strongly_connected(adj: np.ndarray) -> bool:
    s = adj.shape[0]

    def reachable(a: np.ndarray) -> bool:
        seen = np.zeros(s, dtype=bool)
        seen[0] = True
        stack = [0]
        while stack:
            u = stack.pop()
            for v in np.flatnonzero(a[u]):
                if not seen[v]:
                    seen[v] = True
                    stack.append(int(v))
        return bool(seen.all())

    return reachable(adj) and reachable(adj.T)


def _period(adj: np.ndarray) -> int:
    # gcd of (level[u] + 1 - level[v]) over support edges, levels from a BFS
    # rooted at node 0; valid once the graph is strongly connected.
    s = adj.shape[0]
    level = np.full(s, -1, dtype=int)
    level[0] = 0
    queue = [0]
    while queue:
        u = queue.pop(0)
        for v in np.flatnonzero(adj[u]):
            if level[v] < 0:
                level[v] = level[u] + 1
                queue.append(int(v))
    g = 0
    for u in range(s):
        for v in np.flatnonzero(adj[u]):
            g = math.gcd(g, level[u] + 1 - level[v])
    return abs(g)


def is_ergodic(chain: MarkovChain) -> bool:
    """Exact combinatorial ergodicity test on the support graph.

    Irreducibility is checked by reachability, aperiodicity by the gcd of
    cycle lengths (period 1).
    """
    adj = chain.T > 0.0
    if not _support_strongly_connected(adj):
        return False
    return _period(adj) == 1


def stationary_distribution(chain: MarkovChain, check_ergodic: bool = True) -> StationaryDistribution:
    """Solve for the stationary distribution pi with pi^T T = pi^T.

    Uses a direct least-squares solve of the bordered system
    ``[T^T - I; 1^T] pi = [0; 1]`` rather than power iteration.

    Raises
    ------
    NotErgodic
        If the combinatorial ergodicity check fails (when enabled), or the
        solved vector has nonpositive entries or residual above 1e-10.
    """
    if check_ergodic and not is_ergodic(chain):
        raise NotErgodic("chain is not ergodic (reducible or periodic)")
    s = chain.s
    A = np.vstack([chain.T.T - np.eye(s), np.ones((1, s))])
    b = np.zeros(s + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    if np.any(pi <= 0):
        raise NotErgodic("stationary solve produced nonpositive entries")
    pi = pi / pi.sum()
    residual = float(np.abs(pi @ chain.T - pi).sum())
    if residual > _STATIONARY_TOL:
        raise NotErgodic(f"stationary residual {residual:.3e} exceeds {_STATIONARY_TOL}")
    return StationaryDistribution(pi=pi)


def mixing_time(chain: MarkovChain, epsilon: float = 0.5, cap: int = 10_000) -> int:
    """Smallest t <= cap with ``max_i || row_i(T^t) - pi ||_1 <= epsilon``.

    Computed by repeated matrix powering, starting from t = 1. The default
    threshold 0.5 on the unhalved l1 distance matches the conventional
    quarter-total-variation mixing time.

    Raises
    ------
    CapExceeded
        If no t <= cap meets the threshold.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    if cap < 1:
        raise ValueError("cap must be at least 1")
    pi = stationary_distribution(chain).pi
    power = np.eye(chain.s)
    for t in range(1, cap + 1):
        power = power @ chain.T
        if float(np.abs(power - pi).sum(axis=1).max()) <= epsilon:
            return t
    raise CapExceeded(f"chain did not mix to epsilon={epsilon} within {cap} steps")


def row_distances_to_stationary(chain: MarkovChain, horizon: int) -> np.ndarray:
    """``max_i || row_i(T^t) - pi ||_1`` for t = 1 .. horizon, via powering."""
    pi = stationary_distribution(chain).pi
    out = np.empty(horizon)
    power = np.eye(chain.s)
    for t in range(horizon):
        power = power @ chain.T
        out[t] = float(np.abs(power - pi).sum(axis=1).max())
    return out


def sample_path(
    chain: MarkovChain,
    initial_dist: np.ndarray,
    length: int,
    rng_seed: int | np.random.SeedSequence,
) -> np.ndarray:
    """Sample a mode sequence of the given length, deterministic in the seed.

    ``initial_dist`` may be a probability vector over modes or an integer
    mode index (treated as a point mass).
    """
    if length < 1:
        raise ValueError("length must be at least 1")
    rng = np.random.default_rng(rng_seed)
    modes = np.empty(length, dtype=np.int64)
    if np.isscalar(initial_dist) or getattr(initial_dist, "ndim", 1) == 0:
        modes[0] = int(initial_dist)
        if not 0 <= modes[0] < chain.s:
            raise ValueError(f"initial mode {modes[0]} out of range")
    else:
        dist = np.asarray(initial_dist, dtype=float)
        if dist.shape != (chain.s,):
            raise ShapeMismatch(f"initial distribution must have length {chain.s}")
        if np.any(dist < 0) or abs(dist.sum() - 1.0) > 1e-9:
            raise ValueError("initial distribution must be a probability vector")
        modes[0] = min(np.searchsorted(np.cumsum(dist), rng.random(), side="right"), chain.s - 1)
    cum = np.cumsum(chain.T, axis=1)
    draws = rng.random(length - 1)
    last = chain.s - 1
    for t in range(1, length):
        modes[t] = min(np.searchsorted(cum[modes[t - 1]], draws[t - 1], side="right"), last)
    return modes


def estimate_transition(modes: np.ndarray, num_modes: int | None = None) -> TransitionEstimate:
    """Empirical transition frequencies from an observed mode sequence.

    Entry (j, i) of the estimate is the number of observed j -> i
    transitions divided by the number of departures from j. Rows never
    departed from are returned uniform and flagged in ``unvisited``.
    """
    modes = np.asarray(modes, dtype=np.int64)
    if modes.ndim != 1 or modes.size < 2:
        raise ValueError("need a 1-d mode sequence of length >= 2")
    s = int(modes.max()) + 1 if num_modes is None else int(num_modes)
    if modes.min() < 0 or modes.max() >= s:
        raise ValueError("mode indices out of range")
    counts = np.zeros((s, s), dtype=np.int64)
    np.add.at(counts, (modes[:-1], modes[1:]), 1)
    visits = counts.sum(axis=1)
    T_hat = np.empty((s, s))
    unvisited = []
    for j in range(s):
        if visits[j] == 0:
            T_hat[j] = 1.0 / s
            unvisited.append(j)
        else:
            T_hat[j] = counts[j] / visits[j]
    return TransitionEstimate(
        chain=MarkovChain(T=T_hat),
        transition_counts=counts,
        visit_counts=visits,
        unvisited=tuple(unvisited),
    )
