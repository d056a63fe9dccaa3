"""Continuous-time Markov chain assembly and solution.

Generators are stored as sparse off-diagonal rate matrices; the diagonal is
implicit (minus the row's exit rate). Stationary vectors come either from
GTH elimination (dense, subtraction free) or from power iteration on the
uniformized chain. Transient vectors use uniformization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.stats import poisson

from .errors import (
    NegativeTime,
    NoConvergence,
    NonPositiveRate,
    ReducibleChain,
    SelfLoop,
    TooLargeForDirect,
    UnknownState,
)

DIRECT_CAP = 5000
RESIDUAL_TOL = 1e-12
MAX_ITERATIONS = 10_000_000
UNIFORMIZATION_FACTOR = 1.01
TRANSIENT_TOL = 1e-10


class StateSpace:
    """Ordered, duplicate-free collection of hashable state descriptors."""

    def __init__(self, states: Iterable[Hashable]):
        self.states = tuple(states)
        self._index = {}
        for i, s in enumerate(self.states):
            if s in self._index:
                raise ValueError(f"duplicate state {s!r}")
            self._index[s] = i

    def __len__(self):
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    def __getitem__(self, i):
        return self.states[i]

    def __contains__(self, state):
        return state in self._index

    def index(self, state) -> int:
        try:
            return self._index[state]
        except KeyError:
            raise UnknownState(f"state {state!r} is not in the state space") from None

    def __repr__(self):
        return f"StateSpace({len(self)} states)"


@dataclass(frozen=True)
class Generator:
    """Infinitesimal generator of a finite CTMC."""

    states: StateSpace
    rates: sp.csr_matrix  # off-diagonal rates only, all > 0

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def exit_rates(self) -> np.ndarray:
        return np.asarray(self.rates.sum(axis=1)).ravel()

    def matrix(self) -> sp.csr_matrix:
        """Full generator Q with the diagonal filled in."""
        return (self.rates - sp.diags(self.exit_rates)).tocsr()

    def dense(self) -> np.ndarray:
        return self.matrix().toarray()

    def residual(self, pi: np.ndarray) -> float:
        """Infinity norm of pi Q."""
        if self.n == 1:
            return 0.0
        return float(np.max(np.abs(self.rates.T @ pi - self.exit_rates * pi)))


@dataclass(frozen=True)
class StationaryDistribution:
    states: StateSpace
    pi: np.ndarray
    residual: float
    method: str
    iterations: int = 0
    extra: dict = field(default_factory=dict)

    def __getitem__(self, state) -> float:
        return float(self.pi[self.states.index(state)])

    def __len__(self):
        return len(self.pi)


def assemble(states, transitions: Iterable[tuple]) -> Generator:
    """Build a generator from ``(from, to, rate)`` triples.

    Parallel edges between the same ordered pair are summed.
    """
    if not isinstance(states, StateSpace):
        states = StateSpace(states)
    rows, cols, vals = [], [], []
    for src, dst, rate in transitions:
        i = states.index(src)
        j = states.index(dst)
        if i == j:
            raise SelfLoop(f"self transition on {src!r}")
        if not (rate > 0 and math.isfinite(rate)):
            raise NonPositiveRate(f"rate {rate!r} on {src!r} -> {dst!r} must be finite and > 0")
        rows.append(i)
        cols.append(j)
        vals.append(float(rate))
    n = len(states)
    # coo -> csr sums duplicate entries
    rates = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    rates.sum_duplicates()
    return Generator(states, rates)


def stationary_direct(g: Generator, cap: int = DIRECT_CAP) -> StationaryDistribution:
    """Stationary vector by Grassmann-Taksar-Heyman elimination.

    States are eliminated from the last index down; a state whose remaining
    exit mass towards lower indices vanishes signals a reducible chain.
    """
    n = g.n
    if n > cap:
        raise TooLargeForDirect(f"{n} states exceed the direct-solve cap of {cap}")
    a = g.rates.toarray()
    np.fill_diagonal(a, 0.0)
    pivots = np.zeros(n)
    for k in range(n - 1, 0, -1):
        s = a[k, :k].sum()
        if not s > 0.0:
            raise ReducibleChain(
                f"zero pivot while eliminating state {g.states[k]!r}; the chain is reducible"
            )
        pivots[k] = s
        # rank-one update restricted to the nonzero pattern; fill-in stays small
        rows = np.flatnonzero(a[:k, k])
        cols = np.flatnonzero(a[k, :k])
        if len(rows) and len(cols):
            a[np.ix_(rows, cols)] += np.outer(a[rows, k], a[k, cols] / s)
    pi = np.zeros(n)
    pi[0] = 1.0
    for k in range(1, n):
        pi[k] = pi[:k] @ a[:k, k] / pivots[k]
    pi /= pi.sum()
    return StationaryDistribution(g.states, pi, g.residual(pi), "gth")


def uniformization_rate(g: Generator) -> float:
    top = float(g.exit_rates.max()) if g.n else 0.0
    return UNIFORMIZATION_FACTOR * top if top > 0 else 1.0


def _uniformized_transpose(g: Generator, lam: float) -> sp.csr_matrix:
    """P^T for P = I + Q / lam, so that ``P^T @ x`` advances a row vector."""
    diag = 1.0 - g.exit_rates / lam
    return (g.rates.T / lam + sp.diags(diag)).tocsr()


def stationary_iterative(
    g: Generator,
    tol: float = RESIDUAL_TOL,
    max_iterations: int = MAX_ITERATIONS,
    x0: np.ndarray | None = None,
    check_every: int = 50,
) -> StationaryDistribution:
    """Stationary vector by power iteration on the uniformized chain.

    Stops once ``||pi Q||_inf <= tol``.
    """
    n = g.n
    if n == 1:
        return StationaryDistribution(g.states, np.ones(1), 0.0, "power", 0)
    lam = uniformization_rate(g)
    pt = _uniformized_transpose(g, lam)
    x = np.full(n, 1.0 / n) if x0 is None else np.asarray(x0, dtype=float).copy()
    x /= x.sum()
    it = 0
    while it < max_iterations:
        steps = min(check_every, max_iterations - it)
        for _ in range(steps):
            x = pt @ x
        it += steps
        x /= x.sum()
        res = g.residual(x)
        if res <= tol:
            np.clip(x, 0.0, None, out=x)
            x /= x.sum()
            return StationaryDistribution(g.states, x, g.residual(x), "power", it)
    raise NoConvergence(f"power iteration did not reach residual {tol} in {max_iterations} steps")


def transient(g: Generator, pi0: Sequence[float], t: float, tol: float = TRANSIENT_TOL) -> np.ndarray:
    """Distribution at time ``t`` from initial vector ``pi0``, by uniformization.

    The Poisson series is truncated on both sides with total discarded mass
    at most ``tol``.
    """
    if t < 0:
        raise NegativeTime(f"t must be >= 0, got {t}")
    x = np.asarray(pi0, dtype=float).copy()
    if x.shape != (g.n,):
        raise ValueError(f"initial vector has shape {x.shape}, expected ({g.n},)")
    if t == 0 or g.n == 1:
        return x
    lam = uniformization_rate(g)
    mean = lam * t
    left = int(poisson.ppf(tol / 2, mean)) if mean > 50 else 0
    right = int(poisson.isf(tol / 2, mean)) + 1
    weights = poisson.pmf(np.arange(left, right + 1), mean)
    pt = _uniformized_transpose(g, lam)
    for k in range(left):
        nxt = pt @ x
        if k % 256 == 0 and np.max(np.abs(nxt - x)) < 1e-16:
            return nxt / nxt.sum()
        x = nxt
    out = weights[0] * x
    tail = 1.0 - weights[0]
    for w in weights[1:]:
        nxt = pt @ x
        if np.max(np.abs(nxt - x)) < 1e-16:
            # the vector is stationary under P: remaining mass lands on it
            out += tail * nxt
            break
        x = nxt
        out += w * x
        tail -= w
    return out / out.sum()


def expect(pi: StationaryDistribution, f: Callable[[Hashable], float]) -> float:
    """Expected value of ``f(state)`` under a stationary distribution."""
    values = np.fromiter((f(s) for s in pi.states), dtype=float, count=len(pi.states))
    return float(values @ pi.pi)
