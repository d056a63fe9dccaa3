"""CTMC for the FCFS discipline.

Blocking requests (B) and write-backs (W) share one queue served in arrival
order; a write-back generated at a blocking completion joins the tail. The
Markov state is the queue content as a B/W string with the head in service.
Processors are anonymous, so the per-processor limit of one outstanding
write-back shows up only as the emergent bound ``count(W) <= N``, which
:func:`reachable` checks rather than assumes.
"""

from __future__ import annotations

from collections import deque
from typing import NamedTuple

import numpy as np

from . import ctmc
from .errors import ChainError, StateSpaceCapExceeded
from .model import ModelParams

N_CAP = 10
MAX_STATES = 1_000_000
DIRECT_BELOW = 5


class QueueState(NamedTuple):
    """Queue content encoded as (length, bits); bit ``i`` set means the
    ``i``-th request from the head is a write-back."""

    length: int
    bits: int

    @classmethod
    def from_string(cls, text: str) -> "QueueState":
        bits = 0
        for i, ch in enumerate(text):
            if ch == "W":
                bits |= 1 << i
            elif ch != "B":
                raise ValueError(f"queue strings use only 'B' and 'W', got {text!r}")
        return cls(len(text), bits)

    def __str__(self):
        return "".join("W" if self.bits >> i & 1 else "B" for i in range(self.length))

    def __repr__(self):
        return f"[{','.join(str(self))}]" if self.length else "[]"

    @property
    def n_writebacks(self) -> int:
        return bin(self.bits).count("1")

    @property
    def n_blocking(self) -> int:
        return self.length - self.n_writebacks

    @property
    def head(self) -> str | None:
        if not self.length:
            return None
        return "W" if self.bits & 1 else "B"

    def pop_head(self) -> "QueueState":
        return QueueState(self.length - 1, self.bits >> 1)

    def append(self, kind: str) -> "QueueState":
        bit = (1 << self.length) if kind == "W" else 0
        return QueueState(self.length + 1, self.bits | bit)


EMPTY = QueueState(0, 0)


def transitions(s: QueueState, params: ModelParams) -> list[tuple[QueueState, float]]:
    """Outgoing ``(target, rate)`` pairs of one queue state.

    Zero rates (p = 0 or q = 0) are left out.
    """
    n = params.n_processors
    mu1, mu2 = params.exponential_rates()
    out = []
    nb = s.n_blocking
    if nb < n:
        out.append((s.append("B"), (n - nb) * params.think_rate))
    head = s.head
    if head == "B":
        rest = s.pop_head()
        if params.resume_prob > 0:
            out.append((rest, params.resume_prob * mu1))
        if params.writeback_prob > 0:
            out.append((rest.append("W"), params.writeback_prob * mu1))
    elif head == "W":
        out.append((s.pop_head(), mu2))
    return out


def _explore(params: ModelParams, cap: int):
    n = params.n_processors
    if n > cap:
        raise StateSpaceCapExceeded(
            f"FCFS chain for N={n} exceeds the cap N <= {cap}", reached=0
        )
    index = {EMPTY: 0}
    order = [EMPTY]
    edges = []
    todo = deque([EMPTY])
    while todo:
        s = todo.popleft()
        for t, rate in transitions(s, params):
            if t not in index:
                if t.n_writebacks > n or t.n_blocking > n:
                    raise ChainError(f"state {t!r} violates the per-processor bounds for N={n}")
                if len(order) >= MAX_STATES:
                    raise StateSpaceCapExceeded(
                        f"FCFS chain for N={n} exceeds {MAX_STATES} states", reached=len(order)
                    )
                index[t] = len(order)
                order.append(t)
                todo.append(t)
            edges.append((s, t, rate))
    return order, edges


def reachable(params: ModelParams, cap: int = N_CAP) -> ctmc.StateSpace:
    """Breadth-first closure of the queue states from the empty queue."""
    order, _ = _explore(params, cap)
    return ctmc.StateSpace(order)


def build(params: ModelParams, cap: int = N_CAP):
    order, edges = _explore(params, cap)
    return ctmc.StateSpace(order), edges


def generator(params: ModelParams, cap: int = N_CAP) -> ctmc.Generator:
    states, edges = build(params, cap)
    return ctmc.assemble(states, edges)


def state_count(n: int, cap: int = N_CAP) -> int:
    """Number of reachable queue states for N processors with 0 < p < 1.

    The count depends only on N as long as both branches exist.
    """
    params = ModelParams.exponential(n, 1.0, 1.0, 1.0, 0.5)
    return len(reachable(params, cap))


def solve(params: ModelParams, method: str = "auto", cap: int = N_CAP):
    """Stationary distribution; ``auto`` picks GTH below N=5, power iteration above."""
    g = generator(params, cap)
    if method == "auto":
        method = "direct" if params.n_processors < DIRECT_BELOW else "iterative"
    if method == "direct":
        return ctmc.stationary_direct(g)
    if method == "iterative":
        return ctmc.stationary_iterative(g)
    raise ValueError(f"unknown method {method!r}")


def anbc(pi: ctmc.StationaryDistribution) -> float:
    """Mean number of B entries in the queue; each is one blocked processor."""
    return ctmc.expect(pi, lambda s: s.n_blocking)


def bus_occupancy(pi: ctmc.StationaryDistribution) -> tuple[float, float]:
    pb = ctmc.expect(pi, lambda s: s.head == "B")
    pw = ctmc.expect(pi, lambda s: s.head == "W")
    return pb, pw


def blocked_distribution(pi: ctmc.StationaryDistribution, n: int) -> np.ndarray:
    dist = np.zeros(n + 1)
    for state, prob in zip(pi.states, pi.pi):
        dist[state.n_blocking] += prob
    return dist


def flow_balance_residuals(pi: ctmc.StationaryDistribution, params: ModelParams):
    mu1, mu2 = params.exponential_rates()
    pb, pw = bus_occupancy(pi)
    r1 = abs(params.think_rate * (params.n_processors - anbc(pi)) - mu1 * pb)
    r2 = abs(params.writeback_prob * mu1 * pb - mu2 * pw)
    return r1, r2
