"""CTMC for the priority discipline.

A write-back generated at the end of a blocking request keeps the bus: it
is served immediately, and only afterwards does the head of the queue of
blocking requests get the bus. The write-back's owner resumes computing
while its write-back is in service, so it may issue a new blocking request
and queue behind its own write-back.

States:

* ``IDLE``: bus idle, every processor computing.
* ``ServingBlocking(k)``: a blocking request is in service and ``k``
  processors (including the one in service) are blocked, ``1 <= k <= N``.
* ``ServingWriteback(j)``: a write-back is in service with ``j`` blocked
  processors queued behind it, ``0 <= j <= N``.

That gives ``2N + 2`` states. ``owner_held=True`` builds the alternative
reading in which the owner stays blocked until its write-back completes
(``ServingWriteback(j)`` then counts the owner, ``1 <= j <= N``, giving
``2N + 1`` states); it does not reproduce the published tables and is kept
only for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ctmc
from .model import ModelParams


@dataclass(frozen=True, order=True)
class Idle:
    def __repr__(self):
        return "Idle"


@dataclass(frozen=True, order=True)
class ServingBlocking:
    blocked: int

    def __repr__(self):
        return f"SB{{{self.blocked}}}"


@dataclass(frozen=True, order=True)
class ServingWriteback:
    waiting: int

    def __repr__(self):
        return f"SW{{{self.waiting}}}"


IDLE = Idle()


def state_space(n: int, owner_held: bool = False) -> ctmc.StateSpace:
    first_w = 1 if owner_held else 0
    return ctmc.StateSpace(
        [IDLE]
        + [ServingBlocking(k) for k in range(1, n + 1)]
        + [ServingWriteback(j) for j in range(first_w, n + 1)]
    )


def transitions(params: ModelParams, owner_held: bool = False) -> list[tuple]:
    n = params.n_processors
    lam = params.think_rate
    mu1, mu2 = params.exponential_rates()
    p, q = params.resume_prob, params.writeback_prob
    out = [(IDLE, ServingBlocking(1), n * lam)]
    for k in range(1, n + 1):
        if k < n:
            out.append((ServingBlocking(k), ServingBlocking(k + 1), (n - k) * lam))
        if p > 0:
            out.append((ServingBlocking(k), ServingBlocking(k - 1) if k > 1 else IDLE, p * mu1))
        if q > 0:
            out.append((ServingBlocking(k), ServingWriteback(k if owner_held else k - 1), q * mu1))
    if owner_held:
        for j in range(1, n + 1):
            if j < n:
                out.append((ServingWriteback(j), ServingWriteback(j + 1), (n - j) * lam))
            out.append((ServingWriteback(j), ServingBlocking(j - 1) if j > 1 else IDLE, mu2))
    else:
        for j in range(0, n + 1):
            if j < n:
                out.append((ServingWriteback(j), ServingWriteback(j + 1), (n - j) * lam))
            out.append((ServingWriteback(j), ServingBlocking(j) if j > 0 else IDLE, mu2))
    return out


def build(params: ModelParams, owner_held: bool = False):
    """Return ``(StateSpace, transitions)`` for the priority chain.

    Raises NonExponentialService unless both services are exponential.
    Zero-rate edges (p = 0 or q = 0) are omitted, so with p = 1 the
    write-back states are transient and carry no stationary mass.
    """
    trans = transitions(params, owner_held)
    return state_space(params.n_processors, owner_held), trans


def generator(params: ModelParams, owner_held: bool = False) -> ctmc.Generator:
    states, trans = build(params, owner_held)
    return ctmc.assemble(states, trans)


def solve(params: ModelParams, method: str = "direct", owner_held: bool = False):
    g = generator(params, owner_held)
    if method == "direct":
        return ctmc.stationary_direct(g)
    if method == "iterative":
        return ctmc.stationary_iterative(g)
    raise ValueError(f"unknown method {method!r}")


def blocked_count(state) -> int:
    if isinstance(state, ServingBlocking):
        return state.blocked
    if isinstance(state, ServingWriteback):
        return state.waiting
    return 0


def anbc(pi: ctmc.StationaryDistribution) -> float:
    """Average number of blocked processors.

    The write-back's owner is computing, so ``ServingWriteback(j)``
    contributes ``j``.
    """
    return ctmc.expect(pi, blocked_count)


def bus_occupancy(pi: ctmc.StationaryDistribution) -> tuple[float, float]:
    """(P(blocking request in service), P(write-back in service))."""
    pb = ctmc.expect(pi, lambda s: isinstance(s, ServingBlocking))
    pw = ctmc.expect(pi, lambda s: isinstance(s, ServingWriteback))
    return pb, pw


def blocked_distribution(pi: ctmc.StationaryDistribution, n: int):
    """P(k processors blocked) for k = 0..N."""
    dist = np.zeros(n + 1)
    for state, prob in zip(pi.states, pi.pi):
        dist[blocked_count(state)] += prob
    return dist


def flow_balance_residuals(pi: ctmc.StationaryDistribution, params: ModelParams):
    """Steady-state cut equations.

    ``r1``: rate of new blocking requests against blocking completions.
    ``r2``: rate of generated write-backs against write-back completions.
    """
    mu1, mu2 = params.exponential_rates()
    pb, pw = bus_occupancy(pi)
    r1 = abs(params.think_rate * (params.n_processors - anbc(pi)) - mu1 * pb)
    r2 = abs(params.writeback_prob * mu1 * pb - mu2 * pw)
    return r1, r2
