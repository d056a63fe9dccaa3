import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from bcm import ctmc, priority_chain
from bcm.errors import (
    NegativeTime,
    NoConvergence,
    NonPositiveRate,
    ReducibleChain,
    SelfLoop,
    TooLargeForDirect,
    UnknownState,
)
from bcm.model import ModelParams
from oracles import dense_stationary


def flip_flop(a, b):
    return ctmc.assemble(["A", "B"], [("A", "B", a), ("B", "A", b)])


def test_assemble_flip_flop():
    g = flip_flop(0.3, 0.7)
    assert np.allclose(g.dense(), [[-0.3, 0.3], [0.7, -0.7]])


def test_assemble_sums_parallel_edges():
    g = ctmc.assemble(["A", "B"], [("A", "B", 0.3), ("A", "B", 0.2), ("B", "A", 1.0)])
    assert g.dense()[0, 1] == pytest.approx(0.5, abs=1e-15)
    assert g.rates.nnz == 2


@pytest.mark.parametrize(
    "edge, exc",
    [
        (("A", "A", 1.0), SelfLoop),
        (("A", "C", 1.0), UnknownState),
        (("A", "B", 0.0), NonPositiveRate),
        (("A", "B", -2.0), NonPositiveRate),
    ],
)
def test_assemble_rejects(edge, exc):
    with pytest.raises(exc):
        ctmc.assemble(["A", "B"], [edge])


def test_state_space_index():
    s = ctmc.StateSpace(["x", "y", "z"])
    assert [s.index(v) for v in "xyz"] == [0, 1, 2]
    assert s[1] == "y"
    with pytest.raises(ValueError):
        ctmc.StateSpace(["x", "x"])


@st.composite
def random_chain(draw):
    n = draw(st.integers(2, 8))
    # a ring keeps the chain irreducible; extra edges are random
    edges = [(i, (i + 1) % n, draw(st.floats(0.01, 5.0))) for i in range(n)]
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1), st.floats(0.01, 5.0)), max_size=12))
    edges += [(i, j, r) for i, j, r in extra if i != j]
    return ctmc.assemble(range(n), edges)


@settings(max_examples=60, deadline=None)
@given(random_chain())
def test_generator_rows_sum_to_zero(g):
    assert np.max(np.abs(g.dense().sum(axis=1))) <= 1e-12
    off = g.dense() - np.diag(np.diag(g.dense()))
    assert off.min() >= 0


@settings(max_examples=60, deadline=None)
@given(random_chain())
def test_direct_and_iterative_agree(g):
    a = ctmc.stationary_direct(g)
    b = ctmc.stationary_iterative(g)
    oracle = dense_stationary(g.dense())
    assert np.max(np.abs(a.pi - oracle)) <= 1e-10
    assert np.max(np.abs(a.pi - b.pi)) <= 1e-9
    assert a.pi.min() >= 0 and abs(a.pi.sum() - 1) <= 1e-12
    assert a.residual <= 1e-12 and b.residual <= 1e-12


def test_flip_flop_stationary():
    g = flip_flop(1.0, 2.0)
    for solver in (ctmc.stationary_direct, ctmc.stationary_iterative):
        assert np.allclose(solver(g).pi, [2 / 3, 1 / 3], atol=1e-12)


def test_singleton_chain():
    g = ctmc.assemble(["only"], [])
    assert ctmc.stationary_direct(g).pi.tolist() == [1.0]
    assert ctmc.stationary_iterative(g).pi.tolist() == [1.0]


# N=1 priority chain at lambda=0.001, mu1=0.1, mu2=0.01, p=0.8; the balance
# equations solve exactly to pi ~ (1080, 11, 20, 2) / 1080.
HAND_N1 = np.array([1.0, 11 / 1080, 20 / 1080, 2 / 1080])


def test_priority_n1_hand_solution():
    params = ModelParams.exponential(1, 0.001, 0.1, 0.01, 0.8)
    g = priority_chain.generator(params)
    assert [repr(s) for s in g.states] == ["Idle", "SB{1}", "SW{0}", "SW{1}"]
    oracle = dense_stationary(g.dense())
    assert np.allclose(oracle * (1113 / 1080), HAND_N1, atol=1e-14)
    pi = ctmc.stationary_direct(g)
    assert np.allclose(pi.pi / pi.pi[0], HAND_N1, rtol=1e-12)
    assert np.allclose(pi.pi / pi.pi[0], [1, 0.01018519, 0.01851852, 0.00185185], atol=5e-9)


def test_expect():
    params = ModelParams.exponential(1, 0.001, 0.1, 0.01, 0.8)
    pi = ctmc.stationary_direct(priority_chain.generator(params))
    assert ctmc.expect(pi, lambda s: 1.0) == pytest.approx(1.0, abs=1e-15)
    assert ctmc.expect(pi, lambda s: 0.0) == 0.0
    assert ctmc.expect(pi, priority_chain.blocked_count) == pytest.approx(13 / 1113, abs=1e-14)


def test_reducible_chain_detected():
    # two disconnected pairs
    g = ctmc.assemble(range(4), [(0, 1, 1.0), (1, 0, 1.0), (2, 3, 1.0), (3, 2, 1.0)])
    with pytest.raises(ReducibleChain):
        ctmc.stationary_direct(g)


def test_direct_cap():
    g = flip_flop(1.0, 1.0)
    with pytest.raises(TooLargeForDirect):
        ctmc.stationary_direct(g, cap=1)


def test_iterative_gives_up():
    g = priority_chain.generator(ModelParams.exponential(4, 0.001, 0.1, 0.01, 0.8))
    with pytest.raises(NoConvergence):
        ctmc.stationary_iterative(g, tol=1e-300, max_iterations=100)


def test_iterative_matches_direct_on_priority_n4(table1a):
    g = priority_chain.generator(table1a)
    a = ctmc.stationary_direct(g)
    b = ctmc.stationary_iterative(g, tol=1e-15)
    assert np.max(np.abs(a.pi - b.pi)) <= 1e-10


def test_transient_identity_at_zero():
    g = flip_flop(1.0, 3.0)
    assert ctmc.transient(g, [0.25, 0.75], 0.0).tolist() == [0.25, 0.75]


def test_transient_negative_time():
    with pytest.raises(NegativeTime):
        ctmc.transient(flip_flop(1, 1), [1, 0], -1.0)


def test_transient_symmetric_flip_flop():
    out = ctmc.transient(flip_flop(1.0, 1.0), [1.0, 0.0], 50.0)
    assert np.allclose(out, [0.5, 0.5], atol=1e-8)


@pytest.mark.parametrize("t", [0.1, 1.0, 7.5, 40.0, 300.0])
def test_transient_matches_matrix_exponential(t):
    g = priority_chain.generator(ModelParams.exponential(2, 0.05, 0.3, 0.1, 0.6))
    pi0 = np.zeros(g.n)
    pi0[0] = 1.0
    expected = pi0 @ scipy.linalg.expm(g.dense() * t)
    got = ctmc.transient(g, pi0, t)
    assert np.max(np.abs(got - expected)) <= 1e-10
    assert got.min() >= 0 and abs(got.sum() - 1) <= 1e-10


def test_transient_converges_to_stationary(table1a):
    g = priority_chain.generator(table1a)
    pi0 = np.zeros(g.n)
    pi0[0] = 1.0
    stationary = ctmc.stationary_direct(g).pi
    assert np.max(np.abs(ctmc.transient(g, pi0, 1e6) - stationary)) <= 1e-8
    gaps = [np.max(np.abs(ctmc.transient(g, pi0, t) - stationary)) for t in (10, 20, 40, 80, 160, 320, 640)]
    assert all(b <= a + 1e-15 for a, b in zip(gaps, gaps[1:]))
