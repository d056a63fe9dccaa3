import numpy as np
import pytest

from bcm import ctmc, priority_chain as pc
from bcm.errors import NonExponentialService
from bcm.model import Deterministic, Exponential, ModelParams
from oracles import machine_repairman

IDLE, SB, SW = pc.IDLE, pc.ServingBlocking, pc.ServingWriteback


def test_n1_transitions():
    lam, mu1, mu2, p = 0.001, 0.1, 0.01, 0.8
    states, trans = pc.build(ModelParams.exponential(1, lam, mu1, mu2, p))
    assert list(states) == [IDLE, SB(1), SW(0), SW(1)]
    expected = {
        (IDLE, SB(1)): lam,
        (SB(1), IDLE): p * mu1,
        (SB(1), SW(0)): (1 - p) * mu1,
        (SW(0), SW(1)): lam,
        (SW(0), IDLE): mu2,
        (SW(1), SB(1)): mu2,
    }
    got = {(a, b): r for a, b, r in trans}
    assert got.keys() == expected.keys()
    for key, rate in expected.items():
        assert got[key] == pytest.approx(rate, rel=1e-15)


@pytest.mark.parametrize("n", range(1, 13))
def test_state_count(n):
    states, trans = pc.build(ModelParams.exponential(n, 0.01, 0.1, 0.01, 0.8))
    assert len(states) == 2 * n + 2
    out_of_full = [t for t in trans if t[0] == SW(n)]
    assert out_of_full == [(SW(n), SB(n), 0.01)]


@pytest.mark.parametrize("n", range(1, 8))
def test_owner_held_variant_has_2n_plus_1_states(n):
    states, _ = pc.build(ModelParams.exponential(n, 0.01, 0.1, 0.01, 0.8), owner_held=True)
    assert len(states) == 2 * n + 1


def test_owner_held_variant_misses_table(table1a):
    held = pc.anbc(pc.solve(table1a, owner_held=True))
    assert abs(held - 0.07344077) > 1e-3


def test_rejects_non_exponential():
    params = ModelParams(2, 0.01, 0.8, Deterministic(10), Exponential(0.01))
    with pytest.raises(NonExponentialService):
        pc.build(params)


@pytest.mark.parametrize(
    "lam, expected",
    [(0.001, 0.07344077), (0.010, 1.57171551)],
)
def test_anbc_table_1a(lam, expected):
    params = ModelParams.exponential(4, lam, 0.1, 0.01, 0.8)
    # printed to 8 decimals, sometimes truncated rather than rounded
    assert pc.anbc(pc.solve(params)) == pytest.approx(expected, abs=1e-8)


def test_anbc_single_processor():
    params = ModelParams.exponential(1, 0.001, 0.1, 0.01, 0.8)
    assert pc.anbc(pc.solve(params)) == pytest.approx(13 / 1113, abs=1e-14)


def test_flow_balance(table1a):
    pi = pc.solve(table1a)
    r1, r2 = pc.flow_balance_residuals(pi, table1a)
    assert r1 <= 1e-10 and r2 <= 1e-10
    pb, pw = pc.bus_occupancy(pi)
    # lambda (N - ANBC) = 0.001 * 3.92655923
    assert table1a.think_rate * (4 - pc.anbc(pi)) == pytest.approx(0.00392655923, abs=1e-11)
    assert 0.1 * pb == pytest.approx(0.00392655923, abs=1e-11)
    assert pw / pb == pytest.approx(2.0, abs=1e-10)


def test_flow_balance_without_writebacks():
    params = ModelParams.exponential(5, 0.004, 0.1, 0.01, 1.0)
    pi = pc.solve(params)
    pb, pw = pc.bus_occupancy(pi)
    assert pw == 0.0
    r1, r2 = pc.flow_balance_residuals(pi, params)
    assert r2 == 0.0 and r1 <= 1e-12


def test_flow_balance_tiny_lambda():
    params = ModelParams.exponential(4, 1e-9, 0.1, 0.01, 0.8)
    r1, r2 = pc.flow_balance_residuals(pc.solve(params), params)
    assert r1 <= 1e-15 and r2 <= 1e-15


@pytest.mark.parametrize("n", range(1, 9))
def test_machine_repairman_limit(n):
    lam, mu1 = 0.007, 0.1
    params = ModelParams.exponential(n, lam, mu1, 0.01, 1.0)
    dist = pc.blocked_distribution(pc.solve(params), n)
    assert np.max(np.abs(dist - machine_repairman(n, lam, mu1))) <= 1e-10


@pytest.mark.parametrize("n, mu2", [(4, 0.01), (5, 1 / 150), (6, 0.01), (7, 1 / 150)])
def test_anbc_increases_with_lambda(n, mu2):
    values = [
        pc.anbc(pc.solve(ModelParams.exponential(n, 0.001 * i, 0.1, mu2, 0.8)))
        for i in range(1, 11)
    ]
    assert all(b > a for a, b in zip(values, values[1:]))


def test_p_zero_every_request_writes_back():
    params = ModelParams.exponential(3, 0.01, 0.1, 0.05, 0.0)
    pi = pc.solve(params)
    r1, r2 = pc.flow_balance_residuals(pi, params)
    assert r1 <= 1e-12 and r2 <= 1e-12


def test_iterative_method(table1a):
    a = pc.solve(table1a, "direct")
    b = pc.solve(table1a, "iterative")
    assert np.max(np.abs(a.pi - b.pi)) <= 1e-9
    with pytest.raises(ValueError):
        pc.solve(table1a, "magic")
