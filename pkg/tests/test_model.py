import math

import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from bcm import model
from bcm.errors import NonPositiveRate, ParameterError, ProbabilityOutOfRange, ZeroProcessors
from bcm.model import (
    Deterministic,
    Discipline,
    Erlang,
    Exponential,
    HyperExponential,
    ModelParams,
    validate,
)

RAW = dict(n=4, think_rate=0.001, p=0.8, mu1=0.1, mu2=0.01)


def test_validate_paper_point():
    params = validate(RAW)
    assert params.n_processors == 4
    assert params.blocking_service == Exponential(0.1)
    assert params.writeback_service == Exponential(0.01)
    assert params.writeback_prob == pytest.approx(0.2)


def test_validate_is_idempotent(table1a):
    assert validate(table1a) is table1a
    assert validate(validate(RAW)) == validate(RAW)


@pytest.mark.parametrize(
    "change, exc",
    [
        (dict(n=0), ZeroProcessors),
        (dict(n=-3), ZeroProcessors),
        (dict(p=1.2), ProbabilityOutOfRange),
        (dict(p=-0.1), ProbabilityOutOfRange),
        (dict(think_rate=0.0), NonPositiveRate),
        (dict(mu1=-1.0), NonPositiveRate),
        (dict(think_rate=math.inf), NonPositiveRate),
    ],
)
def test_validate_rejects(change, exc):
    with pytest.raises(exc):
        validate({**RAW, **change})


def test_validate_lists_every_violation():
    with pytest.raises(ParameterError) as info:
        validate({**RAW, "n": 0, "p": 1.5, "mu2": 0.0})
    codes = {code for code, _ in info.value.violations}
    assert codes == {"ZeroProcessors", "ProbabilityOutOfRange", "NonPositiveRate"}


def test_p_equal_one_allowed():
    params = validate({**RAW, "p": 1})
    assert params.writeback_prob == 0.0


def test_q_is_derived():
    params = ModelParams.exponential(3, 0.01, 0.1, 0.01, 0.7)
    assert params.resume_prob + params.writeback_prob == 1.0
    with pytest.raises(Exception):
        params.resume_prob = 0.5


@pytest.mark.parametrize(
    "spec, expected",
    [
        (Exponential(0.1), 10.0),
        (Deterministic(10), 10.0),
        (Erlang(2, 0.2), 10.0),
        (HyperExponential((0.5, 0.5), (0.2, 0.05)), 12.5),
    ],
)
def test_mean(spec, expected):
    assert model.mean(spec) == pytest.approx(expected, rel=1e-15)


def test_invalid_specs():
    with pytest.raises(NonPositiveRate):
        Exponential(0)
    with pytest.raises(NonPositiveRate):
        Deterministic(-1)
    with pytest.raises(ParameterError):
        Erlang(0, 1.0)
    with pytest.raises(ProbabilityOutOfRange):
        HyperExponential((0.5, 0.6), (1.0, 2.0))
    with pytest.raises(ParameterError):
        HyperExponential((1.0,), (1.0, 2.0))


weights_rates = st.integers(1, 4).flatmap(
    lambda m: st.tuples(
        st.lists(st.floats(0.05, 1.0), min_size=m, max_size=m),
        st.lists(st.floats(0.01, 5.0), min_size=m, max_size=m),
    )
)


@given(weights_rates)
def test_hyperexponential_mean_matches_quadrature(wr):
    raw_w, rates = wr
    total = sum(raw_w)
    weights = [w / total for w in raw_w]
    weights[-1] = 1.0 - sum(weights[:-1])
    spec = HyperExponential(tuple(weights), tuple(rates))

    def density(x):
        return sum(w * r * math.exp(-r * x) for w, r in zip(weights, rates))

    numeric, _ = integrate.quad(lambda x: x * density(x), 0, math.inf, epsabs=1e-12, epsrel=1e-10)
    assert spec.mean() == pytest.approx(numeric, rel=1e-7)
    assert spec.mean() == pytest.approx(sum(w / r for w, r in zip(weights, rates)), rel=1e-12)


@pytest.mark.parametrize(
    "text, spec",
    [
        ("exp:0.1", Exponential(0.1)),
        ("det:10", Deterministic(10.0)),
        ("erlang:2:0.2", Erlang(2, 0.2)),
        ("hyper:0.5,0.5:0.2,0.05", HyperExponential((0.5, 0.5), (0.2, 0.05))),
    ],
)
def test_parse_service_round_trip(text, spec):
    assert model.parse_service(text) == spec
    assert model.parse_service(model.format_service(spec)) == spec


@pytest.mark.parametrize("text", ["exp", "exp:x", "gamma:1:2", "erlang:2", "hyper:0.5:1,2", "det:-1"])
def test_parse_service_rejects(text):
    with pytest.raises(ParameterError):
        model.parse_service(text)


def test_exponential_rates_rejects_general_service():
    params = ModelParams(2, 0.01, 0.8, Deterministic(10), Exponential(0.01))
    with pytest.raises(model.NonExponentialService):
        params.exponential_rates()


def test_discipline_values():
    assert {d.value for d in Discipline} == {"fcfs", "priority"}
