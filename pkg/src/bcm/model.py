"""Model parameters and service-time distributions.

All rates are per time unit (t.u.) and all durations are in t.u.; there is
no unit conversion layer.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields
import numbers
from typing import Mapping, Union

from .errors import (
    NonExponentialService,
    NonPositiveRate,
    ParameterError,
    ProbabilityOutOfRange,
    ZeroProcessors,
)

WEIGHT_SUM_TOL = 1e-12


def _positive(value, what):
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise NonPositiveRate(f"{what} must be a number, got {value!r}")
    if not (math.isfinite(value) and value > 0):
        raise NonPositiveRate(f"{what} must be finite and > 0, got {value!r}")


@dataclass(frozen=True)
class Exponential:
    rate: float

    def __post_init__(self):
        _positive(self.rate, "exponential rate")

    def mean(self) -> float:
        return 1.0 / self.rate


@dataclass(frozen=True)
class Deterministic:
    duration: float

    def __post_init__(self):
        _positive(self.duration, "deterministic duration")

    def mean(self) -> float:
        return float(self.duration)


@dataclass(frozen=True)
class Erlang:
    shape: int
    rate: float

    def __post_init__(self):
        if isinstance(self.shape, bool) or not isinstance(self.shape, numbers.Integral) or self.shape < 1:
            raise ParameterError(f"Erlang shape must be an integer >= 1, got {self.shape!r}")
        _positive(self.rate, "Erlang rate")

    def mean(self) -> float:
        return self.shape / self.rate


@dataclass(frozen=True)
class HyperExponential:
    weights: tuple
    rates: tuple

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        if not self.weights or len(self.weights) != len(self.rates):
            raise ParameterError("hyperexponential needs equally many (>= 1) weights and rates")
        for w in self.weights:
            if not (0.0 <= w <= 1.0):
                raise ProbabilityOutOfRange(f"branch weight {w} outside [0, 1]")
        if abs(math.fsum(self.weights) - 1.0) > WEIGHT_SUM_TOL:
            raise ProbabilityOutOfRange(
                f"branch weights sum to {math.fsum(self.weights)!r}, expected 1"
            )
        for r in self.rates:
            _positive(r, "hyperexponential rate")

    def mean(self) -> float:
        return math.fsum(w / r for w, r in zip(self.weights, self.rates))


ServiceSpec = Union[Exponential, Deterministic, Erlang, HyperExponential]
SERVICE_TYPES = (Exponential, Deterministic, Erlang, HyperExponential)


def mean(spec: ServiceSpec) -> float:
    """Analytic mean of a service-time distribution, in t.u."""
    return spec.mean()


def parse_service(text: str) -> ServiceSpec:
    """Parse the compact CLI notation for a service distribution.

    Accepted forms::

        exp:0.1
        det:10
        erlang:2:0.2
        hyper:0.5,0.5:0.2,0.05
    """
    parts = text.strip().split(":")
    kind = parts[0].lower()
    try:
        if kind in ("exp", "exponential") and len(parts) == 2:
            return Exponential(float(parts[1]))
        if kind in ("det", "deterministic") and len(parts) == 2:
            return Deterministic(float(parts[1]))
        if kind == "erlang" and len(parts) == 3:
            return Erlang(int(parts[1]), float(parts[2]))
        if kind in ("hyper", "hyperexp") and len(parts) == 3:
            weights = [float(x) for x in parts[1].split(",")]
            rates = [float(x) for x in parts[2].split(",")]
            return HyperExponential(tuple(weights), tuple(rates))
    except ValueError as exc:
        if isinstance(exc, ParameterError):
            raise
        raise ParameterError(f"malformed distribution {text!r}: {exc}") from None
    raise ParameterError(f"malformed distribution {text!r}")


def format_service(spec: ServiceSpec) -> str:
    if isinstance(spec, Exponential):
        return f"exp:{spec.rate!r}"
    if isinstance(spec, Deterministic):
        return f"det:{spec.duration!r}"
    if isinstance(spec, Erlang):
        return f"erlang:{spec.shape}:{spec.rate!r}"
    w = ",".join(repr(x) for x in spec.weights)
    r = ",".join(repr(x) for x in spec.rates)
    return f"hyper:{w}:{r}"


class Discipline(enum.Enum):
    FCFS = "fcfs"
    PRIORITY = "priority"

    def __str__(self):
        return self.value


def _check(n_processors, think_rate, resume_prob, blocking_service, writeback_service):
    """Collect every violated constraint as (exception class, message)."""
    problems = []
    if isinstance(n_processors, bool) or not isinstance(n_processors, numbers.Integral):
        problems.append((ZeroProcessors, f"n_processors must be an integer, got {n_processors!r}"))
    elif n_processors < 1:
        problems.append((ZeroProcessors, f"n_processors must be >= 1, got {n_processors}"))
    if (
        isinstance(think_rate, bool)
        or not isinstance(think_rate, numbers.Real)
        or not (math.isfinite(think_rate) and think_rate > 0)
    ):
        problems.append((NonPositiveRate, f"think_rate must be finite and > 0, got {think_rate!r}"))
    if (
        isinstance(resume_prob, bool)
        or not isinstance(resume_prob, numbers.Real)
        or not (0.0 <= resume_prob <= 1.0)
    ):
        problems.append((ProbabilityOutOfRange, f"resume_prob must lie in [0, 1], got {resume_prob!r}"))
    for name, spec in (("blocking_service", blocking_service), ("writeback_service", writeback_service)):
        if not isinstance(spec, SERVICE_TYPES):
            problems.append((ParameterError, f"{name} must be a ServiceSpec, got {spec!r}"))
        elif not (math.isfinite(spec.mean()) and spec.mean() > 0):
            problems.append((NonPositiveRate, f"{name} has non-positive mean"))
    return problems


@dataclass(frozen=True)
class ModelParams:
    """One instance of the bus model.

    ``resume_prob`` is p, the probability that a completed blocking request
    generates no write-back. The write-back probability q is always derived
    as ``1 - p``.
    """

    n_processors: int
    think_rate: float
    resume_prob: float
    blocking_service: ServiceSpec
    writeback_service: ServiceSpec

    def __post_init__(self):
        problems = _check(
            self.n_processors,
            self.think_rate,
            self.resume_prob,
            self.blocking_service,
            self.writeback_service,
        )
        if problems:
            cls, _ = problems[0]
            message = "; ".join(msg for _, msg in problems)
            raise cls(message, [(c.code, m) for c, m in problems])
        object.__setattr__(self, "n_processors", int(self.n_processors))
        object.__setattr__(self, "think_rate", float(self.think_rate))
        object.__setattr__(self, "resume_prob", float(self.resume_prob))

    @property
    def writeback_prob(self) -> float:
        return 1.0 - self.resume_prob

    @classmethod
    def exponential(cls, n, think_rate, mu1, mu2, p) -> "ModelParams":
        return cls(n, think_rate, p, Exponential(mu1), Exponential(mu2))

    def is_exponential(self) -> bool:
        return isinstance(self.blocking_service, Exponential) and isinstance(
            self.writeback_service, Exponential
        )

    def exponential_rates(self) -> tuple[float, float]:
        """Return (mu1, mu2); raise unless both services are exponential."""
        if not self.is_exponential():
            raise NonExponentialService(
                "analytical chains need exponential services; use the simulator for "
                f"{format_service(self.blocking_service)} / {format_service(self.writeback_service)}"
            )
        return self.blocking_service.rate, self.writeback_service.rate

    def replace(self, **changes) -> "ModelParams":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return ModelParams(**values)


RawParams = Union[ModelParams, Mapping]

_ALIASES = {
    "n": "n_processors",
    "N": "n_processors",
    "lam": "think_rate",
    "lambda": "think_rate",
    "p": "resume_prob",
    "f1": "blocking_service",
    "f2": "writeback_service",
}


def validate(raw: RawParams) -> ModelParams:
    """Turn raw numeric input into a validated :class:`ModelParams`.

    ``raw`` is either a ModelParams (returned unchanged) or a mapping using
    the field names or the short aliases ``n``, ``lambda``, ``p``. Rates
    ``mu1`` and ``mu2`` build exponential services. On failure the raised
    :class:`ParameterError` subclass lists every violated constraint.
    """
    if isinstance(raw, ModelParams):
        return raw
    values = {}
    for key, value in dict(raw).items():
        values[_ALIASES.get(key, key)] = value
    problems = []
    for mu_key, field in (("mu1", "blocking_service"), ("mu2", "writeback_service")):
        if mu_key in values:
            try:
                values[field] = Exponential(values.pop(mu_key))
            except ParameterError as exc:
                problems.append((type(exc), f"{mu_key}: {exc}"))
                values[field] = None
    missing = [
        f.name for f in fields(ModelParams) if f.name not in values
    ]
    if missing:
        raise ParameterError(f"missing parameters: {', '.join(missing)}")
    unknown = set(values) - {f.name for f in fields(ModelParams)}
    if unknown:
        raise ParameterError(f"unknown parameters: {', '.join(sorted(unknown))}")
    for cls, msg in _check(**values):
        if values.get("blocking_service") is None or values.get("writeback_service") is None:
            if "must be a ServiceSpec" in msg:
                continue
        problems.append((cls, msg))
    if problems:
        cls, _ = problems[0]
        raise cls("; ".join(m for _, m in problems), [(c.code, m) for c, m in problems])
    return ModelParams(**values)

