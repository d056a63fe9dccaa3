"""Derived metrics and discipline comparisons."""

from __future__ import annotations

from dataclasses import dataclass

from . import fcfs_chain, priority_chain
from .ctmc import StationaryDistribution
from .errors import DivisionByZero, MismatchedParams, OutOfRangeAnbc, TooFewPoints
from .model import Discipline, ModelParams

DEFAULT_SATURATION_EPS = 0.05


@dataclass(frozen=True)
class AnalyticResult:
    params: ModelParams
    discipline: Discipline
    distribution: StationaryDistribution
    anbc: float
    p_blocking_service: float
    p_writeback_service: float

    @property
    def anpec(self) -> float:
        return anpec(self.params.n_processors, self.anbc)

    @property
    def utilization(self) -> float:
        return self.p_blocking_service + self.p_writeback_service

    def flow_balance_residuals(self) -> tuple[float, float]:
        chain = priority_chain if self.discipline is Discipline.PRIORITY else fcfs_chain
        return chain.flow_balance_residuals(self.distribution, self.params)


def solve(params: ModelParams, discipline: Discipline, method: str = "auto") -> AnalyticResult:
    """Solve the chain of one discipline and collect the headline metrics.

    ``method`` is ``direct`` (GTH), ``iterative`` (power iteration) or
    ``auto``: GTH for every priority chain, and for FCFS chains below N=5.
    """
    if discipline is Discipline.PRIORITY:
        pi = priority_chain.solve(params, "direct" if method == "auto" else method)
        pb, pw = priority_chain.bus_occupancy(pi)
        value = priority_chain.anbc(pi)
    else:
        pi = fcfs_chain.solve(params, method)
        pb, pw = fcfs_chain.bus_occupancy(pi)
        value = fcfs_chain.anbc(pi)
    return AnalyticResult(params, discipline, pi, value, pb, pw)


def anbc(params: ModelParams, discipline: Discipline, method: str = "auto") -> float:
    return solve(params, discipline, method).anbc


def anpec(n: int, anbc_value: float) -> float:
    """Average number of processors computing: ``N - ANBC``."""
    if not (0.0 <= anbc_value <= n):
        raise OutOfRangeAnbc(f"ANBC {anbc_value} outside [0, {n}]")
    return n - anbc_value


def pct_difference(anbc_fcfs: float, anbc_priority: float) -> float:
    """Relative excess of the priority ANBC over FCFS, in percent."""
    if anbc_fcfs == 0:
        raise DivisionByZero("FCFS ANBC is zero; percentage difference undefined")
    return (anbc_priority - anbc_fcfs) / anbc_fcfs * 100.0


@dataclass(frozen=True)
class ComparisonRow:
    think_rate: float
    anbc_fcfs: float
    anbc_priority: float
    pct_difference: float


def compare(params: ModelParams, method: str = "auto") -> ComparisonRow:
    f = anbc(params, Discipline.FCFS, method)
    p = anbc(params, Discipline.PRIORITY, method)
    return ComparisonRow(params.think_rate, f, p, pct_difference(f, p))


@dataclass(frozen=True)
class AnpecCurve:
    think_rate: float
    resume_prob: float
    mu2: float
    discipline: Discipline
    points: tuple  # ((N, anpec), ...) at consecutive N

    def __post_init__(self):
        for n, value in self.points:
            if not (0.0 <= value <= n):
                raise OutOfRangeAnbc(f"ANPEC {value} outside [0, {n}]")

    def anbc_at(self, n: int) -> float:
        for m, value in self.points:
            if m == n:
                return m - value
        raise KeyError(n)


def anpec_curve(
    think_rate: float,
    resume_prob: float,
    mu2: float,
    discipline: Discipline,
    n_max: int,
    mu1: float = 0.1,
    n_min: int = 1,
) -> AnpecCurve:
    points = []
    for n in range(n_min, n_max + 1):
        params = ModelParams.exponential(n, think_rate, mu1, mu2, resume_prob)
        points.append((n, solve(params, discipline).anpec))
    return AnpecCurve(think_rate, resume_prob, mu2, discipline, tuple(points))


def saturation_point(curve: AnpecCurve, epsilon: float = DEFAULT_SATURATION_EPS):
    """Smallest N whose ANPEC gain over N-1 is below ``epsilon``, else None."""
    pts = sorted(curve.points)
    if len(pts) < 2:
        raise TooFewPoints("a saturation point needs at least two curve points")
    for (n0, a0), (n1, a1) in zip(pts, pts[1:]):
        if n1 != n0 + 1:
            raise ValueError(f"curve points must be at consecutive N, got {n0} then {n1}")
        if a1 - a0 < epsilon:
            return n1
    return None


def marginal_gain(curve: AnpecCurve, n: int) -> float:
    """``anpec(n) - anpec(n - 1)``."""
    values = dict(curve.points)
    return values[n] - values[n - 1]


WAIT_METRICS = ("mean_wait_blocking", "mean_wait_writeback", "mean_wait_overall")


@dataclass(frozen=True)
class ConservationLine:
    metric: str
    fcfs_mean: float
    fcfs_half_width: float
    priority_mean: float
    priority_half_width: float

    @property
    def difference(self) -> float:
        return self.fcfs_mean - self.priority_mean


@dataclass(frozen=True)
class ConservationReport:
    params: ModelParams
    ci_level: float
    lines: tuple

    def line(self, metric: str) -> ConservationLine:
        for ln in self.lines:
            if ln.metric == metric:
                return ln
        raise KeyError(metric)


def conservation_report(fcfs, prio) -> ConservationReport:
    """Side-by-side mean waits of the two disciplines.

    Purely descriptive: nothing here decides whether the waits are "equal".
    """
    if fcfs.config.params != prio.config.params:
        raise MismatchedParams("both aggregates must come from the same ModelParams")
    if fcfs.config.discipline is not Discipline.FCFS or prio.config.discipline is not Discipline.PRIORITY:
        raise MismatchedParams("expected one FCFS and one priority aggregate, in that order")
    lines = []
    for metric in WAIT_METRICS + ("time_avg_blocked", "time_avg_busy"):
        a, b = fcfs[metric], prio[metric]
        lines.append(ConservationLine(metric, a.mean, a.half_width, b.mean, b.half_width))
    return ConservationReport(fcfs.config.params, fcfs.config.ci_level, tuple(lines))
