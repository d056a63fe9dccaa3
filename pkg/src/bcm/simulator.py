"""Discrete-event simulation of the shared bus under both disciplines.

The event loop is a compiled kernel (numba) so that long horizons over the
whole parameter grid stay cheap. Each processor owns a random stream (see
:mod:`bcm.rng`) and draws, in a fixed order per request cycle, its think
time, the blocking service time, the write-back coin and (if the coin says
so) the write-back service time. The demand a processor places on the bus is
therefore the same under both disciplines for equal seeds; only the order
of service differs.

Statistics are time averages over ``[warmup, horizon]``. A request's wait
(enqueue to service start) is tallied when it completes inside the window
and was enqueued after ``warmup``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import stats

from . import rng
from .errors import InvalidConfig
from .model import (
    Deterministic,
    Discipline,
    Erlang,
    Exponential,
    HyperExponential,
    ModelParams,
    ServiceSpec,
)

DEFAULT_HORIZON = 2e6
DEFAULT_WARMUP = 1e5
DEFAULT_REPLICATIONS = 20
DEFAULT_CI = 0.99

# event codes in the optional log
EV_THINK_END = 0
EV_START_B = 1
EV_START_W = 2
EV_DONE_B = 3
EV_DONE_W = 4

_FCFS = 0
_PRIORITY = 1

_EXP, _DET, _ERLANG, _HYPER = 0, 1, 2, 3


def encode_service(spec: ServiceSpec) -> np.ndarray:
    """Flat float encoding consumed by the kernel."""
    if isinstance(spec, Exponential):
        return np.array([_EXP, 1, spec.rate], dtype=np.float64)
    if isinstance(spec, Deterministic):
        return np.array([_DET, 1, spec.duration], dtype=np.float64)
    if isinstance(spec, Erlang):
        return np.array([_ERLANG, 2, spec.shape, spec.rate], dtype=np.float64)
    if isinstance(spec, HyperExponential):
        m = len(spec.weights)
        return np.array([_HYPER, m, *spec.weights, *spec.rates], dtype=np.float64)
    raise TypeError(f"not a service spec: {spec!r}")


def sample(spec: ServiceSpec, stream) -> float:
    """Draw one service time from ``spec`` using ``stream.uniform()``.

    Exponentials use the inverse transform ``-ln(1 - u) / rate``; an Erlang
    is a sum of ``shape`` exponentials; a hyperexponential first picks a
    branch by its weights, then draws that branch's exponential.
    """
    if isinstance(spec, Exponential):
        return -math.log1p(-stream.uniform()) / spec.rate
    if isinstance(spec, Deterministic):
        return float(spec.duration)
    if isinstance(spec, Erlang):
        return sum(-math.log1p(-stream.uniform()) for _ in range(spec.shape)) / spec.rate
    if isinstance(spec, HyperExponential):
        u = stream.uniform()
        acc = 0.0
        branch = len(spec.weights) - 1
        for i, w in enumerate(spec.weights):
            acc += w
            if u < acc:
                branch = i
                break
        return -math.log1p(-stream.uniform()) / spec.rates[branch]
    raise TypeError(f"not a service spec: {spec!r}")


@njit(cache=True, nogil=True)
def _draw(enc, key, counters, i):
    kind = int(enc[0])
    if kind == _EXP:
        u = rng.uniform_at(key, counters[i])
        counters[i] += 1
        return -math.log1p(-u) / enc[2]
    if kind == _DET:
        return enc[2]
    if kind == _ERLANG:
        shape = int(enc[2])
        total = 0.0
        for _ in range(shape):
            u = rng.uniform_at(key, counters[i])
            counters[i] += 1
            total += -math.log1p(-u)
        return total / enc[3]
    m = int(enc[1])
    u = rng.uniform_at(key, counters[i])
    counters[i] += 1
    acc = 0.0
    branch = m - 1
    for b in range(m):
        acc += enc[2 + b]
        if u < acc:
            branch = b
            break
    u = rng.uniform_at(key, counters[i])
    counters[i] += 1
    return -math.log1p(-u) / enc[2 + m + branch]


@njit(cache=True, nogil=True)
def _think(lam, key, counters, i):
    u = rng.uniform_at(key, counters[i])
    counters[i] += 1
    return -math.log1p(-u) / lam


@njit(cache=True, nogil=True)
def _kernel(n, lam, q, enc1, enc2, discipline, horizon, warmup, proc_keys, log_capacity):
    inf = np.inf
    counters = np.zeros(n, dtype=np.uint64)
    think_end = np.empty(n)
    think_seq = np.zeros(n, dtype=np.int64)
    b_dur = np.zeros(n)
    w_dur = np.zeros(n)
    has_w = np.zeros(n, dtype=np.bool_)
    out_b = np.zeros(n, dtype=np.int64)
    out_w = np.zeros(n, dtype=np.int64)

    cap = 2 * n + 2
    q_kind = np.zeros(cap, dtype=np.int64)  # 0 = B, 1 = W
    q_proc = np.zeros(cap, dtype=np.int64)
    q_time = np.zeros(cap)
    q_head = 0
    q_len = 0

    busy = False
    cur_kind = 0
    cur_proc = -1
    cur_enq = 0.0
    bus_end = inf
    bus_seq = 0
    bus_start_wait = 0.0
    seq = 0

    log_t = np.zeros(log_capacity)
    log_e = np.zeros(log_capacity, dtype=np.int64)
    log_p = np.zeros(log_capacity, dtype=np.int64)
    n_log = 0

    for i in range(n):
        think_end[i] = _think(lam, proc_keys[i], counters, i)
        seq += 1
        think_seq[i] = seq

    n_blocked = 0
    t = 0.0
    area_blocked = 0.0
    area_busy = 0.0
    wait_b = 0.0
    wait_w = 0.0
    done_b = 0
    done_w = 0
    n_events = 0
    wc_violations = 0
    proc_violations = 0

    while True:
        # next think completion, ties broken by scheduling order
        nxt = -1
        t_think = inf
        s_think = 0
        for i in range(n):
            if think_end[i] < t_think or (think_end[i] == t_think and think_seq[i] < s_think):
                t_think = think_end[i]
                s_think = think_seq[i]
                nxt = i
        bus_first = busy and (bus_end < t_think or (bus_end == t_think and bus_seq < s_think))
        t_new = bus_end if bus_first else t_think
        if t_new == inf:
            t_new = horizon + 1.0
        lo = t if t > warmup else warmup
        hi = t_new if t_new < horizon else horizon
        if hi > lo:
            area_blocked += n_blocked * (hi - lo)
            if busy:
                area_busy += hi - lo
        if t_new > horizon:
            break
        t = t_new
        n_events += 1

        start_next = False
        if bus_first:
            p_ = cur_proc
            if cur_kind == 0:
                n_blocked -= 1
                out_b[p_] -= 1
                if t > warmup and cur_enq >= warmup:
                    done_b += 1
                    wait_b += bus_start_wait
                if n_log < log_capacity:
                    log_t[n_log] = t
                    log_e[n_log] = EV_DONE_B
                    log_p[n_log] = p_
                    n_log += 1
                think_end[p_] = t + _think(lam, proc_keys[p_], counters, p_)
                seq += 1
                think_seq[p_] = seq
                busy = False
                if has_w[p_]:
                    has_w[p_] = False
                    out_w[p_] += 1
                    if out_w[p_] > 1:
                        proc_violations += 1
                    if discipline == _PRIORITY:
                        busy = True
                        cur_kind = 1
                        cur_proc = p_
                        cur_enq = t
                        bus_start_wait = 0.0
                        bus_end = t + w_dur[p_]
                        seq += 1
                        bus_seq = seq
                        if n_log < log_capacity:
                            log_t[n_log] = t
                            log_e[n_log] = EV_START_W
                            log_p[n_log] = p_
                            n_log += 1
                    else:
                        slot = (q_head + q_len) % cap
                        q_kind[slot] = 1
                        q_proc[slot] = p_
                        q_time[slot] = t
                        q_len += 1
                if not busy:
                    start_next = True
            else:
                out_w[p_] -= 1
                if t > warmup and cur_enq >= warmup:
                    done_w += 1
                    wait_w += bus_start_wait
                if n_log < log_capacity:
                    log_t[n_log] = t
                    log_e[n_log] = EV_DONE_W
                    log_p[n_log] = p_
                    n_log += 1
                busy = False
                start_next = True
        else:
            i = nxt
            think_end[i] = inf
            b_dur[i] = _draw(enc1, proc_keys[i], counters, i)
            u = rng.uniform_at(proc_keys[i], counters[i])
            counters[i] += 1
            has_w[i] = u < q
            if has_w[i]:
                w_dur[i] = _draw(enc2, proc_keys[i], counters, i)
            n_blocked += 1
            out_b[i] += 1
            if out_b[i] > 1:
                proc_violations += 1
            if n_log < log_capacity:
                log_t[n_log] = t
                log_e[n_log] = EV_THINK_END
                log_p[n_log] = i
                n_log += 1
            slot = (q_head + q_len) % cap
            q_kind[slot] = 0
            q_proc[slot] = i
            q_time[slot] = t
            q_len += 1
            if not busy:
                start_next = True

        if start_next and q_len > 0:
            kind = q_kind[q_head]
            p_ = q_proc[q_head]
            enq = q_time[q_head]
            q_head = (q_head + 1) % cap
            q_len -= 1
            busy = True
            cur_kind = kind
            cur_proc = p_
            cur_enq = enq
            bus_start_wait = t - enq
            bus_end = t + (b_dur[p_] if kind == 0 else w_dur[p_])
            seq += 1
            bus_seq = seq
            if n_log < log_capacity:
                log_t[n_log] = t
                log_e[n_log] = EV_START_B if kind == 0 else EV_START_W
                log_p[n_log] = p_
                n_log += 1
        if not busy:
            bus_end = inf
        if q_len > 0 and not busy:
            wc_violations += 1

    window = horizon - warmup
    result = np.zeros(11)
    result[0] = area_blocked / window
    result[1] = area_busy / window
    result[2] = wait_b / done_b if done_b > 0 else 0.0
    result[3] = wait_w / done_w if done_w > 0 else 0.0
    result[4] = (wait_b + wait_w) / (done_b + done_w) if done_b + done_w > 0 else 0.0
    result[5] = done_b
    result[6] = done_w
    result[7] = n_events
    result[8] = wc_violations
    result[9] = proc_violations
    result[10] = n_log
    return result, log_t[:n_log], log_e[:n_log], log_p[:n_log]


@dataclass(frozen=True)
class SimConfig:
    params: ModelParams
    discipline: Discipline
    horizon: float = DEFAULT_HORIZON
    warmup: float = DEFAULT_WARMUP
    replications: int = DEFAULT_REPLICATIONS
    base_seed: int = 0
    ci_level: float = DEFAULT_CI

    def __post_init__(self):
        problems = []
        if not isinstance(self.params, ModelParams):
            problems.append("params must be a ModelParams")
        if not isinstance(self.discipline, Discipline):
            problems.append("discipline must be a Discipline")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            problems.append(f"horizon must be finite and > 0, got {self.horizon}")
        if not (0 <= self.warmup < self.horizon):
            problems.append(f"warmup must satisfy 0 <= warmup < horizon, got {self.warmup}")
        if isinstance(self.replications, bool) or not isinstance(self.replications, int) or self.replications < 2:
            problems.append(f"replications must be an integer >= 2, got {self.replications!r}")
        if not (0 < self.ci_level < 1):
            problems.append(f"ci_level must lie in (0, 1), got {self.ci_level}")
        if problems:
            raise InvalidConfig("; ".join(problems))


@dataclass(frozen=True)
class ReplicationStats:
    time_avg_blocked: float
    time_avg_busy: float
    mean_wait_blocking: float
    mean_wait_writeback: float
    mean_wait_overall: float
    blocking_completions: int
    writeback_completions: int
    events: int = field(default=0, compare=False)
    work_conservation_violations: int = field(default=0, compare=False)
    per_processor_violations: int = field(default=0, compare=False)


METRICS = (
    "time_avg_blocked",
    "time_avg_busy",
    "mean_wait_blocking",
    "mean_wait_writeback",
    "mean_wait_overall",
    "blocking_completions",
    "writeback_completions",
)


@dataclass(frozen=True)
class EventLog:
    time: np.ndarray
    event: np.ndarray
    processor: np.ndarray

    def __len__(self):
        return len(self.time)

    def equals(self, other: "EventLog") -> bool:
        return (
            np.array_equal(self.time, other.time)
            and np.array_equal(self.event, other.event)
            and np.array_equal(self.processor, other.processor)
        )


def _run_kernel(config: SimConfig, replication_index: int, log_capacity: int = 0):
    p = config.params
    rep_key = rng.replication_key(config.base_seed, replication_index)
    keys = np.array([rng.processor_key(rep_key, i) for i in range(p.n_processors)], dtype=np.uint64)
    res, lt, le, lp = _kernel(
        p.n_processors,
        p.think_rate,
        p.writeback_prob,
        encode_service(p.blocking_service),
        encode_service(p.writeback_service),
        _PRIORITY if config.discipline is Discipline.PRIORITY else _FCFS,
        float(config.horizon),
        float(config.warmup),
        keys,
        log_capacity,
    )
    stats_ = ReplicationStats(
        time_avg_blocked=float(res[0]),
        time_avg_busy=float(res[1]),
        mean_wait_blocking=float(res[2]),
        mean_wait_writeback=float(res[3]),
        mean_wait_overall=float(res[4]),
        blocking_completions=int(res[5]),
        writeback_completions=int(res[6]),
        events=int(res[7]),
        work_conservation_violations=int(res[8]),
        per_processor_violations=int(res[9]),
    )
    return stats_, EventLog(lt.copy(), le.copy(), lp.copy())


def run_replication(config: SimConfig, replication_index: int) -> ReplicationStats:
    """Simulate one replication; deterministic in (base_seed, replication_index)."""
    if replication_index < 0:
        raise InvalidConfig(f"replication index must be >= 0, got {replication_index}")
    return _run_kernel(config, replication_index)[0]


def event_log(config: SimConfig, replication_index: int = 0, capacity: int = 100_000):
    """Replication statistics plus the first ``capacity`` logged events."""
    return _run_kernel(config, replication_index, capacity)


@dataclass(frozen=True)
class Estimate:
    mean: float
    half_width: float
    n: int

    @property
    def low(self) -> float:
        return self.mean - self.half_width

    @property
    def high(self) -> float:
        return self.mean + self.half_width

    def covers(self, value: float) -> bool:
        return self.low <= value <= self.high


def t_interval(values, level: float) -> Estimate:
    """Student-t interval for the mean of independent replication values."""
    x = np.asarray(values, dtype=float)
    n = len(x)
    m = float(x.mean())
    s = float(x.std(ddof=1))
    half = float(stats.t.ppf(0.5 + level / 2, n - 1)) * s / math.sqrt(n)
    return Estimate(m, half, n)


@dataclass(frozen=True)
class SimAggregate:
    config: SimConfig
    estimates: dict
    replications: tuple

    def __getitem__(self, metric: str) -> Estimate:
        return self.estimates[metric]

    @property
    def work_conservation_violations(self) -> int:
        return sum(r.work_conservation_violations for r in self.replications)

    @property
    def per_processor_violations(self) -> int:
        return sum(r.per_processor_violations for r in self.replications)


def default_workers() -> int:
    env = os.environ.get("BCM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(4, os.cpu_count() or 1)


def run(config: SimConfig, workers: int | None = None) -> SimAggregate:
    """Run all replications and aggregate them with Student-t intervals."""
    workers = workers or default_workers()
    indices = range(config.replications)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            reps = list(pool.map(lambda r: run_replication(config, r), indices))
    else:
        reps = [run_replication(config, r) for r in indices]
    estimates = {
        name: t_interval([getattr(r, name) for r in reps], config.ci_level) for name in METRICS
    }
    return SimAggregate(config, estimates, tuple(reps))
