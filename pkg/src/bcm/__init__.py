"""Closed queueing models of a shared-bus multiprocessor with private caches.

Two service disciplines for write-back requests are modelled: FCFS (the
write-back joins the tail of the bus queue) and priority (the write-back is
served right after the blocking request that generated it).
"""

from .model import (
    Deterministic,
    Discipline,
    Erlang,
    Exponential,
    HyperExponential,
    ModelParams,
    validate,
)

__all__ = [
    "Deterministic",
    "Discipline",
    "Erlang",
    "Exponential",
    "HyperExponential",
    "ModelParams",
    "validate",
]

__version__ = "0.1.0"
