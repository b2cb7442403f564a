"""Marked rare-event point processes for chaotic interval maps.

Submodules: :mod:`dynamics` (maps, orbits, induction), :mod:`observables`
(distance observables, thresholds), :mod:`point_process` (clusters and
marks), :mod:`theory` (extremal index, multiplicity laws, compound Poisson
limits), :mod:`stats` (ECDF and KS machinery) and :mod:`experiments`
(replica harness and reports).
"""

from .dynamics import LSV, Interval, LinearMod1, PiecewiseLinear, parse_map
from .observables import Observable
from .point_process import MarkKind
from .theory import (
    AotBounded,
    AotLog,
    AotPareto,
    CompoundPoissonSpec,
    Geometric,
    GpdBounded,
    GpdExp,
    GpdPareto,
)

__version__ = "0.1.0"

__all__ = [
    "LSV",
    "Interval",
    "LinearMod1",
    "PiecewiseLinear",
    "parse_map",
    "Observable",
    "MarkKind",
    "AotBounded",
    "AotLog",
    "AotPareto",
    "CompoundPoissonSpec",
    "Geometric",
    "GpdBounded",
    "GpdExp",
    "GpdPareto",
]
