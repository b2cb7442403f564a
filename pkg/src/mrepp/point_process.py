"""Exceedances, gap-p clusters and marked rare-event point processes."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, NamedTuple, Sequence

import numpy as np

from .observables import ThresholdLevel


class MarkKind(str, Enum):
    REPP = "REPP"  # number of exceedances in the cluster
    AOT = "AOT"  # sum of excesses
    POT = "POT"  # largest excess


@dataclass(frozen=True, eq=False)
class ExceedanceSeries:
    u: float
    series_length: int
    times: np.ndarray
    excesses: np.ndarray

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True, eq=False)
class Cluster:
    times: np.ndarray
    excesses: np.ndarray
    truncated: bool = False


class MaxStatistic(NamedTuple):
    M_n: float
    no_exceedance: bool


CSV_COLUMNS = ("replica_id", "rescaled_time", "raw_mark", "scaled_mark", "cluster_size", "truncated")


@dataclass(frozen=True, eq=False)
class MarkedPointProcess:
    """Clusters on the ``v_u``-rescaled time axis, each carrying a raw mark.

    ``horizon`` is ``series_length / v_u``, the right end of the observation
    window on the rescaled axis.
    """

    times: np.ndarray
    marks: np.ndarray
    sizes: np.ndarray
    truncated: np.ndarray
    u: float
    v_u: float
    a_u: float
    p: int
    kind: MarkKind
    horizon: float

    def __len__(self):
        return len(self.times)

    @property
    def points(self):
        return list(zip(self.times.tolist(), self.marks.tolist()))

    @property
    def scaled_marks(self) -> np.ndarray:
        return self.a_u * self.marks

    def select(self, exclude_truncated: bool) -> "MarkedPointProcess":
        if not exclude_truncated or not self.truncated.any():
            return self
        keep = ~self.truncated
        return MarkedPointProcess(
            self.times[keep], self.marks[keep], self.sizes[keep], self.truncated[keep],
            self.u, self.v_u, self.a_u, self.p, self.kind, self.horizon,
        )

    def csv_rows(self, replica_id: int = 0):
        scaled = self.scaled_marks
        for i in range(len(self)):
            yield (
                replica_id,
                format(float(self.times[i]), ".17g"),
                format(float(self.marks[i]), ".17g"),
                format(float(scaled[i]), ".17g"),
                int(self.sizes[i]),
                int(bool(self.truncated[i])),
            )


def write_processes_csv(path, processes: Sequence[MarkedPointProcess]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for replica_id, mp in enumerate(processes):
            writer.writerows(mp.csv_rows(replica_id))


def extract_exceedances(values, u: float) -> ExceedanceSeries:
    values = np.asarray(values, dtype=float)
    times = np.flatnonzero(values > u)
    return ExceedanceSeries(u, len(values), times, values[times] - u)


def _cluster_starts(times: np.ndarray, p: int) -> np.ndarray:
    if times.size == 0:
        return np.empty(0, dtype=np.int64)
    gaps = np.diff(times)
    return np.concatenate(([0], np.flatnonzero(gaps > p) + 1))


def _last_truncated(ex: ExceedanceSeries, p: int) -> bool:
    return bool(ex.times.size) and ex.series_length - int(ex.times[-1]) <= p


def identify_clusters(ex: ExceedanceSeries, p: int) -> List[Cluster]:
    """Group exceedances whose consecutive gaps are at most ``p``.

    The final cluster is flagged ``truncated`` when fewer than ``p``
    observations follow its last exceedance.
    """
    if p < 0:
        raise ValueError("p must be non-negative")
    starts = _cluster_starts(ex.times, p)
    bounds = np.append(starts, ex.times.size)
    clusters = [
        Cluster(ex.times[lo:hi], ex.excesses[lo:hi]) for lo, hi in zip(bounds[:-1], bounds[1:])
    ]
    if clusters and _last_truncated(ex, p):
        last = clusters[-1]
        clusters[-1] = Cluster(last.times, last.excesses, truncated=True)
    return clusters


def compute_mark(c: Cluster, kind) -> float:
    kind = MarkKind(kind)
    if len(c.excesses) == 0:
        return 0.0
    if kind is MarkKind.AOT:
        return float(np.sum(c.excesses))
    if kind is MarkKind.POT:
        return float(np.max(c.excesses))
    return float(len(c.excesses))


def build_mrepp(values, level: ThresholdLevel, p: int, kind) -> MarkedPointProcess:
    """Marked rare-event point process of ``values`` above ``level.u``.

    Equivalent to mapping :func:`compute_mark` over
    :func:`identify_clusters`, done in one vectorised pass.
    """
    kind = MarkKind(kind)
    ex = extract_exceedances(values, level.u)
    starts = _cluster_starts(ex.times, p)
    if starts.size == 0:
        marks = np.empty(0)
        sizes = np.empty(0, dtype=np.int64)
    else:
        sizes = np.diff(np.append(starts, ex.times.size))
        if kind is MarkKind.AOT:
            marks = np.add.reduceat(ex.excesses, starts)
        elif kind is MarkKind.POT:
            marks = np.maximum.reduceat(ex.excesses, starts)
        else:
            marks = sizes.astype(float)
    truncated = np.zeros(starts.size, dtype=bool)
    if starts.size and _last_truncated(ex, p):
        truncated[-1] = True
    return MarkedPointProcess(
        ex.times[starts] / level.v_u,
        marks,
        sizes,
        truncated,
        level.u,
        level.v_u,
        level.a_u,
        p,
        kind,
        ex.series_length / level.v_u,
    )


def count_on_interval(mp: MarkedPointProcess, J: Iterable, scaled: bool = False) -> float:
    """Total (optionally ``a_u``-scaled) mark of points in a union of ``[a, b)`` intervals."""
    marks = mp.scaled_marks if scaled else mp.marks
    total = 0.0
    for a, b in J:
        inside = (mp.times >= a) & (mp.times < b)
        total += float(np.sum(marks[inside]))
    return total


def max_statistic(values, u: float) -> MaxStatistic:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("values must be non-empty")
    m = float(values.max())
    return MaxStatistic(m, m <= u)


def concatenate(processes: Sequence[MarkedPointProcess]) -> MarkedPointProcess:
    """Lay independent replicas end to end on one rescaled time axis."""
    if not processes:
        raise ValueError("nothing to concatenate")
    offsets = np.concatenate(([0.0], np.cumsum([mp.horizon for mp in processes])[:-1]))
    first = processes[0]
    return MarkedPointProcess(
        np.concatenate([mp.times + off for mp, off in zip(processes, offsets)]),
        np.concatenate([mp.marks for mp in processes]),
        np.concatenate([mp.sizes for mp in processes]),
        np.concatenate([mp.truncated for mp in processes]),
        first.u,
        first.v_u,
        first.a_u,
        first.p,
        first.kind,
        float(sum(mp.horizon for mp in processes)),
    )
