"""ECDFs, Kolmogorov-Smirnov distances and empirical Laplace transforms."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import EmptySample, TooFewPoints

KS_C99 = 1.628  # asymptotic 99% quantile of the Kolmogorov distribution


@dataclass(frozen=True, eq=False)
class EmpiricalCDF:
    sorted_samples: np.ndarray
    n: int

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.searchsorted(self.sorted_samples, x, side="right") / self.n
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class KSResult:
    """Raw KS statistic with its asymptotic 99% threshold.

    ``n2`` is set for two-sample comparisons.
    """

    statistic: float
    n: int
    n2: Optional[int] = None

    @property
    def threshold(self) -> float:
        if self.n2 is None:
            return KS_C99 / math.sqrt(self.n)
        return KS_C99 * math.sqrt((self.n + self.n2) / (self.n * self.n2))

    @property
    def passes(self) -> bool:
        return self.statistic < self.threshold


def empirical_cdf(samples) -> EmpiricalCDF:
    s = np.sort(np.asarray(samples, dtype=float).ravel())
    if s.size == 0:
        raise EmptySample("empirical CDF of an empty sample")
    return EmpiricalCDF(s, s.size)


def ks_distance(ecdf: EmpiricalCDF, cdf: Callable) -> KSResult:
    """``sup |F_hat - F|`` checked on both sides of every jump of ``F_hat``.

    ``cdf`` must accept arrays. The left limit of ``F`` at a sample point is
    approximated by ``F`` at the next float below it, which is exact for the
    right-continuous step laws used here.
    """
    s = ecdf.sorted_samples
    # distinct jump points and the ECDF value just after / before each
    values, first = np.unique(s, return_index=True)
    after = np.append(first[1:], ecdf.n) / ecdf.n
    before = first / ecdf.n
    f_at = np.asarray(cdf(values), dtype=float)
    f_left = np.asarray(cdf(np.nextafter(values, -np.inf)), dtype=float)
    stat = max(np.max(np.abs(after - f_at)), np.max(np.abs(before - f_left)))
    return KSResult(float(min(stat, 1.0)), ecdf.n)


def empirical_laplace(samples, y: float) -> float:
    s = np.asarray(samples, dtype=float)
    if s.size == 0:
        raise EmptySample("Laplace transform of an empty sample")
    if y < 0:
        raise ValueError("y must be non-negative")
    return float(np.mean(np.exp(-y * s)))


def interarrival_exponential_check(mp, theta: float) -> KSResult:
    """KS of the gaps between consecutive points of ``mp`` against Exp(rate ``theta``)."""
    times = np.asarray(mp.times if hasattr(mp, "times") else mp, dtype=float)
    if times.size < 2:
        raise TooFewPoints("need at least two points for one gap")
    gaps = np.diff(np.sort(times))
    return ks_distance(empirical_cdf(gaps), lambda x: -np.expm1(-theta * np.maximum(x, 0.0)))


def two_sample_ks(a, b) -> KSResult:
    """``sup |F_a - F_b|`` over the merged support."""
    ea, eb = empirical_cdf(a), empirical_cdf(b)
    grid = np.union1d(ea.sorted_samples, eb.sorted_samples)
    stat = float(np.max(np.abs(ea(grid) - eb(grid))))
    return KSResult(stat, ea.n, eb.n)


def qq_data(samples, ppf: Callable):
    """Pairs (theoretical, empirical) quantiles at plotting positions ``i/(n+1)``."""
    s = np.sort(np.asarray(samples, dtype=float))
    if s.size == 0:
        raise EmptySample("Q-Q data of an empty sample")
    probs = np.arange(1, s.size + 1) / (s.size + 1)
    return np.asarray(ppf(probs), dtype=float), s
