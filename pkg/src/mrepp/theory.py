"""Closed-form limit objects: extremal index, multiplicity laws, compound Poisson.

Multiplicity distributions
--------------------------
``Geometric``                cluster sizes of the REPP
``GpdExp/GpdPareto/GpdBounded``  peak (or isolated) excesses, one per observable type
``AotLog/AotPareto/AotBounded``  summed excesses around a repelling point with
                             exact local expansion ``M``

The AOT laws are piecewise: on the cell ``[b_k, b_{k+1})`` a cluster carries
``k + 1`` exceedances and the survival function has a branch-specific closed
form. ``b_k`` are the normalised mark boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import integrate

from .dynamics import MapSpec, verify_periodic
from .errors import (
    DomainError,
    NoExceedances,
    NotPeriodicError,
    NotRepellingError,
    OverlapError,
    QuadratureFailure,
)

_QUAD_CUTOFF = 50.0  # e**-50 is below double-precision resolution of any transform value we use
_SAMPLE_TOL = 1e-12


def _as_array(x):
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)):
        raise DomainError("NaN is outside every support")
    return x


def _unwrap(out):
    return out if out.ndim else float(out)


class MultiplicityDist:
    """Common interface: ``cdf``, ``sample`` and ``laplace``."""

    tag = ""

    def cdf(self, x):
        x = _as_array(x)
        return _unwrap(np.where(x < 0, 0.0, self._cdf(np.maximum(x, 0.0))))

    def sf(self, x):
        return _unwrap(1.0 - np.asarray(self.cdf(x)))

    def sample(self, size, rng: np.random.Generator) -> np.ndarray:
        """Inverse-CDF draws."""
        return self.ppf(rng.random(size))

    def ppf(self, q):
        raise NotImplementedError

    def laplace(self, y: float) -> float:
        if y < 0:
            raise DomainError("Laplace argument must be non-negative")
        if y == 0:
            return 1.0
        return self._laplace_quad(float(y))

    def _cells(self, t_max: float, y: float):
        """Points in (0, t_max) where ``cdf(t / y)`` is not smooth."""
        return []

    def _laplace_quad(self, y: float) -> float:
        # E exp(-yZ) = int_0^inf exp(-t) cdf(t / y) dt
        edges = [0.0, *self._cells(_QUAD_CUTOFF, y), _QUAD_CUTOFF]
        total = 0.0
        error = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            val, err = integrate.quad(
                lambda t: math.exp(-t) * float(self.cdf(t / y)),
                a, b, epsabs=0.0, epsrel=1e-11, limit=200,
            )
            total += val
            error += err
        total += math.exp(-_QUAD_CUTOFF) * float(self.cdf(_QUAD_CUTOFF / y))
        if not error <= 1e-8 * total:
            raise QuadratureFailure(f"{self!r}: Laplace transform at y={y} has error {error}")
        return total

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Geometric(MultiplicityDist):
    theta: float
    tag = "Geometric"

    def __post_init__(self):
        if not 0.0 < self.theta <= 1.0:
            raise ValueError("theta must lie in (0, 1]")

    def _cdf(self, x):
        # right-continuous: cdf(k) includes the mass at k
        if self.theta == 1.0:
            return np.where(x >= 1.0, 1.0, 0.0)
        return 1.0 - (1.0 - self.theta) ** np.floor(x)

    def ppf(self, q):
        q = np.asarray(q, dtype=float)
        if self.theta == 1.0:
            return np.ones_like(q)
        k = np.ceil(np.log1p(-q) / math.log1p(-self.theta))
        return np.maximum(k, 1.0)

    def laplace(self, y):
        if y < 0:
            raise DomainError("Laplace argument must be non-negative")
        e = math.exp(-y)
        return self.theta * e / (1.0 - (1.0 - self.theta) * e)

    def to_dict(self):
        return {"type": self.tag, "theta": self.theta}


@dataclass(frozen=True)
class GpdExp(MultiplicityDist):
    tag = "GpdExp"

    def _cdf(self, x):
        return -np.expm1(-x)

    def ppf(self, q):
        return -np.log1p(-np.asarray(q, dtype=float))

    def laplace(self, y):
        if y < 0:
            raise DomainError("Laplace argument must be non-negative")
        return 1.0 / (1.0 + y)

    def to_dict(self):
        return {"type": self.tag}


@dataclass(frozen=True)
class GpdPareto(MultiplicityDist):
    beta: float
    tag = "GpdPareto"

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")

    def _cdf(self, x):
        return 1.0 - (1.0 + x) ** (-self.beta)

    def ppf(self, q):
        return (1.0 - np.asarray(q, dtype=float)) ** (-1.0 / self.beta) - 1.0

    def to_dict(self):
        return {"type": self.tag, "beta": self.beta}


@dataclass(frozen=True)
class GpdBounded(MultiplicityDist):
    gamma: float
    tag = "GpdBounded"

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")

    def _cdf(self, x):
        return 1.0 - np.clip(1.0 - x, 0.0, None) ** self.gamma

    def ppf(self, q):
        return 1.0 - (1.0 - np.asarray(q, dtype=float)) ** (1.0 / self.gamma)

    def _cells(self, t_max, y):
        return [y] if y < t_max else []

    def to_dict(self):
        return {"type": self.tag, "gamma": self.gamma}


class _AotDist(MultiplicityDist):
    """Piecewise law shared by the three AOT variants."""

    M: float

    def boundary(self, k):
        """Normalised mark at which clusters start carrying ``k + 1`` exceedances."""
        raise NotImplementedError

    def branch_sf(self, k, x):
        """Survival function on cell ``k``."""
        raise NotImplementedError

    def kappa_bound(self, x):
        raise NotImplementedError

    def kappa_start(self, x):
        """A cell index known to be at most ``kappa(x)``."""
        return np.zeros(np.shape(x), dtype=np.int64)

    def kappa(self, x):
        """Cell index of ``x`` by monotone scan over the boundaries."""
        x = _as_array(x)
        if np.any(x < 0):
            raise DomainError("kappa is defined for x >= 0")
        k = self.kappa_start(x)
        cap = np.ceil(self.kappa_bound(x)).astype(np.int64)
        active = self.boundary(k + 1) <= x
        while active.any():
            k = np.where(active, k + 1, k)
            if np.any(k > cap):
                raise RuntimeError("kappa scan exceeded its analytic bound")
            active = self.boundary(k + 1) <= x
        return k if k.ndim else int(k)

    @property
    def k_cap(self) -> int:
        """A cell index whose boundary survival is below e**-750 (0 in double precision)."""
        return int(math.ceil(1500.0 / math.log(self.M))) + 2

    def _cdf(self, x):
        with np.errstate(over="ignore"):
            x_cap = float(self.boundary(self.k_cap))
        far = x >= x_cap
        inner = np.where(far, 0.0, x)
        return np.where(far, 1.0, 1.0 - self.branch_sf(np.asarray(self.kappa(inner)), inner))

    def ppf(self, q):
        s = 1.0 - np.asarray(q, dtype=float)
        if np.any((s <= 0) | (s > 1)):
            raise DomainError("quantile level must lie in [0, 1)")
        # branch preselection: sf(b_{k+1}) < s <= sf(b_k)
        k = np.zeros(s.shape, dtype=np.int64)
        active = self.branch_sf(k, self.boundary(k + 1)) >= s
        while active.any():
            k = np.where(active, k + 1, k)
            active = self.branch_sf(k, self.boundary(k + 1)) >= s
        lo = np.asarray(self.boundary(k), dtype=float)
        hi = np.asarray(self.boundary(k + 1), dtype=float)
        for _ in range(200):
            if np.all(hi - lo <= _SAMPLE_TOL * np.maximum(1.0, hi)):
                break
            mid = 0.5 * (lo + hi)
            above = self.branch_sf(k, mid) > s
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)
        return 0.5 * (lo + hi)

    def _cells(self, t_max, y):
        out = []
        k = 1
        while True:
            t = y * float(self.boundary(k))
            if t >= t_max:
                return out
            out.append(t)
            k += 1


@dataclass(frozen=True)
class AotLog(_AotDist):
    """``g = -log``: survival ``M**(-k/2) exp(-x/(k+1))`` on cell ``k``."""

    M: float
    tag = "AotLog"

    def __post_init__(self):
        if self.M <= 1:
            raise ValueError("M must exceed 1")

    def boundary(self, k):
        k = np.asarray(k, dtype=float)
        return k * (k + 1) / 2 * math.log(self.M)

    def branch_sf(self, k, x):
        k = np.asarray(k, dtype=float)
        return self.M ** (-k / 2) * np.exp(-np.asarray(x) / (k + 1))

    def kappa_bound(self, x):
        return 2 + np.sqrt(2 * np.asarray(x) / math.log(self.M))

    def kappa(self, x):
        """Closed form ``floor((sqrt(1 + 8x/log M) - 1)/2)``, nudged onto the exact cell."""
        x = _as_array(x)
        if np.any(x < 0):
            raise DomainError("kappa is defined for x >= 0")
        k = np.floor((np.sqrt(1 + 8 * x / math.log(self.M)) - 1) / 2).astype(np.int64)
        # float rounding of the square root can land one cell off at a boundary
        k = np.where(self.boundary(k + 1) <= x, k + 1, k)
        k = np.where(self.boundary(k) > x, k - 1, k)
        return k if k.ndim else int(k)

    def to_dict(self):
        return {"type": self.tag, "M": self.M}


@dataclass(frozen=True)
class AotPareto(_AotDist):
    """``g(r) = r**(-1/alpha)`` with ``a_n = 1/u_n``."""

    alpha: float
    M: float
    tag = "AotPareto"

    def __post_init__(self):
        if self.alpha <= 0 or self.M <= 1:
            raise ValueError("need alpha > 0 and M > 1")

    def boundary(self, k):
        k = np.asarray(k, dtype=float)
        c = self.M ** (-1 / self.alpha)
        return (self.M ** (k / self.alpha) - c) / (1 - c) - (k + 1)

    def branch_sf(self, k, x):
        k = np.asarray(k, dtype=float)
        c = self.M ** (-1 / self.alpha)
        ratio = (1 - c) / (1 - self.M ** (-(k + 1) / self.alpha))
        return ratio ** (-self.alpha) * (k + 1 + np.asarray(x)) ** (-self.alpha)

    def kappa_bound(self, x):
        # each boundary term M**(j/alpha) - 1 >= j log(M)/alpha
        return 1 + np.sqrt(2 * self.alpha * np.asarray(x) / math.log(self.M))

    def to_dict(self):
        return {"type": self.tag, "alpha": self.alpha, "M": self.M}


@dataclass(frozen=True)
class AotBounded(_AotDist):
    """``g(r) = D - r**(1/alpha)`` with ``a_n = 1/(D - u_n)``.

    Unbounded support: a cluster can hold arbitrarily many exceedances, each
    contributing close to 1 after scaling.
    """

    alpha: float
    M: float
    tag = "AotBounded"

    def __post_init__(self):
        if self.alpha <= 0 or self.M <= 1:
            raise ValueError("need alpha > 0 and M > 1")

    def boundary(self, k):
        k = np.asarray(k, dtype=float)
        r = self.M ** (1 / self.alpha)
        return k + 1 - (r - self.M ** (-k / self.alpha)) / (r - 1)

    def branch_sf(self, k, x):
        k = np.asarray(k, dtype=float)
        r = self.M ** (1 / self.alpha)
        with np.errstate(over="ignore"):
            # deep cells overflow M**k to inf, sending the survival to its true limit 0
            ratio = (1 - r) / (1 - self.M ** ((k + 1) / self.alpha))
        return ratio**self.alpha * np.clip(k + 1 - np.asarray(x), 0.0, None) ** self.alpha

    def kappa_bound(self, x):
        r = self.M ** (1 / self.alpha)
        return np.asarray(x) + r / (r - 1) + 1

    def kappa_start(self, x):
        # b_k <= k, so the cell of x is at least floor(x)
        return np.floor(np.asarray(x)).astype(np.int64)

    def to_dict(self):
        return {"type": self.tag, "alpha": self.alpha, "M": self.M}


_REGISTRY = {
    "Geometric": lambda d: Geometric(float(d["theta"])),
    "GpdExp": lambda d: GpdExp(),
    "GpdPareto": lambda d: GpdPareto(float(d["beta"])),
    "GpdBounded": lambda d: GpdBounded(float(d["gamma"])),
    "AotLog": lambda d: AotLog(float(d["M"])),
    "AotPareto": lambda d: AotPareto(float(d["alpha"]), float(d["M"])),
    "AotBounded": lambda d: AotBounded(float(d["alpha"]), float(d["M"])),
}


def multiplicity_from_dict(data: dict) -> MultiplicityDist:
    try:
        return _REGISTRY[data["type"]](data)
    except KeyError as exc:
        raise ValueError(f"unknown multiplicity encoding {data!r}") from exc


@dataclass(frozen=True)
class CompoundPoissonSpec:
    theta: float
    mult: MultiplicityDist

    def __post_init__(self):
        if not 0.0 < self.theta <= 1.0:
            raise ValueError("theta must lie in (0, 1]")

    def to_dict(self) -> dict:
        return {"theta": self.theta, "mult": self.mult.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "CompoundPoissonSpec":
        return cls(float(data["theta"]), multiplicity_from_dict(data["mult"]))


def multiplicity_cdf(dist: MultiplicityDist, x):
    return dist.cdf(x)


def kappa_of_x(dist: _AotDist, x):
    if not isinstance(dist, _AotDist):
        raise TypeError("kappa is only defined for the AOT laws")
    return dist.kappa(x)


def laplace_multiplicity(dist: MultiplicityDist, y: float) -> float:
    return dist.laplace(y)


def ei_periodic(f: MapSpec, zeta: float, p: int) -> float:
    """Extremal index ``1 - 1/|(f^p)'(zeta)|`` of a repelling periodic point."""
    check = verify_periodic(f, zeta, p)
    if not check.is_periodic:
        raise NotPeriodicError(f"{zeta} is not a point of prime period {p}")
    if abs(check.deriv_product) <= 1:
        raise NotRepellingError(f"|(f^{p})'| = {abs(check.deriv_product)} <= 1")
    return 1.0 - 1.0 / abs(check.deriv_product)


class ObrienCounts(NamedTuple):
    q_events: int
    exceedances: int


def obrien_counts(values, u: float, p: int) -> ObrienCounts:
    """Numerator and denominator of the O'Brien ratio for one series.

    A run-ending event at ``j`` needs ``X_j > u`` and ``X_{j+1..j+p} <= u``
    with ``j + p`` inside the series.
    """
    values = np.asarray(values)
    times = np.flatnonzero(values > u)
    if p == 0:
        return ObrienCounts(times.size, times.size)
    next_gap = np.diff(np.append(times, np.iinfo(np.int64).max // 2))
    ends = (next_gap > p) & (times + p <= values.size - 1)
    return ObrienCounts(int(np.count_nonzero(ends)), times.size)


def obrien_estimate(values, u: float, p: int) -> float:
    q, e = obrien_counts(values, u, p)
    if e == 0:
        raise NoExceedances(f"no value exceeds u={u}")
    return q / e


def _run_end_times(values, u, p):
    values = np.asarray(values)
    times = np.flatnonzero(values > u)
    if p == 0:
        return times, times
    next_gap = np.diff(np.append(times, np.iinfo(np.int64).max // 2))
    return times[(next_gap > p) & (times + p <= values.size - 1)], times


def dprime_diagnostic(values, u: float, p: int, k_n: int | None = None) -> float:
    """Plug-in of ``n * sum_{j=p+1}^{n//k_n - 1} P(run ends at 0, X_j > u)``.

    Each lag-``j`` probability is the sliding-window frequency over the
    ``n - j`` admissible start positions. ``k_n`` defaults to ``floor(sqrt(n))``.
    """
    values = np.asarray(values)
    n = values.size
    if k_n is None:
        k_n = max(1, math.isqrt(n))
    if k_n < 1:
        raise ValueError("k_n must be >= 1")
    last_lag = n // k_n - 1
    q_times, ex_times = _run_end_times(values, u, p)
    total = 0.0
    for q in q_times:
        lo = np.searchsorted(ex_times, q + p + 1, side="left")
        hi = np.searchsorted(ex_times, q + last_lag, side="right")
        lags = ex_times[lo:hi] - q
        total += float(np.sum(1.0 / (n - lags)))
    return n * total


@dataclass(frozen=True, eq=False)
class CPPRealization:
    times: np.ndarray
    marks: np.ndarray
    horizon: float

    def __len__(self):
        return len(self.times)

    def total_on(self, a: float, b: float) -> float:
        inside = (self.times >= a) & (self.times < b)
        return float(np.sum(self.marks[inside]))


@dataclass(frozen=True, eq=False)
class CPPBatch:
    """Many independent realisations, stored flat with ``offsets``."""

    times: np.ndarray
    marks: np.ndarray
    offsets: np.ndarray
    horizon: float

    def __len__(self):
        return len(self.offsets) - 1

    def __getitem__(self, i) -> CPPRealization:
        lo, hi = self.offsets[i], self.offsets[i + 1]
        return CPPRealization(self.times[lo:hi], self.marks[lo:hi], self.horizon)

    @property
    def counts(self) -> np.ndarray:
        return np.diff(self.offsets)

    def interval_totals(self, intervals: Sequence) -> np.ndarray:
        """Array ``(realisations, intervals)`` of summed marks per interval."""
        rows = np.repeat(np.arange(len(self)), self.counts)
        out = np.empty((len(self), len(intervals)))
        for j, (a, b) in enumerate(intervals):
            inside = (self.times >= a) & (self.times < b)
            out[:, j] = np.bincount(rows[inside], weights=self.marks[inside], minlength=len(self))
        return out


def sample_compound_poisson(spec: CompoundPoissonSpec, horizon: float, rng) -> CPPRealization:
    """Arrivals at partial sums of Exp(mean 1/theta) gaps on ``[0, horizon)``; i.i.d. marks."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    times = []
    t = rng.exponential(1.0 / spec.theta)
    while t < horizon:
        times.append(t)
        t += rng.exponential(1.0 / spec.theta)
    marks = spec.mult.sample(len(times), rng) if times else np.empty(0)
    return CPPRealization(np.asarray(times, dtype=float), np.asarray(marks, dtype=float), horizon)


def sample_compound_poisson_batch(
    spec: CompoundPoissonSpec, horizon: float, rng, size: int
) -> CPPBatch:
    """Vectorised :func:`sample_compound_poisson` for ``size`` realisations."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    mean = spec.theta * horizon
    width = int(math.ceil(mean + 10 * math.sqrt(mean) + 10))
    arrivals = np.cumsum(rng.exponential(1.0 / spec.theta, size=(size, width)), axis=1)
    while np.any(arrivals[:, -1] < horizon):
        more = rng.exponential(1.0 / spec.theta, size=(size, width))
        arrivals = np.hstack([arrivals, arrivals[:, -1:] + np.cumsum(more, axis=1)])
    inside = arrivals < horizon
    counts = inside.sum(axis=1)
    times = arrivals[inside]
    marks = spec.mult.sample(times.size, rng)
    offsets = np.concatenate(([0], np.cumsum(counts)))
    return CPPBatch(times, np.asarray(marks, dtype=float), offsets, horizon)


def laplace_process(spec: CompoundPoissonSpec, intervals: Sequence, ys: Sequence[float]) -> float:
    """``E exp(-sum_l y_l A(I_l)) = exp(-theta * sum_l (1 - phi(y_l)) |I_l|)``."""
    if len(intervals) != len(ys):
        raise ValueError("need one y per interval")
    ordered = sorted((float(a), float(b)) for a, b in intervals)
    for (a0, b0), (a1, _) in zip(ordered, ordered[1:]):
        if a1 < b0:
            raise OverlapError(f"[{a0}, {b0}) and [{a1}, ...) overlap")
    exponent = 0.0
    for (a, b), y in zip(intervals, ys):
        if not (math.isfinite(a) and math.isfinite(b)) or b < a:
            raise ValueError("intervals must be finite with a <= b")
        if y < 0:
            raise DomainError("Laplace arguments must be non-negative")
        exponent += (1.0 - spec.mult.laplace(y)) * (b - a)
    return math.exp(-spec.theta * exponent)
