"""Interval maps, orbits, periodic points and first-return induction.

The state space is the unit interval identified with the circle, so
``circle_dist(0.99, 0.01) == 0.02``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

import numpy as np

from . import _kernels
from .errors import BreakpointError, NonReturningError

DEFAULT_BURN_IN = 1000
DEFAULT_PERIODIC_TOL = 1e-12
DEFAULT_RETURN_CAP = 10**8


@dataclass(frozen=True)
class LinearMod1:
    """``x -> m x mod 1``."""

    m: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ValueError(f"LinearMod1 needs an integer m >= 2, got {self.m}")


@dataclass(frozen=True)
class PiecewiseLinear:
    """Uniformly expanding piecewise-linear map.

    On branch ``[b[i], b[i+1])`` the map is ``slopes[i] * (x - b[i]) mod 1``.
    ``breakpoints`` must start at 0 and end at 1.
    """

    breakpoints: tuple
    slopes: tuple

    def __post_init__(self):
        b = tuple(float(v) for v in self.breakpoints)
        s = tuple(float(v) for v in self.slopes)
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "slopes", s)
        if len(b) < 2 or b[0] != 0.0 or b[-1] != 1.0:
            raise ValueError("breakpoints must run from 0 to 1")
        if any(hi <= lo for lo, hi in zip(b, b[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if len(s) != len(b) - 1:
            raise ValueError("need one slope per branch")
        if any(abs(v) <= 1.0 for v in s):
            raise ValueError("every branch must be expanding (|slope| > 1)")


@dataclass(frozen=True)
class LSV:
    """Liverani-Saussol-Vaienti intermittent map with parameter ``alpha``."""

    alpha: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"LSV alpha must lie in (0, 1), got {self.alpha}")


MapSpec = Union[LinearMod1, PiecewiseLinear, LSV]


def parse_map(text: str) -> MapSpec:
    """Parse ``mod1:<m>``, ``lsv:<alpha>`` or ``pwl:<b0,b1,...>:<s0,s1,...>``."""
    kind, _, rest = text.strip().partition(":")
    kind = kind.lower()
    if kind == "mod1":
        return LinearMod1(int(rest))
    if kind == "lsv":
        return LSV(float(rest))
    if kind == "pwl":
        bps, _, slopes = rest.partition(":")
        return PiecewiseLinear(
            tuple(float(v) for v in bps.split(",")),
            tuple(float(v) for v in slopes.split(",")),
        )
    raise ValueError(f"unknown map spec {text!r}")


def format_map(f: MapSpec) -> str:
    if isinstance(f, LinearMod1):
        return f"mod1:{f.m}"
    if isinstance(f, LSV):
        return f"lsv:{f.alpha!r}"
    bps = ",".join(repr(v) for v in f.breakpoints)
    slopes = ",".join(repr(v) for v in f.slopes)
    return f"pwl:{bps}:{slopes}"


def kernel_params(f: MapSpec):
    empty = np.zeros(1)
    if isinstance(f, LinearMod1):
        return _kernels.MOD1, float(f.m), empty, empty
    if isinstance(f, LSV):
        return _kernels.LSV, float(f.alpha), empty, empty
    return (
        _kernels.PWL,
        0.0,
        np.asarray(f.breakpoints, dtype=float),
        np.asarray(f.slopes, dtype=float),
    )


def circle_dist(x, y):
    """Distance on the unit circle; works elementwise on arrays."""
    d = np.abs(np.asarray(x, dtype=float) - y)
    d = np.minimum(d, 1.0 - d)
    return d if d.ndim else float(d)


@dataclass(frozen=True)
class Interval:
    """Half-open interval ``[lo, hi)``.

    States live in ``[0, 1)``, so ``Interval(0.5, 1.0)`` also stands for the
    closed set ``[1/2, 1]``.
    """

    lo: float
    hi: float

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError(f"empty interval [{self.lo}, {self.hi})")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def contains(self, x):
        x = np.asarray(x)
        return (x >= self.lo) & (x < self.hi)

    def __contains__(self, x) -> bool:
        return bool(self.lo <= x < self.hi)


@dataclass(frozen=True, eq=False)
class Orbit:
    states: np.ndarray
    seed: Optional[int]
    burn_in: int
    map: MapSpec
    x0: Optional[float] = None

    def __post_init__(self):
        self.states.flags.writeable = False

    def __len__(self):
        return len(self.states)


@dataclass(frozen=True, eq=False)
class InducedSeries:
    """First-return series on ``base_set``.

    ``induced_states[j]`` is the orbit state at absolute time
    ``start_index + cumulative_times[j]`` and ``return_times[j]`` is the
    first return time of that state.
    """

    base_set: Interval
    induced_states: np.ndarray
    return_times: np.ndarray
    cumulative_times: np.ndarray
    start_index: int = 0

    def __len__(self):
        return len(self.induced_states)


class PeriodicCheck(NamedTuple):
    is_periodic: bool
    deriv_product: float


def map_apply(f: MapSpec, x: float) -> float:
    kind, a, bps, slopes = kernel_params(f)
    return float(_kernels.apply_map(kind, a, bps, slopes, float(x)))


def map_derivative(f: MapSpec, x: float) -> float:
    if isinstance(f, LinearMod1):
        return float(f.m)
    if isinstance(f, LSV):
        if x == 0.5:
            raise BreakpointError("LSV map has a branch boundary at 1/2")
        if x < 0.5:
            a = f.alpha
            return 1.0 + (1.0 + a) * 2.0**a * x**a
        return 2.0
    interior = f.breakpoints[1:-1]
    if x in interior:
        raise BreakpointError(f"{x} is a branch boundary")
    i = int(np.searchsorted(f.breakpoints, x, side="right")) - 1
    return f.slopes[min(max(i, 0), len(f.slopes) - 1)]


def iterate(f: MapSpec, x0: float, n: int, burn_in: int = 0) -> Orbit:
    """Forward orbit: drop ``burn_in`` iterates, then record ``n`` states.

    Plain floating-point forward iteration. For ``LinearMod1`` with ``m`` a
    power of two the orbit of a float collapses onto 0 after ~53 steps; use
    :func:`random_orbit` for statistically typical orbits.
    """
    if not 0.0 <= x0 < 1.0:
        raise ValueError("x0 must lie in [0, 1)")
    if n < 1:
        raise ValueError("n must be positive")
    kind, a, bps, slopes = kernel_params(f)
    states = _kernels.iterate_forward(kind, a, bps, slopes, float(x0), int(n), int(burn_in))
    return Orbit(states, None, burn_in, f, float(x0))


def random_orbit(f: MapSpec, n: int, seed: int, burn_in: int = DEFAULT_BURN_IN) -> Orbit:
    """Orbit of a random initial condition, reproducible from ``seed``.

    For ``LinearMod1`` the initial point is Lebesgue distributed and its orbit
    is read off an i.i.d. base-m digit sequence (exact up to round-off).
    Other maps start from a uniform point and iterate forward after
    ``burn_in`` steps.
    """
    rng = np.random.default_rng(seed)
    if isinstance(f, LinearMod1):
        digits = rng.integers(0, f.m, size=burn_in + n).astype(np.float64)
        tail = rng.random()
        states = _kernels.digit_orbit(digits, tail, float(f.m))[burn_in:]
        return Orbit(np.ascontiguousarray(states), seed, burn_in, f)
    x0 = rng.random()
    kind, a, bps, slopes = kernel_params(f)
    states = _kernels.iterate_forward(kind, a, bps, slopes, x0, int(n), int(burn_in))
    return Orbit(states, seed, burn_in, f, x0)


def verify_periodic(
    f: MapSpec, zeta: float, p: int, tol: float = DEFAULT_PERIODIC_TOL
) -> PeriodicCheck:
    """Check that ``zeta`` has prime period ``p`` and return ``prod f'(f^j zeta)``."""
    if p < 1:
        raise ValueError("period must be >= 1")
    x = float(zeta)
    product = 1.0
    returns_early = False
    for j in range(p):
        product *= map_derivative(f, x)
        x = map_apply(f, x)
        if j < p - 1 and circle_dist(x, zeta) <= tol:
            returns_early = True
    closes = circle_dist(x, zeta) <= tol
    return PeriodicCheck(bool(closes and not returns_early), product)


def find_period(
    f: MapSpec, zeta: float, max_period: int = 64, tol: float = DEFAULT_PERIODIC_TOL
) -> Optional[int]:
    """Smallest ``p <= max_period`` with ``f^p(zeta) == zeta`` within ``tol``."""
    x = float(zeta)
    for p in range(1, max_period + 1):
        x = map_apply(f, x)
        if circle_dist(x, zeta) <= tol:
            return p
    return None


def hitting_time(orbit, target: Interval, start: int = 0) -> Optional[int]:
    """Least ``j >= 1`` with ``orbit[start + j]`` in ``target``; ``None`` if censored."""
    states = orbit.states if isinstance(orbit, Orbit) else np.asarray(orbit)
    if not 0 <= start < len(states):
        raise IndexError("start outside the orbit")
    hits = np.flatnonzero(target.contains(states[start + 1 :]))
    if hits.size == 0:
        return None
    return int(hits[0]) + 1


def induce(
    f: MapSpec,
    B: Interval,
    x0: float,
    n_returns: int,
    max_iter: int = DEFAULT_RETURN_CAP,
) -> InducedSeries:
    """Iterate the first return map ``F_B`` from ``x0`` for ``n_returns`` steps."""
    if x0 not in B:
        raise ValueError("x0 must lie in the inducing set")
    kind, a, bps, slopes = kernel_params(f)
    states, rtimes, ok, _ = _kernels.induce_forward(
        kind, a, bps, slopes, float(x0), float(B.lo), float(B.hi), int(n_returns), int(max_iter)
    )
    if not ok:
        raise NonReturningError(
            f"no return to [{B.lo}, {B.hi}) within {max_iter} iterations "
            f"after {len(states)} returns"
        )
    cumulative = np.concatenate(([0], np.cumsum(rtimes)[:-1])).astype(np.int64)
    return InducedSeries(B, states, rtimes, cumulative)


def first_return(
    f: MapSpec, B: Interval, x: float, max_iter: int = DEFAULT_RETURN_CAP
) -> tuple:
    """``(F_B(x), r_B(x))`` for ``x`` in ``B``."""
    if x not in B:
        raise ValueError("x must lie in the inducing set")
    kind, a, bps, slopes = kernel_params(f)
    _, rtimes, ok, y = _kernels.induce_forward(
        kind, a, bps, slopes, float(x), float(B.lo), float(B.hi), 1, int(max_iter)
    )
    if not ok:
        raise NonReturningError(f"no return to [{B.lo}, {B.hi}) within {max_iter} iterations")
    return float(y), int(rtimes[0])


def induce_orbit(orbit: Orbit, B: Interval) -> InducedSeries:
    """Read the induced series off an existing orbit, starting at its first visit to B.

    The final visit is dropped because its return time is censored.
    """
    visits = np.flatnonzero(B.contains(orbit.states))
    if visits.size < 2:
        return InducedSeries(B, np.empty(0), np.empty(0, np.int64), np.empty(0, np.int64))
    start = int(visits[0])
    return InducedSeries(
        B,
        orbit.states[visits[:-1]],
        np.diff(visits).astype(np.int64),
        (visits[:-1] - start).astype(np.int64),
        start,
    )


def random_induced(
    f: MapSpec,
    B: Interval,
    n_returns: int,
    seed: int,
    burn_in: int = DEFAULT_BURN_IN,
    max_iter: int = DEFAULT_RETURN_CAP,
    measure_hint: float = 0.5,
) -> InducedSeries:
    """Induced series of a random orbit with at least ``n_returns`` states.

    ``measure_hint`` (an estimate of the invariant measure of ``B``) sizes the
    first attempt; the orbit is doubled until enough returns are seen.
    """
    length = int(math.ceil(1.1 * n_returns / measure_hint)) + 1024
    while True:
        induced = induce_orbit(random_orbit(f, length, seed, burn_in), B)
        if len(induced) >= n_returns:
            return InducedSeries(
                B,
                induced.induced_states[:n_returns],
                induced.return_times[:n_returns],
                induced.cumulative_times[:n_returns],
                induced.start_index,
            )
        if length >= max_iter:
            raise NonReturningError(
                f"only {len(induced)} returns to [{B.lo}, {B.hi}) in {length} iterations"
            )
        length = min(2 * length, max_iter)
