"""Distance observables ``phi(x) = g(dist(x, zeta))`` and threshold levels.

Three shapes of ``g`` are supported:

* ``log``:     ``g(r) = -log r``             (Gumbel domain, mark scale 1)
* ``pareto``:  ``g(r) = r**(-1/alpha)``      (Frechet domain, mark scale 1/u)
* ``bounded``: ``g(r) = D - r**(1/alpha)``   (Weibull domain, mark scale 1/(D-u))

The exceedance set ``{phi > u}`` is the circle ball of radius ``g_inverse(u)``
around ``zeta``, so its Lebesgue measure is ``2 * g_inverse(u)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .dynamics import circle_dist
from .errors import DomainError, InsufficientSamples

KINDS = ("log", "pareto", "bounded")


@dataclass(frozen=True)
class Observable:
    kind: str
    zeta: float = 0.0
    alpha: float = 1.0
    D: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"observable kind must be one of {KINDS}, got {self.kind!r}")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if not 0.0 <= self.zeta < 1.0:
            raise ValueError("zeta must lie in [0, 1)")

    @property
    def upper_endpoint(self) -> float:
        """``g(0)``: +inf for log/pareto, ``D`` for bounded."""
        return self.D if self.kind == "bounded" else math.inf

    def g(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", over="ignore"):
            if self.kind == "log":
                out = -np.log(r)
            elif self.kind == "pareto":
                out = np.where(r > 0, r ** (-1.0 / self.alpha), np.inf)
            else:
                out = self.D - r ** (1.0 / self.alpha)
        return out if out.ndim else float(out)

    def to_dict(self) -> dict:
        out = {"type": self.kind, "zeta": self.zeta}
        if self.kind != "log":
            out["alpha"] = self.alpha
        if self.kind == "bounded":
            out["D"] = self.D
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Observable":
        return cls(
            data["type"],
            float(data.get("zeta", 0.0)),
            float(data.get("alpha", 1.0)),
            float(data.get("D", 1.0)),
        )


@dataclass(frozen=True)
class ThresholdLevel:
    u: float
    tail_prob: float
    v_u: float
    a_u: float


@dataclass(frozen=True)
class Analytic:
    """Tail probability from the invariant density at ``zeta``."""

    density: float = 1.0


@dataclass(frozen=True, eq=False)
class EmpiricalQuantile:
    """Tail probability estimated from samples of ``X_0``.

    ``samples`` may hold only the upper tail of a larger sample, in which case
    ``population`` is the size of that larger sample.
    """

    samples: np.ndarray
    population: Optional[int] = None


ThresholdMode = Union[Analytic, EmpiricalQuantile]


def evaluate(obs: Observable, x):
    """``g(dist(x, zeta))``; +inf at ``zeta`` for log/pareto and ``D`` for bounded."""
    return obs.g(circle_dist(x, obs.zeta))


def g_inverse(obs: Observable, u):
    """Radius ``r`` with ``g(r) == u``."""
    u = np.asarray(u, dtype=float)
    if obs.kind == "log":
        out = np.exp(-u)
    elif obs.kind == "pareto":
        if np.any(u <= 0):
            raise DomainError("pareto observable needs u > 0")
        out = u ** (-obs.alpha)
    else:
        if np.any(u >= obs.D):
            raise DomainError(f"u must stay below D={obs.D}")
        out = (obs.D - u) ** obs.alpha
    return out if out.ndim else float(out)


def scaling_a(obs: Observable, u: float) -> float:
    """Mark normalisation ``a_u`` matching the observable type."""
    if obs.kind == "log":
        return 1.0
    if obs.kind == "pareto":
        return 1.0 / u
    if u >= obs.D:
        raise DomainError(f"u must stay below D={obs.D}")
    return 1.0 / (obs.D - u)


def threshold_from_tau(obs: Observable, n: int, tau: float, mode: ThresholdMode) -> ThresholdLevel:
    """Level ``u_n`` with ``n * P(X_0 > u_n) == tau``."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    if tau / n >= 1:
        raise DomainError("tau / n must be below 1")
    if isinstance(mode, Analytic):
        radius = tau / (2.0 * n * mode.density)
        if radius >= 0.5:
            raise DomainError("exceedance ball would cover the whole circle")
        u = float(obs.g(radius))
        tail = tau / n
    else:
        samples = np.sort(np.asarray(mode.samples, dtype=float))
        population = len(samples) if mode.population is None else int(mode.population)
        if population < n:
            raise InsufficientSamples(f"need at least n={n} samples, got {population}")
        k = int(round(tau * population / n))
        if k < 1 or k >= len(samples):
            raise InsufficientSamples(f"cannot place {k} exceedances among {len(samples)} samples")
        u = float(samples[len(samples) - k - 1])
        tail = np.count_nonzero(samples > u) / population
        if tail == 0:
            raise InsufficientSamples("no strict exceedances above the empirical quantile")
    return ThresholdLevel(u, tail, 1.0 / tail, scaling_a(obs, u))
