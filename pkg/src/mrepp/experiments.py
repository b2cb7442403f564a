"""Replica harness: convergence runs, induced-map transfer checks, reports.

Every replica orbit is seeded from ``(master_seed, level, replica, stream)``
through :class:`numpy.random.SeedSequence`, and results are reduced in
replica order, so reports do not depend on ``workers``.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .dynamics import (
    DEFAULT_BURN_IN,
    LSV,
    Interval,
    MapSpec,
    find_period,
    format_map,
    induce_orbit,
    parse_map,
    random_induced,
    random_orbit,
    verify_periodic,
)
from .errors import ConfigError, ContainmentError, NoExceedances
from .observables import (
    Analytic,
    EmpiricalQuantile,
    Observable,
    ThresholdLevel,
    evaluate,
    g_inverse,
    scaling_a,
    threshold_from_tau,
)
from .point_process import MarkedPointProcess, MarkKind, build_mrepp, concatenate, max_statistic
from .stats import KSResult, empirical_cdf, interarrival_exponential_check, ks_distance, two_sample_ks
from .theory import (
    AotBounded,
    AotLog,
    AotPareto,
    CompoundPoissonSpec,
    Geometric,
    GpdBounded,
    GpdExp,
    GpdPareto,
    dprime_diagnostic,
    ei_periodic,
    obrien_counts,
)

STREAM_ORBIT = 0
STREAM_INDUCED = 1


@dataclass(frozen=True)
class ExperimentConfig:
    """One convergence experiment.

    ``threshold_mode`` is ``{"type": "empirical"}`` (default: pooled order
    statistic over all replicas at that ``n``) or ``{"type": "analytic",
    "density": d}`` (tail probability ``2 d g^-1(u)``, meant for LinearMod1). ``induced`` holds the inducing
    interval for :func:`transfer_check`; ``induced_shared`` reads the induced
    series off the original orbits instead of independent ones.
    """

    map: MapSpec
    observable: Observable
    p: int
    kind: MarkKind
    tau: float
    n_levels: tuple
    replicas: int
    master_seed: int
    threshold_mode: dict = field(default_factory=lambda: {"type": "empirical"})
    exclude_truncated: bool = False
    induced: Optional[Interval] = None
    induced_shared: bool = False
    burn_in: int = DEFAULT_BURN_IN
    k_n: Optional[int] = None
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", MarkKind(self.kind))
        object.__setattr__(self, "n_levels", tuple(int(n) for n in self.n_levels))
        if not self.n_levels:
            raise ConfigError("n_levels must be non-empty")
        if any(b <= a for a, b in zip(self.n_levels, self.n_levels[1:])):
            raise ConfigError("n_levels must be strictly ascending")
        if self.replicas < 1:
            raise ConfigError("replicas must be >= 1")
        if not self.tau > 0:
            raise ConfigError("tau must be positive")
        if self.p < 0:
            raise ConfigError("p must be non-negative")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.threshold_mode.get("type") not in ("analytic", "empirical"):
            raise ConfigError(f"unknown threshold mode {self.threshold_mode!r}")

    def to_dict(self) -> dict:
        out = {
            "map": format_map(self.map),
            "observable": self.observable.to_dict(),
            "p": self.p,
            "kind": self.kind.value,
            "tau": self.tau,
            "n_levels": list(self.n_levels),
            "replicas": self.replicas,
            "master_seed": self.master_seed,
            "threshold_mode": dict(self.threshold_mode),
            "exclude_truncated": self.exclude_truncated,
            "induced": None,
            "burn_in": self.burn_in,
            "k_n": self.k_n,
            "workers": self.workers,
        }
        if self.induced is not None:
            out["induced"] = {"B": [self.induced.lo, self.induced.hi], "shared": self.induced_shared}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        try:
            induced = data.get("induced")
            return cls(
                map=parse_map(data["map"]),
                observable=Observable.from_dict(data["observable"]),
                p=int(data["p"]),
                kind=MarkKind(data["kind"]),
                tau=float(data["tau"]),
                n_levels=tuple(data["n_levels"]),
                replicas=int(data["replicas"]),
                master_seed=int(data["master_seed"]),
                threshold_mode=dict(data.get("threshold_mode", {"type": "empirical"})),
                exclude_truncated=bool(data.get("exclude_truncated", False)),
                induced=Interval(*map(float, induced["B"])) if induced else None,
                induced_shared=bool(induced.get("shared", False)) if induced else False,
                burn_in=int(data.get("burn_in", DEFAULT_BURN_IN)),
                k_n=None if data.get("k_n") is None else int(data["k_n"]),
                workers=int(data.get("workers", 1)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid experiment config: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return ExperimentConfig.from_json(fh.read())


def replica_seed(master_seed: int, level: int, replica: int, stream: int = STREAM_ORBIT) -> int:
    ss = np.random.SeedSequence(master_seed, spawn_key=(level, replica, stream))
    return int(ss.generate_state(1, np.uint64)[0])


def check_periodicity(config: ExperimentConfig) -> None:
    """``p`` must be the prime period of ``zeta``, or 0 when ``zeta`` is not periodic."""
    zeta = config.observable.zeta
    if config.p > 0:
        if not verify_periodic(config.map, zeta, config.p).is_periodic:
            raise ConfigError(f"zeta={zeta} does not have prime period p={config.p}")
    else:
        period = find_period(config.map, zeta)
        if period is not None:
            raise ConfigError(f"zeta={zeta} is periodic with period {period}; set p={period}")


def limit_theta(config: ExperimentConfig) -> float:
    return ei_periodic(config.map, config.observable.zeta, config.p) if config.p > 0 else 1.0


def limit_spec(config: ExperimentConfig) -> Optional[CompoundPoissonSpec]:
    """Compound Poisson limit predicted for the configuration, if one is known.

    AOT limits are only tabulated where the map is exactly linear near the
    periodic orbit, so an LSV AOT run with ``p > 0`` has no reference law.
    """
    theta = limit_theta(config)
    obs = config.observable
    if config.kind is MarkKind.REPP:
        return CompoundPoissonSpec(theta, Geometric(theta))
    if config.kind is MarkKind.POT or config.p == 0:
        gpd = {"log": GpdExp(), "pareto": GpdPareto(obs.alpha), "bounded": GpdBounded(obs.alpha)}
        return CompoundPoissonSpec(theta, gpd[obs.kind])
    if isinstance(config.map, LSV):
        return None
    M = abs(verify_periodic(config.map, obs.zeta, config.p).deriv_product)
    aot = {
        "log": AotLog(M),
        "pareto": AotPareto(obs.alpha, M),
        "bounded": AotBounded(obs.alpha, M),
    }
    return CompoundPoissonSpec(theta, aot[obs.kind])


def _orbit_values(config: ExperimentConfig, n: int, seed: int) -> np.ndarray:
    return evaluate(config.observable, random_orbit(config.map, n, seed, config.burn_in).states)


def _map_replicas(config: ExperimentConfig, fn: Callable[[int], object]) -> list:
    if config.workers == 1:
        return [fn(r) for r in range(config.replicas)]
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(fn, range(config.replicas)))


def level_for(config: ExperimentConfig, level_index: int, n: int) -> ThresholdLevel:
    """Threshold ``u_n`` with ``n P(X_0 > u_n) = tau``.

    Empirical mode pools the top order statistics of every replica orbit at
    this level, i.e. the same orbits the experiment then analyses.
    """
    mode = config.threshold_mode
    if mode["type"] == "analytic":
        return threshold_from_tau(config.observable, n, config.tau, Analytic(float(mode.get("density", 1.0))))
    keep = int(round(config.tau * config.replicas)) + 2

    def top(r):
        values = _orbit_values(config, n, replica_seed(config.master_seed, level_index, r))
        k = min(keep, values.size)
        return np.partition(values, values.size - k)[values.size - k :]

    pooled = np.concatenate(_map_replicas(config, top))
    return threshold_from_tau(
        config.observable, n, config.tau, EmpiricalQuantile(pooled, population=n * config.replicas)
    )


@dataclass(frozen=True, eq=False)
class ReplicaResult:
    process: MarkedPointProcess
    q_events: int
    exceedances: int
    no_exceedance: bool
    dprime: float


def analyse_series(values, level: ThresholdLevel, config: ExperimentConfig) -> ReplicaResult:
    q, e = obrien_counts(values, level.u, config.p)
    return ReplicaResult(
        build_mrepp(values, level, config.p, config.kind),
        q,
        e,
        max_statistic(values, level.u).no_exceedance,
        dprime_diagnostic(values, level.u, config.p, config.k_n),
    )


REPORT_COLUMNS = (
    "n",
    "u_n",
    "a_n",
    "v_n",
    "theta_hat",
    "cluster_count",
    "mark_ks_vs_limit",
    "interarrival_ks",
    "dprime_value",
    "evl_prob",
    "transfer_ks",
)
_INT_COLUMNS = ("n", "cluster_count")


@dataclass
class ReportRow:
    """Replica aggregate at one ``n``.

    ``cluster_count`` is pooled over replicas; ``dprime_value`` is the
    replica mean. ``details`` carries the KS objects and pooled samples and is
    not serialised.
    """

    n: int
    u_n: float
    a_n: float
    v_n: float
    theta_hat: Optional[float]
    cluster_count: int
    mark_ks_vs_limit: Optional[float]
    interarrival_ks: Optional[float]
    dprime_value: float
    evl_prob: float
    transfer_ks: Optional[float] = None
    details: dict = field(default_factory=dict, compare=False, repr=False)

    def values(self) -> tuple:
        return tuple(getattr(self, c) for c in REPORT_COLUMNS)


@dataclass
class ExperimentReport:
    rows: List[ReportRow] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)


def _aggregate(
    n: int, level: ThresholdLevel, results: Sequence[ReplicaResult], config, spec
) -> ReportRow:
    q = sum(r.q_events for r in results)
    e = sum(r.exceedances for r in results)
    theta_hat = q / e if e else None
    kept = [r.process.select(config.exclude_truncated) for r in results]
    marks = np.concatenate([mp.scaled_marks for mp in kept])
    sizes = np.concatenate([mp.sizes for mp in kept])
    mark_ks = None
    if spec is not None and marks.size:
        mark_ks = ks_distance(empirical_cdf(marks), spec.mult.cdf)
    timeline = concatenate([r.process for r in results])
    gap_ks = None
    if len(timeline) >= 2:
        gap_ks = interarrival_exponential_check(timeline, spec.theta if spec else limit_theta(config))
    return ReportRow(
        n=n,
        u_n=level.u,
        a_n=level.a_u,
        v_n=level.v_u,
        theta_hat=theta_hat,
        cluster_count=int(marks.size),
        mark_ks_vs_limit=None if mark_ks is None else mark_ks.statistic,
        interarrival_ks=None if gap_ks is None else gap_ks.statistic,
        dprime_value=float(np.mean([r.dprime for r in results])),
        evl_prob=float(np.mean([r.no_exceedance for r in results])),
        details={
            "level": level,
            "mark_ks": mark_ks,
            "interarrival_ks": gap_ks,
            "marks": marks,
            "sizes": sizes,
            "timeline": timeline,
            "processes": [r.process for r in results],
            "dprime": np.array([r.dprime for r in results]),
            "exceedances": e,
            "q_events": q,
        },
    )


def run_convergence(config: ExperimentConfig) -> ExperimentReport:
    """One report row per ``n``: pooled marks, gaps and EI against the predicted limit."""
    check_periodicity(config)
    spec = limit_spec(config)
    transfer = transfer_check(config) if config.induced is not None else None
    report = ExperimentReport()
    for li, n in enumerate(config.n_levels):
        level = level_for(config, li, n)

        def work(r, n=n, level=level, li=li):
            values = _orbit_values(config, n, replica_seed(config.master_seed, li, r))
            return analyse_series(values, level, config)

        row = _aggregate(n, level, _map_replicas(config, work), config, spec)
        if transfer is not None:
            row.transfer_ks = transfer[li].mark_ks.statistic
            row.details["transfer"] = transfer[li]
        report.rows.append(row)
    return report


@dataclass(frozen=True, eq=False)
class TransferResult:
    n: int
    n_induced: int
    mark_ks: KSResult
    count_ks: KSResult
    original_marks: np.ndarray
    induced_marks: np.ndarray
    original_counts: np.ndarray
    induced_counts: np.ndarray
    level: ThresholdLevel
    induced_level: ThresholdLevel


def _check_containment(B: Interval, obs: Observable, u: float) -> None:
    if obs.zeta not in B:
        raise ContainmentError(f"zeta={obs.zeta} is not in [{B.lo}, {B.hi})")
    if B.lo <= 0.0 and B.hi >= 1.0:
        return
    r = g_inverse(obs, u)
    if obs.zeta - r < B.lo or obs.zeta + r > B.hi:
        raise ContainmentError(
            f"exceedance ball of radius {r} around {obs.zeta} leaves [{B.lo}, {B.hi}]"
        )


def transfer_check(config: ExperimentConfig) -> List[TransferResult]:
    """Compare the original MREPP with the one built from the first-return map on ``B``.

    Both use the same ``u_n``. The induced process is rescaled by
    ``1/P_B(X_0 > u_n)`` estimated from the induced samples, and runs for
    ``round(mu(B) n)`` returns so that both cover the same rescaled horizon.
    """
    if config.induced is None:
        raise ConfigError("transfer_check needs induced.B")
    check_periodicity(config)
    B = config.induced
    obs = config.observable
    J = (0.0, config.tau)
    out = []
    for li, n in enumerate(config.n_levels):
        level = level_for(config, li, n)
        _check_containment(B, obs, level.u)

        def original(r, n=n, li=li):
            orbit = random_orbit(config.map, n, replica_seed(config.master_seed, li, r), config.burn_in)
            values = evaluate(obs, orbit.states)
            mp = build_mrepp(values, level, config.p, config.kind).select(config.exclude_truncated)
            induced_values = None
            if config.induced_shared:
                induced_values = evaluate(obs, induce_orbit(orbit, B).induced_states)
            return mp, int(np.count_nonzero(B.contains(orbit.states))), induced_values

        orig = _map_replicas(config, original)
        mu_B = sum(o[1] for o in orig) / (n * config.replicas)
        n_B = max(1, int(round(mu_B * n)))

        if config.induced_shared:
            induced_values = [o[2] for o in orig]
        else:
            def induced(r, li=li):
                seed = replica_seed(config.master_seed, li, r, STREAM_INDUCED)
                series = random_induced(config.map, B, n_B, seed, config.burn_in, measure_hint=mu_B)
                return evaluate(obs, series.induced_states)

            induced_values = _map_replicas(config, induced)

        total = sum(v.size for v in induced_values)
        above = sum(int(np.count_nonzero(v > level.u)) for v in induced_values)
        if above == 0:
            raise NoExceedances(f"no induced exceedances of u={level.u} at n={n}")
        tail_B = above / total
        level_B = ThresholdLevel(level.u, tail_B, 1.0 / tail_B, scaling_a(obs, level.u))
        ind = [
            build_mrepp(v, level_B, config.p, config.kind).select(config.exclude_truncated)
            for v in induced_values
        ]
        orig_marks = np.concatenate([o[0].scaled_marks for o in orig])
        ind_marks = np.concatenate([mp.scaled_marks for mp in ind])
        orig_counts = np.array([_total_on(o[0], J) for o in orig])
        ind_counts = np.array([_total_on(mp, J) for mp in ind])
        out.append(
            TransferResult(
                n,
                n_B,
                two_sample_ks(orig_marks, ind_marks),
                two_sample_ks(orig_counts, ind_counts),
                orig_marks,
                ind_marks,
                orig_counts,
                ind_counts,
                level,
                level_B,
            )
        )
    return out


def _total_on(mp: MarkedPointProcess, J) -> float:
    inside = (mp.times >= J[0]) & (mp.times < J[1])
    return float(np.sum(mp.scaled_marks[inside]))


def forward_marks(values, u: float, p: int, kind) -> tuple:
    """Exceedance times and the mark of the remaining cluster from each one on.

    For an exceedance at ``j`` this is the mark of ``X_j`` and the
    exceedances that follow it within gaps of at most ``p``.
    """
    kind = MarkKind(kind)
    values = np.asarray(values, dtype=float)
    times = np.flatnonzero(values > u)
    excess = values[times] - u
    if times.size == 0:
        return times, excess
    # reversed so each cluster's suffix aggregates become prefix aggregates
    rt, rx = times[::-1], excess[::-1]
    new = np.concatenate(([True], (rt[:-1] - rt[1:]) > p))
    group = np.cumsum(new) - 1
    starts = np.flatnonzero(new)
    if kind is MarkKind.REPP:
        fwd = (np.arange(rt.size) - starts[group] + 1).astype(float)
    elif kind is MarkKind.AOT:
        c = np.cumsum(rx)
        base = np.concatenate(([0.0], c))[starts][group]
        fwd = c - base
    else:
        fwd = np.empty_like(rx)
        for g0, g1 in zip(starts, np.append(starts[1:], rx.size)):
            fwd[g0:g1] = np.maximum.accumulate(rx[g0:g1])
    return times, fwd[::-1]


def r_event_counts(values, level: ThresholdLevel, p: int, kind, xs) -> tuple:
    """Counts of ``R``-events at each scaled mark level ``x`` and of exceedances.

    An ``R``-event at ``j`` means the remaining cluster mark from ``j`` exceeds
    ``x / a_u`` and no later index within ``p`` steps has that property.
    """
    values = np.asarray(values, dtype=float)
    times, fwd = forward_marks(values, level.u, p, kind)
    counts = np.zeros(len(xs), dtype=np.int64)
    for i, x in enumerate(xs):
        t = times[fwd > x / level.a_u]
        if p == 0:
            counts[i] = t.size
            continue
        next_gap = np.diff(np.append(t, np.iinfo(np.int64).max // 2))
        counts[i] = np.count_nonzero((next_gap > p) & (t + p <= values.size - 1))
    return counts, times.size


def r_event_ratio(values, level: ThresholdLevel, p: int, kind, xs) -> np.ndarray:
    """``P(R_x) / P(X_0 > u)`` estimated from one series; its limit is ``theta (1 - pi(x))``."""
    counts, exceedances = r_event_counts(values, level, p, kind, xs)
    if exceedances == 0:
        raise NoExceedances(f"no value exceeds u={level.u}")
    return counts / exceedances


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return format(float(value), ".17g")


def _json_value(value) -> str:
    if value is None:
        return "null"
    text = _fmt(value)
    if text in ("inf", "-inf", "nan"):
        raise ValueError(f"{value} has no JSON representation")
    return text


def report_to_csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for row in report.rows:
        writer.writerow([_fmt(v) for v in row.values()])
    return buf.getvalue()


def report_to_json(report: ExperimentReport) -> str:
    lines = []
    for row in report.rows:
        body = ", ".join(f'"{c}": {_json_value(v)}' for c, v in zip(REPORT_COLUMNS, row.values()))
        lines.append("{" + body + "}")
    cols = ", ".join(f'"{c}"' for c in REPORT_COLUMNS)
    rows = ",\n    ".join(lines)
    return f'{{\n  "columns": [{cols}],\n  "rows": [\n    {rows}\n  ]\n}}\n' if lines else (
        f'{{\n  "columns": [{cols}],\n  "rows": []\n}}\n'
    )


def _coerce(column: str, value):
    if value is None or value == "":
        return None
    return int(value) if column in _INT_COLUMNS else float(value)


def report_from_json(text: str) -> ExperimentReport:
    data = json.loads(text)
    if tuple(data["columns"]) != REPORT_COLUMNS:
        raise ValueError("unexpected report columns")
    return ExperimentReport(
        [ReportRow(**{c: _coerce(c, row[c]) for c in REPORT_COLUMNS}) for row in data["rows"]]
    )


def report_from_csv(text: str) -> ExperimentReport:
    reader = csv.reader(io.StringIO(text))
    header = tuple(next(reader))
    if header != REPORT_COLUMNS:
        raise ValueError("unexpected report columns")
    return ExperimentReport(
        [ReportRow(**{c: _coerce(c, v) for c, v in zip(REPORT_COLUMNS, line)}) for line in reader]
    )


def emit_report(report: ExperimentReport, format: str, path) -> None:
    """Write ``report`` as CSV or JSON with 17 significant digits per float."""
    if format == "csv":
        text = report_to_csv(report)
    elif format == "json":
        text = report_to_json(report)
    else:
        raise ValueError(f"unknown report format {format!r}")
    with open(path, "w", newline="") as fh:
        fh.write(text)

