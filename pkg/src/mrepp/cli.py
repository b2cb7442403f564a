"""Command-line entry point: ``mrepp <command> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import experiments as ex
from .dynamics import DEFAULT_BURN_IN, iterate, parse_map, random_orbit
from .errors import MreppError
from .observables import evaluate
from .point_process import CSV_COLUMNS, build_mrepp
from .theory import CompoundPoissonSpec, multiplicity_from_dict, obrien_counts, sample_compound_poisson

R_EVENT_GRID = 20


def _g(x) -> str:
    return format(float(x), ".17g")


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def cmd_simulate(args) -> None:
    f = parse_map(args.map)
    if args.x0 == "random":
        orbit = random_orbit(f, args.n, args.seed, args.burn_in)
    else:
        orbit = iterate(f, float(args.x0), args.n, args.burn_in)
    with open(args.out, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(("i", "x"))
        w.writerows((i, _g(x)) for i, x in enumerate(orbit.states))


def _replica_values(config, li, n):
    level = ex.level_for(config, li, n)
    for r in range(config.replicas):
        seed = ex.replica_seed(config.master_seed, li, r)
        yield r, level, evaluate(config.observable, random_orbit(config.map, n, seed, config.burn_in).states)


def cmd_ei(args) -> None:
    config = ex.load_config(args.config)
    ex.check_periodicity(config)
    theta = ex.limit_theta(config)
    with open(args.out, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(("n", "theta_hat", "theta_limit", "exceedances", "q_events"))
        for li, n in enumerate(config.n_levels):
            q = e = 0
            for _, level, values in _replica_values(config, li, n):
                counts = obrien_counts(values, level.u, config.p)
                q += counts.q_events
                e += counts.exceedances
            w.writerow((n, _g(q / e) if e else "", _g(theta), e, q))


def cmd_marks(args) -> None:
    """Cluster marks per replica, plus the R-event frequency table next to ``--out``."""
    config = ex.load_config(args.config)
    ex.check_periodicity(config)
    spec = ex.limit_spec(config)
    r_rows = []
    with open(args.out, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(("n",) + CSV_COLUMNS)
        for li, n in enumerate(config.n_levels):
            processes, values_list = [], []
            for r, level, values in _replica_values(config, li, n):
                mp = build_mrepp(values, level, config.p, config.kind).select(config.exclude_truncated)
                processes.append(mp)
                values_list.append(values)
                w.writerows((n,) + row for row in mp.csv_rows(r))
            marks = np.concatenate([mp.scaled_marks for mp in processes])
            if marks.size == 0:
                continue
            xs = np.linspace(0.0, float(np.quantile(marks, 0.99)), R_EVENT_GRID)
            counts = np.zeros(xs.size, dtype=np.int64)
            exceedances = 0
            for values in values_list:
                c, e = ex.r_event_counts(values, level, config.p, config.kind, xs)
                counts += c
                exceedances += e
            clusters = marks.size
            for x, c in zip(xs, counts):
                limit = "" if spec is None else _g(spec.theta * float(spec.mult.sf(x)))
                emp = clusters / exceedances * np.mean(marks > x)
                r_rows.append((n, _g(x), _g(c / exceedances), _g(emp), limit))
    with open(args.out + ".r_events.csv", "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(("n", "x", "r_event_ratio", "cluster_ratio_times_sf", "theta_times_limit_sf"))
        w.writerows(r_rows)


def cmd_converge(args) -> None:
    config = ex.load_config(args.config)
    ex.emit_report(ex.run_convergence(config), args.format, args.out)


def cmd_sample_cpp(args) -> None:
    text = args.mult
    if not text.lstrip().startswith("{"):
        with open(text) as fh:
            text = fh.read()
    spec = CompoundPoissonSpec(args.theta, multiplicity_from_dict(json.loads(text)))
    real = sample_compound_poisson(spec, args.horizon, np.random.default_rng(args.seed))
    with open(args.out, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(("time", "mark"))
        w.writerows((_g(t), _g(m)) for t, m in zip(real.times, real.marks))


def cmd_induce(args) -> None:
    config = ex.load_config(args.config)
    with open(args.out, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(("n", "n_induced", "mark_ks", "mark_threshold", "count_ks", "count_threshold"))
        for t in ex.transfer_check(config):
            w.writerow(
                (
                    t.n,
                    t.n_induced,
                    _g(t.mark_ks.statistic),
                    _g(t.mark_ks.threshold),
                    _g(t.count_ks.statistic),
                    _g(t.count_ks.threshold),
                )
            )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mrepp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write an orbit as CSV")
    p.add_argument("--map", required=True, help="mod1:<m>, lsv:<alpha> or pwl:<b,...>:<s,...>")
    p.add_argument("--x0", required=True, help="initial point or 'random'")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--burn-in", type=int, default=DEFAULT_BURN_IN)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    for name, func, helptext in (
        ("ei", cmd_ei, "pooled O'Brien estimate per n"),
        ("marks", cmd_marks, "scaled cluster marks per n and replica"),
        ("induce", cmd_induce, "original vs induced process comparison"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True)
        p.add_argument("--out", required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("converge", help="full convergence report")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("sample-cpp", help="one compound Poisson realisation")
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--mult", required=True, help="JSON file or inline JSON object")
    p.add_argument("--horizon", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample_cpp)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (MreppError, OSError, ValueError) as exc:
        print(f"mrepp {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
