"""Command-line front end.

Subcommands: moments, compare, cross, simulate, nearly-unstable,
transform.  All numeric output is CSV (stdout or --output); report-style
commands optionally render matplotlib figures next to the data via
--figures DIR.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import asymptotics, bivariate, fd, simulate
from . import moments as mo
from . import transform as tf
from .errors import HawkesPopError, SingularMatrixError
from .model import as_symmetric, load_model
from .reporting import write_rows


def _parse_floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip() != ""]


def _parse_ints(text: str) -> list[int]:
    return [int(float(x)) for x in text.split(",") if x.strip() != ""]


def _jobs(args) -> int:
    if args.jobs is not None:
        return max(1, args.jobs)
    return simulate.default_jobs()


def _moment_rows(table: mo.MomentTable, indices) -> list[tuple]:
    return [(mo.index_label(i), table[i]) for i in indices]


def cmd_moments(args) -> int:
    model, run = load_model(args.config)
    t = args.t if args.t is not None else float(run.get("t", 5.0))
    order = args.order if args.order is not None else int(run.get("order", 1))
    method = args.method if args.method is not None else run.get("method", "closed")
    if method == "blocks" and model.d != 2:
        raise HawkesPopError("--method blocks needs a two-component model")
    indices = mo.enumerate_indices(model.d, order)
    if args.stationary:
        if method == "blocks":
            table = bivariate.recursive_stationary(model, order)
        else:
            table = mo.stationary_moments(mo.assemble_system(model, order))
    else:
        if method == "blocks":
            table = bivariate.recursive_transient(model, order, t)
        else:
            system = mo.assemble_system(model, order)
            if method == "ode":
                table = mo.transient_moments(system, t, "ode")
            else:
                try:
                    table = mo.transient_moments(system, t, "closed_form")
                except SingularMatrixError:
                    # e.g. mu = 0: the stacked matrix is singular, but the
                    # transient ODE remains perfectly well posed
                    print(
                        "note: singular system matrix, using the ODE solver",
                        file=sys.stderr,
                    )
                    table = mo.transient_moments(system, t, "ode")
    write_rows(["index", "value"], _moment_rows(table, indices), args.output)
    return 0


def _error_metrics(exact: np.ndarray, approx: np.ndarray) -> tuple[float, float]:
    # summed absolute / relative deviations against the exact benchmark
    mae = float(np.sum(np.abs(exact - approx)))
    mre = float(np.sum(np.abs(exact - approx) / np.abs(exact)))
    return mae, mre


def cmd_compare(args) -> int:
    model, run = load_model(args.config)
    t = args.t if args.t is not None else float(run.get("t", 5.0))
    max_order = args.order if args.order is not None else int(run.get("order", 2))
    h_list = _parse_floats(args.h) if args.h else [float(run.get("h", 1e-3))]
    mc_list = _parse_ints(args.mc_runs) if args.mc_runs else []
    seed = args.seed if args.seed is not None else int(run.get("seed", 20240901))
    jobs = _jobs(args)

    rows = []
    for order in range(1, max_order + 1):
        idxs = mo.indices_of_order(model.d, order)
        start = time.perf_counter()
        system = mo.assemble_system(model, order)
        exact_table = mo.transient_moments(system, t, "closed_form")
        bm_time = time.perf_counter() - start
        exact = exact_table.vector(idxs)
        rows.append((order, "BM-engine", "", bm_time, 0.0, 0.0))
        for h in h_list:
            start = time.perf_counter()
            table = fd.fd_moments_of_order(model, t, order, fd.FdSpec(h=h))
            rt = time.perf_counter() - start
            mae, mre = _error_metrics(exact, table.vector(idxs))
            rows.append((order, "FD", h, rt, mae, mre))
        for m_runs in mc_list:
            start = time.perf_counter()
            est = simulate.estimate_moments(model, t, order, m_runs, seed, n_jobs=jobs)
            rt = time.perf_counter() - start
            approx = np.array([est[i].value for i in idxs])
            mae, mre = _error_metrics(exact, approx)
            rows.append((order, "MC", m_runs, rt, mae, mre))
    write_rows(["order", "method", "param", "runtime_s", "mae", "mre"], rows, args.output)
    if args.figures:
        from . import plots

        plots.compare_figure(rows, args.figures)
    return 0


def cmd_cross(args) -> int:
    model, run = load_model(args.config)
    t = args.t if args.t is not None else float(run.get("t", 1.5))
    taus = np.linspace(0.0, args.tau_max, args.tau_steps)
    h = args.h if args.h is not None else float(run.get("h", 1e-3))
    seed = args.seed if args.seed is not None else int(run.get("seed", 20240901))
    spec = fd.FdSpec(h=h)
    d = model.d

    rows = []
    system = mo.assemble_system(model, 2)
    for tau in taus:
        if tau == 0.0:
            # lag zero: read the one-time second moments off the engine
            table = mo.transient_moments(system, t, "closed_form")
            raw = mo.factorial_to_raw(table)
            for i in range(d):
                for j in range(d):
                    nq = [0] * d
                    nq[i] += 1
                    nq[j] += 1
                    rows.append((0.0, f"Q{i+1}Q{j+1}", "FD",
                                 raw[mo.MomentIndex((0,) * d, tuple(nq))]))
            for i in range(d):
                for j in range(d):
                    nl = [0] * d
                    nl[i] += 1
                    nl[j] += 1
                    rows.append((0.0, f"L{i+1}L{j+1}", "FD",
                                 table[mo.MomentIndex(tuple(nl), (0,) * d)]))
            continue
        for i in range(d):
            for j in range(d):
                rows.append((tau, f"Q{i+1}Q{j+1}", "FD",
                             fd.fd_cross_moment(model, t, tau, i, j, "QQ", spec)))
        for i in range(d):
            for j in range(d):
                rows.append((tau, f"L{i+1}L{j+1}", "FD",
                             fd.fd_cross_moment(model, t, tau, i, j, "LL", spec)))
    if args.mc_runs:
        jobs = _jobs(args)
        for tau in taus:
            if tau == 0.0:
                continue
            est = simulate.estimate_cross_moments(
                model, t, tau, args.mc_runs, seed, n_jobs=jobs
            )
            for i in range(d):
                for j in range(d):
                    rows.append((tau, f"Q{i+1}Q{j+1}", "MC", est["QQ"][i][j].value))
                    rows.append((tau, f"L{i+1}L{j+1}", "MC", est["LL"][i][j].value))
    write_rows(["tau", "pair", "method", "value"], rows, args.output)
    if args.figures:
        from . import plots

        plots.cross_moment_figure(rows, args.figures)
    return 0


def cmd_simulate(args) -> int:
    model, run = load_model(args.config)
    horizon = args.horizon if args.horizon is not None else float(run.get("horizon", 5.0))
    runs = args.runs if args.runs is not None else int(run.get("mc_runs", 1000))
    seed = args.seed if args.seed is not None else int(run.get("seed", 20240901))
    if runs < 2:
        raise HawkesPopError("--runs must be at least 2")
    order = args.order if args.order is not None else 1
    est = simulate.estimate_moments(
        model, horizon, order, runs, seed, n_jobs=_jobs(args)
    )
    rows = [
        (mo.index_label(idx), e.value, e.stderr, e.runs) for idx, e in est.items()
    ]
    write_rows(["index", "estimate", "stderr", "runs"], rows, args.output)
    if args.dump_events:
        os.makedirs(args.dump_events, exist_ok=True)
        digits = len(str(runs - 1))
        for r in range(runs):
            log = simulate.simulate_path(model, horizon, seed, r)
            path = os.path.join(args.dump_events, f"events_r{r:0{digits}d}.csv")
            header = ["t", "component", "lifetime"] + [
                f"mark_{i+1}" for i in range(model.d)
            ]
            event_rows = [
                (log.times[k], int(log.components[k]) + 1, log.lifetimes[k],
                 *log.marks[k])
                for k in range(len(log.times))
            ]
            write_rows(header, event_rows, path)
    return 0


def cmd_nearly_unstable(args) -> int:
    model, _ = load_model(args.config)
    sym = as_symmetric(model)  # rejects asymmetric configs
    mark_mean = sym.marks[0].mean
    for law in sym.marks:
        if law.kind != "exponential" or law.mean != mark_mean:
            raise HawkesPopError("the sweep needs equal exponential marks")
    family = asymptotics.exponential_symmetric_family(
        sym.d, mark_mean, sym.lambda_bar
    )
    thetas = _parse_floats(args.theta_grid)
    s_grid = _parse_floats(args.s_grid)
    sweep = asymptotics.convergence_sweep(family, thetas, s_grid)
    write_rows(["theta", "sup_distance"], sweep, args.output)
    if args.figures:
        from . import plots

        plots.nearly_unstable_figure(sweep, args.figures)
    return 0


def cmd_transform(args) -> int:
    model, _ = load_model(args.config)
    d = model.d
    s = np.array(_parse_floats(args.s)) if args.s else np.zeros(d)
    z = np.array(_parse_floats(args.z)) if args.z else np.ones(d)
    if args.tau is not None:
        r = np.array(_parse_floats(args.r)) if args.r else np.zeros(d)
        y = np.array(_parse_floats(args.y)) if args.y else np.ones(d)
        value = tf.joint_transform_two_time(model, args.t, args.tau, r, y, s, z)
    elif args.t0 is not None:
        q0 = tuple(_parse_ints(args.q0)) if args.q0 else (0,) * d
        lam0 = (
            tuple(_parse_floats(args.lambda0))
            if args.lambda0
            else tuple(model.lambda_bar)
        )
        state = tf.ConditionalState(args.t0, q0, lam0)
        value = tf.joint_transform_conditional(model, state, args.t, s, z)
    else:
        value = tf.joint_transform(model, args.t, s, z)
    write_rows(["value"], [(value,)], args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hawkespop",
        description="Moments, transforms and simulation of Hawkes population processes",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, figures=False, seeded=False):
        p.add_argument("config", help="model config file (JSON)")
        p.add_argument("--output", help="write CSV here instead of stdout")
        if figures:
            p.add_argument("--figures", metavar="DIR",
                           help="also render figures into this directory")
        if seeded:
            p.add_argument("--seed", type=int, help="master seed")
            p.add_argument("--jobs", type=int,
                           help="worker processes (default: HAWKESPOP_JOBS or all cores)")

    p = sub.add_parser("moments", help="exact moments at one time or stationary")
    common(p)
    p.add_argument("--t", type=float)
    p.add_argument("--order", type=int)
    p.add_argument("--method", choices=["ode", "closed", "blocks"])
    p.add_argument("--stationary", action="store_true")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("compare", help="benchmark FD and MC against the engine")
    common(p, figures=True, seeded=True)
    p.add_argument("--t", type=float)
    p.add_argument("--order", type=int, help="compare orders 1..N")
    p.add_argument("--h", help="comma list of FD step widths")
    p.add_argument("--mc-runs", help="comma list of replication counts")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("cross", help="two-time cross moments over a lag grid")
    common(p, figures=True, seeded=True)
    p.add_argument("--t", type=float)
    p.add_argument("--tau-max", type=float, default=10.0)
    p.add_argument("--tau-steps", type=int, default=21)
    p.add_argument("--h", type=float)
    p.add_argument("--mc-runs", type=int)
    p.set_defaults(func=cmd_cross)

    p = sub.add_parser("simulate", help="Monte Carlo moment estimates")
    common(p, seeded=True)
    p.add_argument("--horizon", type=float)
    p.add_argument("--runs", type=int)
    p.add_argument("--order", type=int)
    p.add_argument("--dump-events", metavar="DIR",
                   help="write one event-log CSV per replication")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("nearly-unstable", help="Gamma-limit convergence sweep")
    common(p, figures=True)
    p.add_argument("--theta-grid", default="0.5,0.9,0.99")
    p.add_argument("--s-grid", default="0,0.5,1,1.5,2,2.5,3,3.5,4,4.5,5")
    p.set_defaults(func=cmd_nearly_unstable)

    p = sub.add_parser("transform", help="evaluate the joint transform")
    common(p)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--s", help="comma list")
    p.add_argument("--z", help="comma list")
    p.add_argument("--t0", type=float, help="conditioning time")
    p.add_argument("--q0", help="comma list of counts at t0")
    p.add_argument("--lambda0", help="comma list of intensities at t0")
    p.add_argument("--tau", type=float, help="second observation lag")
    p.add_argument("--r", help="comma list (two-time)")
    p.add_argument("--y", help="comma list (two-time)")
    p.set_defaults(func=cmd_transform)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except HawkesPopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
