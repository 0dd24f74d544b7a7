"""Exact-path simulation of the Hawkes population process.

Candidate events are proposed at the current total intensity and accepted
by thinning.  Between events every intensity decays monotonically toward
its base rate and all jumps are nonnegative, so the total intensity taken
at the current instant dominates until the next accepted event, and the
bound is simply refreshed after every candidate.  Departures are drawn at
arrival time; one pass yields the population at every query time.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import SimulationExplosion
from .model import HawkesModel
from .moments import MomentIndex, indices_of_order

DEFAULT_EVENT_CAP = 10**7


def _child_rng(master_seed: int, replication: int) -> np.random.Generator:
    # Splittable seeding: replication r gets an independent child stream,
    # identical whether replications run serially or in parallel.
    return np.random.default_rng(
        np.random.SeedSequence(entropy=master_seed, spawn_key=(replication,))
    )


@dataclass(frozen=True)
class EventLog:
    """One simulated path: arrival times, components, lifetimes, and the
    intensity jumps each arrival applied (one column per component)."""

    horizon: float
    times: np.ndarray       # (n,)
    components: np.ndarray  # (n,) int
    lifetimes: np.ndarray   # (n,) exponential departures, inf when mu = 0
    marks: np.ndarray       # (n, d) jump applied to each intensity
    seed_key: tuple[int, int]

    def counts_at(self, t: float) -> np.ndarray:
        """N_i(t): arrivals in each component up to and including t."""
        d = self.marks.shape[1]
        live = self.times <= t
        return np.bincount(self.components[live], minlength=d).astype(float)

    def population_at(self, t: float) -> np.ndarray:
        """Q_i(t) as an indicator sum: arrived by t, not yet departed."""
        d = self.marks.shape[1]
        present = (self.times <= t) & (self.times + self.lifetimes > t)
        return np.bincount(self.components[present], minlength=d).astype(float)

    def population_by_sweep(self, t: float) -> np.ndarray:
        """Q_i(t) by replaying births and deaths in time order."""
        d = self.marks.shape[1]
        counts = np.zeros(d)
        events = []
        for k in range(len(self.times)):
            if self.times[k] <= t:
                events.append((self.times[k], 1, self.components[k]))
            dep = self.times[k] + self.lifetimes[k]
            if dep <= t:
                events.append((dep, -1, self.components[k]))
        events.sort()
        for _, delta, comp in events:
            counts[comp] += delta
        return counts

    def intensity_at(self, model: HawkesModel, t: float) -> np.ndarray:
        """lambda_i(t) rebuilt exactly from the jump history."""
        lam = model.lambda_bar.astype(float).copy()
        for k in range(len(self.times)):
            tk = self.times[k]
            if tk > t:
                break
            lam += self.marks[k] * np.exp(-model.alpha * (t - tk))
        return lam


def simulate_path(
    model: HawkesModel,
    horizon: float,
    seed: int,
    replication: int = 0,
    max_events: int = DEFAULT_EVENT_CAP,
) -> EventLog:
    """Simulate one path on [0, horizon] by thinning."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    rng = _child_rng(seed, replication)
    d = model.d
    alpha = model.alpha
    lb = model.lambda_bar
    mu = model.mu
    exp = math.exp

    lam = [float(v) for v in lb]
    t = 0.0
    times: list[float] = []
    comps: list[int] = []
    lifetimes: list[float] = []
    marks: list[list[float]] = []
    while True:
        total = sum(lam)
        if total <= 0.0:
            break
        wait = rng.exponential(1.0 / total)
        t_cand = t + wait
        if t_cand > horizon:
            break
        decayed = [lb[i] + (lam[i] - lb[i]) * exp(-alpha[i] * wait) for i in range(d)]
        u = rng.uniform(0.0, total)
        acc = 0.0
        chosen = -1
        for i in range(d):
            acc += decayed[i]
            if u <= acc:
                chosen = i
                break
        t = t_cand
        lam = decayed
        if chosen >= 0:
            jump = [model.marks[i][chosen].sample(rng) for i in range(d)]
            for i in range(d):
                lam[i] += jump[i]
            life = rng.exponential(1.0 / mu[chosen]) if mu[chosen] > 0 else math.inf
            times.append(t)
            comps.append(chosen)
            lifetimes.append(life)
            marks.append(jump)
            if len(times) > max_events:
                raise SimulationExplosion(
                    f"more than {max_events} events by t={t:.4g}; "
                    "the model is at or past criticality"
                )

    return EventLog(
        horizon=horizon,
        times=np.array(times),
        components=np.array(comps, dtype=int),
        lifetimes=np.array(lifetimes),
        marks=np.array(marks) if marks else np.zeros((0, d)),
        seed_key=(seed, replication),
    )


class McEstimate(NamedTuple):
    """Sample mean with its standard error."""

    value: float
    stderr: float
    runs: int


def _falling(q: float, k: int) -> float:
    out = 1.0
    for j in range(k):
        out *= q - j
    return out


def _reduced_product(model, log: EventLog, t: float, idx: MomentIndex) -> float:
    lam = log.intensity_at(model, t)
    pop = log.population_at(t)
    out = 1.0
    for i, e in enumerate(idx.n_lambda):
        if e:
            out *= lam[i] ** e
    for i, e in enumerate(idx.n_q):
        if e:
            out *= _falling(pop[i], e)
    return out


def _moment_samples(args):
    model, t, order, seed, rep = args
    log = simulate_path(model, t, seed, rep)
    return [
        _reduced_product(model, log, t, idx)
        for n in range(1, order + 1)
        for idx in indices_of_order(model.d, n)
    ]


def _aggregate(samples: np.ndarray) -> list[McEstimate]:
    m = samples.shape[0]
    means = samples.mean(axis=0)
    stderr = samples.std(axis=0, ddof=1) / math.sqrt(m)
    return [McEstimate(float(a), float(s), m) for a, s in zip(means, stderr)]


def _run_replications(worker, arglist, n_jobs: int):
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(worker, arglist, chunksize=max(1, len(arglist) // (4 * n_jobs))))
    return [worker(a) for a in arglist]


def default_jobs() -> int:
    """Worker count for replication-parallel estimators, env-overridable."""
    env = os.environ.get("HAWKESPOP_JOBS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def estimate_moments(
    model: HawkesModel,
    t: float,
    order: int,
    replications: int,
    master_seed: int,
    n_jobs: int = 1,
) -> dict[MomentIndex, McEstimate]:
    """Monte Carlo estimates of every reduced moment of total order 1..order.

    Replications use independent child streams of the master seed and are
    aggregated in replication order, so results are identical for any
    n_jobs.
    """
    if replications < 2:
        raise ValueError("need at least 2 replications")
    idxs = [i for n in range(1, order + 1) for i in indices_of_order(model.d, n)]
    if t == 0.0:
        # deterministic start: lambda(0) = lambda_bar, Q(0) = 0
        out = {}
        for idx in idxs:
            v = 0.0 if any(idx.n_q) else float(
                np.prod(model.lambda_bar ** np.array(idx.n_lambda))
            )
            out[idx] = McEstimate(v, 0.0, replications)
        return out
    arglist = [(model, t, order, master_seed, r) for r in range(replications)]
    rows = _run_replications(_moment_samples, arglist, n_jobs)
    estimates = _aggregate(np.array(rows))
    return dict(zip(idxs, estimates))


def _cross_samples(args):
    model, t, tau, seed, rep = args
    log = simulate_path(model, t + tau, seed, rep)
    d = model.d
    q_t, q_tau = log.population_at(t), log.population_at(t + tau)
    l_t, l_tau = log.intensity_at(model, t), log.intensity_at(model, t + tau)
    out = []
    for i in range(d):
        for j in range(d):
            out.append(q_t[i] * q_tau[j])
    for i in range(d):
        for j in range(d):
            out.append(l_t[i] * l_tau[j])
    return out


def estimate_cross_moments(
    model: HawkesModel,
    t: float,
    tau: float,
    replications: int,
    master_seed: int,
    n_jobs: int = 1,
) -> dict[str, list[list[McEstimate]]]:
    """Monte Carlo two-time product moments from shared paths.

    Returns {'QQ': matrix, 'LL': matrix} where entry (i, j) estimates the
    product of component i at time t and component j at time t + tau.
    """
    if replications < 2:
        raise ValueError("need at least 2 replications")
    d = model.d
    arglist = [(model, t, tau, master_seed, r) for r in range(replications)]
    rows = _run_replications(_cross_samples, arglist, n_jobs)
    estimates = _aggregate(np.array(rows))
    qq = [[estimates[i * d + j] for j in range(d)] for i in range(d)]
    ll = [[estimates[d * d + i * d + j] for j in range(d)] for i in range(d)]
    return {"QQ": qq, "LL": ll}
