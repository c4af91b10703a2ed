"""Monte Carlo for the weighted branching process {W_n} on the d-ary tree.

Each individual x draws a recovery clock Y(x) ~ Exp(1); each of its d
children gets a fresh weight and is born with probability
``1 - exp(-lam rho_x rho_y Y(x) / d)`` (the infection clock integrated out
given Y).  Every tree vertex is visited once, so drawing weights on the fly
samples the annealed law.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numba as nb
import numpy as np
from scipy.special import betaln, gammaln

from . import outcome as oc
from .outcome import Outcome
from .rng import replica_stream
from .stats import SurvivalEstimate
from ._hash import ppf
from .weights import WeightSpec, sample

DEFAULT_HORIZON = 200
DEFAULT_POP_CAP = 100_000
_SMALL_BINOMIAL = 64


@nb.njit(cache=True)
def _binomial(rng, n, p):
    if p <= 0.0:
        return 0
    if p >= 1.0:
        return n
    if n > _SMALL_BINOMIAL:
        return rng.binomial(n, p)
    flip = p > 0.5
    if flip:
        p = 1.0 - p
    q = 1.0 - p
    pk = q ** n
    cdf = pk
    u = rng.random()
    k = 0
    ratio = p / q
    while u > cdf and k < n:
        pk *= ratio * (n - k) / (k + 1)
        k += 1
        cdf += pk
    return n - k if flip else k


@nb.njit(cache=True)
def _run_degenerate(rng, lam, d, root_w, v, pk, horizon, pop_cap, sizes, aggregate):
    n = 1
    gen = 0
    peak = 1
    sizes[0] = 1
    while True:
        if n == 0:
            return oc.DIED, gen, peak
        if n >= pop_cap:
            return oc.POPULATION_CAP, gen, peak
        if gen == horizon:
            return oc.HORIZON, gen, peak
        nxt = 0
        if gen > 0 and aggregate:
            # n i.i.d. offspring counts with law pk, tallied by count value
            left = n
            mass = 1.0
            for k in range(d + 1):
                if left == 0:
                    break
                if k == d or pk[k] >= mass:
                    nk = left
                else:
                    nk = rng.binomial(left, min(1.0, pk[k] / mass))
                nxt += k * nk
                left -= nk
                mass -= pk[k]
        else:
            pw = root_w if gen == 0 else v
            c = lam * pw * v / d
            for _ in range(n):
                y = rng.standard_exponential()
                nxt += _binomial(rng, d, -np.expm1(-c * y))
        n = nxt
        gen += 1
        if gen < sizes.shape[0]:
            sizes[gen] = n
        if n > peak:
            peak = n


def offspring_law(lam: float, d: int, v: float) -> np.ndarray:
    """P(k children) for a weight-v parent with weight-v children.

    With c = lam v^2 / d, u = exp(-c Y) is Beta(1/c, 1) distributed, so
    P(k) = C(d, k) B(d - k + 1/c, k + 1) / c.
    """
    c = lam * v * v / d
    k = np.arange(d + 1)
    if c <= 0:
        out = np.zeros(d + 1)
        out[0] = 1.0
        return out
    a = 1.0 / c
    log_p = (
        gammaln(d + 1) - gammaln(k + 1) - gammaln(d - k + 1)
        + betaln(d - k + a, k + 1) + np.log(a)
    )
    p = np.exp(log_p)
    return p / p.sum()


@nb.njit(cache=True)
def _run_general(rng, lam, d, root_w, cum, lo, hi, horizon, pop_cap, sizes):
    cur = np.empty(1, dtype=np.float64)
    cur[0] = root_w
    n = 1
    gen = 0
    peak = 1
    sizes[0] = 1
    nxt = np.empty(max(16, d), dtype=np.float64)
    while True:
        if n == 0:
            return oc.DIED, gen, peak
        if n >= pop_cap:
            return oc.POPULATION_CAP, gen, peak
        if gen == horizon:
            return oc.HORIZON, gen, peak
        m = 0
        for i in range(n):
            y = rng.standard_exponential()
            c = lam * cur[i] * y / d
            for _ in range(d):
                ry = ppf(rng.random(), cum, lo, hi)
                if rng.random() < -np.expm1(-c * ry):
                    if m == nxt.shape[0]:
                        grown = np.empty(2 * m, dtype=np.float64)
                        grown[:m] = nxt
                        nxt = grown
                    nxt[m] = ry
                    m += 1
        cur, nxt = nxt, cur
        if nxt.shape[0] < max(16, d):
            nxt = np.empty(max(16, d), dtype=np.float64)
        n = m
        gen += 1
        if gen < sizes.shape[0]:
            sizes[gen] = n
        if n > peak:
            peak = n


@dataclass(frozen=True)
class BranchingRun:
    outcome: Outcome
    sizes: np.ndarray  # |W_n| for n = 0..generations


def run_branching(
    spec: WeightSpec,
    lam: float,
    d: int,
    root_weight: float | None,
    horizon: int = DEFAULT_HORIZON,
    pop_cap: int = DEFAULT_POP_CAP,
    rng: np.random.Generator | None = None,
    method: str = "auto",
) -> BranchingRun:
    """One replica; ``root_weight=None`` draws the root weight from ``spec``.

    ``method="individual"`` draws Y and the children of every individual.
    ``"auto"`` does the same except for single-atom laws, where generations
    after the root are advanced by a multinomial tally of i.i.d. offspring
    counts (same law, far fewer draws).
    """
    if method not in ("auto", "individual"):
        raise ValueError(f"unknown method {method!r}")
    if d < 1 or horizon < 1 or pop_cap < 1:
        raise ValueError("need d >= 1, horizon >= 1, pop_cap >= 1")
    rng = rng if rng is not None else np.random.default_rng()
    root = float(sample(spec, rng)) if root_weight is None else float(root_weight)
    sizes = np.zeros(horizon + 1, dtype=np.int64)
    if spec.is_degenerate:
        v = spec.atoms[0][0]
        pk = _offspring_cached(float(lam), int(d), v)
        code, gen, peak = _run_degenerate(
            rng, float(lam), int(d), root, v, pk, horizon, pop_cap, sizes, method == "auto"
        )
    else:
        code, gen, peak = _run_general(
            rng, float(lam), int(d), root, spec._cum, spec._lo, spec._hi, horizon, pop_cap, sizes
        )
    return BranchingRun(Outcome(int(code), int(gen), int(peak)), sizes[: gen + 1].copy())


@lru_cache(maxsize=64)
def _offspring_cached(lam: float, d: int, v: float) -> np.ndarray:
    return offspring_law(lam, d, v)


def branching_replica(args) -> tuple[int, int, int]:
    """Picklable worker: (replica index, outcome code, generation)."""
    spec, lam, d, root_weight, horizon, pop_cap, seed, i, method = args
    run = run_branching(spec, lam, d, root_weight, horizon, pop_cap, replica_stream(seed, i), method)
    return i, run.outcome.code, run.outcome.generation


def estimate_branching_survival(
    spec: WeightSpec,
    lam: float,
    d: int,
    root_weight: float | None = None,
    horizon: int = DEFAULT_HORIZON,
    pop_cap: int = DEFAULT_POP_CAP,
    n_runs: int = 10_000,
    confidence: float = 0.99,
    master_seed: int = 0,
    jobs: int = 1,
    records: list | None = None,
    method: str = "auto",
) -> SurvivalEstimate:
    """Survival frequency over ``n_runs`` independent replicas."""
    from .parallel import map_replicas

    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    tasks = ((spec, lam, d, root_weight, horizon, pop_cap, master_seed, i, method) for i in range(n_runs))
    results = map_replicas(branching_replica, tasks, n_runs, jobs)
    if records is not None:
        records.extend(results)
    return SurvivalEstimate.from_counts(*oc.tally(r[1] for r in results), confidence=confidence)
