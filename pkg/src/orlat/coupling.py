"""Joint construction of the lattice SIR generations {V_n} and the tree
branching generations {W_n}, and the extinction gap between ever-infected
layers of the contact process and SIR generations.

While the coupling holds, every x in V_n is paired with one tree individual
of equal weight and the same recovery clock Y(x).  Children of x that no
other member of V_n can reach map one-to-one onto tree children.  A child
shared with another parent (the set q(x)) has no faithful tree partner: the
coupling fails if x infects it, or if one of the |q(x)| replacement tree
children (fresh weights, same Y) is born.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import outcome as oc
from .lattice import Budget, origin, run_contact, run_sir
from .parallel import map_replicas
from .rng import environment_seed, replica_stream
from .stats import SurvivalEstimate, combined_width, wilson_interval
from .weights import Environment, WeightSpec, sample

NONE = "none"
SHARED_TARGET_HIT = "shared-target-hit"
EXTRA_TREE_BIRTH = "extra-tree-birth"
CAUSES = (NONE, SHARED_TARGET_HIT, EXTRA_TREE_BIRTH)


def default_sigma(spec: WeightSpec, lam: float) -> tuple[float, bool]:
    """(sigma, degenerate): sigma = 1 / (20 log(lam M^2)) strictly inside the
    admissible window, or 1 with ``degenerate=True`` when lam M^2 <= 1."""
    growth = lam * spec.bound_M ** 2
    if growth <= 1.0:
        return 1.0, True
    return 1.0 / (20.0 * math.log(growth)), False


def target_steps(sigma: float, d: int) -> int:
    return int(math.floor(sigma * math.log(d) + 1e-12))


@dataclass(frozen=True)
class CoupledRun:
    success_through: int
    target_steps: int
    lattice_sizes: tuple[int, ...]
    tree_sizes: tuple[int, ...]
    failure_cause: str
    sigma: float
    degenerate_window: bool = False
    shared_targets: tuple[int, ...] = field(default=())  # sum_x |q(x)| per step

    @property
    def success(self) -> bool:
        return self.success_through >= self.target_steps


def shared_directions(keys: list[int], dirs: list[tuple[int, ...]], a_lane: np.ndarray) -> list[set[int]]:
    """q(x) as direction sets: y = x + e_j is shared with z iff
    x - e_i = z - e_j for some i, i.e. x and z have a common parent."""
    groups: dict[int, list[tuple[int, int]]] = {}
    mask = (1 << 64) - 1
    for idx, (k, ds) in enumerate(zip(keys, dirs)):
        for i in set(ds):
            groups.setdefault((k - int(a_lane[i])) & mask, []).append((idx, i))
    q: list[set[int]] = [set() for _ in keys]
    for members in groups.values():
        for a in range(len(members)):
            xa, ia = members[a]
            for b in range(a + 1, len(members)):
                xb, ib = members[b]
                q[xa].add(ib)
                q[xb].add(ia)
    return q


def _candidates(rng: np.random.Generator, d: int, p_max: float) -> np.ndarray:
    """Distinct directions, each included independently with probability p_max."""
    k = rng.binomial(d, p_max)
    if k == 0:
        return np.empty(0, dtype=np.int64)
    if 4 * k > d:
        return np.sort(rng.permutation(d)[:k])
    picked: set[int] = set()
    while len(picked) < k:
        picked.update(rng.integers(0, d, k - len(picked)).tolist())
    return np.array(sorted(picked), dtype=np.int64)


def run_coupled(
    spec: WeightSpec,
    lam: float,
    d: int,
    sigma: float | None = None,
    rng: np.random.Generator | None = None,
    env_seed: int | None = None,
    steps: int | None = None,
) -> CoupledRun:
    """One coupled replica from V_0 = W_0 = {O}.

    ``steps`` overrides the target ``floor(sigma log d)``.  Bookkeeping
    stops at the first failure; sizes after it are not recorded.

    Births of x are drawn by thinning: candidate directions are included
    with the largest possible probability ``1 - exp(-lam rho_x M Y / d)``
    and accepted with the ratio for the actual child weight, so only
    candidate children are ever materialized.
    """
    if d < 2:
        raise ValueError("coupling needs d >= 2")
    rng = rng if rng is not None else np.random.default_rng()
    degenerate = False
    if sigma is None:
        sigma, degenerate = default_sigma(spec, lam)
    target = target_steps(sigma, d) if steps is None else int(steps)
    if env_seed is None:
        env_seed = int(rng.integers(0, 2**63))
    env = Environment(env_seed, spec, d)
    a_lane, b_lane = env.lanes
    c = lam / d
    big_m = spec.bound_M
    ka0, kb0 = env.key(origin(d))
    keys = [int(ka0)]
    bkeys = [int(kb0)]
    dirs: list[tuple[int, ...]] = [()]
    rho = [float(env.weights_from_keys(np.array([ka0]), np.array([kb0]))[0])]
    lattice = [1]
    tree = [1]
    qsizes = []
    cause = NONE
    m = 0
    while m < target and keys:
        q = shared_directions(keys, dirs, a_lane) if len(keys) > 1 else [set()]
        qsizes.append(sum(len(s) for s in q))
        nxt: dict[int, tuple[int, tuple[int, ...], float]] = {}
        n_matched = n_hit = n_extra = 0
        for x in range(len(keys)):
            y = rng.standard_exponential()
            rate = c * rho[x] * y
            cand = _candidates(rng, d, -math.expm1(-rate * big_m))
            if len(cand):
                cka = np.uint64(keys[x]) + a_lane[cand]
                ckb = np.uint64(bkeys[x]) + b_lane[cand]
                w = env.weights_from_keys(cka, ckb)
                accept = rng.random(len(cand)) * -math.expm1(-rate * big_m) < -np.expm1(-rate * w)
                born = zip(cand[accept].tolist(), cka[accept].tolist(), ckb[accept].tolist(), w[accept].tolist())
                for j, kk, bb, ww in born:
                    if j in q[x]:
                        n_hit += 1
                    else:
                        n_matched += 1
                    nxt.setdefault(kk, (bb, tuple(sorted(dirs[x] + (j,))), ww))
            if q[x]:
                rho_u = sample(spec, rng, len(q[x]))
                n_extra += int(np.count_nonzero(rng.random(len(q[x])) < -np.expm1(-rate * rho_u)))
        lattice.append(len(nxt))
        tree.append(n_matched + n_hit + n_extra)
        if n_hit:
            cause = SHARED_TARGET_HIT
        elif n_extra:
            cause = EXTRA_TREE_BIRTH
        if cause != NONE:
            break
        m += 1
        keys = list(nxt)
        bkeys = [v[0] for v in nxt.values()]
        dirs = [v[1] for v in nxt.values()]
        rho = [v[2] for v in nxt.values()]
    else:
        # extinct (or target reached): the bijection holds through the target
        m = target
    return CoupledRun(m, target, tuple(lattice), tuple(tree), cause, sigma, degenerate, tuple(qsizes))


def coupled_replica(args):
    spec, lam, d, sigma, steps, seed, i = args
    run = run_coupled(
        spec, lam, d, sigma, replica_stream(seed, i), environment_seed(seed, i), steps
    )
    return i, run.success, run.failure_cause, run.target_steps, run.degenerate_window


@dataclass(frozen=True)
class CouplingEstimate:
    d: int
    sigma: float
    target_steps: int
    successes: int
    n_runs: int
    p_success: float
    ci: tuple[float, float]
    failure_histogram: dict
    degenerate_window: bool

    @property
    def width(self) -> float:
        return self.ci[1] - self.ci[0]

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "sigma": self.sigma,
            "target_steps": self.target_steps,
            "successes": self.successes,
            "n_runs": self.n_runs,
            "p_success": self.p_success,
            "ci": list(self.ci),
            "failure_histogram": dict(self.failure_histogram),
            "degenerate_window": self.degenerate_window,
        }


def estimate_coupling(
    spec: WeightSpec,
    lam: float,
    d: int,
    sigma: float | None = None,
    n_runs: int = 10_000,
    confidence: float = 0.99,
    master_seed: int = 0,
    steps: int | None = None,
    jobs: int = 1,
) -> CouplingEstimate:
    """Empirical P(B(d)) with a Wilson interval and failure-cause counts."""
    degenerate = False
    if sigma is None:
        sigma, degenerate = default_sigma(spec, lam)
    tasks = ((spec, lam, d, sigma, steps, master_seed, i) for i in range(n_runs))
    results = map_replicas(coupled_replica, tasks, n_runs, jobs)
    hist = {c: 0 for c in CAUSES}
    ok = 0
    for _, success, cause, _, _ in results:
        ok += bool(success)
        hist[cause] += 1
    target = target_steps(sigma, d) if steps is None else int(steps)
    lo, hi = wilson_interval(ok, n_runs, confidence)
    return CouplingEstimate(d, sigma, target, ok, n_runs, ok / n_runs, (lo, hi), hist, degenerate)


def _gap_replica(args):
    kind, spec, lam, d, layer, budget, seed, i = args
    env = Environment(environment_seed(seed, i), spec, d)
    rng = replica_stream(seed, i)
    if kind == "sir":
        run = run_sir(env, lam, [origin(d)], horizon=max(layer, 1), pop_cap=budget.pop_cap, rng=rng)
        # V_layer is empty iff the run died at or before that generation
        empty = run.outcome.died and run.outcome.generation <= layer
        return i, empty, run.outcome.code
    run = run_contact(env, lam, [origin(d)], budget.t_max, budget.pop_cap, rng, stop_norm=layer)
    empty = run.outcome.code != oc.REACHED and layer not in run.ever_infected_by_norm
    return i, empty, run.outcome.code


@dataclass(frozen=True)
class GapEstimate:
    d: int
    sigma: float
    layer: int
    gap: float
    ci_width: float
    beta_empty: SurvivalEstimate  # "survived" counts empty-layer replicas
    v_empty: SurvivalEstimate
    undecided: int  # contact replicas stopped by the cap before the layer

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "sigma": self.sigma,
            "layer": self.layer,
            "gap": self.gap,
            "ci_width": self.ci_width,
            "p_beta_empty": self.beta_empty.point,
            "p_v_empty": self.v_empty.point,
            "undecided": self.undecided,
        }


def extinction_gap(
    spec: WeightSpec,
    lam: float,
    d: int,
    sigma: float | None = None,
    n_runs: int = 10_000,
    master_seed: int = 0,
    confidence: float = 0.99,
    budget: Budget = Budget(),
    steps: int | None = None,
    jobs: int = 1,
) -> GapEstimate:
    """P(beta_m empty) - P(V_m empty) for m = floor(sigma log d), from
    independent contact and SIR replica sets.

    Since V_m is contained in beta_m the true gap is <= 0.  ``ci_width`` is
    the root-sum-square of the two interval widths.
    """
    if d < 2:
        raise ValueError("need d >= 2")
    if sigma is None:
        sigma, _ = default_sigma(spec, lam)
    layer = target_steps(sigma, d) if steps is None else int(steps)
    arms = {}
    undecided = 0
    for arm, kind in enumerate(("contact", "sir")):
        seed = (int(master_seed) * 2 + arm) & ((1 << 64) - 1)
        tasks = ((kind, spec, lam, d, layer, budget, seed, i) for i in range(n_runs))
        res = map_replicas(_gap_replica, tasks, n_runs, jobs)
        empty = sum(1 for r in res if r[1])
        if kind == "contact":
            # cap or horizon hit before the layer was reached: layer status unknown, counted non-empty
            undecided = sum(1 for r in res if not r[1] and r[2] != oc.REACHED)
        arms[kind] = SurvivalEstimate.from_counts(empty, n_runs - empty, 0, confidence=confidence)
    gap = arms["contact"].point - arms["sir"].point
    width = combined_width(arms["contact"], arms["sir"])
    return GapEstimate(d, sigma, layer, gap, width, arms["contact"], arms["sir"], undecided)
