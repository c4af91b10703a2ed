"""Generation construction {V_n} of the SIR model on the oriented lattice.

Every edge raises the l1 norm by one and a recovered vertex is never
reinfected, so the ever-infected set splits into layers V_0, V_1, ...:
each x in V_n draws Y(x) ~ Exp(1) and infects y = x + e_j with probability
``1 - exp(-lam rho(x) rho(y) Y(x) / d)``; attempts from different parents
are independent and y joins V_{n+1} on any success.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import outcome as oc
from ..errors import MixedNormInitialSet
from ..outcome import Outcome
from ..weights import Environment

DEFAULT_HORIZON = 150
DEFAULT_POP_CAP = 50_000


class WeightAudit:
    """Records every weight query of a replica and flags disagreements."""

    def __init__(self):
        self.seen: dict[int, float] = {}
        self.queries = 0
        self.conflicts = 0

    def record(self, ka: np.ndarray, weights: np.ndarray):
        for k, w in zip(np.ravel(ka).tolist(), np.ravel(weights).tolist()):
            self.queries += 1
            prev = self.seen.setdefault(k, w)
            if prev != w:
                self.conflicts += 1


@dataclass(frozen=True)
class SirRun:
    outcome: Outcome
    sizes: tuple[int, ...]
    generations: tuple[frozenset, ...] | None = None  # only with record=True

    @property
    def ever_infected(self) -> int:
        return sum(self.sizes)


def initial_layer(env: Environment, initial) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Keys, coordinates and common norm of a synchronized initial set."""
    d = env.dimension
    verts = sorted({tuple(int(c) for c in v) for v in initial})
    if not verts:
        return np.empty(0, np.uint64), np.empty(0, np.uint64), np.empty((0, d), np.int64), 0
    norms = {sum(v) for v in verts}
    if len(norms) > 1:
        raise MixedNormInitialSet(f"initial vertices have norms {sorted(norms)}")
    keys = [env.key(v) for v in verts]
    ka = np.array([k[0] for k in keys], dtype=np.uint64)
    kb = np.array([k[1] for k in keys], dtype=np.uint64)
    return ka, kb, np.array(verts, dtype=np.int64), norms.pop()


def run_sir(
    env: Environment,
    lam: float,
    initial,
    horizon: int = DEFAULT_HORIZON,
    pop_cap: int = DEFAULT_POP_CAP,
    rng: np.random.Generator | None = None,
    record: bool = False,
    audit: WeightAudit | None = None,
) -> SirRun:
    """Simulate V_0, V_1, ... until extinction, ``pop_cap`` ever-infected
    vertices, or ``horizon`` generations.

    With ``record=True`` every generation is returned as a frozenset of
    coordinate tuples (keep d and the population small).
    """
    rng = rng if rng is not None else np.random.default_rng()
    d = env.dimension
    a_lane, b_lane = env.lanes
    ka, kb, coords, _ = initial_layer(env, initial)
    rho = env.weights_from_keys(ka, kb)
    if audit is not None:
        audit.record(ka, rho)
    sizes = [len(ka)]
    gens = [frozenset(map(tuple, coords.tolist()))] if record else None
    ever = len(ka)
    peak = len(ka)
    gen = 0
    while True:
        n = len(ka)
        if n == 0:
            code = oc.DIED
            break
        if ever >= pop_cap:
            code = oc.POPULATION_CAP
            break
        if gen == horizon:
            code = oc.HORIZON
            break
        y = rng.standard_exponential(n)
        cka = ka[:, None] + a_lane[None, :]
        ckb = kb[:, None] + b_lane[None, :]
        rho_y = env.weights_from_keys(cka, ckb)
        if audit is not None:
            audit.record(cka, rho_y)
        p = -np.expm1(-(lam / d) * rho[:, None] * rho_y * y[:, None])
        born = rng.random((n, d)) < p
        parent, direction = np.nonzero(born)
        _, first = np.unique(cka[parent, direction], return_index=True)
        parent, direction = parent[first], direction[first]
        ka = cka[parent, direction]
        kb = ckb[parent, direction]
        rho = rho_y[parent, direction]
        if record:
            coords = coords[parent].copy()
            coords[np.arange(len(parent)), direction] += 1
            gens.append(frozenset(map(tuple, coords.tolist())))
        gen += 1
        sizes.append(len(ka))
        ever += len(ka)
        peak = max(peak, len(ka))
    return SirRun(Outcome(code, gen, peak), tuple(sizes), tuple(gens) if record else None)
