"""SIR and contact dynamics on the oriented lattice Z_+^d."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import outcome as oc
from ..parallel import map_replicas
from ..rng import environment_seed, replica_stream
from ..stats import SurvivalEstimate
from ..weights import Environment, WeightSpec
from .contact import ContactRun, run_contact
from .sir import SirRun, WeightAudit, run_sir

__all__ = [
    "Budget",
    "ContactRun",
    "SirRun",
    "WeightAudit",
    "estimate_survival",
    "origin",
    "run_contact",
    "run_sir",
]


def origin(d: int) -> tuple[int, ...]:
    return (0,) * d


@dataclass(frozen=True)
class Budget:
    """Finite observation window standing in for 'survives forever'."""

    horizon: int = 150  # SIR generations
    t_max: float = 300.0  # contact time
    pop_cap: int = 50_000  # ever-infected vertices


def lattice_replica(args):
    """Picklable worker returning (index, code, generations_or_time, ever_infected)."""
    kind, spec, lam, d, initial, budget, seed, i, quenched = args
    env_seed = quenched if quenched is not None else environment_seed(seed, i)
    env = Environment(env_seed, spec, d)
    rng = replica_stream(seed, i)
    if kind == "sir":
        run = run_sir(env, lam, initial, budget.horizon, budget.pop_cap, rng)
        return i, run.outcome.code, run.outcome.generation, run.ever_infected
    run = run_contact(env, lam, initial, budget.t_max, budget.pop_cap, rng)
    return i, run.outcome.code, run.final_time, run.ever_infected


def estimate_survival(
    kind: str,
    spec: WeightSpec,
    lam: float,
    d: int,
    initial=None,
    budget: Budget = Budget(),
    n_runs: int = 1000,
    confidence: float = 0.99,
    master_seed: int = 0,
    quenched: int | None = None,
    jobs: int = 1,
    records: list | None = None,
) -> SurvivalEstimate:
    """Annealed survival frequency: each replica draws a fresh environment
    unless ``quenched`` fixes one environment seed for all replicas."""
    if kind not in ("sir", "contact"):
        raise ValueError(f"kind must be 'sir' or 'contact', got {kind!r}")
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    initial = [origin(d)] if initial is None else [tuple(v) for v in initial]
    tasks = ((kind, spec, lam, d, initial, budget, master_seed, i, quenched) for i in range(n_runs))
    results = map_replicas(lattice_replica, tasks, n_runs, jobs)
    if records is not None:
        records.extend(results)
    return SurvivalEstimate.from_counts(*oc.tally(r[1] for r in results), confidence=confidence)
