"""Finite-budget replica outcomes shared by the branching and lattice simulators."""

from __future__ import annotations

from dataclasses import dataclass

DIED = 0
POPULATION_CAP = 1
HORIZON = 2
REACHED = 3

_REASONS = {DIED: "extinct", POPULATION_CAP: "population-cap", HORIZON: "horizon", REACHED: "reached-layer"}


@dataclass(frozen=True)
class Outcome:
    """How a replica ended.

    ``generation`` is the first empty generation for extinct runs and the
    last simulated generation otherwise (continuous-time runs use the
    number of distinct norms reached).
    """

    code: int
    generation: int
    peak: int

    @property
    def died(self) -> bool:
        return self.code == DIED

    @property
    def survived(self) -> bool:
        return self.code != DIED

    @property
    def reason(self) -> str:
        return _REASONS[self.code]

    def __str__(self) -> str:
        if self.died:
            return f"Died({self.generation})"
        return f"Survived({self.reason})"


def tally(codes) -> tuple[int, int, int]:
    """(survived-by-cap, died, censored-at-horizon) counts."""
    survived = died = censored = 0
    for c in codes:
        if c == DIED:
            died += 1
        elif c == HORIZON:
            censored += 1
        else:
            survived += 1
    return survived, died, censored
