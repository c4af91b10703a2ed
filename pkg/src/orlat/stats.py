"""Binomial confidence intervals and survival tallies."""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from statistics import NormalDist

from .errors import BadArguments


def z_value(confidence: float) -> float:
    if not 0.0 < confidence < 1.0:
        raise BadArguments(f"confidence must lie in (0, 1), got {confidence}")
    return NormalDist().inv_cdf(0.5 + confidence / 2.0)


def wilson_interval(successes: int, trials: int, confidence: float = 0.99) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1 or successes < 0 or successes > trials:
        raise BadArguments(f"need 0 <= successes <= trials and trials >= 1, got {successes}/{trials}")
    z = z_value(confidence)
    n = float(trials)
    p = successes / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return lo, hi


@dataclass(frozen=True)
class SurvivalEstimate:
    """Replica tally.

    ``survived`` counts runs that hit the population cap, ``censored`` runs
    still alive at the horizon; both count as survival in ``point``.
    """

    survived: int
    died: int
    censored: int
    point: float
    ci_lo: float
    ci_hi: float
    confidence: float

    @property
    def n_runs(self) -> int:
        return self.survived + self.died + self.censored

    @property
    def width(self) -> float:
        return self.ci_hi - self.ci_lo

    @classmethod
    def from_counts(cls, survived: int, died: int, censored: int, confidence: float = 0.99):
        n = survived + died + censored
        alive = survived + censored
        lo, hi = wilson_interval(alive, n, confidence)
        return cls(survived, died, censored, alive / n, lo, hi, confidence)

    def to_dict(self) -> dict:
        return asdict(self)


def combined_width(*estimates) -> float:
    """Root-sum-square of full interval widths."""
    return math.sqrt(sum(e.width ** 2 for e in estimates))
