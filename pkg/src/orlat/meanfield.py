"""High-dimensional limit: theta, the limit survival probability and lambda_c."""

from __future__ import annotations

from dataclasses import dataclass, asdict

from .errors import NoConvergence, SubcriticalRate
from .weights import WeightSpec, expect

RESIDUAL_TOL = 1e-10
_MAX_DOUBLINGS = 64
_MAX_BISECTIONS = 400


@dataclass(frozen=True)
class MeanFieldSolution:
    lam: float
    theta: float
    limit_survival: float
    residual: float

    def to_dict(self) -> dict:
        return asdict(self)


def critical_rate(spec: WeightSpec) -> float:
    return 1.0 / expect(spec, lambda r: r * r)


def theta_equation(spec: WeightSpec, lam: float, theta: float) -> float:
    """g(theta) = E[lam rho^2 / (1 + lam rho theta)]."""
    return expect(spec, lambda r: lam * r * r / (1.0 + lam * r * theta))


def solve_theta(spec: WeightSpec, lam: float) -> MeanFieldSolution:
    """Unique positive root of ``g(theta) = 1`` by bracketing and bisection."""
    if lam * expect(spec, lambda r: r * r) <= 1.0:
        raise SubcriticalRate(f"lambda={lam} <= 1/E(rho^2)={critical_rate(spec)}")

    lo, hi = 0.0, 1.0
    for _ in range(_MAX_DOUBLINGS):
        if theta_equation(spec, lam, hi) < 1.0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise NoConvergence("could not bracket theta")

    # g is strictly decreasing: g(lo) >= 1 > g(hi)
    for _ in range(_MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if theta_equation(spec, lam, mid) > 1.0:
            lo = mid
        else:
            hi = mid
    theta = lo if abs(theta_equation(spec, lam, lo) - 1.0) <= abs(theta_equation(spec, lam, hi) - 1.0) else hi
    residual = abs(theta_equation(spec, lam, theta) - 1.0)
    if residual > RESIDUAL_TOL:
        raise NoConvergence(f"theta residual {residual:.3e} above tolerance")
    limit = expect(spec, lambda r: lam * r * theta / (1.0 + lam * r * theta))
    return MeanFieldSolution(lam, theta, limit, residual)


def survival_limit(spec: WeightSpec, lam: float) -> float:
    """E[lam rho theta / (1 + lam rho theta)]."""
    return solve_theta(spec, lam).limit_survival


def limit_or_zero(spec: WeightSpec, lam: float) -> float:
    """The d -> infinity survival probability, 0 at or below lambda_c."""
    try:
        return survival_limit(spec, lam)
    except SubcriticalRate:
        return 0.0
