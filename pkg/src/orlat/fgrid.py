"""Extinction profile F_d(s) of the weighted branching process on the d-ary tree.

F_d is the minimal fixed point of

    Phi(F)(s) = E_Y[ (E_rho[ F(rho) (1 - exp(-lam s rho Y / d)) + exp(-lam s rho Y / d) ])^d ],

Y ~ Exp(1).  Iterating Phi from F = 0 increases monotonically to F_d.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import roots_laguerre

from .errors import BadGrid, NoConvergence, OutOfSupport
from .meanfield import solve_theta
from .weights import WeightSpec, expect

DEFAULT_GRID = 129
DEFAULT_TOL = 1e-10
MAX_ITER = 1_000_000
_MONOTONE_SLACK = 1e-13
_RHO_ORDER = 6
_MIN_LAGUERRE = 16
_MAX_LAGUERRE = 1024


@dataclass(frozen=True)
class FGrid:
    d: int
    lam: float
    s_nodes: np.ndarray
    values: np.ndarray
    iterations: int
    sup_residual: float
    laguerre_nodes: int
    tol: float

    @property
    def h_grid(self) -> float:
        return float(self.s_nodes[1] - self.s_nodes[0])

    @property
    def bound_M(self) -> float:
        return float(self.s_nodes[-1])

    def max_slope(self) -> float:
        return float(np.max(np.abs(np.diff(self.values)) / np.diff(self.s_nodes)))


def laguerre_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Laguerre nodes/weights for E f(Y), Y ~ Exp(1)."""
    x, w = roots_laguerre(n)
    return x, w


class _PhiOperator:
    def __init__(self, spec: WeightSpec, lam: float, d: int, s_nodes: np.ndarray, n_lag: int):
        self.d = d
        self.s = s_nodes
        self.r, self.w = spec.quadrature(order=_RHO_ORDER, breakpoints=s_nodes)
        y, self.omega = laguerre_rule(n_lag)
        # one_minus_e[i, q, k] = 1 - exp(-lam s_i y_q r_k / d)
        c = (lam / d) * s_nodes[:, None, None] * y[None, :, None] * self.r[None, None, :]
        self.one_minus_e = -np.expm1(-c)

    def __call__(self, values: np.ndarray) -> np.ndarray:
        fr = np.interp(self.r, self.s, values)
        # 1 - H(s, y) computed directly to avoid cancellation at large d
        g = self.one_minus_e @ (self.w * (1.0 - fr))
        g = np.clip(g, 0.0, 1.0)
        with np.errstate(divide="ignore"):
            powered = np.exp(self.d * np.log1p(-g))
        return np.clip(powered @ self.omega, 0.0, 1.0)


def _check_args(d: int, grid_points: int, tol: float):
    if d < 1:
        raise BadGrid(f"d must be >= 1, got {d}")
    if grid_points < 33:
        raise BadGrid(f"grid_points must be >= 33, got {grid_points}")
    if tol < 1e-12:
        raise BadGrid(f"tol must be >= 1e-12, got {tol}")


def _choose_laguerre(spec, lam, d, s_nodes, probes, tol) -> int:
    n = _MIN_LAGUERRE
    while n < _MAX_LAGUERRE:
        coarse = _PhiOperator(spec, lam, d, s_nodes, n)
        fine = _PhiOperator(spec, lam, d, s_nodes, 2 * n)
        if all(np.max(np.abs(coarse(p) - fine(p))) < tol / 10 for p in probes):
            return n
        n *= 2
    return n


def solve_fgrid(
    spec: WeightSpec,
    lam: float,
    d: int,
    grid_points: int = DEFAULT_GRID,
    tol: float = DEFAULT_TOL,
    max_iter: int = MAX_ITER,
) -> FGrid:
    """Minimal fixed point of Phi on a uniform grid over [0, M]."""
    _check_args(d, grid_points, tol)
    s_nodes = np.linspace(0.0, spec.bound_M, grid_points)
    probes = [np.zeros(grid_points), 1.0 / (1.0 + lam * s_nodes)]
    n_lag = _choose_laguerre(spec, lam, d, s_nodes, probes, tol)

    while True:
        phi = _PhiOperator(spec, lam, d, s_nodes, n_lag)
        values = np.zeros(grid_points)
        for it in range(1, max_iter + 1):
            new = phi(values)
            if np.any(new < values - _MONOTONE_SLACK):
                raise NoConvergence(f"iterates lost monotonicity at iteration {it}")
            change = float(np.max(np.abs(new - values)))
            values = np.maximum(new, values)
            if change <= tol:
                break
        else:
            raise NoConvergence(f"no convergence after {max_iter} iterations")
        if n_lag >= _MAX_LAGUERRE:
            break
        finer = _PhiOperator(spec, lam, d, s_nodes, 2 * n_lag)
        if np.max(np.abs(finer(values) - phi(values))) < tol / 10:
            break
        n_lag *= 2

    residual = float(np.max(np.abs(phi(values) - values)))
    values = values.copy()
    values.setflags(write=False)
    s_nodes.setflags(write=False)
    return FGrid(d, float(lam), s_nodes, values, it, residual, n_lag, tol)


def eval_f(grid: FGrid, s: float) -> float:
    """Piecewise-linear interpolation of F_d."""
    if s < 0 or s > grid.bound_M:
        raise OutOfSupport(f"s={s} outside [0, {grid.bound_M}]")
    return float(np.interp(s, grid.s_nodes, grid.values))


def branching_survival_d(grid: FGrid, spec: WeightSpec) -> float:
    """1 - E F_d(rho): survival probability of the tree process with a random root."""
    f = lambda r: np.interp(r, grid.s_nodes, grid.values)  # noqa: E731
    return 1.0 - expect(spec, f, breakpoints=grid.s_nodes)


def limit_profile(spec: WeightSpec, lam: float) -> Callable[[float], float]:
    """s -> 1 / (1 + lam s theta), the d -> infinity extinction profile."""
    theta = solve_theta(spec, lam).theta

    def profile(s):
        return 1.0 / (1.0 + lam * np.asarray(s, dtype=float) * theta)

    return profile


def sup_gap(grid: FGrid, spec: WeightSpec) -> float:
    profile = limit_profile(spec, grid.lam)
    return float(np.max(np.abs(grid.values - profile(grid.s_nodes))))
