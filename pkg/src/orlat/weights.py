"""Vertex-weight laws and the quenched environment oracle.

A weight law is a finite mixture of atoms and uniform segments on
``[0, M]``.  Expectations are computed exactly on atoms and by adaptive
Gauss-Legendre quadrature on segments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _hash
from .errors import (
    AllMassAtZero,
    DimensionMismatch,
    EmptyLaw,
    NegativeSupport,
    NonNormalized,
    QuadratureNonConvergence,
    WeightSpecError,
)

MASS_TOL = 1e-9
QUAD_TOL = 1e-10
_GL_ORDER = 20
_MAX_SPLITS = 4000

_gl_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1] (weights sum to 1)."""
    if order not in _gl_cache:
        x, w = np.polynomial.legendre.leggauss(order)
        _gl_cache[order] = ((x + 1.0) / 2.0, w / 2.0)
    return _gl_cache[order]


@dataclass(frozen=True)
class WeightSpec:
    atoms: tuple[tuple[float, float], ...]
    segments: tuple[tuple[float, float, float], ...]
    bound_M: float
    # flattened mixture for the inverse CDF: atoms first, then segments
    _cum: np.ndarray = field(repr=False, compare=False)
    _lo: np.ndarray = field(repr=False, compare=False)
    _hi: np.ndarray = field(repr=False, compare=False)

    @property
    def is_degenerate(self) -> bool:
        """True for a single-atom law (rho constant)."""
        return len(self.atoms) == 1 and not self.segments

    def epsilon_gap(self) -> float | None:
        """Smallest positive support point, i.e. the largest eps with
        ``P(rho = 0 or rho in [eps, M]) = 1``; None if it is 0."""
        pos = [v for v, _ in self.atoms if v > 0]
        pos += [lo for lo, hi, _ in self.segments if hi > 0]
        eps = min(pos)
        return eps if eps > 0 else None

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        if u.ndim == 0:
            return float(_hash.ppf(float(u), self._cum, self._lo, self._hi))
        flat = _hash.ppf_array(np.ascontiguousarray(u.ravel()), self._cum, self._lo, self._hi)
        return flat.reshape(u.shape)

    def quadrature(self, order: int = _GL_ORDER, breakpoints: np.ndarray | None = None):
        """Fixed nodes/weights representing the law.

        Segments are cut at ``breakpoints`` (if given) and each piece gets an
        ``order``-point Gauss-Legendre rule.
        """
        gx, gw = gauss_legendre(order)
        nodes = [v for v, _ in self.atoms]
        weights = [p for _, p in self.atoms]
        nodes_arr = [np.asarray(nodes, dtype=float)]
        weights_arr = [np.asarray(weights, dtype=float)]
        for lo, hi, p in self.segments:
            cuts = np.array([lo, hi])
            if breakpoints is not None:
                inner = breakpoints[(breakpoints > lo) & (breakpoints < hi)]
                cuts = np.concatenate([[lo], inner, [hi]])
            a, b = cuts[:-1], cuts[1:]
            width = b - a
            nodes_arr.append((a[:, None] + width[:, None] * gx[None, :]).ravel())
            weights_arr.append((p / (hi - lo) * width[:, None] * gw[None, :]).ravel())
        return np.concatenate(nodes_arr), np.concatenate(weights_arr)

    def to_dict(self) -> dict:
        return {
            "atoms": [list(a) for a in self.atoms],
            "segments": [list(s) for s in self.segments],
            "bound_M": self.bound_M,
        }


def validate(raw) -> WeightSpec:
    """Build a normalized :class:`WeightSpec` from a raw description.

    ``raw`` is a mapping with optional ``atoms`` (``[[v, p], ...]``) and
    ``segments`` (``[[lo, hi, p], ...]``) lists, or an existing WeightSpec.
    """
    if isinstance(raw, WeightSpec):
        return raw
    atoms_in = list(raw.get("atoms", []) or [])
    segs_in = list(raw.get("segments", []) or [])
    atoms: list[tuple[float, float]] = []
    segments: list[tuple[float, float, float]] = []
    for item in atoms_in:
        v, p = (float(t) for t in item)
        if p < 0:
            raise NonNormalized(f"negative probability {p} for atom {v}")
        if p > 0:
            atoms.append((v, p))
    for item in segs_in:
        lo, hi, p = (float(t) for t in item)
        if p < 0:
            raise NonNormalized(f"negative probability {p} for segment [{lo}, {hi}]")
        if hi < lo:
            raise WeightSpecError(f"segment [{lo}, {hi}] has hi < lo")
        if p == 0:
            continue
        if hi == lo:
            atoms.append((lo, p))
        else:
            segments.append((lo, hi, p))
    if not atoms and not segments:
        raise EmptyLaw("weight law has no atoms or segments with positive mass")
    values = [v for v, _ in atoms] + [s[0] for s in segments]
    if any(not math.isfinite(v) for v in values + [s[1] for s in segments]):
        raise WeightSpecError("non-finite support point")
    if min(values) < 0:
        raise NegativeSupport(f"support point {min(values)} < 0")
    mass = sum(p for _, p in atoms) + sum(s[2] for s in segments)
    if abs(mass - 1.0) > MASS_TOL:
        raise NonNormalized(f"total mass {mass!r} != 1")
    positive = sum(p for v, p in atoms if v > 0) + sum(s[2] for s in segments)
    if positive <= 0:
        raise AllMassAtZero("P(rho > 0) must be positive")
    atoms = [(v, p / mass) for v, p in atoms]
    segments = [(lo, hi, p / mass) for lo, hi, p in segments]
    bound = max([v for v, _ in atoms] + [s[1] for s in segments])

    lo = np.array([v for v, _ in atoms] + [s[0] for s in segments], dtype=float)
    hi = np.array([v for v, _ in atoms] + [s[1] for s in segments], dtype=float)
    cum = np.cumsum([p for _, p in atoms] + [s[2] for s in segments])
    cum[-1] = 1.0
    return WeightSpec(tuple(atoms), tuple(segments), float(bound), cum, lo, hi)


def constant(value: float = 1.0) -> WeightSpec:
    return validate({"atoms": [[value, 1.0]]})


def _apply(f: Callable, x: np.ndarray) -> np.ndarray:
    y = np.asarray(f(x), dtype=float)
    if y.shape != x.shape:
        y = np.array([float(f(float(t))) for t in x])
    return y


def _segment_integral(f: Callable, lo: float, hi: float, tol: float) -> float:
    """Mean of f over [lo, hi] by adaptive Gauss-Legendre bisection."""
    gx, gw = gauss_legendre(_GL_ORDER)

    def rule(a, b):
        return (b - a) * float(np.dot(gw, _apply(f, a + (b - a) * gx)))

    total = 0.0
    stack = [(lo, hi, rule(lo, hi))]
    splits = 0
    while stack:
        a, b, whole = stack.pop()
        m = 0.5 * (a + b)
        left, right = rule(a, m), rule(m, b)
        if abs(left + right - whole) <= tol * (b - a) / (hi - lo) or b - a < 1e-12 * (hi - lo):
            total += left + right
            continue
        splits += 1
        if splits > _MAX_SPLITS:
            raise QuadratureNonConvergence(f"adaptive quadrature on [{lo}, {hi}] exceeded budget")
        stack.append((a, m, left))
        stack.append((m, b, right))
    return total / (hi - lo)


def expect(spec: WeightSpec, f: Callable, *, tol: float = QUAD_TOL, breakpoints=None) -> float:
    """E f(rho).

    ``f`` should accept numpy arrays; scalar-only callables are also
    accepted.  ``breakpoints`` forces segment splits (use it for piecewise
    smooth ``f``).
    """
    total = 0.0
    if spec.atoms:
        v = np.array([a[0] for a in spec.atoms])
        p = np.array([a[1] for a in spec.atoms])
        total += float(np.dot(p, _apply(f, v)))
    for lo, hi, p in spec.segments:
        cuts = [lo, hi]
        if breakpoints is not None:
            bp = np.asarray(breakpoints, dtype=float)
            cuts = [lo, *bp[(bp > lo) & (bp < hi)].tolist(), hi]
        acc = 0.0
        for a, b in zip(cuts[:-1], cuts[1:]):
            acc += (b - a) * _segment_integral(f, a, b, tol)
        total += p * acc / (hi - lo)
    return total


def moments(spec: WeightSpec) -> tuple[float, float]:
    """(E rho, E rho^2)."""
    return expect(spec, lambda r: r), expect(spec, lambda r: r * r)


def sample(spec: WeightSpec, rng: np.random.Generator, size=None):
    """Independent draws of rho."""
    if size is None:
        return spec.ppf(rng.random())
    return spec.ppf(rng.random(size))


@dataclass(frozen=True)
class Environment:
    """A frozen realization of the i.i.d. weights on Z_+^d.

    Weights are never stored: ``weight(x)`` re-derives rho(x) from the
    seed and the coordinates each time.
    """

    seed: int
    spec: WeightSpec
    dimension: int

    def __post_init__(self):
        if self.dimension < 1:
            raise DimensionMismatch("dimension must be positive")
        object.__setattr__(self, "seed", int(self.seed) & 0xFFFFFFFFFFFFFFFF)

    @property
    def salts(self) -> tuple[np.uint64, np.uint64]:
        sa, sb = _hash.environment_salts(np.uint64(self.seed), self.dimension)
        return np.uint64(sa), np.uint64(sb)

    @property
    def lanes(self) -> tuple[np.ndarray, np.ndarray]:
        return _coord_lanes(self.dimension)

    def key(self, vertex: Sequence[int]) -> tuple[np.uint64, np.uint64]:
        coords = _check_vertex(vertex, self.dimension)
        a, b = self.lanes
        c = coords.astype(np.uint64)
        with np.errstate(over="ignore"):
            return np.uint64(np.sum(c * a, dtype=np.uint64)), np.uint64(np.sum(c * b, dtype=np.uint64))

    def weights_from_keys(self, ka: np.ndarray, kb: np.ndarray) -> np.ndarray:
        sa, sb = self.salts
        shape = np.shape(ka)
        u = _hash.key_uniforms(
            np.ascontiguousarray(np.ravel(ka), dtype=np.uint64),
            np.ascontiguousarray(np.ravel(kb), dtype=np.uint64),
            sa,
            sb,
        )
        return self.spec.ppf(u).reshape(shape)

    def weight(self, vertex: Sequence[int]) -> float:
        ka, kb = self.key(vertex)
        return float(self.weights_from_keys(np.array([ka]), np.array([kb]))[0])


_lane_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _coord_lanes(d: int) -> tuple[np.ndarray, np.ndarray]:
    if d not in _lane_cache:
        _lane_cache[d] = _hash.coordinate_constants(d)
    return _lane_cache[d]


def _check_vertex(vertex: Iterable[int], d: int) -> np.ndarray:
    coords = np.asarray(tuple(vertex), dtype=np.int64)
    if coords.ndim != 1 or coords.shape[0] != d:
        raise DimensionMismatch(f"vertex {tuple(vertex)} does not have {d} coordinates")
    if np.any(coords < 0):
        raise DimensionMismatch(f"vertex {tuple(vertex)} has a negative coordinate")
    return coords


def vertex_weight(env: Environment, vertex: Sequence[int]) -> float:
    """rho(x) in the quenched environment ``env``."""
    return env.weight(vertex)
