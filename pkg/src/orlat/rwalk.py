"""Pairs of independent oriented random walks, their collision
decomposition, the second-moment functional R(x, y), and the survival
lower bound built from it.

Walk theta starts at x and walk nu at y with ||x|| <= ||y||; both take i.i.d.
uniform unit steps e_j.  With offset = ||y|| - ||x||, a coincidence at time
n >= offset means theta_n = nu_{n - offset}.  After the first ``offset``
steps of theta only the difference D = theta_n - nu_{n-offset} matters; it
moves by e_i - e_j with i, j independent and uniform.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numba as nb
import numpy as np

from .errors import DimensionTooSmall, InconsistentRecord, NormOrderViolated
from .stats import wilson_interval
from .weights import WeightSpec, moments

DEFAULT_HORIZON = 1000
MAX_COINCIDENCES = 512

_BLOCK = 4096

NO_COLLISION = "no-collision"
TAU0_LATE = "tau0-late"
TAU0_EQUALS_TAU1 = "tau0-equals-tau1"
TAU0_BEFORE_TAU1 = "tau0-before-tau1"


@nb.njit(cache=True)
def _walk_pair(rng, buf, state, d, diff0, offset, last, stop_at_first, times):
    """Coincidence times n in [offset, last] of one pair; returns the total
    count (only the first ``times.shape[0]`` are stored).

    Steps come from ``buf``, a block of uniform indices in [0, d^2) refilled
    in bulk; ``state[0]`` is the read position.  v // d and v % d are the
    steps of the two walks.
    """
    D = diff0.copy()
    dd = d * d
    nb_ = buf.shape[0]
    p = state[0]
    for _ in range(offset):
        if p == nb_:
            buf[:] = rng.integers(0, dd, nb_)
            p = 0
        D[buf[p] % d] += 1
        p += 1
    l1 = 0
    for k in range(d):
        l1 += abs(D[k])
    count = 0
    for n in range(offset, last + 1):
        if n > offset:
            if p == nb_:
                buf[:] = rng.integers(0, dd, nb_)
                p = 0
            v = buf[p]
            p += 1
            i = v // d
            j = v - i * d
            if i != j:
                l1 += abs(D[i] + 1) - abs(D[i])
                D[i] += 1
                l1 += abs(D[j] - 1) - abs(D[j])
                D[j] -= 1
        if l1 == 0:
            if count < times.shape[0]:
                times[count] = n
            count += 1
            if stop_at_first:
                break
        elif l1 > 2 * (last - n):
            # each step moves |D|_1 by at most 2
            break
    state[0] = p
    return count


@nb.njit(cache=True)
def _hit_batch(rng, d, diff0, offset, horizon, n_runs):
    times = np.empty(1, dtype=np.int64)
    buf = np.empty(_BLOCK, dtype=np.int64)
    state = np.full(1, _BLOCK, dtype=np.int64)
    hits = 0
    for _ in range(n_runs):
        if _walk_pair(rng, buf, state, d, diff0, offset, horizon, True, times) > 0:
            hits += 1
    return hits


@nb.njit(cache=True)
def _coincidence_batch(rng, d, diff0, offset, horizon, n_runs, cap):
    times = np.full((n_runs, cap), -1, dtype=np.int64)
    counts = np.zeros(n_runs, dtype=np.int64)
    buf = np.empty(_BLOCK, dtype=np.int64)
    state = np.full(1, _BLOCK, dtype=np.int64)
    for r in range(n_runs):
        counts[r] = _walk_pair(rng, buf, state, d, diff0, offset, horizon + 1, False, times[r])
    return times, counts


@dataclass(frozen=True)
class CollisionRecord:
    offset: int
    tau0: int | None  # None: no coincidence within the horizon
    taus: tuple[int, ...]
    kappas: tuple[int, ...]
    h: tuple[int, ...]
    f: tuple[int, ...]
    case_tag: str
    truncated: bool = False

    @property
    def T(self) -> int:
        return len(self.taus)


def decompose(times: Sequence[int], offset: int, horizon: int, overflow: bool = False) -> CollisionRecord:
    """Collision decomposition from the sorted coincidence times observed on
    [offset, horizon + 1] (the extra step decides whether a run continues)."""
    seen = set(int(t) for t in times)
    coinc = sorted(t for t in seen if t <= horizon)
    if not coinc:
        return CollisionRecord(offset, None, (), (), (), (), NO_COLLISION, overflow)
    tau0 = coinc[0]
    taus: list[int] = []
    kappas: list[int] = []
    truncated = overflow
    pos = tau0
    while True:
        tau = next((t for t in coinc if t >= pos and t + 1 in seen), None)
        if tau is None:
            break
        k = tau + 1
        while k + 1 in seen and k <= horizon:
            k += 1
        if k > horizon:
            # run still open when the horizon cuts it
            truncated = True
            k = horizon + 1
        taus.append(tau)
        kappas.append(k)
        pos = k + 1
    bounds = [tau0 - 1] + kappas
    ends = taus + [horizon + 1]
    f = []
    for l in range(len(taus) + 1):
        lo, hi = bounds[l], ends[l]
        f.append(sum(1 for t in coinc if lo < t < hi))
    if tau0 > offset:
        case = TAU0_LATE
    elif taus and taus[0] == tau0:
        case = TAU0_EQUALS_TAU1
    else:
        case = TAU0_BEFORE_TAU1
    h = tuple(k - t for t, k in zip(taus, kappas))
    return CollisionRecord(offset, tau0, tuple(taus), tuple(kappas), h, tuple(f), case, truncated)


def _prepare(d: int, x, y) -> tuple[np.ndarray, int]:
    if d < 4:
        raise DimensionTooSmall(f"walk collisions need d >= 4, got {d}")
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    if x.shape != (d,) or y.shape != (d,):
        raise ValueError(f"vertices must have {d} coordinates")
    if np.any(x < 0) or np.any(y < 0):
        raise ValueError("coordinates must be non-negative")
    offset = int(y.sum() - x.sum())
    if offset < 0:
        raise NormOrderViolated("need ||x|| <= ||y||; swap the pair")
    return x - y, offset


def simulate_pair(d: int, x, y, horizon: int = DEFAULT_HORIZON, rng: np.random.Generator | None = None) -> CollisionRecord:
    diff0, offset = _prepare(d, x, y)
    rng = rng if rng is not None else np.random.default_rng()
    times, counts = _coincidence_batch(rng, d, diff0, offset, horizon, 1, MAX_COINCIDENCES)
    count = int(counts[0])
    return decompose(times[0, : min(count, MAX_COINCIDENCES)], offset, horizon, count > MAX_COINCIDENCES)


def simulate_pairs(d: int, x, y, horizon: int, n_runs: int, rng: np.random.Generator) -> list[CollisionRecord]:
    diff0, offset = _prepare(d, x, y)
    times, counts = _coincidence_batch(rng, d, diff0, offset, horizon, n_runs, MAX_COINCIDENCES)
    out = []
    for row, c in zip(times, counts):
        out.append(decompose(row[: min(c, MAX_COINCIDENCES)], offset, horizon, c > MAX_COINCIDENCES))
    return out


class CollisionEstimate(NamedTuple):
    estimate: float
    ci: tuple[float, float]
    hits: int
    n_runs: int

    @property
    def se(self) -> float:
        p = self.estimate
        return math.sqrt(max(p * (1 - p), 0.0) / self.n_runs)


def collision_prob(
    d: int,
    x,
    y,
    horizon: int = DEFAULT_HORIZON,
    n_runs: int = 10_000,
    rng: np.random.Generator | None = None,
    confidence: float = 0.99,
) -> CollisionEstimate:
    """Frequency of a coincidence within ``horizon`` steps."""
    diff0, offset = _prepare(d, x, y)
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    rng = rng if rng is not None else np.random.default_rng()
    hits = int(_hit_batch(rng, d, diff0, offset, horizon, n_runs))
    return CollisionEstimate(hits / n_runs, wilson_interval(hits, n_runs, confidence), hits, n_runs)


@dataclass(frozen=True)
class RConstants:
    lam: float
    M: float
    mean_rho: float
    second_moment: float
    d: int

    def __post_init__(self):
        if min(self.lam, self.M, self.mean_rho, self.second_moment, self.d) <= 0:
            raise ValueError("R constants must all be positive")
        if self.second_moment > self.M ** 2 * (1 + 1e-12):
            raise ValueError("second moment exceeds M^2")

    @classmethod
    def from_spec(cls, spec: WeightSpec, lam: float, d: int) -> "RConstants":
        m1, m2 = moments(spec)
        return cls(float(lam), spec.bound_M, m1, m2, int(d))


def _exponents(record: CollisionRecord) -> tuple[int, int, int, bool]:
    _check(record)
    return record.T, sum(record.f), sum(record.h), record.case_tag != TAU0_LATE


def _check(record: CollisionRecord):
    if record.case_tag == NO_COLLISION:
        return
    taus, kappas = record.taus, record.kappas
    if len(taus) != len(kappas) or len(record.h) != len(taus) or len(record.f) != len(taus) + 1:
        raise InconsistentRecord("list lengths disagree with T")
    prev = None
    for t, k, h in zip(taus, kappas, record.h):
        if k - t != h or h < 1 or (prev is not None and t <= prev):
            raise InconsistentRecord("tau/kappa interleaving violated")
        prev = k
    if record.tau0 is None or record.tau0 < record.offset or (taus and taus[0] < record.tau0):
        raise InconsistentRecord("tau0 out of order")
    if any(v < 0 for v in record.f):
        raise InconsistentRecord("negative coincidence count")
    late = record.tau0 > record.offset
    tag = TAU0_LATE if late else (TAU0_EQUALS_TAU1 if taus and taus[0] == record.tau0 else TAU0_BEFORE_TAU1)
    if tag != record.case_tag:
        raise InconsistentRecord(f"case tag {record.case_tag!r} should be {tag!r}")


def log_r_value(record: CollisionRecord, k: RConstants) -> float:
    """log R(x, y); 0 for a collisionless record."""
    if record.case_tag == NO_COLLISION:
        _check(record)
        return 0.0
    T, sf, sh, aligned = _exponents(record)
    e = 1 if aligned else 0
    growth = math.log1p(k.lam * k.M ** 2 / k.d)
    out = (
        (T + sf) * math.log(2.0)
        + (4 * T + 2 * sh + 4 * sf - e) * growth
        + (6 * T + 4 * sf - e) * math.log(k.M)
        - sh * math.log(k.lam * k.second_moment / k.d)
        - (3 * T + 2 * sf - e) * math.log(k.second_moment)
    )
    if aligned:
        out -= math.log(k.mean_rho)
    return out


def r_value(record: CollisionRecord, k: RConstants) -> float:
    """R(x, y), evaluated in log space."""
    if record.truncated:
        warnings.warn("R evaluated on a horizon-truncated record", RuntimeWarning, stacklevel=2)
    return math.exp(log_r_value(record, k))


def r_value_direct(record: CollisionRecord, k: RConstants) -> float:
    """Same quantity from plain powers; for small exponents only."""
    if record.case_tag == NO_COLLISION:
        return 1.0
    T, sf, sh, aligned = _exponents(record)
    e = 1 if aligned else 0
    num = 2.0 ** (T + sf) * (1 + k.lam * k.M ** 2 / k.d) ** (4 * T + 2 * sh + 4 * sf - e) * k.M ** (6 * T + 4 * sf - e)
    den = (k.lam * k.second_moment / k.d) ** sh * k.second_moment ** (3 * T + 2 * sf - e)
    if aligned:
        den *= k.mean_rho
    return num / den


@dataclass(frozen=True)
class LowerBound:
    value: float  # min(1, 1/mean)
    raw: float  # 1/mean before clipping
    clipped: bool
    mean_r: float
    pair_means: dict
    pair_ses: dict
    truncated_records: int

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "raw": self.raw,
            "clipped": self.clipped,
            "mean_r": self.mean_r,
            "pairs": [
                {"x": list(x), "y": list(y), "mean_r": self.pair_means[(x, y)], "se": self.pair_ses[(x, y)]}
                for (x, y) in self.pair_means
            ],
            "truncated_records": self.truncated_records,
        }

    @property
    def se(self) -> float:
        """Delta-method standard error of the unclipped bound."""
        n = len(self.pair_ses)
        se_mean = math.sqrt(sum(s * s for s in self.pair_ses.values())) / n
        return se_mean / self.mean_r ** 2


def pair_r_values(d: int, x, y, k: RConstants, horizon: int, n_runs: int, rng: np.random.Generator):
    """R over ``n_runs`` sampled walk pairs, plus the truncated-record count."""
    x, y = tuple(int(c) for c in x), tuple(int(c) for c in y)
    if sum(x) > sum(y):
        x, y = y, x
    records = simulate_pairs(d, x, y, horizon, n_runs, rng)
    vals = np.array([math.exp(log_r_value(r, k)) for r in records])
    return vals, sum(r.truncated for r in records), records


def survival_lower_bound(
    A,
    spec: WeightSpec,
    lam: float,
    d: int,
    horizon: int = DEFAULT_HORIZON,
    n_runs: int = 10_000,
    rng: np.random.Generator | None = None,
    records: list | None = None,
) -> LowerBound:
    """min(1, 1 / mean over ordered pairs (x, y) in A x A of E R(x, y)).

    ``records`` collects (x, y, CollisionRecord, R) for every sampled pair.
    """
    verts = [tuple(int(c) for c in v) for v in A]
    if not verts:
        raise ValueError("A must be nonempty")
    rng = rng if rng is not None else np.random.default_rng()
    k = RConstants.from_spec(spec, lam, d)
    means, ses = {}, {}
    trunc = 0
    for x in verts:
        for y in verts:
            vals, t, recs = pair_r_values(d, x, y, k, horizon, n_runs, rng)
            if records is not None:
                records.extend((x, y, r, v) for r, v in zip(recs, vals.tolist()))
            means[(x, y)] = float(vals.mean())
            ses[(x, y)] = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
            trunc += t
    mean_r = sum(means.values()) / len(means)
    raw = 1.0 / mean_r
    return LowerBound(min(1.0, raw), raw, raw > 1.0, mean_r, means, ses, trunc)
