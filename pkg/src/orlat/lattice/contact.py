"""Exact continuous-time contact process on the oriented lattice.

Infected vertices recover at rate 1; a healthy vertex z is infected at rate
``(lam / d) rho(z) sum_{x infected, x -> z} rho(x)``.  Recovered vertices
are susceptible again.  Only vertices that have been infected and their
out-neighbours are ever materialized ("slots").  Every slot carries its
current total rate (1 if infected, its infection rate otherwise) in a
Fenwick tree, so each event costs O(d log n).
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from .. import outcome as oc
from .._hash import key_uniform, mix64, ppf
from ..outcome import Outcome
from ..weights import Environment

DEFAULT_T_MAX = 300.0
DEFAULT_POP_CAP = 50_000
CHECK_EVERY = 10_000


@nb.njit(cache=True)
def _fw_add(tree, i, delta):
    n = tree.shape[0] - 1
    i += 1
    while i <= n:
        tree[i] += delta
        i += i & (-i)


@nb.njit(cache=True)
def _fw_find(tree, target, top):
    n = tree.shape[0] - 1
    pos = 0
    step = top
    while step > 0:
        nxt = pos + step
        if nxt <= n and tree[nxt] < target:
            pos = nxt
            target -= tree[nxt]
        step >>= 1
    return pos


@nb.njit(cache=True)
def _fw_build(tree, rates, n_slots):
    tree[:] = 0.0
    n = tree.shape[0] - 1
    for i in range(n_slots):
        tree[i + 1] += rates[i]
    for i in range(1, n + 1):
        j = i + (i & (-i))
        if j <= n:
            tree[j] += tree[i]


@nb.njit(cache=True)
def _grow(a, n, fill):
    b = np.empty(n, dtype=a.dtype)
    b[: a.shape[0]] = a
    b[a.shape[0]:] = fill
    return b


@nb.njit(cache=True)
def _simulate(
    rng, init_ka, init_kb, init_norm, a_lane, b_lane, sa, sb, cum, lo, hi,
    lam, d, t_max, pop_cap, stop_norm, check_every,
):
    n_init = init_ka.shape[0]
    # capacities double on demand; e_cap bounds ever-infected, cap bounds slots
    e_cap = min(max(pop_cap, n_init), max(n_init, 64)) + 1
    cap = n_init + e_cap * d + 1
    slots = nb.typed.Dict.empty(key_type=nb.types.uint64, value_type=nb.types.int64)
    s_ka = np.empty(cap, dtype=np.uint64)
    s_kb = np.empty(cap, dtype=np.uint64)
    s_norm = np.empty(cap, dtype=np.int64)
    s_rho = np.empty(cap, dtype=np.float64)
    s_inw = np.zeros(cap, dtype=np.float64)
    s_cnt = np.zeros(cap, dtype=np.int64)
    s_inf = np.zeros(cap, dtype=np.bool_)
    s_first = np.full(cap, -1.0)
    s_ord = np.full(cap, -1, dtype=np.int64)
    rates = np.zeros(cap, dtype=np.float64)
    tree = np.zeros(cap + 1, dtype=np.float64)
    top = 1
    while top * 2 <= cap:
        top *= 2
    children = np.empty((e_cap, d), dtype=np.int64)
    max_norm = 0
    for i in range(n_init):
        max_norm = max(max_norm, init_norm[i])
    ever_by_norm = np.zeros(max_norm + e_cap + 2, dtype=np.int64)
    c = lam / d

    n_slots = 0
    n_ever = 0
    n_inf = 0
    total = 0.0
    t = 0.0
    n_events = 0
    violations = 0
    max_err = 0.0
    digest = np.uint64(0)
    code = -1
    top_norm = 0

    for i in range(n_init):
        ka = init_ka[i]
        if ka in slots:
            z = slots[ka]
        else:
            z = n_slots
            slots[ka] = z
            s_ka[z] = ka
            s_kb[z] = init_kb[i]
            s_norm[z] = init_norm[i]
            s_rho[z] = ppf(key_uniform(ka, init_kb[i], sa, sb), cum, lo, hi)
            n_slots += 1
        if s_inf[z]:
            continue
        # infect z at time 0
        s_inf[z] = True
        n_inf += 1
        delta = 1.0 - rates[z]
        rates[z] = 1.0
        _fw_add(tree, z, delta)
        total += delta
        s_first[z] = 0.0
        o = n_ever
        s_ord[z] = o
        n_ever += 1
        ever_by_norm[s_norm[z]] += 1
        for j in range(d):
            cka = s_ka[z] + a_lane[j]
            if cka in slots:
                y = slots[cka]
            else:
                y = n_slots
                slots[cka] = y
                ckb = s_kb[z] + b_lane[j]
                s_ka[y] = cka
                s_kb[y] = ckb
                s_norm[y] = s_norm[z] + 1
                s_rho[y] = ppf(key_uniform(cka, ckb, sa, sb), cum, lo, hi)
                n_slots += 1
            children[o, j] = y
            s_inw[y] += s_rho[z]
            s_cnt[y] += 1
            if not s_inf[y]:
                new = c * s_rho[y] * s_inw[y]
                delta = new - rates[y]
                rates[y] = new
                _fw_add(tree, y, delta)
                total += delta

    if n_inf == 0:
        code = oc.DIED
    elif n_ever >= pop_cap:
        code = oc.POPULATION_CAP
    elif stop_norm >= 0 and max_norm >= stop_norm:
        code = oc.REACHED

    while code < 0:
        if n_ever + 1 >= e_cap or n_slots + d + 1 >= cap:
            e_new = min(2 * e_cap, max(pop_cap, n_init) + 1)
            if e_new > e_cap:
                grown = np.empty((e_new, d), dtype=np.int64)
                grown[:e_cap] = children
                children = grown
                ever_by_norm = _grow(ever_by_norm, max_norm + e_new + 2, 0)
                e_cap = e_new
            c_new = n_init + e_cap * d + 1
            if c_new > cap:
                s_ka = _grow(s_ka, c_new, np.uint64(0))
                s_kb = _grow(s_kb, c_new, np.uint64(0))
                s_norm = _grow(s_norm, c_new, 0)
                s_rho = _grow(s_rho, c_new, 0.0)
                s_inw = _grow(s_inw, c_new, 0.0)
                s_cnt = _grow(s_cnt, c_new, 0)
                s_inf = _grow(s_inf, c_new, False)
                s_first = _grow(s_first, c_new, -1.0)
                s_ord = _grow(s_ord, c_new, -1)
                rates = _grow(rates, c_new, 0.0)
                cap = c_new
                tree = np.zeros(cap + 1, dtype=np.float64)
                top = 1
                while top * 2 <= cap:
                    top *= 2
                _fw_build(tree, rates, n_slots)
        if total <= 0.0:
            code = oc.DIED
            break
        t += rng.standard_exponential() / total
        if t >= t_max:
            t = t_max
            code = oc.HORIZON
            break
        z = -1
        for _attempt in range(8):
            cand = _fw_find(tree, rng.random() * total, top)
            if cand < n_slots and rates[cand] > 0.0:
                z = cand
                break
            _fw_build(tree, rates, n_slots)
        if z < 0:
            code = oc.DIED
            break
        n_events += 1
        if s_inf[z]:
            # recovery
            digest = mix64(digest ^ (np.uint64(z) * np.uint64(2) + np.uint64(1)))
            s_inf[z] = False
            n_inf -= 1
            o = s_ord[z]
            for j in range(d):
                y = children[o, j]
                s_inw[y] -= s_rho[z]
                s_cnt[y] -= 1
                if s_cnt[y] == 0:
                    s_inw[y] = 0.0
                if not s_inf[y]:
                    new = c * s_rho[y] * s_inw[y]
                    delta = new - rates[y]
                    rates[y] = new
                    _fw_add(tree, y, delta)
                    total += delta
            new = c * s_rho[z] * s_inw[z]
            delta = new - rates[z]
            rates[z] = new
            _fw_add(tree, z, delta)
            total += delta
            if n_inf == 0:
                code = oc.DIED
        else:
            # infection
            digest = mix64(digest ^ (np.uint64(z) * np.uint64(2)))
            s_inf[z] = True
            n_inf += 1
            delta = 1.0 - rates[z]
            rates[z] = 1.0
            _fw_add(tree, z, delta)
            total += delta
            if s_first[z] < 0.0:
                s_first[z] = t
                # every currently infected in-neighbour was infected earlier
                for i in range(d):
                    wka = s_ka[z] - a_lane[i]
                    if wka in slots:
                        w = slots[wka]
                        if s_inf[w] and s_norm[w] == s_norm[z] - 1 and s_first[w] >= t:
                            violations += 1
                o = n_ever
                s_ord[z] = o
                n_ever += 1
                ever_by_norm[s_norm[z]] += 1
                if s_norm[z] > top_norm:
                    top_norm = s_norm[z]
                for j in range(d):
                    cka = s_ka[z] + a_lane[j]
                    if cka in slots:
                        y = slots[cka]
                    else:
                        y = n_slots
                        slots[cka] = y
                        ckb = s_kb[z] + b_lane[j]
                        s_ka[y] = cka
                        s_kb[y] = ckb
                        s_norm[y] = s_norm[z] + 1
                        s_rho[y] = ppf(key_uniform(cka, ckb, sa, sb), cum, lo, hi)
                        n_slots += 1
                    children[o, j] = y
            o = s_ord[z]
            for j in range(d):
                y = children[o, j]
                s_inw[y] += s_rho[z]
                s_cnt[y] += 1
                if not s_inf[y]:
                    new = c * s_rho[y] * s_inw[y]
                    delta = new - rates[y]
                    rates[y] = new
                    _fw_add(tree, y, delta)
                    total += delta
            if n_ever >= pop_cap:
                code = oc.POPULATION_CAP
            elif stop_norm >= 0 and s_norm[z] >= stop_norm:
                code = oc.REACHED

        if n_events % check_every == 0:
            # total rate from scratch: recoveries plus every infected-to-healthy edge
            fresh = 0.0
            for x in range(n_slots):
                if s_inf[x]:
                    fresh += 1.0
                    o = s_ord[x]
                    for j in range(d):
                        y = children[o, j]
                        if not s_inf[y]:
                            fresh += c * s_rho[x] * s_rho[y]
            err = abs(fresh - total) / max(fresh, 1e-300)
            if err > max_err:
                max_err = err
            for x in range(n_slots):
                if s_inf[x]:
                    rates[x] = 1.0
                elif s_cnt[x] == 0:
                    rates[x] = 0.0
                else:
                    rates[x] = c * s_rho[x] * s_inw[x]
            _fw_build(tree, rates, n_slots)
            total = fresh

    first_norm = ever_by_norm.shape[0]
    for i in range(n_init):
        first_norm = min(first_norm, init_norm[i])
    return (
        code, t, n_events, n_ever, ever_by_norm, max_err, violations, digest,
        s_ka[:n_slots].copy(), s_kb[:n_slots].copy(), s_rho[:n_slots].copy(),
        s_first[:n_slots].copy(), s_norm[:n_slots].copy(), top_norm,
    )


@dataclass(frozen=True)
class ContactRun:
    outcome: Outcome
    final_time: float
    ever_infected_by_norm: dict
    n_events: int
    max_rate_error: float
    order_violations: int
    digest: int
    slot_keys: tuple = ()  # (ka, kb, rho, first_time, norm) arrays, for audits

    @property
    def ever_infected(self) -> int:
        return sum(self.ever_infected_by_norm.values())

    def __eq__(self, other):
        if not isinstance(other, ContactRun):
            return NotImplemented
        return (
            self.outcome == other.outcome
            and self.final_time == other.final_time
            and self.ever_infected_by_norm == other.ever_infected_by_norm
            and self.n_events == other.n_events
            and self.digest == other.digest
        )

    __hash__ = None


def run_contact(
    env: Environment,
    lam: float,
    initial,
    t_max: float = DEFAULT_T_MAX,
    pop_cap: int = DEFAULT_POP_CAP,
    rng: np.random.Generator | None = None,
    stop_norm: int | None = None,
    keep_slots: bool = False,
) -> ContactRun:
    """Simulate until extinction, ``pop_cap`` ever-infected vertices, time
    ``t_max``, or (if ``stop_norm`` is set) the first infection at that norm.

    Unlike the SIR construction, ``initial`` may mix norms.
    """
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    rng = rng if rng is not None else np.random.default_rng()
    d = env.dimension
    verts = sorted({tuple(int(c) for c in v) for v in initial})
    keys = [env.key(v) for v in verts]
    ka = np.array([k[0] for k in keys], dtype=np.uint64)
    kb = np.array([k[1] for k in keys], dtype=np.uint64)
    norms = np.array([sum(v) for v in verts], dtype=np.int64)
    a_lane, b_lane = env.lanes
    sa, sb = env.salts
    spec = env.spec
    (code, t, n_events, n_ever, by_norm, max_err, violations, digest,
     s_ka, s_kb, s_rho, s_first, s_norm, top_norm) = _simulate(
        rng, ka, kb, norms, a_lane, b_lane, sa, sb, spec._cum, spec._lo, spec._hi,
        float(lam), int(d), float(t_max), int(pop_cap), -1 if stop_norm is None else int(stop_norm),
        CHECK_EVERY,
    )
    ever = {int(k): int(v) for k, v in enumerate(by_norm) if v}
    base = int(norms.min()) if len(norms) else 0
    peak = max(ever.values()) if ever else 0
    depth = (max(ever) - base) if ever else 0
    slots = (s_ka, s_kb, s_rho, s_first, s_norm) if keep_slots else ()
    return ContactRun(
        Outcome(int(code), depth, peak), float(t), ever, int(n_events), float(max_err),
        int(violations), int(digest), slots,
    )
