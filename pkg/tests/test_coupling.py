import math

import numpy as np
import pytest

from orlat.coupling import (
    CAUSES,
    EXTRA_TREE_BIRTH,
    NONE,
    SHARED_TARGET_HIT,
    default_sigma,
    estimate_coupling,
    extinction_gap,
    run_coupled,
    shared_directions,
    target_steps,
)
from orlat.lattice import Budget


def test_default_sigma(one, mixed):
    sigma, degenerate = default_sigma(one, 2.0)
    assert sigma == pytest.approx(1 / (20 * math.log(2.0))) and not degenerate
    assert default_sigma(one, 0.5) == (1.0, True)
    assert default_sigma(mixed, 2.0)[0] == pytest.approx(1 / (20 * math.log(8.0)))


def test_default_target_is_zero_for_moderate_d(one):
    sigma, _ = default_sigma(one, 2.0)
    for d in (100, 1000, 10_000):
        assert target_steps(sigma, d) == 0
    assert target_steps(1.0, 100) == 4


def test_shared_directions_brute_force():
    d = 5
    rng = np.random.default_rng(4)
    a_lane = rng.integers(1, 2**62, d, dtype=np.uint64)
    # a random generation of norm-3 vertices
    verts = sorted({tuple(np.bincount(rng.integers(0, d, 3), minlength=d).tolist()) for _ in range(8)})
    dirs = [tuple(i for i in range(d) for _ in range(v[i])) for v in verts]
    keys = [int(sum(int(a_lane[i]) * v[i] for i in range(d)) & ((1 << 64) - 1)) for v in verts]
    q = shared_directions(keys, dirs, a_lane)
    for a, x in enumerate(verts):
        expect = set()
        for j in range(d):
            y = tuple(x[k] + (k == j) for k in range(d))
            for b, z in enumerate(verts):
                if b != a and all(y[k] >= z[k] for k in range(d)) and sum(y) - sum(z) == 1:
                    expect.add(j)
        assert q[a] == expect


def test_single_vertex_never_fails(one):
    # with |V_n| = 1 there is nothing to share, so the first step always succeeds
    rng = np.random.default_rng(0)
    for _ in range(200):
        run = run_coupled(one, 2.0, 50, rng=rng, steps=1)
        assert run.success
        assert run.lattice_sizes == run.tree_sizes


def test_sizes_agree_while_coupled(mixed):
    rng = np.random.default_rng(1)
    for _ in range(100):
        run = run_coupled(mixed, 2.0, 200, rng=rng, steps=4)
        assert run.failure_cause in CAUSES
        k = len(run.lattice_sizes) - (run.failure_cause != NONE)
        assert run.lattice_sizes[:k] == run.tree_sizes[:k]
        if run.failure_cause == NONE:
            assert run.success
        else:
            assert not run.success and run.success_through < 4


def test_failure_causes_occur(one):
    est = estimate_coupling(one, 3.0, 20, n_runs=1000, steps=4, master_seed=2)
    h = est.failure_histogram
    assert sum(h.values()) == 1000
    assert h[SHARED_TARGET_HIT] > 0 and h[EXTRA_TREE_BIRTH] > 0
    assert est.n_runs - est.successes == h[SHARED_TARGET_HIT] + h[EXTRA_TREE_BIRTH]


def test_success_increases_with_d(one):
    ests = [estimate_coupling(one, 2.0, d, n_runs=1500, steps=4, master_seed=d) for d in (30, 300, 3000)]
    for a, b in zip(ests, ests[1:]):
        assert b.p_success >= a.p_success - 0.5 * max(a.width, b.width)
    assert ests[-1].p_success > ests[0].p_success


def test_default_sigma_estimate_trivial(one):
    est = estimate_coupling(one, 2.0, 1000, n_runs=100)
    assert est.target_steps == 0 and est.successes == 100


def test_deterministic(mixed):
    a = estimate_coupling(mixed, 2.0, 100, n_runs=200, steps=3, master_seed=9)
    b = estimate_coupling(mixed, 2.0, 100, n_runs=200, steps=3, master_seed=9)
    assert a == b


def test_gap_zero_rate(one):
    g = extinction_gap(one, 1e-12, 50, n_runs=200, steps=2)
    assert g.beta_empty.point == 1.0 and g.v_empty.point == 1.0 and g.gap == 0.0


def test_gap_first_layer(one):
    lam, d, n = 2.0, 400, 6000
    g = extinction_gap(one, lam, d, n_runs=n, steps=1, budget=Budget(pop_cap=2000), master_seed=1)
    exact = 1 / (1 + lam)
    # limit as d grows: no child is reached before recovery
    for est in (g.beta_empty, g.v_empty):
        assert abs(est.point - exact) < est.ci_hi - est.ci_lo + 0.01
    assert g.gap <= g.ci_width


def test_gap_validates_d(one):
    with pytest.raises(ValueError):
        extinction_gap(one, 2.0, 1)
