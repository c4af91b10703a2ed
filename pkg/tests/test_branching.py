import numpy as np
import pytest

from orlat.branching import estimate_branching_survival, offspring_law, run_branching
from orlat.fgrid import branching_survival_d, solve_fgrid
from orlat.outcome import DIED


def test_zero_root_dies_at_one(one, mixed, rng):
    for spec in (one, mixed):
        for _ in range(20):
            out = run_branching(spec, 3.0, 5, 0.0, rng=rng).outcome
            assert out.code == DIED and out.generation == 1


def test_deterministic_seed(mixed):
    a = run_branching(mixed, 3.0, 6, None, rng=np.random.default_rng(5))
    b = run_branching(mixed, 3.0, 6, None, rng=np.random.default_rng(5))
    assert a.outcome == b.outcome and np.array_equal(a.sizes, b.sizes)


def test_subcritical_dies(one):
    est = estimate_branching_survival(one, 0.5, 5, horizon=500, n_runs=10_000, master_seed=1)
    assert est.died >= 0.999 * est.n_runs
    assert est.point <= 0.005


def test_offspring_law_mean():
    p = offspring_law(2.0, 5, 1.0)
    assert abs(p.sum() - 1) < 1e-12
    # E[#children] = d * c / (1 + c) with c = lam / d
    assert abs(np.dot(np.arange(6), p) - 5 * 0.4 / 1.4) < 1e-12


def test_aggregated_matches_individual(one):
    a = estimate_branching_survival(one, 2.0, 5, pop_cap=2000, n_runs=5000, master_seed=3, method="auto")
    b = estimate_branching_survival(one, 2.0, 5, pop_cap=2000, n_runs=5000, master_seed=4, method="individual")
    assert abs(a.point - b.point) <= np.hypot(a.width, b.width)


@pytest.mark.parametrize("d, lam", [(3, 2.0), (5, 4.0)])
def test_agrees_with_fixed_point(one, d, lam):
    oracle = branching_survival_d(solve_fgrid(one, lam, d, grid_points=33), one)
    est = estimate_branching_survival(one, lam, d, n_runs=20_000, master_seed=11)
    assert est.ci_lo <= oracle <= est.ci_hi


def test_general_law_agrees_with_fixed_point(mixed):
    oracle = branching_survival_d(solve_fgrid(mixed, 3.0, 7, grid_points=65), mixed)
    est = estimate_branching_survival(mixed, 3.0, 7, pop_cap=2000, n_runs=5000, master_seed=2)
    assert est.ci_lo <= oracle <= est.ci_hi


def test_root_weight_monotone(mixed):
    pts = [
        estimate_branching_survival(mixed, 3.0, 7, s, pop_cap=2000, n_runs=4000, master_seed=9).point
        for s in (0.0, 0.5, 1.0, 2.0)
    ]
    assert pts[0] == 0.0
    assert all(b >= a - 0.04 for a, b in zip(pts, pts[1:]))


def test_generation_sizes_layered(one, rng):
    run = run_branching(one, 2.0, 5, None, horizon=30, pop_cap=10**4, rng=rng, method="individual")
    assert run.sizes[0] == 1
    assert len(run.sizes) == run.outcome.generation + 1
