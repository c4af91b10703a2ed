import numpy as np
import pytest

from orlat.errors import SubcriticalRate
from orlat.meanfield import critical_rate, solve_theta, survival_limit, theta_equation
from orlat.weights import validate


def test_critical_rates(one, bernoulli, uniform):
    assert critical_rate(one) == 1.0
    assert critical_rate(bernoulli) == pytest.approx(2.0, abs=1e-12)
    assert critical_rate(uniform) == pytest.approx(3.0, abs=1e-9)


@pytest.mark.parametrize("lam", [1.1, 2.0, 5.0, 10.0])
def test_constant_closed_form(one, lam):
    sol = solve_theta(one, lam)
    assert abs(sol.theta - (lam - 1) / lam) < 1e-10
    assert abs(sol.limit_survival - (lam - 1) / lam) < 1e-10
    assert sol.residual <= 1e-10


def test_bernoulli_closed_form(bernoulli):
    sol = solve_theta(bernoulli, 4.0)
    assert abs(sol.theta - 0.25) < 1e-10
    assert abs(sol.limit_survival - 0.25) < 1e-10


def test_subcritical(one):
    with pytest.raises(SubcriticalRate):
        solve_theta(one, 1.0)
    with pytest.raises(SubcriticalRate):
        survival_limit(one, 0.5)


def test_near_critical_small(one):
    assert survival_limit(one, 1 + 1e-6) < 1e-5


def test_uniqueness_random_cases(rng):
    for _ in range(1000 // 10):
        n_atoms = rng.integers(1, 3)
        vals = rng.uniform(0.1, 2.0, n_atoms)
        probs = rng.dirichlet(np.ones(n_atoms + 1))
        spec = validate({
            "atoms": [[v, p] for v, p in zip(vals, probs[:-1])],
            "segments": [[0.0, 1.5, probs[-1]]],
        })
        lam = critical_rate(spec) * rng.uniform(1.05, 4.0)
        th = solve_theta(spec, lam).theta
        assert theta_equation(spec, lam, th - 1e-6) > 1 > theta_equation(spec, lam, th + 1e-6)


def test_limit_increasing_in_lambda(uniform):
    lams = np.linspace(3.2, 12, 12)
    vals = [survival_limit(uniform, l) for l in lams]
    assert np.all(np.diff(vals) > 0)
