import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from orlat.errors import (
    AllMassAtZero,
    DimensionMismatch,
    EmptyLaw,
    NegativeSupport,
    NonNormalized,
    WeightSpecError,
)
from orlat.weights import Environment, constant, expect, moments, sample, validate, vertex_weight


def test_constant_law(one):
    assert one.bound_M == 1.0
    assert expect(one, lambda r: r * r) == 1.0
    assert one.is_degenerate


def test_bernoulli_law(bernoulli):
    assert bernoulli.bound_M == 1.0
    assert expect(bernoulli, lambda r: r * r) == pytest.approx(0.5, abs=1e-14)


def test_uniform_second_moment(uniform):
    assert abs(expect(uniform, lambda r: r * r) - 1 / 3) < 1e-10


@pytest.mark.parametrize(
    "raw, exc",
    [
        ({"atoms": [[0.0, 1.0]]}, AllMassAtZero),
        ({"atoms": [[1.0, 0.7]]}, NonNormalized),
        ({"atoms": [[-1.0, 0.5], [1.0, 0.5]]}, NegativeSupport),
        ({"atoms": [], "segments": []}, EmptyLaw),
        ({"segments": [[1.0, 0.5, 1.0]]}, WeightSpecError),
        ({"atoms": [[1.0, -0.1], [2.0, 1.1]]}, NonNormalized),
    ],
)
def test_validate_errors(raw, exc):
    with pytest.raises(exc):
        validate(raw)


def test_validate_normalizes_and_bounds(mixed):
    total = sum(p for _, p in mixed.atoms) + sum(s[2] for s in mixed.segments)
    assert abs(total - 1.0) < 1e-12
    assert mixed.bound_M == 2.0
    assert mixed.epsilon_gap() == 0.5


def test_degenerate_segment_becomes_atom():
    spec = validate({"segments": [[0.5, 0.5, 1.0]]})
    assert spec.atoms == ((0.5, 1.0),)


def test_expect_unit_and_linearity(mixed, uniform, bernoulli):
    f = lambda r: np.sin(3 * r) + r ** 3  # noqa: E731
    g = lambda r: np.exp(-r)  # noqa: E731
    for spec in (mixed, uniform, bernoulli):
        assert abs(expect(spec, lambda r: np.ones_like(r)) - 1.0) < 1e-12
        lhs = expect(spec, lambda r: f(r) + g(r))
        assert abs(lhs - expect(spec, f) - expect(spec, g)) < 1e-10


def test_expect_matches_closed_form(mixed):
    # E[rho^2] = 0.7 * (2^3 - 0.5^3) / (3 * 1.5)
    assert abs(expect(mixed, lambda r: r * r) - 0.7 * (8 - 0.125) / 4.5) < 1e-12
    m1, m2 = moments(mixed)
    assert abs(m1 - 0.7 * 1.25) < 1e-12


def test_sample_support_and_frequency(bernoulli, mixed, rng):
    draws = sample(bernoulli, rng, 10**6)
    p = draws.mean()
    assert abs(p - 0.5) < 4 * math.sqrt(0.25 / 10**6)
    x = sample(mixed, rng, 10**5)
    assert x.min() >= 0 and x.max() <= mixed.bound_M
    assert np.all(constant(1.0).ppf(rng.random(100)) == 1.0)


def test_vertex_weight_deterministic(uniform):
    env = Environment(99, uniform, 5)
    v = (1, 0, 3, 0, 2)
    assert vertex_weight(env, v) == vertex_weight(env, v)
    assert Environment(99, uniform, 5).weight(v) == env.weight(v)
    assert Environment(100, uniform, 5).weight(v) != env.weight(v)


def test_vertex_weight_dimension_errors(uniform):
    env = Environment(1, uniform, 3)
    with pytest.raises(DimensionMismatch):
        vertex_weight(env, (1, 2))
    with pytest.raises(DimensionMismatch):
        vertex_weight(env, (1, -1, 0))


def _random_vertices(rng, n, d):
    return {tuple(v) for v in rng.integers(0, 50, size=(n, d)).tolist()}


def test_oracle_uniform_ks_and_independence(uniform, rng):
    d = 6
    env = Environment(2024, uniform, d)
    verts = sorted(_random_vertices(rng, 10**5, d))
    keys = np.array([env.key(v) for v in verts], dtype=np.uint64)
    w = env.weights_from_keys(keys[:, 0], keys[:, 1])
    assert stats.kstest(w, "uniform").pvalue > 0.01
    a_lane, b_lane = env.lanes
    w_next = env.weights_from_keys(keys[:, 0] + a_lane[0], keys[:, 1] + b_lane[0])
    assert abs(np.corrcoef(w, w_next)[0, 1]) < 0.01


def test_oracle_matches_iid_sampling(mixed, rng):
    d = 4
    env = Environment(7, mixed, d)
    verts = sorted(_random_vertices(rng, 20000, d))
    oracle = np.array([env.weight(v) for v in verts[:5000]])
    iid = sample(mixed, rng, 5000)
    assert stats.ks_2samp(oracle, iid).pvalue > 0.001


def test_oracle_sees_keys_consistently(mixed):
    env = Environment(3, mixed, 8)
    v = (0, 1, 0, 2, 0, 0, 1, 0)
    ka, kb = env.key(v)
    w = env.weights_from_keys(np.array([ka, ka]), np.array([kb, kb]))
    assert w[0] == w[1] == env.weight(v)


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.tuples(st.floats(0, 5), st.floats(0.01, 1)), min_size=1, max_size=3),
    st.lists(st.tuples(st.floats(0, 4), st.floats(0.01, 1), st.floats(0.01, 1)), max_size=2),
)
def test_random_specs_integrate_to_one(atoms, segs):
    total = sum(p for _, p in atoms) + sum(p for _, _, p in segs)
    raw = {
        "atoms": [[v, p / total] for v, p in atoms],
        "segments": [[lo, lo + w, p / total] for lo, w, p in segs],
    }
    try:
        spec = validate(raw)
    except AllMassAtZero:
        return
    assert abs(expect(spec, lambda r: np.ones_like(r)) - 1.0) < 1e-12
    x = spec.ppf(np.linspace(0, 1, 101))
    assert np.all(x >= 0) and np.all(x <= spec.bound_M)
