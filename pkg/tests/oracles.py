"""Exact reference values used by the tests."""

from __future__ import annotations

from collections import defaultdict


def collision_dp(d: int, x, y, horizon: int) -> float:
    """P(some coincidence at a time n in [offset, horizon]) by exhaustive
    propagation of the difference walk, with the coincidence state absorbed.

    The first ``offset`` steps move only the walk from the lower-norm vertex;
    after that each step adds e_i - e_j with i, j uniform.
    """
    x, y = tuple(x), tuple(y)
    if sum(x) > sum(y):
        x, y = y, x
    offset = sum(y) - sum(x)
    dist = {tuple(a - b for a, b in zip(x, y)): 1.0}
    for _ in range(offset):
        nxt = defaultdict(float)
        for D, p in dist.items():
            for i in range(d):
                E = list(D)
                E[i] += 1
                nxt[tuple(E)] += p / d
        dist = nxt
    zero = (0,) * d
    hit = dist.pop(zero, 0.0)
    q = 1.0 / (d * d)
    for _ in range(offset, horizon):
        nxt = defaultdict(float)
        for D, p in dist.items():
            for i in range(d):
                for j in range(d):
                    if i == j:
                        nxt[D] += p * q
                        continue
                    E = list(D)
                    E[i] += 1
                    E[j] -= 1
                    nxt[tuple(E)] += p * q
        hit += nxt.pop(zero, 0.0)
        dist = nxt
    return hit
