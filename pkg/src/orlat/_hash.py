"""Counter-based hashing used for quenched vertex weights.

A vertex of Z_+^d is identified by a pair of 64-bit lanes, each an additive
combination ``sum_j c_j * mix(j)`` of per-coordinate constants. Keys of
out-neighbours are obtained by adding one coordinate constant, so sparse
vertices in very high dimension never need a dense coordinate vector.
The lanes are folded together with the environment seed and the dimension
by a splitmix64 finalizer to produce a uniform variate.
"""

import numba as nb
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_LANE_A = np.uint64(0x243F6A8885A308D3)
_LANE_B = np.uint64(0x13198A2E03707344)
_SEED_A = np.uint64(0xA4093822299F31D0)
_SEED_B = np.uint64(0x082EFA98EC4E6C89)
_DIM = np.uint64(0x452821E638D01377)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@nb.njit(cache=True)
def mix64(z):
    z = np.uint64(z)
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@nb.njit(cache=True)
def coordinate_constants(d):
    """Per-coordinate lane constants ``(a_j, b_j)`` for ``j = 0..d-1``."""
    a = np.empty(d, dtype=np.uint64)
    b = np.empty(d, dtype=np.uint64)
    for j in range(d):
        base = np.uint64(j + 1) * _GOLDEN
        a[j] = mix64(base ^ _LANE_A)
        b[j] = mix64(base ^ _LANE_B)
    return a, b


@nb.njit(cache=True)
def environment_salts(seed, d):
    sa = mix64(np.uint64(seed) ^ _SEED_A ^ mix64(np.uint64(d) * _DIM))
    sb = mix64(np.uint64(seed) ^ _SEED_B ^ mix64(np.uint64(d) + _DIM))
    return sa, sb


@nb.njit(cache=True)
def key_uniform(ka, kb, sa, sb):
    """Uniform in [0, 1) determined by a 128-bit vertex key and salts."""
    h = mix64(mix64(ka ^ sa) ^ (kb + sb))
    return np.float64(h >> _S11) * _INV53


@nb.njit(cache=True)
def key_uniforms(ka, kb, sa, sb):
    out = np.empty(ka.shape[0], dtype=np.float64)
    for i in range(ka.shape[0]):
        out[i] = key_uniform(ka[i], kb[i], sa, sb)
    return out


@nb.njit(cache=True)
def ppf(u, cum, lo, hi):
    """Inverse CDF of an atom/uniform mixture; atoms have ``lo == hi``."""
    k = np.searchsorted(cum, u, side="right")
    if k >= cum.shape[0]:
        k = cum.shape[0] - 1
    start = cum[k - 1] if k > 0 else 0.0
    mass = cum[k] - start
    if lo[k] == hi[k] or mass <= 0.0:
        return lo[k]
    frac = (u - start) / mass
    if frac < 0.0:
        frac = 0.0
    elif frac > 1.0:
        frac = 1.0
    return lo[k] + frac * (hi[k] - lo[k])


@nb.njit(cache=True)
def ppf_array(u, cum, lo, hi):
    out = np.empty(u.shape[0], dtype=np.float64)
    for i in range(u.shape[0]):
        out[i] = ppf(u[i], cum, lo, hi)
    return out
