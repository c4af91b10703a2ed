"""Per-replica random streams.

Every replica owns two streams derived from ``(master_seed, replica)``:
a Philox dynamics stream whose 128-bit key embeds the replica index
verbatim (so distinct replicas get distinct keys), and a 64-bit
environment seed for the quenched weight oracle.
"""

import numpy as np

from ._hash import mix64

_MASK64 = (1 << 64) - 1
DYNAMICS = 0
AUXILIARY = 1


def _u64(x: int) -> int:
    return int(x) & _MASK64


def replica_stream(master_seed: int, replica: int, purpose: int = DYNAMICS) -> np.random.Generator:
    if replica < 0 or replica >= 1 << 61:
        raise ValueError("replica index out of range")
    key = np.array([_u64(master_seed), (int(replica) << 2) | (purpose & 3)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def environment_seed(master_seed: int, replica: int) -> int:
    h = int(mix64(np.uint64(_u64(master_seed)) ^ np.uint64(0x6A09E667F3BCC908)))
    return int(mix64(np.uint64(_u64(h + _u64(replica) * 0x9E3779B97F4A7C15))))


def cell_seed(master_seed: int, *labels) -> int:
    """Seed for one (d, lambda, ...) cell of a sweep."""
    h = mix64(np.uint64(_u64(master_seed)))
    for lab in labels:
        h = mix64(h ^ np.uint64(_u64(hash_label(lab))))
    return int(h)


def hash_label(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label)
    if isinstance(label, float):
        return int(np.float64(label).view(np.uint64))
    acc = 0xCBF29CE484222325
    for byte in str(label).encode():
        acc = ((acc ^ byte) * 0x100000001B3) & _MASK64
    return acc
