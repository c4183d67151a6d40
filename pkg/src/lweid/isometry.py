"""Hamming isometries: coordinate permutation combined with nonzero scaling.

Convention: ``perm[i]`` is the SOURCE index of output slot ``i``, so

    out[i] = gamma[perm[i]] * v[perm[i]]   (mod q)

``perm`` is stored 0-based; the byte serialization uses 1-based indices.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .fqcore import expand_uniform, serialize_vec


@dataclass(frozen=True, eq=False)
class Isometry:
    gamma: np.ndarray
    perm: np.ndarray
    q: int

    def __post_init__(self):
        n = self.gamma.shape[0]
        if self.perm.shape != (n,):
            raise ValueError("gamma and perm lengths differ")
        if np.any(self.gamma % self.q == 0):
            raise ValueError("gamma entries must be nonzero")
        if not np.array_equal(np.sort(self.perm), np.arange(n)):
            raise ValueError("perm is not a bijection")

    @property
    def n(self) -> int:
        return self.gamma.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Isometry):
            return NotImplemented
        return (self.q == other.q and np.array_equal(self.gamma, other.gamma)
                and np.array_equal(self.perm, other.perm))

    def to_bytes(self) -> bytes:
        return serialize_vec(self.gamma) + serialize_vec(self.perm + 1)

    def gamma_bytes(self) -> bytes:
        return serialize_vec(self.gamma)

    def perm_bytes(self) -> bytes:
        return serialize_vec(self.perm + 1)


def identity_isometry(n: int, q: int) -> Isometry:
    return Isometry(np.ones(n, dtype=np.int64), np.arange(n, dtype=np.int64), q)


def iso_from_seeds(seed_gamma: bytes, seed_perm: bytes, n: int, q: int) -> Isometry:
    gamma = expand_uniform(seed_gamma, "nonzero_vector", q, n)
    perm = expand_uniform(seed_perm, "permutation", q, n)
    return Isometry(gamma, perm, q)


def iso_apply(pi: Isometry, v: np.ndarray) -> np.ndarray:
    if v.shape != (pi.n,):
        raise ValueError(f"length mismatch: {v.shape[0]} != {pi.n}")
    return (pi.gamma[pi.perm] * v[pi.perm]) % pi.q


def iso_apply_inverse(pi: Isometry, w: np.ndarray) -> np.ndarray:
    if w.shape != (pi.n,):
        raise ValueError(f"length mismatch: {w.shape[0]} != {pi.n}")
    out = np.empty_like(w)
    out[pi.perm] = (_inverses(pi.q)[pi.gamma[pi.perm]] * w) % pi.q
    return out


@lru_cache(maxsize=16)
def _inverses(q: int) -> np.ndarray:
    inv = np.zeros(q, dtype=np.int64)
    for x in range(1, q):
        inv[x] = pow(x, -1, q)
    inv.setflags(write=False)
    return inv
