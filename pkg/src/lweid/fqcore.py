"""Arithmetic over Z_q: vectors, matrices, seeded sampling and the error sampler.

Vectors and matrices are plain numpy int64 arrays holding canonical residues
in [0, q).  The modulus travels alongside them (usually inside :class:`Params`).
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

Q_LIMIT = 1 << 15

# domain tags for expand_uniform
TAG_VECTOR = 0x01
TAG_NONZERO = 0x02
TAG_PERM = 0x03
TAG_SCALAR = 0x04
TAG_ERROR = 0x05
TAG_DERIVE = 0x10


class ResampleError(ValueError):
    """Raised when a sampled object is degenerate and must be redrawn."""


class NoSolutionError(ValueError):
    """Raised by solve_particular for an inconsistent system."""


def is_prime(x: int) -> bool:
    if x < 2:
        return False
    if x % 2 == 0:
        return x == 2
    return all(x % d for d in range(3, math.isqrt(x) + 1, 2))


def bits_for(x: int) -> int:
    """ceil(log2(x)) for x >= 1."""
    return (x - 1).bit_length()


@dataclass(frozen=True)
class Params:
    n: int = 128
    m: int = 64
    q: int = 257
    sigma: float = 3.0
    rounds: int = 28
    seed_len: int = 128      # bits
    com_len: int = 256       # bits

    def __post_init__(self):
        if not is_prime(self.q):
            raise ValueError(f"q={self.q} is not prime")
        if self.q >= Q_LIMIT:
            raise ValueError(f"q={self.q} too large (q < 2^15 required)")
        if not 0 < self.m < self.n:
            raise ValueError(f"need 0 < m < n, got m={self.m}, n={self.n}")
        if self.n >= 1 << 16:
            raise ValueError("n too large")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        for name in ("seed_len", "com_len"):
            v = getattr(self, name)
            if v <= 0 or v % 8:
                raise ValueError(f"{name} must be a positive multiple of 8")

    @property
    def seed_bytes(self) -> int:
        return self.seed_len // 8

    @property
    def com_bytes(self) -> int:
        return self.com_len // 8

    @property
    def log_q(self) -> int:
        return bits_for(self.q)

    _FMT = ">HHHdIHH"

    def to_bytes(self) -> bytes:
        return struct.pack(self._FMT, self.n, self.m, self.q, self.sigma,
                           self.rounds, self.seed_len, self.com_len)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Params":
        n, m, q, sigma, rounds, seed_len, com_len = struct.unpack(cls._FMT, data)
        return cls(n, m, q, sigma, rounds, seed_len, com_len)

    @classmethod
    def block_size(cls) -> int:
        return struct.calcsize(cls._FMT)


# --- vectors and matrices -------------------------------------------------

def fq_vector(elems, q: int) -> np.ndarray:
    v = np.asarray(elems, dtype=np.int64)
    if v.ndim != 1:
        raise ValueError("vector must be one-dimensional")
    return v % q


def fq_matrix(rows, q: int) -> np.ndarray:
    a = np.asarray(rows, dtype=np.int64)
    if a.ndim != 2:
        raise ValueError("matrix must be two-dimensional")
    return a % q


def mat_vec_mul(A: np.ndarray, v: np.ndarray, q: int) -> np.ndarray:
    if A.ndim != 2 or v.ndim != 1 or A.shape[1] != v.shape[0]:
        raise ValueError(f"dimension mismatch: {A.shape} x {v.shape}")
    return (A @ v) % q


def mat_mul(A: np.ndarray, B: np.ndarray, q: int) -> np.ndarray:
    if A.shape[1] != B.shape[0]:
        raise ValueError(f"dimension mismatch: {A.shape} x {B.shape}")
    return (A @ B) % q


def vec_weight(v: np.ndarray) -> int:
    return int(np.count_nonzero(v))


def serialize_vec(v: np.ndarray) -> bytes:
    """2-byte little-endian per entry."""
    return np.asarray(v, dtype="<u2").tobytes()


def deserialize_vec(data: bytes, length: int, q: int) -> np.ndarray:
    if len(data) != 2 * length:
        raise ValueError(f"expected {2 * length} bytes, got {len(data)}")
    v = np.frombuffer(data, dtype="<u2").astype(np.int64)
    if v.size and v.max() >= q:
        raise ValueError("entry out of range")
    return v


# --- Gaussian elimination -------------------------------------------------

def rref(M: np.ndarray, q: int) -> tuple[np.ndarray, list[int]]:
    """Reduced row-echelon form mod q and the pivot columns."""
    R = np.array(M, dtype=np.int64) % q
    rows, cols = R.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.nonzero(R[r:, c])[0]
        if nz.size == 0:
            continue
        p = r + nz[0]
        if p != r:
            R[[r, p]] = R[[p, r]]
        R[r] = (R[r] * pow(int(R[r, c]), -1, q)) % q
        col = R[:, c].copy()
        col[r] = 0
        R = (R - np.outer(col, R[r])) % q
        pivots.append(c)
        r += 1
    return R, pivots


def rank(M: np.ndarray, q: int) -> int:
    return len(rref(M, q)[1])


def left_nullspace(A: np.ndarray, q: int) -> np.ndarray:
    """Basis B of {x : x A = 0}, shape (n-m, n), in reduced row-echelon form.

    Raises ResampleError when A does not have full column rank.
    """
    n, m = A.shape
    R, pivots = rref(A.T, q)
    if len(pivots) != m:
        raise ResampleError("matrix is rank deficient")
    free = [c for c in range(n) if c not in set(pivots)]
    B = np.zeros((n - m, n), dtype=np.int64)
    for k, f in enumerate(free):
        B[k, f] = 1
        for i, pc in enumerate(pivots):
            B[k, pc] = (-R[i, f]) % q
    # kernel vectors built from free columns are not in RREF yet
    return rref(B, q)[0]


def solve_particular(M: np.ndarray, t: np.ndarray, q: int) -> np.ndarray:
    """Some x with M x = t; free variables are set to zero."""
    rows, cols = M.shape
    if t.shape != (rows,):
        raise ValueError("dimension mismatch")
    aug = np.concatenate([M % q, (t % q).reshape(-1, 1)], axis=1)
    R, pivots = rref(aug, q)
    if cols in pivots:
        raise NoSolutionError("system is inconsistent")
    x = np.zeros(cols, dtype=np.int64)
    for i, pc in enumerate(pivots):
        x[pc] = R[i, cols]
    return x


# --- seeded sampling -------------------------------------------------------

class XofStream:
    """Sequential reader over SHAKE-128(seed || tag)."""

    def __init__(self, seed: bytes, tag: int, hint: int = 256):
        self._xof = hashlib.shake_128(bytes(seed) + bytes([tag]))
        self._buf = self._xof.digest(hint)
        self._pos = 0

    def read(self, k: int) -> bytes:
        end = self._pos + k
        if end > len(self._buf):
            self._buf = self._xof.digest(max(2 * len(self._buf), end))
        out = self._buf[self._pos:end]
        self._pos = end
        return out


def derive_seed(seed: bytes, label: bytes | str, nbytes: int) -> bytes:
    """Domain-separated child seed."""
    if isinstance(label, str):
        label = label.encode()
    return hashlib.shake_128(bytes(seed) + bytes([TAG_DERIVE]) + label).digest(nbytes)


def _rejection(stream: XofStream, count: int, lo: int, q: int) -> np.ndarray:
    mask = (1 << bits_for(q)) - 1 if q > 1 else 0
    out = np.empty(0, dtype=np.int64)
    while out.size < count:
        need = count - out.size
        words = np.frombuffer(stream.read(4 * need + 16), dtype="<u2").astype(np.int64) & mask
        words = words[(words >= lo) & (words < q)]
        out = np.concatenate([out, words[:need]])
    return out


def _perm(stream: XofStream, n: int) -> np.ndarray:
    perm = list(range(n))
    words = []
    k = 0
    for i in range(n - 1, 0, -1):
        mask = (1 << (i.bit_length())) - 1
        while True:
            if k == len(words):
                words = np.frombuffer(stream.read(2 * n), dtype="<u2").tolist()
                k = 0
            j = words[k] & mask
            k += 1
            if j <= i:
                break
        perm[i], perm[j] = perm[j], perm[i]
    return np.array(perm, dtype=np.int64)


def expand_uniform(seed: bytes, kind: str, q: int, length: int = 1):
    """Deterministic expansion of a seed.

    ``kind`` is one of ``vector``, ``nonzero_vector``, ``permutation``
    (0-based image array of length ``length``) or ``scalar`` (an int).
    """
    if kind == "vector":
        return _rejection(XofStream(seed, TAG_VECTOR, 4 * length + 16), length, 0, q)
    if kind == "nonzero_vector":
        return _rejection(XofStream(seed, TAG_NONZERO, 4 * length + 16), length, 1, q)
    if kind == "permutation":
        return _perm(XofStream(seed, TAG_PERM, 4 * length), length)
    if kind == "scalar":
        return int(_rejection(XofStream(seed, TAG_SCALAR, 32), 1, 0, q)[0])
    raise ValueError(f"unknown domain {kind!r}")


def uniform_below(seed: bytes, bound: int) -> int:
    """Uniform integer in [0, bound) for any bound >= 1 (not only primes)."""
    return int(_rejection(XofStream(seed, TAG_SCALAR, 32), 1, 0, bound)[0])


@lru_cache(maxsize=32)
def _cdt(sigma: float) -> tuple[np.ndarray, np.ndarray]:
    tail = int(math.floor(12 * sigma))
    support = np.arange(-tail, tail + 1, dtype=np.int64)
    w = np.exp(-(support.astype(np.float64) ** 2) / (2 * sigma * sigma))
    cdf = np.cumsum(w)
    cdf /= cdf[-1]
    cdf[-1] = 1.0
    return support, cdf


def error_pmf(sigma: float) -> tuple[np.ndarray, np.ndarray]:
    """Support and probabilities of the truncated discrete Gaussian."""
    support, cdf = _cdt(sigma)
    return support, np.diff(np.concatenate([[0.0], cdf]))


def sample_error(seed: bytes, length: int, params: Params) -> np.ndarray:
    """Truncated discrete Gaussian (tail cut 12 sigma) via inverse CDF, mod q."""
    support, cdf = _cdt(params.sigma)
    if support.size == 1:
        return np.zeros(length, dtype=np.int64)
    raw = np.frombuffer(XofStream(seed, TAG_ERROR, 8 * length).read(8 * length), dtype="<u8")
    u = (raw >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
    idx = np.searchsorted(cdf, u, side="right")
    return support[np.minimum(idx, support.size - 1)] % params.q


def centered(v: np.ndarray, q: int) -> np.ndarray:
    """Representatives in (-q/2, q/2]."""
    v = np.asarray(v) % q
    return np.where(v > q // 2, v - q, v)


def fixed_weight_vector(seed: bytes, n: int, weight: int, q: int) -> np.ndarray:
    """Uniform vector of exact Hamming weight with uniform nonzero values."""
    if not 0 <= weight <= n:
        raise ValueError("weight out of range")
    positions = expand_uniform(derive_seed(seed, "support", 16), "permutation", q, n)[:weight]
    v = np.zeros(n, dtype=np.int64)
    v[positions] = expand_uniform(derive_seed(seed, "values", 16), "nonzero_vector", q, weight)
    return v
