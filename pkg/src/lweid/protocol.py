"""Pieces shared by both identification schemes."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .fqcore import (Params, ResampleError, derive_seed, expand_uniform, rank,
                     sample_error, serialize_vec, uniform_below, vec_weight)

MAX_RESAMPLE = 64


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    reason: str = "ok"

    def __bool__(self):
        return self.accepted


ACCEPT = Verdict(True)


def reject(reason: str) -> Verdict:
    return Verdict(False, reason)


@dataclass(frozen=True)
class CollisionReport:
    """A commitment opened to two different messages, both verifying.

    ``commitment`` is None when the transcripts do not pin down which
    commitment was broken.
    """
    commitment: str | None
    message_a: bytes = b""
    message_b: bytes = b""
    detail: str = ""


class RewindBudgetExceeded(RuntimeError):
    pass


class HashVerifier:
    """Honest-verifier oracle: challenges hashed from a nonce and the
    messages seen so far.  Counts its calls."""

    def __init__(self, nonce: bytes):
        self.nonce = bytes(nonce)
        self.calls = 0

    def draw(self, data: bytes, space: int) -> int:
        self.calls += 1
        return uniform_below(hashlib.sha3_256(self.nonce + data).digest(), space)

    def stern_challenge(self, commitments) -> int:
        return 1 + self.draw(b"S1" + b"".join(commitments), 3)

    def cve_alpha(self, commitments, q: int) -> int:
        return self.draw(b"S2a" + b"".join(commitments), q)

    def cve_challenge(self, commitments, beta: np.ndarray) -> int:
        return 1 + self.draw(b"S2c" + b"".join(commitments) + serialize_vec(beta), 2)


def sample_lwe(params: Params, master_seed: bytes, full_rank: bool = False):
    """Draw (A, s, e) from a master seed, redrawing degenerate parts."""
    sb = params.seed_bytes
    n, m, q = params.n, params.m, params.q
    for i in range(MAX_RESAMPLE):
        A = expand_uniform(derive_seed(master_seed, f"A/{i}", sb), "vector", q, n * m).reshape(n, m)
        if not full_rank or rank(A, q) == m:
            break
    else:
        raise ResampleError("could not draw a full-rank A")
    s = expand_uniform(derive_seed(master_seed, "s", sb), "vector", q, m)
    for i in range(MAX_RESAMPLE):
        e = sample_error(derive_seed(master_seed, f"e/{i}", sb), n, params)
        if 0 < vec_weight(e) < n:
            return A, s, e
    raise ResampleError("error vector keeps coming out with trivial weight")
