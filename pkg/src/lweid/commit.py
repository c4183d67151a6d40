"""String commitments com(message; randomness).

The default scheme is SHA3-256 over a length-prefixed, domain-tagged
preimage, truncated to ``com_len`` bits.  Other schemes can be registered
under a name and selected with :func:`get_committer`.
"""

from __future__ import annotations

import hashlib
import hmac
import struct

DOMAIN_TAG = b"LWID-com-v1"


class Committer:
    name = "abstract"

    def __init__(self, com_len: int, seed_len: int):
        self.com_len = com_len
        self.seed_len = seed_len

    def commit(self, message: bytes, randomness: bytes) -> bytes:
        raise NotImplementedError

    def verify_opening(self, c: bytes, message: bytes, randomness: bytes) -> bool:
        try:
            return hmac.compare_digest(self.commit(message, randomness), bytes(c))
        except (TypeError, ValueError):
            return False


class HashCommitter(Committer):
    name = "sha3"

    def commit(self, message: bytes, randomness: bytes) -> bytes:
        if len(randomness) * 8 != self.seed_len:
            raise ValueError("randomness has wrong length")
        h = hashlib.sha3_256(DOMAIN_TAG)
        h.update(struct.pack(">I", len(message)))
        h.update(message)
        h.update(randomness)
        return h.digest()[: self.com_len // 8]


_REGISTRY: dict[str, type[Committer]] = {"sha3": HashCommitter}


def register_committer(cls: type[Committer]) -> type[Committer]:
    _REGISTRY[cls.name] = cls
    return cls


def get_committer(params, name: str = "sha3") -> Committer:
    if params.com_len > 256 and name == "sha3":
        raise ValueError("sha3 commitments are at most 256 bits")
    return _REGISTRY[name](params.com_len, params.seed_len)


def commit(message: bytes, randomness: bytes, params) -> bytes:
    return get_committer(params).commit(message, randomness)


def verify_opening(c: bytes, message: bytes, randomness: bytes, params) -> bool:
    return get_committer(params).verify_opening(c, message, randomness)
