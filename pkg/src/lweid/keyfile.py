"""Binary key files.

Layout: "LWID", version, kind ('P' public / 'S' public+secret), scheme id,
params block, then field elements (2-byte LE):

    A (n*m), b (n), p (u16 LE)
    cve only: Aperp ((n-m)*n), y (n-m)
    'S' only: s (m), e (n)
"""

from __future__ import annotations

import io
import struct

import numpy as np

from .cve import CvePublicKey, CveSecretKey
from .fqcore import Params, deserialize_vec, mat_mul, mat_vec_mul, serialize_vec, vec_weight
from .stern import SternPublicKey, SternSecretKey
from .wire import MAGIC, SCHEME_IDS, SCHEME_NAMES, VERSION

KIND_PUBLIC = ord("P")
KIND_SECRET = ord("S")


class KeyFileError(ValueError):
    pass


def scheme_of(pk) -> str:
    return "cve" if isinstance(pk, CvePublicKey) else "stern"


def _encode(pk, sk=None) -> bytes:
    kind = KIND_SECRET if sk is not None else KIND_PUBLIC
    out = bytearray(MAGIC + bytes([VERSION, kind, SCHEME_IDS[scheme_of(pk)]]))
    out += pk.params.to_bytes()
    out += serialize_vec(pk.A.reshape(-1)) + serialize_vec(pk.b) + struct.pack("<H", pk.p)
    if isinstance(pk, CvePublicKey):
        out += serialize_vec(pk.Aperp.reshape(-1)) + serialize_vec(pk.y)
    if sk is not None:
        out += serialize_vec(sk.s) + serialize_vec(sk.e)
    return bytes(out)


def public_key_bytes(pk) -> bytes:
    return _encode(pk)


def save_keys(path_prefix: str, pk, sk) -> tuple[str, str]:
    """Write PREFIX.pk and PREFIX.sk."""
    pk_path, sk_path = f"{path_prefix}.pk", f"{path_prefix}.sk"
    with open(pk_path, "wb") as fh:
        fh.write(_encode(pk))
    with open(sk_path, "wb") as fh:
        fh.write(_encode(pk, sk))
    return pk_path, sk_path


def _decode(data: bytes):
    if data[:4] != MAGIC:
        raise KeyFileError("bad magic")
    if len(data) < 7 or data[4] != VERSION:
        raise KeyFileError("version mismatch")
    kind, sid = data[5], data[6]
    if kind not in (KIND_PUBLIC, KIND_SECRET) or sid not in SCHEME_NAMES:
        raise KeyFileError("not a key file")
    buf = io.BytesIO(data[7:])
    try:
        params = Params.from_bytes(buf.read(Params.block_size()))
    except (ValueError, struct.error) as exc:
        raise KeyFileError(f"bad params block: {exc}") from None
    n, m, q = params.n, params.m, params.q

    def vec(k):
        try:
            return deserialize_vec(buf.read(2 * k), k, q)
        except ValueError as exc:
            raise KeyFileError(f"corrupt key material: {exc}") from None

    A = vec(n * m).reshape(n, m)
    b = vec(n)
    raw = buf.read(2)
    if len(raw) != 2:
        raise KeyFileError("truncated")
    (p,) = struct.unpack("<H", raw)
    if SCHEME_NAMES[sid] == "cve":
        Aperp = vec((n - m) * n).reshape(n - m, n)
        y = vec(n - m)
        if np.any(mat_mul(Aperp, A, q)):
            raise KeyFileError("Aperp does not annihilate A")
        pk = CvePublicKey(params, A, Aperp, y, b, p)
    else:
        pk = SternPublicKey(params, A, b, p)
    sk = None
    if kind == KIND_SECRET:
        s, e = vec(m), vec(n)
        if not np.array_equal((mat_vec_mul(A, s, q) + e) % q, b) or vec_weight(e) != p:
            raise KeyFileError("secret key does not match public key")
        sk = (CveSecretKey if SCHEME_NAMES[sid] == "cve" else SternSecretKey)(s, e)
    if buf.read(1):
        raise KeyFileError("trailing bytes")
    return pk, sk


def load_public(path: str):
    """Public key from a .pk file; secret-bearing files are refused."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) > 5 and data[5] == KIND_SECRET:
        raise KeyFileError("refusing to load a secret key file as a public key")
    return _decode(data)[0]


def load_secret(path: str):
    """(pk, sk) from a .sk file; public-only files are refused."""
    with open(path, "rb") as fh:
        pk, sk = _decode(fh.read())
    if sk is None:
        raise KeyFileError("file holds no secret key")
    return pk, sk
