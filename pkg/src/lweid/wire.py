"""Framing, transcript files and the communication-cost model.

Frame: 1-byte type tag, 4-byte big-endian payload length, payload.
Field elements inside payloads are 2-byte little-endian; seeds and digests
are raw bytes of seed_len/8 and com_len/8.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil, log2

import numpy as np

from .cve import CveResponse, CveRound
from .fqcore import Params, bits_for, deserialize_vec, serialize_vec
from .protocol import Verdict
from .stern import SternResponse, SternRound

S1_COMMIT = 0x01
S1_CHALLENGE = 0x02
S1_RESPONSE = 0x03
S2_COMMIT = 0x13
S2_ALPHA = 0x14
S2_BETA = 0x15
S2_CHALLENGE = 0x16
S2_RESPONSE = 0x17
KEY = 0x20
RESULT = 0x30

TAG_NAMES = {
    S1_COMMIT: "S1_COMMIT", S1_CHALLENGE: "S1_CHALLENGE", S1_RESPONSE: "S1_RESPONSE",
    S2_COMMIT: "S2_COMMIT", S2_ALPHA: "S2_ALPHA", S2_BETA: "S2_BETA",
    S2_CHALLENGE: "S2_CHALLENGE", S2_RESPONSE: "S2_RESPONSE",
    KEY: "KEY", RESULT: "RESULT",
}

SCHEME_IDS = {"stern": 1, "cve": 2}
SCHEME_NAMES = {v: k for k, v in SCHEME_IDS.items()}
PASS_TAGS = {
    "stern": (S1_COMMIT, S1_CHALLENGE, S1_RESPONSE),
    "cve": (S2_COMMIT, S2_ALPHA, S2_BETA, S2_CHALLENGE, S2_RESPONSE),
}

MAGIC = b"LWID"
VERSION = 0x01
FILE_TRANSCRIPT = ord("T")
HEADER = 5
MAX_PAYLOAD = 1 << 24


class WireError(ValueError):
    pass


@dataclass(frozen=True)
class WireMessage:
    type_tag: int
    payload: bytes = b""

    @property
    def length(self) -> int:
        return len(self.payload)

    def __repr__(self):
        return f"WireMessage({TAG_NAMES.get(self.type_tag, hex(self.type_tag))}, {len(self.payload)} bytes)"


def encode_message(msg: WireMessage) -> bytes:
    if msg.type_tag not in TAG_NAMES:
        raise WireError(f"bad tag 0x{msg.type_tag:02x}")
    return struct.pack(">BI", msg.type_tag, len(msg.payload)) + bytes(msg.payload)


def decode_message(data: bytes) -> WireMessage:
    msg, used = decode_prefix(data)
    if used != len(data):
        raise WireError("trailing bytes")
    return msg


def decode_prefix(data: bytes, offset: int = 0) -> tuple[WireMessage, int]:
    """Decode one frame starting at ``offset``; returns (message, end offset)."""
    if len(data) - offset < HEADER:
        raise WireError("truncated")
    tag, length = struct.unpack_from(">BI", data, offset)
    if tag not in TAG_NAMES:
        raise WireError(f"bad tag 0x{tag:02x}")
    end = offset + HEADER + length
    if length > MAX_PAYLOAD or end > len(data):
        raise WireError("truncated")
    return WireMessage(tag, bytes(data[offset + HEADER:end])), end


def read_message(stream) -> WireMessage:
    """Read one frame from a binary file-like object (e.g. socket.makefile)."""
    head = _read_exact(stream, HEADER)
    tag, length = struct.unpack(">BI", head)
    if tag not in TAG_NAMES:
        raise WireError(f"bad tag 0x{tag:02x}")
    if length > MAX_PAYLOAD:
        raise WireError("frame too long")
    return WireMessage(tag, _read_exact(stream, length))


def _read_exact(stream, k: int) -> bytes:
    buf = b""
    while len(buf) < k:
        chunk = stream.read(k - len(buf))
        if not chunk:
            raise WireError("truncated")
        buf += chunk
    return buf


# --- verdict frames --------------------------------------------------------

def result_message(verdict: Verdict) -> WireMessage:
    return WireMessage(RESULT, bytes([1 if verdict.accepted else 0]) + verdict.reason.encode())


def parse_result(msg: WireMessage) -> Verdict:
    if msg.type_tag != RESULT or not msg.payload or msg.payload[0] > 1:
        raise WireError("malformed result frame")
    return Verdict(bool(msg.payload[0]), msg.payload[1:].decode("utf-8", "replace"))


# --- scheme payloads -------------------------------------------------------

def _take(buf: io.BytesIO, k: int) -> bytes:
    out = buf.read(k)
    if len(out) != k:
        raise WireError("payload too short")
    return out


def _vec(buf, length: int, q: int) -> np.ndarray:
    try:
        return deserialize_vec(_take(buf, 2 * length), length, q)
    except ValueError as exc:
        raise WireError(str(exc)) from None


def _done(buf):
    if buf.read(1):
        raise WireError("payload too long")


def encode_stern_response(r: SternResponse) -> bytes:
    if r.ch == 1:
        return r.r1 + r.r2 + r.seed_gamma + r.seed_perm + serialize_vec(r.v)
    if r.ch == 2:
        return r.r2 + r.r3 + serialize_vec(r.w) + serialize_vec(r.z)
    if r.ch == 3:
        return r.r1 + r.r3 + r.seed_gamma + r.seed_perm + r.seed_u
    raise WireError(f"bad challenge {r.ch}")


def decode_stern_response(payload: bytes, ch: int, params: Params) -> SternResponse:
    buf = io.BytesIO(payload)
    sb, q = params.seed_bytes, params.q
    if ch == 1:
        r = SternResponse(1, r1=_take(buf, sb), r2=_take(buf, sb), seed_gamma=_take(buf, sb),
                          seed_perm=_take(buf, sb), v=_vec(buf, params.m, q))
    elif ch == 2:
        r = SternResponse(2, r2=_take(buf, sb), r3=_take(buf, sb),
                          w=_vec(buf, params.n, q), z=_vec(buf, params.n, q))
    elif ch == 3:
        r = SternResponse(3, r1=_take(buf, sb), r3=_take(buf, sb), seed_gamma=_take(buf, sb),
                          seed_perm=_take(buf, sb), seed_u=_take(buf, sb))
    else:
        raise WireError(f"bad challenge {ch}")
    _done(buf)
    return r


def encode_cve_response(r: CveResponse) -> bytes:
    if r.ch == 1:
        return r.r1 + r.seed_gamma + r.seed_perm
    if r.ch == 2:
        return r.r2 + serialize_vec(r.z)
    raise WireError(f"bad challenge {r.ch}")


def decode_cve_response(payload: bytes, ch: int, params: Params) -> CveResponse:
    buf = io.BytesIO(payload)
    sb = params.seed_bytes
    if ch == 1:
        r = CveResponse(1, r1=_take(buf, sb), seed_gamma=_take(buf, sb), seed_perm=_take(buf, sb))
    elif ch == 2:
        r = CveResponse(2, r2=_take(buf, sb), z=_vec(buf, params.n, params.q))
    else:
        raise WireError(f"bad challenge {ch}")
    _done(buf)
    return r


def encode_commitments(tag: int, coms, params: Params) -> WireMessage:
    if any(len(c) != params.com_bytes for c in coms):
        raise WireError("commitment has wrong length")
    return WireMessage(tag, b"".join(coms))


def decode_commitments(msg: WireMessage, count: int, params: Params) -> tuple[bytes, ...]:
    cb = params.com_bytes
    if len(msg.payload) != count * cb:
        raise WireError("malformed commitments")
    return tuple(msg.payload[i * cb:(i + 1) * cb] for i in range(count))


def encode_challenge(tag: int, ch: int) -> WireMessage:
    return WireMessage(tag, bytes([ch]))


def decode_challenge(msg: WireMessage, allowed) -> int:
    if len(msg.payload) != 1 or msg.payload[0] not in allowed:
        raise WireError("malformed challenge")
    return msg.payload[0]


def encode_alpha(alpha: int) -> WireMessage:
    return WireMessage(S2_ALPHA, struct.pack("<H", alpha))


def decode_alpha(msg: WireMessage, q: int) -> int:
    if len(msg.payload) != 2:
        raise WireError("malformed alpha")
    (alpha,) = struct.unpack("<H", msg.payload)
    if alpha >= q:
        raise WireError("alpha out of range")
    return alpha


# --- transcripts -----------------------------------------------------------

@dataclass
class RoundTranscript:
    scheme: str
    messages: list[WireMessage] = field(default_factory=list)
    verdict: Verdict | None = None

    def __post_init__(self):
        if self.scheme not in PASS_TAGS:
            raise WireError(f"unknown scheme {self.scheme!r}")
        tags = tuple(m.type_tag for m in self.messages)
        if tags != PASS_TAGS[self.scheme]:
            raise WireError(f"message order {tags} does not match {self.scheme}")

    def payload_bits(self) -> int:
        return 8 * sum(len(m.payload) for m in self.messages)


def round_to_transcript(rnd, params: Params) -> RoundTranscript:
    if isinstance(rnd, SternRound):
        msgs = [encode_commitments(S1_COMMIT, rnd.commitments, params),
                encode_challenge(S1_CHALLENGE, rnd.ch),
                WireMessage(S1_RESPONSE, encode_stern_response(rnd.response))]
        return RoundTranscript("stern", msgs, rnd.verdict)
    if isinstance(rnd, CveRound):
        msgs = [encode_commitments(S2_COMMIT, rnd.commitments, params),
                encode_alpha(rnd.alpha),
                WireMessage(S2_BETA, serialize_vec(rnd.beta)),
                encode_challenge(S2_CHALLENGE, rnd.ch),
                WireMessage(S2_RESPONSE, encode_cve_response(rnd.response))]
        return RoundTranscript("cve", msgs, rnd.verdict)
    raise TypeError(f"not a round: {type(rnd).__name__}")


def transcript_to_round(t: RoundTranscript, params: Params):
    m = t.messages
    if t.scheme == "stern":
        ch = decode_challenge(m[1], (1, 2, 3))
        return SternRound(decode_commitments(m[0], 3, params), ch,
                          decode_stern_response(m[2].payload, ch, params), t.verdict)
    alpha = decode_alpha(m[1], params.q)
    beta = _vec(io.BytesIO(m[2].payload), params.n, params.q)
    if len(m[2].payload) != 2 * params.n:
        raise WireError("malformed beta")
    ch = decode_challenge(m[3], (1, 2))
    return CveRound(decode_commitments(m[0], 2, params), alpha, beta, ch,
                    decode_cve_response(m[4].payload, ch, params), t.verdict)


def write_transcripts(path, scheme: str, params: Params, transcripts) -> None:
    """File: magic, version, type byte, scheme id, params block, round count,
    then per round its frames followed by a RESULT frame."""
    out = bytearray(MAGIC + bytes([VERSION, FILE_TRANSCRIPT, SCHEME_IDS[scheme]]))
    out += params.to_bytes()
    out += struct.pack(">I", len(transcripts))
    for t in transcripts:
        if t.scheme != scheme:
            raise WireError("mixed schemes in one transcript file")
        if t.verdict is None:
            raise WireError("transcript has no verdict")
        for m in t.messages:
            out += encode_message(m)
        out += encode_message(result_message(t.verdict))
    with open(path, "wb") as fh:
        fh.write(bytes(out))


def read_transcripts(path) -> tuple[str, Params, list[RoundTranscript]]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise WireError("bad magic")
    if len(data) < 7 or data[4] != VERSION:
        raise WireError("version mismatch")
    if data[5] != FILE_TRANSCRIPT or data[6] not in SCHEME_NAMES:
        raise WireError("not a transcript file")
    scheme = SCHEME_NAMES[data[6]]
    off = 7
    pb = Params.block_size()
    if len(data) < off + pb + 4:
        raise WireError("truncated")
    try:
        params = Params.from_bytes(data[off:off + pb])
    except ValueError as exc:
        raise WireError(f"bad params block: {exc}") from None
    off += pb
    (count,) = struct.unpack_from(">I", data, off)
    off += 4
    rounds = []
    per_round = len(PASS_TAGS[scheme])
    for _ in range(count):
        msgs = []
        for _ in range(per_round):
            msg, off = decode_prefix(data, off)
            msgs.append(msg)
        res, off = decode_prefix(data, off)
        rounds.append(RoundTranscript(scheme, msgs, parse_result(res)))
    if off != len(data):
        raise WireError("trailing bytes")
    return scheme, params, rounds


# --- communication cost ----------------------------------------------------

@dataclass(frozen=True)
class CostBreakdown:
    commitments_bits: Fraction
    challenge_bits: Fraction
    answer_bits_avg: Fraction
    mode: str

    @property
    def total_bits_avg(self) -> Fraction:
        return self.commitments_bits + self.challenge_bits + self.answer_bits_avg

    def row(self) -> dict[str, str]:
        return {"mode": self.mode,
                "commitments": fmt_bits(self.commitments_bits),
                "challenge": fmt_bits(self.challenge_bits),
                "answer_avg": fmt_bits(self.answer_bits_avg),
                "total_avg": fmt_bits(self.total_bits_avg)}


def fmt_bits(x: Fraction) -> str:
    if x.denominator == 1:
        return str(x.numerator)
    return f"{float(x):.2f}"


def response_layout(scheme: str, ch: int, params: Params) -> tuple[int, int]:
    """(seeds, field elements) carried by the response to ``ch``.

    Mirrors encode_stern_response / encode_cve_response.
    """
    n, m = params.n, params.m
    layouts = {
        "stern": {1: (4, m), 2: (2, 2 * n), 3: (5, 0)},
        "cve": {1: (3, 0), 2: (1, n)},
    }
    return layouts[scheme][ch]


MODES = ("paper_formula", "counted", "wire")


def cost_model(params: Params, scheme: str, mode: str = "paper_formula") -> CostBreakdown:
    """Average bits per round.

    paper_formula: the published per-round expressions, evaluated exactly.
    counted: payload fields this implementation actually sends, with
        ceil(log2 q) bits per field element, averaged over uniform challenges.
    wire: same fields at their byte-aligned encodings (2 bytes per element,
        1 byte per challenge, 2 bytes per blind); frame headers excluded.
    """
    seed, com, lq = Fraction(params.seed_len), Fraction(params.com_len), params.log_q
    n, m = params.n, params.m
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if scheme not in ("stern", "cve"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if mode == "paper_formula":
        if scheme == "stern":
            return CostBreakdown(3 * com, Fraction(ceil(log2(3))),
                                 Fraction(10, 3) * seed + Fraction(2, 3) * (m + n) * lq, mode)
        return CostBreakdown(2 * com + n * lq, Fraction(ceil(log2(2)) + lq),
                             2 * seed + Fraction(n, 2) * lq, mode)
    elem = lq if mode == "counted" else 16
    chal = {"stern": bits_for(3), "cve": bits_for(2)}[scheme] if mode == "counted" else 8
    chs = (1, 2, 3) if scheme == "stern" else (1, 2)
    answer = Fraction(0)
    for ch in chs:
        seeds, elems = response_layout(scheme, ch, params)
        answer += seeds * seed + elems * elem
    answer /= len(chs)
    if scheme == "stern":
        return CostBreakdown(3 * com, Fraction(chal), answer, mode)
    alpha_bits = lq if mode == "counted" else 16
    return CostBreakdown(2 * com + n * elem, Fraction(chal + alpha_bits), answer, mode)
