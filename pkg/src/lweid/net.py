"""Identification sessions over a stream socket.

Session layout (one TCP connection, rounds strictly sequential):

    server -> client   KEY     scheme id (1) | rounds (u32 BE) | params block
    per round          the scheme's 3 or 5 passes
    server -> client   RESULT  verdict byte | reason     (after every round)

The server stops at the first rejected round.
"""

from __future__ import annotations

import logging
import os
import secrets
import socket
import struct
from dataclasses import dataclass, field

from . import wire
from .cve import (CvePublicKey, cve_prover_beta, cve_prover_commit,
                  cve_prover_respond, cve_verifier_check)
from .fqcore import Params, serialize_vec
from .keyfile import scheme_of
from .protocol import Verdict, reject
from .stern import stern_prover_commit, stern_prover_respond, stern_verifier_check
from .wire import RoundTranscript, WireError, WireMessage

log = logging.getLogger("lweid.net")

TIMEOUT = 10.0


class ProtocolError(RuntimeError):
    pass


@dataclass
class SessionResult:
    verdict: Verdict
    transcripts: list[RoundTranscript] = field(default_factory=list)
    rounds_completed: int = 0


def parse_addr(addr: str) -> tuple[str, int]:
    host, sep, port = addr.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"expected ADDR:PORT, got {addr!r}")
    return host or "127.0.0.1", int(port)


class Channel:
    """Frame reader/writer over a socket, remembering everything exchanged."""

    def __init__(self, sock: socket.socket, timeout: float = TIMEOUT):
        sock.settimeout(timeout)
        self.sock = sock
        self.rfile = sock.makefile("rb")

    def send(self, msg: WireMessage) -> WireMessage:
        self.sock.sendall(wire.encode_message(msg))
        return msg

    def recv(self, expected_tag: int | None = None) -> WireMessage:
        msg = wire.read_message(self.rfile)
        if expected_tag is not None and msg.type_tag != expected_tag:
            raise WireError(f"unexpected frame {wire.TAG_NAMES[msg.type_tag]}")
        return msg

    def close(self):
        try:
            self.rfile.close()
        finally:
            self.sock.close()


def hello_message(scheme: str, rounds: int, params: Params) -> WireMessage:
    return WireMessage(wire.KEY, bytes([wire.SCHEME_IDS[scheme]]) + struct.pack(">I", rounds)
                       + params.to_bytes())


def parse_hello(msg: WireMessage) -> tuple[str, int, Params]:
    p = msg.payload
    if msg.type_tag != wire.KEY or len(p) != 5 + Params.block_size() or p[0] not in wire.SCHEME_NAMES:
        raise WireError("malformed hello")
    (rounds,) = struct.unpack(">I", p[1:5])
    return wire.SCHEME_NAMES[p[0]], rounds, Params.from_bytes(p[5:])


# --- verifier side ---------------------------------------------------------

def check_round(pk, t: RoundTranscript) -> Verdict:
    """Verifier decision for one recorded round (used live and on replay)."""
    try:
        rnd = wire.transcript_to_round(t, pk.params)
    except (WireError, ValueError):
        return reject("malformed")
    if isinstance(pk, CvePublicKey):
        return cve_verifier_check(pk, rnd.commitments, rnd.alpha, rnd.beta, rnd.ch, rnd.response)
    return stern_verifier_check(pk, rnd.commitments, rnd.ch, rnd.response)


def _serve_round(ch_: Channel, pk, scheme: str) -> list[WireMessage]:
    """Run the verifier passes of one round; returns the frames seen."""
    params = pk.params
    msgs = []
    if scheme == "stern":
        msgs.append(ch_.recv(wire.S1_COMMIT))
        msgs.append(ch_.send(wire.encode_challenge(wire.S1_CHALLENGE, 1 + secrets.randbelow(3))))
        msgs.append(ch_.recv(wire.S1_RESPONSE))
    else:
        msgs.append(ch_.recv(wire.S2_COMMIT))
        msgs.append(ch_.send(wire.encode_alpha(secrets.randbelow(params.q))))
        msgs.append(ch_.recv(wire.S2_BETA))
        msgs.append(ch_.send(wire.encode_challenge(wire.S2_CHALLENGE, 1 + secrets.randbelow(2))))
        msgs.append(ch_.recv(wire.S2_RESPONSE))
    return msgs


def serve_session(sock: socket.socket, pk, rounds: int, timeout: float = TIMEOUT) -> SessionResult:
    """Verifier end of one session."""
    scheme = scheme_of(pk)
    chan = Channel(sock, timeout)
    result = SessionResult(Verdict(True))
    try:
        chan.send(hello_message(scheme, rounds, pk.params))
        for i in range(rounds):
            try:
                msgs = _serve_round(chan, pk, scheme)
                t = RoundTranscript(scheme, msgs)
                verdict = check_round(pk, t)
                t.verdict = verdict
                result.transcripts.append(t)
            except WireError as exc:
                log.info("round %d: bad frame: %s", i, exc)
                verdict = reject("malformed")
            except (TimeoutError, socket.timeout):
                log.info("round %d: timed out", i)
                result.verdict = reject("timeout")
                return result
            log.debug("round %d: %s", i, verdict)
            try:
                chan.send(wire.result_message(verdict))
            except OSError as exc:
                # the verdict stands even if the peer has already hung up
                log.info("round %d: could not deliver result: %s", i, exc)
                if verdict:
                    result.verdict = reject("transport")
                    return result
            if not verdict:
                result.verdict = verdict
                return result
            result.rounds_completed += 1
        return result
    finally:
        chan.close()


# --- prover side -----------------------------------------------------------

def prove_session(sock: socket.socket, pk, sk, timeout: float = TIMEOUT,
                  round_seed=lambda: os.urandom(32)) -> SessionResult:
    """Prover end of one session.  Never sends s or e."""
    scheme = scheme_of(pk)
    params = pk.params
    chan = Channel(sock, timeout)
    result = SessionResult(Verdict(True))
    try:
        their_scheme, rounds, their_params = parse_hello(chan.recv(wire.KEY))
        if their_scheme != scheme or their_params != params:
            raise ProtocolError("server runs a different scheme or parameter set")
        for i in range(rounds):
            if scheme == "stern":
                state, *coms = stern_prover_commit(sk, pk, round_seed())
                chan.send(wire.encode_commitments(wire.S1_COMMIT, coms, params))
                ch = wire.decode_challenge(chan.recv(wire.S1_CHALLENGE), (1, 2, 3))
                resp = stern_prover_respond(state, ch, sk)
                chan.send(WireMessage(wire.S1_RESPONSE, wire.encode_stern_response(resp)))
            else:
                state, *coms = cve_prover_commit(sk, pk, round_seed())
                chan.send(wire.encode_commitments(wire.S2_COMMIT, coms, params))
                alpha = wire.decode_alpha(chan.recv(wire.S2_ALPHA), params.q)
                chan.send(WireMessage(wire.S2_BETA, serialize_vec(cve_prover_beta(state, alpha))))
                ch = wire.decode_challenge(chan.recv(wire.S2_CHALLENGE), (1, 2))
                resp = cve_prover_respond(state, ch)
                chan.send(WireMessage(wire.S2_RESPONSE, wire.encode_cve_response(resp)))
            verdict = wire.parse_result(chan.recv(wire.RESULT))
            if not verdict:
                result.verdict = verdict
                return result
            result.rounds_completed += 1
        return result
    finally:
        chan.close()


def replay(pk, transcripts) -> list[Verdict]:
    return [check_round(pk, t) for t in transcripts]
