"""Three-pass LWE identification with challenges {1, 2, 3} (soundness error 2/3).

Public key (A, b, p) with b = A s + e and p = wt(e); secret key (s, e).

One round::

    prover                                   verifier
      c1 = com(pi; r1)
      c2 = com(pi(A(u + s)); r2)
      c3 = com(pi(A u + b); r3)    -- c1, c2, c3 -->
                                   <--   ch     --
      opening for ch               -- response  -->  check

Uniform values that the verifier must re-derive (u, gamma, Sigma) travel
as PRG seeds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np

from .commit import commit, verify_opening
from .fqcore import (Params, ResampleError, derive_seed, expand_uniform,
                     fixed_weight_vector, mat_vec_mul, serialize_vec,
                     uniform_below, vec_weight)
from .isometry import Isometry, iso_apply, iso_apply_inverse, iso_from_seeds
from .protocol import (ACCEPT, CollisionReport, RewindBudgetExceeded, Verdict,
                       reject, sample_lwe)

CHALLENGES = (1, 2, 3)


@dataclass(frozen=True, eq=False)
class SternPublicKey:
    params: Params
    A: np.ndarray
    b: np.ndarray
    p: int


@dataclass(frozen=True, eq=False)
class SternSecretKey:
    s: np.ndarray
    e: np.ndarray


def stern_keypair(A, s, e, params: Params) -> tuple[SternPublicKey, SternSecretKey]:
    """Key pair from explicit (A, s, e)."""
    A = np.asarray(A, dtype=np.int64) % params.q
    s = np.asarray(s, dtype=np.int64) % params.q
    e = np.asarray(e, dtype=np.int64) % params.q
    if A.shape != (params.n, params.m) or s.shape != (params.m,) or e.shape != (params.n,):
        raise ValueError("shapes do not match params")
    p = vec_weight(e)
    if not 0 < p < params.n:
        raise ResampleError(f"degenerate error weight {p}")
    b = (mat_vec_mul(A, s, params.q) + e) % params.q
    return SternPublicKey(params, A, b, p), SternSecretKey(s, e)


def stern_keygen(params: Params, master_seed: bytes) -> tuple[SternPublicKey, SternSecretKey]:
    A, s, e = sample_lwe(params, master_seed)
    return stern_keypair(A, s, e, params)


# --- prover ----------------------------------------------------------------

@dataclass(eq=False)
class SternProverState:
    seed_u: bytes
    seed_gamma: bytes
    seed_perm: bytes
    r1: bytes
    r2: bytes
    r3: bytes
    u: np.ndarray
    pi: Isometry
    w: np.ndarray
    commitments: tuple[bytes, bytes, bytes]


@dataclass(eq=False)
class SternResponse:
    """Opening for one challenge.

    ch=1: r1, r2, v = u + s, pi (as seeds)
    ch=2: r2, r3, w = pi(A(u + s)), z = pi(e)
    ch=3: r1, r3, pi (as seeds), u (as seed)
    """
    ch: int
    r1: bytes | None = None
    r2: bytes | None = None
    r3: bytes | None = None
    seed_gamma: bytes | None = None
    seed_perm: bytes | None = None
    seed_u: bytes | None = None
    v: np.ndarray | None = None
    w: np.ndarray | None = None
    z: np.ndarray | None = None


@dataclass(eq=False)
class SternRound:
    """Decoded messages of one round plus the verifier's verdict."""
    commitments: tuple[bytes, bytes, bytes]
    ch: int
    response: SternResponse
    verdict: Verdict | None = None


def round_seeds(round_seed: bytes, params: Params) -> dict[str, bytes]:
    sb = params.seed_bytes
    return {k: derive_seed(round_seed, k, sb) for k in ("u", "gamma", "perm", "r1", "r2", "r3")}


def stern_prover_commit(sk: SternSecretKey, pk: SternPublicKey, round_seed: bytes):
    """Returns (state, c1, c2, c3)."""
    params = pk.params
    q = params.q
    seeds = round_seeds(round_seed, params)
    u = expand_uniform(seeds["u"], "vector", q, params.m)
    pi = iso_from_seeds(seeds["gamma"], seeds["perm"], params.n, q)
    Au = mat_vec_mul(pk.A, u, q)
    Av = mat_vec_mul(pk.A, (u + sk.s) % q, q)
    c1 = commit(pi.to_bytes(), seeds["r1"], params)
    w = iso_apply(pi, Av)
    c2 = commit(serialize_vec(w), seeds["r2"], params)
    c3 = commit(serialize_vec(iso_apply(pi, (Au + pk.b) % q)), seeds["r3"], params)
    state = SternProverState(seeds["u"], seeds["gamma"], seeds["perm"],
                             seeds["r1"], seeds["r2"], seeds["r3"], u, pi, w, (c1, c2, c3))
    return state, c1, c2, c3


def stern_prover_respond(state: SternProverState, ch: int, sk: SternSecretKey) -> SternResponse:
    q = state.pi.q
    if ch == 1:
        return SternResponse(1, r1=state.r1, r2=state.r2, seed_gamma=state.seed_gamma,
                             seed_perm=state.seed_perm, v=(state.u + sk.s) % q)
    if ch == 2:
        return SternResponse(2, r2=state.r2, r3=state.r3, w=state.w, z=iso_apply(state.pi, sk.e))
    if ch == 3:
        return SternResponse(3, r1=state.r1, r3=state.r3, seed_gamma=state.seed_gamma,
                             seed_perm=state.seed_perm, seed_u=state.seed_u)
    raise ValueError(f"invalid challenge {ch!r}")


# --- verifier --------------------------------------------------------------

def _seed_ok(x, params: Params) -> bool:
    return isinstance(x, (bytes, bytearray)) and len(x) == params.seed_bytes


def _vec_ok(x, length: int, q: int) -> bool:
    return (isinstance(x, np.ndarray) and x.shape == (length,)
            and bool(np.all((x >= 0) & (x < q))))


def stern_verifier_check(pk: SternPublicKey, commitments, ch: int, resp: SternResponse) -> Verdict:
    """Never raises; malformed input yields reject("malformed")."""
    try:
        return _stern_check(pk, commitments, ch, resp)
    except Exception:
        return reject("malformed")


def _stern_check(pk, commitments, ch, resp) -> Verdict:
    params = pk.params
    n, m, q = params.n, params.m, params.q
    c1, c2, c3 = commitments
    if ch not in CHALLENGES or resp.ch != ch:
        return reject("malformed")
    if ch == 1:
        if not (_seed_ok(resp.r1, params) and _seed_ok(resp.r2, params) and _seed_ok(resp.seed_gamma, params)
                and _seed_ok(resp.seed_perm, params) and _vec_ok(resp.v, m, q)):
            return reject("malformed")
        pi = iso_from_seeds(resp.seed_gamma, resp.seed_perm, n, q)
        if not verify_opening(c1, pi.to_bytes(), resp.r1, params):
            return reject("commitment")
        if not verify_opening(c2, serialize_vec(iso_apply(pi, mat_vec_mul(pk.A, resp.v, q))), resp.r2, params):
            return reject("commitment")
        return ACCEPT
    if ch == 2:
        if not (_seed_ok(resp.r2, params) and _seed_ok(resp.r3, params)
                and _vec_ok(resp.w, n, q) and _vec_ok(resp.z, n, q)):
            return reject("malformed")
        if vec_weight(resp.z) != pk.p:
            return reject("weight")
        if not verify_opening(c2, serialize_vec(resp.w), resp.r2, params):
            return reject("commitment")
        if not verify_opening(c3, serialize_vec((resp.w + resp.z) % q), resp.r3, params):
            return reject("commitment")
        return ACCEPT
    if not (_seed_ok(resp.r1, params) and _seed_ok(resp.r3, params) and _seed_ok(resp.seed_gamma, params)
            and _seed_ok(resp.seed_perm, params) and _seed_ok(resp.seed_u, params)):
        return reject("malformed")
    pi = iso_from_seeds(resp.seed_gamma, resp.seed_perm, n, q)
    u = expand_uniform(resp.seed_u, "vector", q, m)
    if not verify_opening(c1, pi.to_bytes(), resp.r1, params):
        return reject("commitment")
    if not verify_opening(c3, serialize_vec(iso_apply(pi, (mat_vec_mul(pk.A, u, q) + pk.b) % q)),
                          resp.r3, params):
        return reject("commitment")
    return ACCEPT


def stern_run_round(pk, sk, round_seed: bytes, ch: int) -> SternRound:
    """One honest round with a given challenge."""
    state, *coms = stern_prover_commit(sk, pk, round_seed)
    resp = stern_prover_respond(state, ch, sk)
    return SternRound(tuple(coms), ch, resp, stern_verifier_check(pk, tuple(coms), ch, resp))


# --- extractor -------------------------------------------------------------

def _stern_openings(pk, t: SternRound):
    """(commitment name, message, randomness) triples opened by a round."""
    params = pk.params
    q = params.q
    r = t.response
    if t.ch == 1:
        pi = iso_from_seeds(r.seed_gamma, r.seed_perm, params.n, q)
        return {"c1": (pi.to_bytes(), r.r1),
                "c2": (serialize_vec(iso_apply(pi, mat_vec_mul(pk.A, r.v, q))), r.r2)}
    if t.ch == 2:
        return {"c2": (serialize_vec(r.w), r.r2),
                "c3": (serialize_vec((r.w + r.z) % q), r.r3)}
    pi = iso_from_seeds(r.seed_gamma, r.seed_perm, params.n, q)
    u = expand_uniform(r.seed_u, "vector", q, params.m)
    return {"c1": (pi.to_bytes(), r.r1),
            "c3": (serialize_vec(iso_apply(pi, (mat_vec_mul(pk.A, u, q) + pk.b) % q)), r.r3)}


def stern_extract(pk: SternPublicKey, t1: SternRound, t2: SternRound, t3: SternRound):
    """Recover (s, e) from accepted answers to all three challenges on one
    commitment triple, or report the commitment that was opened two ways."""
    if (t1.ch, t2.ch, t3.ch) != (1, 2, 3):
        raise ValueError("need transcripts for challenges 1, 2, 3 in order")
    if not (tuple(t1.commitments) == tuple(t2.commitments) == tuple(t3.commitments)):
        raise ValueError("transcripts do not share commitments")
    for t in (t1, t2, t3):
        if not stern_verifier_check(pk, t.commitments, t.ch, t.response):
            raise ValueError(f"transcript for challenge {t.ch} does not verify")
    q = pk.params.q
    r1, r3 = t1.response, t3.response
    u_c = expand_uniform(r3.seed_u, "vector", q, pk.params.m)
    pi_c = iso_from_seeds(r3.seed_gamma, r3.seed_perm, pk.params.n, q)
    s = (r1.v - u_c) % q
    e = iso_apply_inverse(pi_c, t2.response.z)
    if np.array_equal((mat_vec_mul(pk.A, s, q) + e) % q, pk.b):
        return s, e
    opened = [_stern_openings(pk, t) for t in (t1, t2, t3)]
    for name in ("c1", "c2", "c3"):
        msgs = [o[name][0] for o in opened if name in o]
        if msgs[0] != msgs[1]:
            return CollisionReport(name, msgs[0], msgs[1], "two valid openings")
    # unreachable unless the commitment check itself is broken
    return CollisionReport(None, detail="equations inconsistent without a visible collision")


# --- simulator -------------------------------------------------------------

def stern_simulate(pk: SternPublicKey, verifier_oracle, rounds: int, seed: bytes,
                   max_tries: int = 1000, perm_seed: bytes | None = None) -> list[SternRound]:
    """Transcripts produced without the secret key, by guessing the challenge
    and rewinding the verifier on a wrong guess.

    ``perm_seed`` pins Sigma; only meant for negative controls.
    """
    params = pk.params
    n, m, q = params.n, params.m, params.q
    sb = params.seed_bytes
    out = []
    for rnd in range(rounds):
        for attempt in range(max_tries):
            base = derive_seed(seed, f"sim/{rnd}/{attempt}", 32)
            sd = {k: derive_seed(base, k, sb)
                  for k in ("guess", "u", "gamma", "perm", "r1", "r2", "r3", "v", "s", "e", "filler")}
            if perm_seed is not None:
                sd["perm"] = perm_seed
            guess = 1 + uniform_below(sd["guess"], 3)
            pi = iso_from_seeds(sd["gamma"], sd["perm"], n, q)
            filler = derive_seed(sd["filler"], "digest", params.com_bytes)
            if guess == 1:
                v = expand_uniform(sd["v"], "vector", q, m)
                c1 = commit(pi.to_bytes(), sd["r1"], params)
                c2 = commit(serialize_vec(iso_apply(pi, mat_vec_mul(pk.A, v, q))), sd["r2"], params)
                coms = (c1, c2, filler)
                resp = SternResponse(1, r1=sd["r1"], r2=sd["r2"], seed_gamma=sd["gamma"],
                                     seed_perm=sd["perm"], v=v)
            elif guess == 2:
                u = expand_uniform(sd["u"], "vector", q, m)
                s_fake = expand_uniform(sd["s"], "vector", q, m)
                e_fake = fixed_weight_vector(sd["e"], n, pk.p, q)
                w = iso_apply(pi, mat_vec_mul(pk.A, (u + s_fake) % q, q))
                z = iso_apply(pi, e_fake)
                c2 = commit(serialize_vec(w), sd["r2"], params)
                c3 = commit(serialize_vec((w + z) % q), sd["r3"], params)
                coms = (filler, c2, c3)
                resp = SternResponse(2, r2=sd["r2"], r3=sd["r3"], w=w, z=z)
            else:
                u = expand_uniform(sd["u"], "vector", q, m)
                c1 = commit(pi.to_bytes(), sd["r1"], params)
                c3 = commit(serialize_vec(iso_apply(pi, (mat_vec_mul(pk.A, u, q) + pk.b) % q)),
                            sd["r3"], params)
                coms = (c1, filler, c3)
                resp = SternResponse(3, r1=sd["r1"], r3=sd["r3"], seed_gamma=sd["gamma"],
                                     seed_perm=sd["perm"], seed_u=sd["u"])
            ch = verifier_oracle.stern_challenge(coms)
            if ch == guess:
                out.append(SternRound(coms, ch, resp))
                break
        else:
            raise RewindBudgetExceeded(f"round {rnd}: no matching challenge after {max_tries} tries")
    return out


# --- cheating prover -------------------------------------------------------

@dataclass(eq=False)
class SternCheater:
    """Prover without the secret that can answer exactly two challenges."""
    pk: SternPublicKey
    strategy: frozenset
    commitments: tuple[bytes, bytes, bytes]
    _answers: dict = field(repr=False, default_factory=dict)

    def respond(self, ch: int) -> SternResponse:
        return self._answers[ch]


def stern_cheat_round(pk: SternPublicKey, strategy, rng_seed: bytes) -> SternCheater:
    strategy = frozenset(strategy)
    if strategy not in ({1, 2}, {1, 3}, {2, 3}):
        raise ValueError(f"strategy must be a pair of challenges, got {set(strategy)}")
    params = pk.params
    n, m, q = params.n, params.m, params.q
    sd = round_seeds(rng_seed, params)
    sd["s"] = derive_seed(rng_seed, "fake-s", params.seed_bytes)
    sd["e"] = derive_seed(rng_seed, "fake-e", params.seed_bytes)
    u = expand_uniform(sd["u"], "vector", q, m)
    pi = iso_from_seeds(sd["gamma"], sd["perm"], n, q)
    s_fake = expand_uniform(sd["s"], "vector", q, m)
    e_fake = fixed_weight_vector(sd["e"], n, pk.p, q)

    v = (u + s_fake) % q
    piAv = iso_apply(pi, mat_vec_mul(pk.A, v, q))
    piAub = iso_apply(pi, (mat_vec_mul(pk.A, u, q) + pk.b) % q)
    pie = iso_apply(pi, e_fake)
    if strategy == {1, 3}:
        w, z, t = piAv, (piAub - piAv) % q, piAub
    elif strategy == {1, 2}:
        w, z, t = piAv, pie, (piAv + pie) % q
    else:
        w, z, t = (piAub - pie) % q, pie, piAub
    c1 = commit(pi.to_bytes(), sd["r1"], params)
    c2 = commit(serialize_vec(w), sd["r2"], params)
    c3 = commit(serialize_vec(t), sd["r3"], params)
    answers = {
        1: SternResponse(1, r1=sd["r1"], r2=sd["r2"], seed_gamma=sd["gamma"], seed_perm=sd["perm"], v=v),
        2: SternResponse(2, r2=sd["r2"], r3=sd["r3"], w=w, z=z),
        3: SternResponse(3, r1=sd["r1"], r3=sd["r3"], seed_gamma=sd["gamma"],
                         seed_perm=sd["perm"], seed_u=sd["u"]),
    }
    return SternCheater(pk, strategy, (c1, c2, c3), answers)
