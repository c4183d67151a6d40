"""Five-pass LWE identification with a scalar blind (soundness error (q+1)/2q).

Public key (A, Aperp, y, b, p): Aperp is the left annihilator of A
(Aperp A = 0) and y = Aperp e is the syndrome of the error.  Secret (s, e).

One round::

    c1 = com(gamma || Sigma || Aperp u; r1)
    c2 = com(pi(u) || pi(e); r2)           -- c1, c2 -->
                                           <--  alpha --
    beta = pi(u + alpha e)                 --  beta   -->
                                           <--   ch   --
    ch=1: r1, pi   /   ch=2: r2, pi(e)     -- opening -->  check
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .commit import commit, verify_opening
from .fqcore import (NoSolutionError, Params, ResampleError, derive_seed,
                     expand_uniform, fixed_weight_vector, left_nullspace,
                     mat_vec_mul, serialize_vec, solve_particular,
                     uniform_below, vec_weight)
from .isometry import Isometry, iso_apply, iso_apply_inverse, iso_from_seeds
from .protocol import (ACCEPT, CollisionReport, RewindBudgetExceeded, Verdict,
                       reject, sample_lwe)

CHALLENGES = (1, 2)


@dataclass(frozen=True, eq=False)
class CvePublicKey:
    params: Params
    A: np.ndarray
    Aperp: np.ndarray
    y: np.ndarray
    b: np.ndarray
    p: int


@dataclass(frozen=True, eq=False)
class CveSecretKey:
    s: np.ndarray
    e: np.ndarray


def cve_keypair(A, s, e, params: Params) -> tuple[CvePublicKey, CveSecretKey]:
    q = params.q
    A = np.asarray(A, dtype=np.int64) % q
    s = np.asarray(s, dtype=np.int64) % q
    e = np.asarray(e, dtype=np.int64) % q
    if A.shape != (params.n, params.m) or s.shape != (params.m,) or e.shape != (params.n,):
        raise ValueError("shapes do not match params")
    p = vec_weight(e)
    if not 0 < p < params.n:
        raise ResampleError(f"degenerate error weight {p}")
    Aperp = left_nullspace(A, q)
    b = (mat_vec_mul(A, s, q) + e) % q
    y = mat_vec_mul(Aperp, e, q)
    return CvePublicKey(params, A, Aperp, y, b, p), CveSecretKey(s, e)


def cve_keygen(params: Params, master_seed: bytes) -> tuple[CvePublicKey, CveSecretKey]:
    A, s, e = sample_lwe(params, master_seed, full_rank=True)
    return cve_keypair(A, s, e, params)


def c1_message(pi: Isometry, syndrome: np.ndarray) -> bytes:
    """gamma || Sigma || syndrome, 2 bytes per entry."""
    return pi.gamma_bytes() + pi.perm_bytes() + serialize_vec(syndrome)


def c2_message(first: np.ndarray, second: np.ndarray) -> bytes:
    return serialize_vec(first) + serialize_vec(second)


@lru_cache(maxsize=64)
def syndrome_preimage(pk: CvePublicKey) -> np.ndarray:
    """Fixed solution e' of Aperp e' = y (weight unconstrained)."""
    e = solve_particular(pk.Aperp, pk.y, pk.params.q)
    e.setflags(write=False)
    return e


# --- prover ----------------------------------------------------------------

@dataclass(eq=False)
class CveProverState:
    seed_gamma: bytes
    seed_perm: bytes
    r1: bytes
    r2: bytes
    u: np.ndarray
    pi: Isometry
    pi_u: np.ndarray
    pi_e: np.ndarray
    commitments: tuple[bytes, bytes]
    alpha: int | None = None


@dataclass(eq=False)
class CveResponse:
    """ch=1: r1 and pi as two seeds.  ch=2: r2 and z = pi(e)."""
    ch: int
    r1: bytes | None = None
    r2: bytes | None = None
    seed_gamma: bytes | None = None
    seed_perm: bytes | None = None
    z: np.ndarray | None = None


@dataclass(eq=False)
class CveRound:
    commitments: tuple[bytes, bytes]
    alpha: int
    beta: np.ndarray
    ch: int
    response: CveResponse
    verdict: Verdict | None = None


def round_seeds(round_seed: bytes, params: Params) -> dict[str, bytes]:
    sb = params.seed_bytes
    return {k: derive_seed(round_seed, k, sb) for k in ("u", "gamma", "perm", "r1", "r2")}


def cve_prover_commit(sk: CveSecretKey, pk: CvePublicKey, round_seed: bytes):
    """Returns (state, c1, c2)."""
    params = pk.params
    q = params.q
    sd = round_seeds(round_seed, params)
    u = expand_uniform(sd["u"], "vector", q, params.n)
    pi = iso_from_seeds(sd["gamma"], sd["perm"], params.n, q)
    c1 = commit(c1_message(pi, mat_vec_mul(pk.Aperp, u, q)), sd["r1"], params)
    pi_u, pi_e = iso_apply(pi, u), iso_apply(pi, sk.e)
    c2 = commit(c2_message(pi_u, pi_e), sd["r2"], params)
    state = CveProverState(sd["gamma"], sd["perm"], sd["r1"], sd["r2"], u, pi, pi_u, pi_e, (c1, c2))
    return state, c1, c2


def cve_prover_beta(state: CveProverState, alpha: int) -> np.ndarray:
    """beta = pi(u + alpha e), computed as pi(u) + alpha pi(e)."""
    q = state.pi.q
    if not 0 <= alpha < q:
        raise ValueError(f"alpha {alpha} out of range")
    state.alpha = alpha
    return (state.pi_u + alpha * state.pi_e) % q


def cve_prover_respond(state: CveProverState, ch: int) -> CveResponse:
    if state.alpha is None:
        raise ValueError("beta has not been sent yet")
    if ch == 1:
        return CveResponse(1, r1=state.r1, seed_gamma=state.seed_gamma, seed_perm=state.seed_perm)
    if ch == 2:
        return CveResponse(2, r2=state.r2, z=state.pi_e)
    raise ValueError(f"invalid challenge {ch!r}")


# --- verifier --------------------------------------------------------------

def cve_verifier_check(pk: CvePublicKey, commitments, alpha: int, beta: np.ndarray,
                       ch: int, resp: CveResponse) -> Verdict:
    try:
        return _cve_check(pk, commitments, alpha, beta, ch, resp)
    except Exception:
        return reject("malformed")


def _cve_check(pk, commitments, alpha, beta, ch, resp) -> Verdict:
    params = pk.params
    n, q, sb = params.n, params.q, params.seed_bytes
    c1, c2 = commitments
    if ch not in CHALLENGES or resp.ch != ch or not 0 <= int(alpha) < q:
        return reject("malformed")
    if not (isinstance(beta, np.ndarray) and beta.shape == (n,) and np.all((beta >= 0) & (beta < q))):
        return reject("malformed")
    if ch == 1:
        if not all(isinstance(x, bytes) and len(x) == sb for x in (resp.r1, resp.seed_gamma, resp.seed_perm)):
            return reject("malformed")
        pi = iso_from_seeds(resp.seed_gamma, resp.seed_perm, n, q)
        syndrome = (mat_vec_mul(pk.Aperp, iso_apply_inverse(pi, beta), q) - alpha * pk.y) % q
        if not verify_opening(c1, c1_message(pi, syndrome), resp.r1, params):
            return reject("commitment")
        return ACCEPT
    z = resp.z
    if not (isinstance(resp.r2, bytes) and len(resp.r2) == sb and isinstance(z, np.ndarray)
            and z.shape == (n,) and np.all((z >= 0) & (z < q))):
        return reject("malformed")
    if vec_weight(z) != pk.p:
        return reject("weight")
    if not verify_opening(c2, c2_message((beta - alpha * z) % q, z), resp.r2, params):
        return reject("commitment")
    return ACCEPT


def cve_run_round(pk, sk, round_seed: bytes, alpha: int, ch: int) -> CveRound:
    state, *coms = cve_prover_commit(sk, pk, round_seed)
    beta = cve_prover_beta(state, alpha)
    resp = cve_prover_respond(state, ch)
    return CveRound(tuple(coms), alpha, beta, ch, resp,
                    cve_verifier_check(pk, tuple(coms), alpha, beta, ch, resp))


# --- extractor -------------------------------------------------------------

def cve_extract(pk: CvePublicKey, t1: CveRound, t2: CveRound):
    """Recover e from accepted answers to both challenges on one commitment pair."""
    if (t1.ch, t2.ch) != (1, 2):
        raise ValueError("need transcripts for challenges 1 and 2 in order")
    if tuple(t1.commitments) != tuple(t2.commitments):
        raise ValueError("transcripts do not share commitments")
    for t in (t1, t2):
        if not cve_verifier_check(pk, t.commitments, t.alpha, t.beta, t.ch, t.response):
            raise ValueError(f"transcript for challenge {t.ch} does not verify")
    q = pk.params.q
    pi_a = iso_from_seeds(t1.response.seed_gamma, t1.response.seed_perm, pk.params.n, q)
    e = iso_apply_inverse(pi_a, t2.response.z)
    if vec_weight(e) == pk.p and np.array_equal(mat_vec_mul(pk.Aperp, e, q), pk.y):
        return e
    # each commitment is opened once here, so the broken one cannot be named
    return CollisionReport(None, detail="extracted vector misses the public syndrome")


# --- simulator -------------------------------------------------------------

def cve_simulate(pk: CvePublicKey, verifier_oracle, rounds: int, seed: bytes,
                 max_tries: int = 1000, perm_seed: bytes | None = None) -> list[CveRound]:
    """Secret-free transcripts via challenge guessing and rewinding.

    On guess 1 the fake error solves Aperp e' = y (its weight is arbitrary);
    on guess 2 it has weight p but the wrong syndrome.
    """
    params = pk.params
    n, q, sb = params.n, params.q, params.seed_bytes
    e_syndrome = syndrome_preimage(pk)
    out = []
    for rnd in range(rounds):
        for attempt in range(max_tries):
            base = derive_seed(seed, f"sim/{rnd}/{attempt}", 32)
            sd = {k: derive_seed(base, k, sb) for k in ("guess", "u", "gamma", "perm", "r1", "r2", "e", "filler")}
            if perm_seed is not None:
                sd["perm"] = perm_seed
            guess = 1 + uniform_below(sd["guess"], 2)
            pi = iso_from_seeds(sd["gamma"], sd["perm"], n, q)
            u = expand_uniform(sd["u"], "vector", q, n)
            filler = derive_seed(sd["filler"], "digest", params.com_bytes)
            if guess == 1:
                e_fake = e_syndrome
                coms = (commit(c1_message(pi, mat_vec_mul(pk.Aperp, u, q)), sd["r1"], params), filler)
            else:
                e_fake = fixed_weight_vector(sd["e"], n, pk.p, q)
                coms = (filler, commit(c2_message(iso_apply(pi, u), iso_apply(pi, e_fake)), sd["r2"], params))
            alpha = verifier_oracle.cve_alpha(coms, q)
            beta = iso_apply(pi, (u + alpha * e_fake) % q)
            ch = verifier_oracle.cve_challenge(coms, beta)
            if ch != guess:
                continue
            if ch == 1:
                resp = CveResponse(1, r1=sd["r1"], seed_gamma=sd["gamma"], seed_perm=sd["perm"])
            else:
                resp = CveResponse(2, r2=sd["r2"], z=iso_apply(pi, e_fake))
            out.append(CveRound(coms, alpha, beta, ch, resp))
            break
        else:
            raise RewindBudgetExceeded(f"round {rnd}: no matching challenge after {max_tries} tries")
    return out


# --- cheating prover -------------------------------------------------------

class CveCheater:
    """Secret-free prover: answers ch=1 for every blind and ch=2 only when
    the blind equals its pre-guess, for success probability (q+1)/2q."""

    def __init__(self, pk: CvePublicKey, rng_seed: bytes):
        params = pk.params
        n, q, sb = params.n, params.q, params.seed_bytes
        self.pk = pk
        sd = round_seeds(rng_seed, params)
        self.seed_gamma, self.seed_perm = sd["gamma"], sd["perm"]
        self.r1, self.r2 = sd["r1"], sd["r2"]
        self.alpha_guess = expand_uniform(derive_seed(rng_seed, "alpha*", sb), "scalar", q)
        self.pi = iso_from_seeds(sd["gamma"], sd["perm"], n, q)
        self.u = expand_uniform(sd["u"], "vector", q, n)
        try:
            self.e_syn = syndrome_preimage(pk)
        except NoSolutionError:
            raise ValueError("public key syndrome is inconsistent") from None
        self.decoy = fixed_weight_vector(derive_seed(rng_seed, "decoy", sb), n, pk.p, q)
        pi, a = self.pi, self.alpha_guess
        first = (iso_apply(pi, (self.u + a * self.e_syn) % q) - a * iso_apply(pi, self.decoy)) % q
        self.commitments = (
            commit(c1_message(pi, mat_vec_mul(pk.Aperp, self.u, q)), self.r1, params),
            commit(c2_message(first, iso_apply(pi, self.decoy)), self.r2, params),
        )
        self.alpha = None

    def beta(self, alpha: int) -> np.ndarray:
        self.alpha = alpha
        return iso_apply(self.pi, (self.u + alpha * self.e_syn) % self.pi.q)

    def respond(self, ch: int) -> CveResponse:
        if ch == 1:
            return CveResponse(1, r1=self.r1, seed_gamma=self.seed_gamma, seed_perm=self.seed_perm)
        return CveResponse(2, r2=self.r2, z=iso_apply(self.pi, self.decoy))


def cve_cheat_round(pk: CvePublicKey, rng_seed: bytes) -> CveCheater:
    return CveCheater(pk, rng_seed)
