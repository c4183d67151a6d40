"""Statistical checks: completeness runs, cheating-prover soundness estimates,
and real-vs-simulated transcript comparisons.

The zero-knowledge comparison only looks at observable marginals (challenge
frequencies, value histograms, digest bytes, ...).  Agreement there is a
necessary condition for indistinguishability, not a proof of it.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import stats

from . import wire
from .cve import (CveRound, cve_cheat_round, cve_keygen, cve_prover_beta,
                  cve_prover_commit, cve_prover_respond, cve_simulate,
                  cve_verifier_check)
from .fqcore import Params, derive_seed, vec_weight
from .isometry import iso_from_seeds
from .protocol import HashVerifier
from .stern import (SternRound, stern_cheat_round, stern_keygen,
                    stern_prover_commit, stern_prover_respond, stern_simulate,
                    stern_verifier_check)

STRATEGIES = ({1, 2}, {1, 3}, {2, 3})


def keygen(scheme: str, params: Params, seed: bytes):
    if scheme == "stern":
        return stern_keygen(params, seed)
    if scheme == "cve":
        return cve_keygen(params, seed)
    raise ValueError(f"unknown scheme {scheme!r}")


def per_round_error(scheme: str, q: int) -> Fraction:
    return Fraction(2, 3) if scheme == "stern" else Fraction(q + 1, 2 * q)


def rounds_for(scheme: str, q: int, target: float) -> int:
    """Smallest r with (per-round error)^r <= target."""
    if not 0 < target < 1:
        raise ValueError("target soundness must lie in (0, 1)")
    err = per_round_error(scheme, q)
    r = max(1, math.ceil(math.log(target) / math.log(err)))
    bound = Fraction(target)
    while r > 1 and err ** (r - 1) <= bound:
        r -= 1
    while err ** r > bound:
        r += 1
    return r


# --- completeness ----------------------------------------------------------

@dataclass
class CompletenessReport:
    scheme: str
    trials: int
    rounds: int
    accepted: int = 0
    rounds_checked: int = 0
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.accepted == self.trials


def completeness_suite(scheme: str, params: Params, trials: int, seed: bytes = b"complete",
                       alpha_sweep: bool = False, fresh_keys: bool = True) -> CompletenessReport:
    """Full honest identifications; every one must be accepted.

    ``alpha_sweep`` (cve only) answers both challenges for every blind value
    in every round instead of sampling them.
    """
    rng = np.random.default_rng(int.from_bytes(derive_seed(seed, "rng", 8), "little"))
    report = CompletenessReport(scheme, trials, params.rounds)
    keys = None
    for trial in range(trials):
        if fresh_keys or keys is None:
            keys = keygen(scheme, params, derive_seed(seed, f"key/{trial}", 32))
        pk, sk = keys
        session_ok = True
        for rnd in range(params.rounds):
            round_seed = derive_seed(seed, f"round/{trial}/{rnd}", 32)
            if scheme == "stern":
                state, *coms = stern_prover_commit(sk, pk, round_seed)
                ch = int(rng.integers(1, 4))
                verdicts = [stern_verifier_check(pk, coms, ch, stern_prover_respond(state, ch, sk))]
            else:
                alphas = range(params.q) if alpha_sweep else [int(rng.integers(params.q))]
                chs = (1, 2) if alpha_sweep else (int(rng.integers(1, 3)),)
                verdicts = []
                for alpha in alphas:
                    for ch in chs:
                        state, *coms = cve_prover_commit(sk, pk, round_seed)
                        beta = cve_prover_beta(state, alpha)
                        resp = cve_prover_respond(state, ch)
                        verdicts.append(cve_verifier_check(pk, coms, alpha, beta, ch, resp))
            report.rounds_checked += len(verdicts)
            bad = [v for v in verdicts if not v]
            if bad:
                report.failures.append((trial, rnd, bad[0].reason))
                session_ok = False
                break
        report.accepted += session_ok
    return report


# --- soundness -------------------------------------------------------------

@dataclass
class SoundnessEstimate:
    scheme: str
    trials: int
    accepted: int
    rounds_per_trial: int
    theoretical: Fraction
    ci_low: float
    ci_high: float
    history: np.ndarray = field(repr=False, default=None)

    @property
    def rate(self) -> float:
        return self.accepted / self.trials

    def contains_theory(self) -> bool:
        return self.ci_low <= float(self.theoretical) <= self.ci_high


def cheat_once(scheme: str, pk, seed: bytes, rng: np.random.Generator) -> bool:
    """One round of the cheating prover against an honest verifier."""
    if scheme == "stern":
        strategy = STRATEGIES[int(rng.integers(3))]
        cheater = stern_cheat_round(pk, strategy, seed)
        ch = int(rng.integers(1, 4))
        return bool(stern_verifier_check(pk, cheater.commitments, ch, cheater.respond(ch)))
    cheater = cve_cheat_round(pk, seed)
    alpha = int(rng.integers(pk.params.q))
    beta = cheater.beta(alpha)
    ch = int(rng.integers(1, 3))
    return bool(cve_verifier_check(pk, cheater.commitments, alpha, beta, ch, cheater.respond(ch)))


def estimate_soundness(scheme: str, params: Params, trials: int, rounds_per_trial: int = 1,
                       seed: bytes = b"sound", keys=None, confidence: float = 0.99) -> SoundnessEstimate:
    """Acceptance rate of the cheating prover with an exact binomial CI."""
    if trials < 1:
        raise ValueError("trials must be positive")
    pk = keys[0] if keys else keygen(scheme, params, derive_seed(seed, "key", 32))[0]
    rng = np.random.default_rng(int.from_bytes(derive_seed(seed, "rng", 8), "little"))
    history = np.zeros(trials, dtype=bool)
    for t in range(trials):
        history[t] = all(cheat_once(scheme, pk, derive_seed(seed, f"cheat/{t}/{r}", 32), rng)
                         for r in range(rounds_per_trial))
    k = int(history.sum())
    ci = stats.binomtest(k, trials).proportion_ci(confidence_level=confidence, method="exact")
    return SoundnessEstimate(scheme, trials, k, rounds_per_trial,
                             per_round_error(scheme, params.q) ** rounds_per_trial,
                             float(ci.low), float(ci.high), history)


# --- zero knowledge --------------------------------------------------------

def real_rounds(scheme: str, pk, sk, count: int, nonce: bytes) -> list:
    """Honest transcripts with challenges from the hash-based honest verifier."""
    oracle = HashVerifier(nonce)
    out = []
    for i in range(count):
        round_seed = derive_seed(nonce, f"real/{i}", 32)
        if scheme == "stern":
            state, *coms = stern_prover_commit(sk, pk, round_seed)
            ch = oracle.stern_challenge(coms)
            resp = stern_prover_respond(state, ch, sk)
            out.append(SternRound(tuple(coms), ch, resp))
        else:
            state, *coms = cve_prover_commit(sk, pk, round_seed)
            alpha = oracle.cve_alpha(coms, pk.params.q)
            beta = cve_prover_beta(state, alpha)
            ch = oracle.cve_challenge(coms, beta)
            out.append(CveRound(tuple(coms), alpha, beta, ch, cve_prover_respond(state, ch)))
    return out


def simulated_rounds(scheme: str, pk, count: int, nonce: bytes, perm_seed: bytes | None = None) -> list:
    oracle = HashVerifier(nonce)
    sim = stern_simulate if scheme == "stern" else cve_simulate
    return sim(pk, oracle, count, derive_seed(nonce, "sim", 32), perm_seed=perm_seed)


def _observables(rounds, params: Params) -> dict[str, np.ndarray]:
    """Per-statistic arrays of integer category labels."""
    obs = {k: [] for k in ("challenge", "response_length", "revealed_weight", "digest_bytes",
                           "response_elements", "sigma_first", "gamma")}
    is_cve = bool(rounds) and isinstance(rounds[0], CveRound)
    if is_cve:
        obs["alpha"] = []
        obs["beta"] = []
    for rnd in rounds:
        r = rnd.response
        obs["challenge"].append([rnd.ch])
        payload = (wire.encode_cve_response(r) if is_cve else wire.encode_stern_response(r))
        obs["response_length"].append([len(payload)])
        obs["digest_bytes"].append(np.frombuffer(b"".join(rnd.commitments), dtype=np.uint8))
        if r.z is not None:
            obs["revealed_weight"].append([vec_weight(r.z)])
        for vec in ("v", "w", "z"):
            x = getattr(r, vec, None)
            if x is not None:
                obs["response_elements"].append(x)
        if r.seed_gamma is not None:
            pi = iso_from_seeds(r.seed_gamma, r.seed_perm, params.n, params.q)
            obs["sigma_first"].append([pi.perm[0]])
            obs["gamma"].append(pi.gamma)
        if is_cve:
            obs["alpha"].append([rnd.alpha])
            obs["beta"].append(rnd.beta)
    return {k: (np.concatenate([np.asarray(x, dtype=np.int64) for x in v]) if v else np.zeros(0, np.int64))
            for k, v in obs.items()}


@dataclass(frozen=True)
class StatResult:
    statistic: str
    n_real: int
    n_sim: int
    chi2: float
    dof: int
    p: float


def homogeneity(a: np.ndarray, b: np.ndarray) -> tuple[float, int, float]:
    """Chi-square test that two samples of category labels share a distribution."""
    if a.size == 0 or b.size == 0:
        return 0.0, 0, 1.0
    size = int(max(a.max(), b.max())) + 1
    table = np.vstack([np.bincount(a, minlength=size), np.bincount(b, minlength=size)])
    table = table[:, table.sum(axis=0) > 0]
    if table.shape[1] < 2:
        return 0.0, 0, 1.0
    chi2, p, dof, _ = stats.chi2_contingency(table, correction=False)
    return float(chi2), int(dof), float(p)


def zk_stat_test(real, simulated, params: Params) -> list[StatResult]:
    if type(real[0]) is not type(simulated[0]):
        raise ValueError("real and simulated transcripts come from different schemes")
    ra, sa = _observables(real, params), _observables(simulated, params)
    out = []
    for name in ra:
        chi2, dof, p = homogeneity(ra[name], sa[name])
        out.append(StatResult(name, int(ra[name].size), int(sa[name].size), chi2, dof, p))
    return out


def stats_csv(results: list[StatResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["statistic", "n_real", "n_sim", "chi2", "dof", "p"])
    for r in results:
        w.writerow([r.statistic, r.n_real, r.n_sim, f"{r.chi2:.4f}", r.dof, f"{r.p:.6g}"])
    return buf.getvalue()


def stats_table(results: list[StatResult]) -> str:
    lines = [f"{'statistic':<18} {'n_real':>9} {'n_sim':>9} {'chi2':>12} {'dof':>5} {'p':>10}"]
    for r in results:
        lines.append(f"{r.statistic:<18} {r.n_real:>9} {r.n_sim:>9} {r.chi2:>12.3f} {r.dof:>5} {r.p:>10.4g}")
    return "\n".join(lines)
