"""lweid command line.

Exit codes: 0 success, 1 protocol failure, 2 usage error, 3 transport error.
"""

from __future__ import annotations

import argparse
import logging
import os
import re
import socket
import socketserver
import sys
import threading
from pathlib import Path

from . import wire
from .fqcore import Params
from .harness import (completeness_suite, estimate_soundness, keygen,
                      per_round_error, real_rounds, rounds_for,
                      simulated_rounds, stats_csv, stats_table, zk_stat_test)
from .keyfile import KeyFileError, load_public, load_secret, save_keys, scheme_of
from .net import ProtocolError, parse_addr, prove_session, replay, serve_session

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_TRANSPORT = 0, 1, 2, 3

log = logging.getLogger("lweid")


class UsageError(Exception):
    pass


def _setup_logging():
    level = os.environ.get("LWEID_LOG", "error").upper()
    if level not in ("ERROR", "INFO", "DEBUG"):
        level = "ERROR"
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def parse_target(text: str) -> float:
    """Accepts 1e-5, 2^-16 or 2**-16."""
    m = re.fullmatch(r"\s*(\d+(?:\.\d*)?)\s*(?:\^|\*\*)\s*(-?\d+(?:\.\d*)?)\s*", text)
    try:
        return float(m.group(1)) ** float(m.group(2)) if m else float(text)
    except (ValueError, OverflowError):
        raise UsageError(f"cannot parse soundness target {text!r}") from None


def _params(args, **over) -> Params:
    fields = dict(n=args.n, m=args.m, q=args.q, sigma=args.sigma, rounds=args.rounds,
                  seed_len=args.seed_len, com_len=args.com_len)
    fields.update(over)
    try:
        return Params(**fields)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _add_params(p, rounds_default=None):
    d = Params()
    p.add_argument("--n", type=int, default=d.n)
    p.add_argument("--m", type=int, default=d.m)
    p.add_argument("--q", type=int, default=d.q)
    p.add_argument("--sigma", type=float, default=d.sigma)
    p.add_argument("--rounds", type=int, default=rounds_default,
                   help="repetitions (default: derived from --target-soundness 2^-16)")
    p.add_argument("--seed-len", type=int, default=d.seed_len, help="bits")
    p.add_argument("--com-len", type=int, default=d.com_len, help="bits")


def _default_rounds(args) -> int:
    if args.rounds is not None:
        return args.rounds
    try:
        return rounds_for(args.scheme, args.q, 2.0 ** -16)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _hex(text: str) -> bytes:
    try:
        return bytes.fromhex(text)
    except ValueError:
        raise UsageError(f"not a hex string: {text!r}") from None


# --- subcommands -----------------------------------------------------------

def cmd_keygen(args) -> int:
    params = _params(args, rounds=_default_rounds(args))
    seed = _hex(args.seed) if args.seed else os.urandom(32)
    pk, sk = keygen(args.scheme, params, seed)
    pk_path, sk_path = save_keys(args.out, pk, sk)
    print(f"scheme={args.scheme} n={params.n} m={params.m} q={params.q} sigma={params.sigma} "
          f"rounds={params.rounds} seed_len={params.seed_len} com_len={params.com_len}")
    print(f"p={pk.p}")
    print(f"wrote {pk_path} {sk_path}")
    return EXIT_OK


def _write_session_transcript(path, pk, transcripts):
    wire.write_transcripts(path, scheme_of(pk), pk.params, transcripts)


def cmd_serve(args) -> int:
    pk = load_public(args.pk)
    rounds = args.rounds or pk.params.rounds
    host, port = parse_addr(args.listen)
    if args.forever:
        return _serve_forever(pk, rounds, host, port, args.timeout)
    try:
        srv = socket.create_server((host, port))
    except OSError as exc:
        print(f"error: cannot listen on {args.listen}: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    with srv:
        print(f"listening on {host}:{srv.getsockname()[1]}", flush=True)
        try:
            conn, peer = srv.accept()
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_TRANSPORT
    log.info("session from %s", peer)
    try:
        result = serve_session(conn, pk, rounds, timeout=args.timeout)
    except OSError as exc:
        print(f"error: transport failure: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    if args.transcript:
        _write_session_transcript(args.transcript, pk, result.transcripts)
    if result.verdict:
        print("success", flush=True)
        return EXIT_OK
    print(f"failure: {result.verdict.reason}", flush=True)
    return EXIT_FAIL


def _serve_forever(pk, rounds, host, port, timeout) -> int:
    lock = threading.Lock()

    class Handler(socketserver.BaseRequestHandler):
        def handle(self):
            result = serve_session(self.request, pk, rounds, timeout=timeout)
            with lock:
                word = "success" if result.verdict else f"failure: {result.verdict.reason}"
                print(f"{self.client_address[0]}:{self.client_address[1]} {word}", flush=True)

    socketserver.ThreadingTCPServer.allow_reuse_address = True
    try:
        srv = socketserver.ThreadingTCPServer((host, port), Handler)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    with srv:
        print(f"listening on {host}:{srv.server_address[1]}", flush=True)
        try:
            srv.serve_forever()
        except KeyboardInterrupt:
            pass
    return EXIT_OK


def cmd_prove(args) -> int:
    pk, sk = load_secret(args.sk)
    try:
        sock = socket.create_connection(parse_addr(args.connect), timeout=args.timeout)
    except OSError as exc:
        print(f"error: cannot connect to {args.connect}: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    try:
        result = prove_session(sock, pk, sk, timeout=args.timeout)
    except (ProtocolError, wire.WireError) as exc:
        print(f"failure: {exc}")
        return EXIT_FAIL
    except OSError as exc:
        print(f"error: transport failure: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    if result.verdict:
        print(f"completed {result.rounds_completed} rounds")
        return EXIT_OK
    print(f"failure: {result.verdict.reason} after {result.rounds_completed} rounds")
    return EXIT_FAIL


def cmd_replay(args) -> int:
    pk = load_public(args.pk)
    scheme, params, transcripts = wire.read_transcripts(args.transcript)
    if scheme != scheme_of(pk) or params != pk.params:
        raise UsageError("transcript was recorded under a different key setup")
    verdicts = replay(pk, transcripts)
    mismatch = [i for i, (t, v) in enumerate(zip(transcripts, verdicts))
                if wire.encode_message(wire.result_message(v)) != wire.encode_message(wire.result_message(t.verdict))]
    ok = all(verdicts) and len(verdicts) > 0
    if mismatch:
        print(f"verdict mismatch in rounds {mismatch}")
    print("success" if ok else "failure")
    return EXIT_OK if ok and not mismatch else EXIT_FAIL


def _cost_rows(params, schemes):
    from .wire import MODES, cost_model
    return [(s, cost_model(params, s, mode)) for s in schemes for mode in MODES]


def cmd_bench(args) -> int:
    target = parse_target(args.target_soundness)
    if not 0 < target < 1:
        raise UsageError("target soundness must lie strictly between 0 and 1")
    r = rounds_for(args.scheme, args.q, target)
    params = _params(args, rounds=r)
    err = per_round_error(args.scheme, args.q)
    print(f"scheme={args.scheme} q={args.q} per_round_error={err} ({float(err):.6f}) target={target:.6g}")
    print(f"r={r}")
    print(f"{'mode':<14} {'commitments':>12} {'challenge':>10} {'answer_avg':>11} {'total_avg':>10}  (bits/round)")
    for _, c in _cost_rows(params, [args.scheme]):
        row = c.row()
        print(f"{row['mode']:<14} {row['commitments']:>12} {row['challenge']:>10} "
              f"{row['answer_avg']:>11} {row['total_avg']:>10}")
    total = _cost_rows(params, [args.scheme])[0][1].total_bits_avg * r
    print(f"session total (paper_formula) = {float(total):.2f} bits")
    return EXIT_OK


def cmd_simulate(args) -> int:
    pk = load_public(args.pk)
    scheme = scheme_of(pk)
    if args.scheme and args.scheme != scheme:
        raise UsageError(f"--scheme {args.scheme} does not match key ({scheme})")
    nonce = _hex(args.nonce) if args.nonce else os.urandom(16)
    rounds = simulated_rounds(scheme, pk, args.rounds, nonce)
    from .net import check_round
    transcripts = []
    for rnd in rounds:
        t = wire.round_to_transcript(rnd, pk.params)
        t.verdict = check_round(pk, t)
        transcripts.append(t)
    wire.write_transcripts(args.out, scheme, pk.params, transcripts)
    accepted = sum(bool(t.verdict) for t in transcripts)
    print(f"wrote {len(transcripts)} simulated rounds to {args.out} ({accepted} pass the verifier)")
    return EXIT_OK


def cmd_report(args) -> int:
    from . import plotting
    from .wire import cost_model

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    base = Params(n=args.n, m=args.m, q=args.q, sigma=args.sigma)
    schemes = args.scheme or ["stern", "cve"]
    written = []

    rows = ["scheme,rounds,trials,accepted"]
    for scheme in schemes:
        p = Params(n=base.n, m=base.m, q=base.q, sigma=base.sigma, rounds=rounds_for(scheme, base.q, 2.0 ** -16))
        rep = completeness_suite(scheme, p, args.completeness_trials)
        rows.append(f"{scheme},{p.rounds},{rep.trials},{rep.accepted}")
        print(f"completeness {scheme}: {rep.accepted}/{rep.trials}")
    (outdir / "completeness.csv").write_text("\n".join(rows) + "\n")
    written.append(outdir / "completeness.csv")

    estimates = []
    rows = ["scheme,q,trials,accepted,rate,ci_low,ci_high,theoretical"]
    for scheme in schemes:
        q = args.soundness_q if scheme == "cve" else base.q
        p = Params(n=base.n, m=base.m, q=q, sigma=base.sigma)
        est = estimate_soundness(scheme, p, args.trials)
        estimates.append(est)
        rows.append(f"{scheme},{q},{est.trials},{est.accepted},{est.rate:.4f},{est.ci_low:.4f},"
                    f"{est.ci_high:.4f},{float(est.theoretical):.4f}")
        print(f"soundness {scheme} (q={q}): {est.rate:.4f} in [{est.ci_low:.4f}, {est.ci_high:.4f}], "
              f"bound {float(est.theoretical):.4f}")
    (outdir / "soundness.csv").write_text("\n".join(rows) + "\n")
    written += [outdir / "soundness.csv", plotting.plot_soundness(estimates, outdir / "soundness.png")]

    for scheme in schemes:
        pk, sk = keygen(scheme, base, b"report-key-" + scheme.encode())
        real = real_rounds(scheme, pk, sk, args.zk_rounds, b"report-real")
        sim = simulated_rounds(scheme, pk, args.zk_rounds, b"report-sim")
        res = zk_stat_test(real, sim, base)
        print(f"zk marginals {scheme} (real vs simulated):")
        print(stats_table(res))
        (outdir / f"zk_{scheme}.csv").write_text(stats_csv(res))
        written += [outdir / f"zk_{scheme}.csv",
                    plotting.plot_pvalues(res, outdir / f"zk_{scheme}.png", f"{scheme}: real vs simulated")]

    costs = [(s, cost_model(base, s, mode)) for s in schemes for mode in ("paper_formula", "counted", "wire")]
    rows = ["scheme,mode,commitments,challenge,answer_avg,total_avg"]
    for s, c in costs:
        r = c.row()
        rows.append(f"{s},{r['mode']},{r['commitments']},{r['challenge']},{r['answer_avg']},{r['total_avg']}")
    (outdir / "costs.csv").write_text("\n".join(rows) + "\n")
    written += [outdir / "costs.csv", plotting.plot_costs(costs, outdir / "costs.png")]
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


# --- entry point -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lweid", description="LWE-based zero-knowledge identification")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate a key pair")
    p.add_argument("--scheme", choices=["stern", "cve"], required=True)
    _add_params(p)
    p.add_argument("--seed", help="master seed (hex); random if omitted")
    p.add_argument("--out", required=True, help="writes OUT.pk and OUT.sk")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("serve", help="run the verifier on a TCP port")
    p.add_argument("--pk", required=True)
    p.add_argument("--listen", required=True, help="ADDR:PORT (port 0 picks a free one)")
    p.add_argument("--rounds", type=int, help="default: the key's round count")
    p.add_argument("--transcript", help="write the session transcript here")
    p.add_argument("--timeout", type=float, default=10.0)
    p.add_argument("--forever", action="store_true", help="keep accepting concurrent sessions")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("prove", help="identify to a verifier")
    p.add_argument("--sk", required=True)
    p.add_argument("--connect", required=True, help="ADDR:PORT")
    p.add_argument("--timeout", type=float, default=10.0)
    p.set_defaults(func=cmd_prove)

    p = sub.add_parser("replay", help="re-check a recorded transcript offline")
    p.add_argument("--pk", required=True)
    p.add_argument("--transcript", required=True)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("bench", help="rounds needed for a soundness target, and cost per round")
    p.add_argument("--scheme", choices=["stern", "cve"], required=True)
    p.add_argument("--target-soundness", required=True, metavar="L", help="e.g. 2^-16 or 1e-5")
    _add_params(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("simulate", help="write simulator transcripts (no secret key used)")
    p.add_argument("--pk", required=True)
    p.add_argument("--scheme", choices=["stern", "cve"])
    p.add_argument("--rounds", type=int, required=True)
    p.add_argument("--nonce", help="hex nonce for the honest-verifier oracle")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="statistics tables, CSVs and figures")
    p.add_argument("--outdir", required=True)
    p.add_argument("--scheme", choices=["stern", "cve"], action="append")
    p.add_argument("--n", type=int, default=128)
    p.add_argument("--m", type=int, default=64)
    p.add_argument("--q", type=int, default=257)
    p.add_argument("--sigma", type=float, default=3.0)
    p.add_argument("--soundness-q", type=int, default=31, help="modulus for the cve soundness run")
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--zk-rounds", type=int, default=10000)
    p.add_argument("--completeness-trials", type=int, default=100)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (KeyFileError, wire.WireError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
