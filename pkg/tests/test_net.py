import re
import socket
import subprocess
import sys
import threading
import time

import pytest

from lweid import wire
from lweid.cve import cve_keygen
from lweid.fqcore import Params
from lweid.keyfile import save_keys
from lweid.net import (ProtocolError, hello_message, parse_addr, parse_hello, prove_session,
                       replay, serve_session)
from lweid.stern import stern_keygen

SMALL = Params(n=32, m=16, q=31, sigma=2.0, rounds=6)


def run_pair(server_pk, client_pk, client_sk, rounds, timeout=5.0):
    a, b = socket.socketpair()
    box = {}
    t = threading.Thread(target=lambda: box.update(server=serve_session(a, server_pk, rounds, timeout)))
    t.start()
    client = prove_session(b, client_pk, client_sk, timeout)
    t.join(10)
    return box["server"], client


@pytest.mark.parametrize("keygen", [stern_keygen, cve_keygen])
def test_honest_session_and_replay(keygen):
    pk, sk = keygen(SMALL, b"net")
    server, client = run_pair(pk, pk, sk, 6)
    assert server.verdict and client.verdict
    assert server.rounds_completed == client.rounds_completed == 6
    assert len(server.transcripts) == 6
    live = [wire.encode_message(wire.result_message(t.verdict)) for t in server.transcripts]
    offline = [wire.encode_message(wire.result_message(v)) for v in replay(pk, server.transcripts)]
    assert live == offline


@pytest.mark.parametrize("keygen", [stern_keygen, cve_keygen])
def test_mismatched_key_fails_first_round(keygen):
    pk, _ = keygen(SMALL, b"server-key")
    other_pk, other_sk = keygen(SMALL, b"imposter")
    server, client = run_pair(pk, other_pk, other_sk, 28)
    # an honest-looking round with the wrong key passes only on lucky challenges
    assert not server.verdict and not client.verdict
    assert server.verdict.reason in ("commitment", "weight")
    assert server.rounds_completed < 28


def test_hello_mismatch_raises():
    pk, _ = stern_keygen(SMALL, b"a")
    other = Params(n=32, m=16, q=37, sigma=2.0, rounds=6)
    cpk, csk = stern_keygen(other, b"b")
    a, b = socket.socketpair()
    t = threading.Thread(target=serve_session, args=(a, pk, 3, 1.0))
    t.start()
    with pytest.raises(ProtocolError):
        prove_session(b, cpk, csk, 1.0)
    t.join(5)


def hostile_client(sock, frames):
    chan = sock.makefile("rb")
    parse_hello(wire.read_message(chan))
    for f in frames:
        sock.sendall(f)
    try:
        while True:
            msg = wire.read_message(chan)
            if msg.type_tag == wire.RESULT:
                return wire.parse_result(msg)
    finally:
        chan.close()
        sock.close()


@pytest.mark.parametrize("frames", [
    [b"\x99\x00\x00\x00\x00"],                                              # unknown tag
    [wire.encode_message(wire.WireMessage(wire.S1_RESPONSE, b""))],         # out of order
    [wire.encode_message(wire.WireMessage(wire.S1_COMMIT, b"\x00" * 10))],  # wrong size
])
def test_malformed_frame_injection(frames):
    pk, _ = stern_keygen(SMALL, b"inject")
    a, b = socket.socketpair()
    box = {}
    t = threading.Thread(target=lambda: box.update(r=serve_session(a, pk, 3, 2.0)))
    t.start()
    if frames[0][0] == wire.S1_COMMIT:
        # the server answers a short commitment frame with a challenge; then
        # the client sends a response so the round can be judged
        frames = frames + [wire.encode_message(wire.WireMessage(wire.S1_RESPONSE, b"\x00"))]
    verdict = hostile_client(b, frames)
    t.join(5)
    assert not verdict and verdict.reason == "malformed"
    assert box["r"].verdict.reason == "malformed"


def test_timeout_is_failure():
    pk, _ = stern_keygen(SMALL, b"slow")
    a, b = socket.socketpair()
    start = time.monotonic()
    result = serve_session(a, pk, 2, timeout=0.3)
    assert not result.verdict and result.verdict.reason == "timeout"
    assert time.monotonic() - start < 3
    b.close()


def test_hello_codec():
    msg = hello_message("cve", 17, SMALL)
    assert parse_hello(msg) == ("cve", 17, SMALL)
    with pytest.raises(wire.WireError):
        parse_hello(wire.WireMessage(wire.KEY, b"\x01"))


def test_parse_addr():
    assert parse_addr("127.0.0.1:9000") == ("127.0.0.1", 9000)
    assert parse_addr(":80") == ("127.0.0.1", 80)
    with pytest.raises(ValueError):
        parse_addr("localhost")


# --- command line ---------------------------------------------------------

def lweid(*args, **kw):
    return subprocess.run([sys.executable, "-m", "lweid", *args], capture_output=True, text=True,
                          timeout=120, **kw)


def start_server(*args):
    proc = subprocess.Popen([sys.executable, "-m", "lweid", "serve", *args],
                            stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
    line = proc.stdout.readline()
    m = re.match(r"listening on (\S+):(\d+)", line)
    assert m, line + proc.stderr.read()
    return proc, f"127.0.0.1:{m.group(2)}"


def test_cli_keygen(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    r1 = lweid("keygen", "--scheme", "stern", "--n", "128", "--m", "64", "--q", "257",
               "--sigma", "3.0", "--seed", "0a0b", "--out", str(a))
    assert r1.returncode == 0 and "p=" in r1.stdout
    lweid("keygen", "--scheme", "stern", "--seed", "0a0b", "--out", str(b))
    assert (tmp_path / "a.pk").read_bytes() == (tmp_path / "b.pk").read_bytes()
    assert (tmp_path / "a.sk").read_bytes() == (tmp_path / "b.sk").read_bytes()
    assert lweid("keygen", "--scheme", "stern", "--q", "256", "--out", str(a)).returncode == 2
    assert lweid("keygen", "--scheme", "cve", "--m", "200", "--out", str(a)).returncode == 2
    assert lweid("keygen", "--scheme", "cve", "--seed", "zz", "--out", str(a)).returncode == 2


def test_cli_bench():
    r = lweid("bench", "--scheme", "stern", "--target-soundness", "2^-16")
    assert r.returncode == 0 and "r=28" in r.stdout and "2348.67" in r.stdout
    r = lweid("bench", "--scheme", "cve", "--q", "257", "--target-soundness", "2**-16")
    assert "r=17" in r.stdout and "2506" in r.stdout
    r = lweid("bench", "--scheme", "cve", "--q", "31", "--target-soundness", "0.5")
    assert "r=2" in r.stdout.split()
    for bad in ("1", "0", "-0.5", "1.5", "nonsense"):
        assert lweid("bench", "--scheme", "stern", "--target-soundness", bad).returncode == 2


@pytest.mark.parametrize("scheme", ["stern", "cve"])
def test_cli_serve_prove_replay(tmp_path, scheme):
    key = tmp_path / "k"
    assert lweid("keygen", "--scheme", scheme, "--seed", "01", "--out", str(key)).returncode == 0
    tr = tmp_path / "session.bin"
    server, addr = start_server("--pk", f"{key}.pk", "--listen", "127.0.0.1:0", "--transcript", str(tr))
    client = lweid("prove", "--sk", f"{key}.sk", "--connect", addr)
    out, err = server.communicate(timeout=60)
    assert client.returncode == 0, client.stdout + client.stderr
    assert server.returncode == 0 and out.strip().endswith("success"), out + err
    rep = lweid("replay", "--pk", f"{key}.pk", "--transcript", str(tr))
    assert rep.returncode == 0 and "success" in rep.stdout and "mismatch" not in rep.stdout


def test_cli_mismatched_key_and_transport(tmp_path):
    lweid("keygen", "--scheme", "stern", "--seed", "01", "--out", str(tmp_path / "srv"))
    lweid("keygen", "--scheme", "stern", "--seed", "02", "--out", str(tmp_path / "cli"))
    server, addr = start_server("--pk", str(tmp_path / "srv.pk"), "--listen", "127.0.0.1:0")
    client = lweid("prove", "--sk", str(tmp_path / "cli.sk"), "--connect", addr)
    out, _ = server.communicate(timeout=60)
    assert server.returncode == 1 and "failure" in out
    assert client.returncode == 1
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    refused = lweid("prove", "--sk", str(tmp_path / "cli.sk"), "--connect", f"127.0.0.1:{port}")
    assert refused.returncode == 3


def test_cli_server_refuses_secret_file(tmp_path):
    lweid("keygen", "--scheme", "stern", "--seed", "01", "--out", str(tmp_path / "k"))
    r = lweid("serve", "--pk", str(tmp_path / "k.sk"), "--listen", "127.0.0.1:0")
    assert r.returncode == 2


def test_cli_simulate_then_replay(tmp_path):
    lweid("keygen", "--scheme", "cve", "--seed", "05", "--out", str(tmp_path / "k"))
    out = tmp_path / "sim.bin"
    r = lweid("simulate", "--pk", str(tmp_path / "k.pk"), "--rounds", "30", "--nonce", "aa",
              "--out", str(out))
    assert r.returncode == 0 and "30 pass" in r.stdout
    assert lweid("replay", "--pk", str(tmp_path / "k.pk"), "--transcript", str(out)).returncode == 0


def test_cli_report(tmp_path):
    r = lweid("report", "--outdir", str(tmp_path), "--n", "32", "--m", "16", "--q", "31",
              "--trials", "300", "--zk-rounds", "300", "--completeness-trials", "2")
    assert r.returncode == 0, r.stderr
    for name in ("completeness.csv", "soundness.csv", "costs.csv", "zk_stern.csv", "zk_cve.csv",
                 "soundness.png", "costs.png", "zk_stern.png", "zk_cve.png"):
        assert (tmp_path / name).stat().st_size > 0
    assert (tmp_path / "zk_cve.csv").read_text().startswith("statistic,n_real,n_sim,chi2,dof,p")
