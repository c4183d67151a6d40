import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from lweid.fqcore import (NoSolutionError, Params, ResampleError, centered, deserialize_vec,
                          error_pmf, expand_uniform, fixed_weight_vector, fq_matrix, fq_vector,
                          is_prime, left_nullspace, mat_mul, mat_vec_mul, rank, rref,
                          sample_error, serialize_vec, solve_particular, uniform_below,
                          vec_weight)

from conftest import TOY_A

PRIMES = [2, 3, 5, 7, 11, 13, 31, 257]


def naive_mat_vec(A, v, q):
    return [sum(int(a) * int(x) for a, x in zip(row, v)) % q for row in A]


# --- Params ---------------------------------------------------------------

def test_params_defaults_and_roundtrip():
    p = Params()
    assert (p.n, p.m, p.q, p.rounds, p.seed_len, p.com_len) == (128, 64, 257, 28, 128, 256)
    assert p.log_q == 9 and p.seed_bytes == 16 and p.com_bytes == 32
    assert Params.from_bytes(p.to_bytes()) == p
    assert len(p.to_bytes()) == Params.block_size()


@pytest.mark.parametrize("kw", [dict(q=256), dict(q=1), dict(q=32771), dict(m=128), dict(m=0),
                                dict(sigma=0.0), dict(rounds=0), dict(seed_len=100), dict(com_len=12)])
def test_params_rejects_invalid(kw):
    with pytest.raises(ValueError):
        Params(**kw)


def test_is_prime_against_sieve():
    limit = 2000
    sieve = np.ones(limit, dtype=bool)
    sieve[:2] = False
    for i in range(2, int(limit ** 0.5) + 1):
        sieve[i * i::i] = False
    assert [is_prime(i) for i in range(limit)] == list(sieve)


# --- arithmetic -----------------------------------------------------------

def test_mat_vec_examples():
    assert list(mat_vec_mul(fq_matrix(np.eye(3, dtype=int), 7), fq_vector([1, 5, 6], 7), 7)) == [1, 5, 6]
    assert list(mat_vec_mul(fq_matrix(TOY_A, 7), fq_vector([1, 2], 7), 7)) == [5, 4, 3, 2]
    assert list(mat_vec_mul(fq_matrix([[0, 0], [0, 0]], 7), fq_vector([3, 4], 7), 7)) == [0, 0]


def test_mat_vec_dimension_mismatch():
    with pytest.raises(ValueError):
        mat_vec_mul(fq_matrix(TOY_A, 7), fq_vector([1, 2, 3], 7), 7)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(PRIMES), st.integers(1, 6), st.integers(1, 6), st.data())
def test_mat_vec_matches_definition_sum(q, rows, cols, data):
    A = data.draw(st.lists(st.lists(st.integers(0, q - 1), min_size=cols, max_size=cols),
                           min_size=rows, max_size=rows))
    v = data.draw(st.lists(st.integers(0, q - 1), min_size=cols, max_size=cols))
    assert list(mat_vec_mul(fq_matrix(A, q), fq_vector(v, q), q)) == naive_mat_vec(A, v, q)


def test_mat_vec_linearity_10k(rng):
    for _ in range(10_000):
        q = int(rng.choice(PRIMES))
        r, c = rng.integers(1, 8, size=2)
        A = rng.integers(0, q, size=(r, c))
        u, v = rng.integers(0, q, size=(2, c))
        lhs = mat_vec_mul(A, (u + v) % q, q)
        rhs = (mat_vec_mul(A, u, q) + mat_vec_mul(A, v, q)) % q
        assert np.array_equal(lhs, rhs)


def test_large_modulus_no_overflow():
    q = 32749
    A = np.full((3, 4096), q - 1, dtype=np.int64)
    v = np.full(4096, q - 1, dtype=np.int64)
    assert list(mat_vec_mul(A, v, q)) == [(4096 * (q - 1) ** 2) % q] * 3


def test_vec_weight_examples():
    assert vec_weight(fq_vector([0, 0, 0], 7)) == 0
    assert vec_weight(fq_vector([0, 1, 0, 0], 7)) == 1
    assert vec_weight(fq_vector([6, 0, 2], 7)) == 2


def test_fq_vector_reduces_to_canonical_range():
    assert list(fq_vector([-1, 7, 15], 7)) == [6, 0, 1]


def test_serialize_roundtrip_and_bounds():
    v = fq_vector([0, 1, 256, 300], 257)
    data = serialize_vec(v)
    assert data == bytes([0, 0, 1, 0, 0, 1, 43, 0])
    assert list(deserialize_vec(data, 4, 257)) == list(v)
    with pytest.raises(ValueError):
        deserialize_vec(bytes([0, 2]), 1, 257)   # 512 >= q
    with pytest.raises(ValueError):
        deserialize_vec(bytes([0]), 1, 257)


# --- linear algebra -------------------------------------------------------

def test_left_nullspace_toy_example():
    q = 7
    A = fq_matrix(TOY_A, q)
    B = left_nullspace(A, q)
    assert B.shape == (2, 4)
    assert not mat_mul(B, A, q).any()
    # same row space as the hand-derived basis, compared in canonical form
    hand = fq_matrix([[4, 1, 0, 2], [2, 0, 1, 4]], q)
    assert not mat_mul(hand, A, q).any()
    assert np.array_equal(rref(hand, q)[0], B)
    assert B.tolist() == [[1, 0, 4, 2], [0, 1, 5, 1]]


def test_left_nullspace_coordinate_subspace():
    n, m, q = 6, 2, 11
    A = np.eye(n, dtype=np.int64)[:, :m]
    assert np.array_equal(left_nullspace(A, q), np.eye(n, dtype=np.int64)[m:])


def test_left_nullspace_rank_deficient_signals_resample():
    A = fq_matrix([[1, 2], [2, 4], [3, 6]], 7)
    with pytest.raises(ResampleError):
        left_nullspace(A, 7)


def brute_rank(M, q):
    """Rank as log_q of the number of distinct combinations of rows (tiny only)."""
    rows, cols = M.shape
    span = set()
    for coeffs in np.ndindex(*([q] * rows)):
        span.add(tuple((np.array(coeffs) @ M) % q))
    return round(math.log(len(span), q))


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([2, 3, 5]), st.integers(1, 3), st.integers(0, 2 ** 32 - 1))
def test_rank_matches_brute_force(q, rows, seed):
    M = np.random.default_rng(seed).integers(0, q, size=(rows, 4))
    assert rank(M, q) == brute_rank(M, q)


def test_left_nullspace_random_property(rng):
    for _ in range(300):
        q = int(rng.choice(PRIMES[1:]))
        m = int(rng.integers(1, 6))
        n = m + int(rng.integers(1, 6))
        A = rng.integers(0, q, size=(n, m))
        if rank(A, q) < m:
            with pytest.raises(ResampleError):
                left_nullspace(A, q)
            continue
        B = left_nullspace(A, q)
        assert B.shape == (n - m, n)
        assert not mat_mul(B, A, q).any()
        assert rank(B, q) == n - m
        assert np.array_equal(rref(B, q)[0], B)


def test_solve_particular_examples():
    assert list(solve_particular(fq_matrix([[1, 1]], 7), fq_vector([3], 7), 7)) == [3, 0]
    t = fq_vector([4, 0, 6], 7)
    assert list(solve_particular(np.eye(3, dtype=np.int64), t, 7)) == [4, 0, 6]
    M = fq_matrix([[4, 1, 0, 2], [2, 0, 1, 4]], 7)
    x = solve_particular(M, fq_vector([1, 0], 7), 7)
    assert list(mat_vec_mul(M, x, 7)) == [1, 0]


def test_solve_particular_inconsistent():
    with pytest.raises(NoSolutionError):
        solve_particular(fq_matrix([[1, 1], [2, 2]], 7), fq_vector([1, 3], 7), 7)


def test_solve_particular_property(rng):
    for _ in range(500):
        q = int(rng.choice(PRIMES))
        r, c = rng.integers(1, 7, size=2)
        M = rng.integers(0, q, size=(r, c))
        t = rng.integers(0, q, size=r)
        try:
            x = solve_particular(M, t, q)
        except NoSolutionError:
            # an inconsistent system has rank([M | t]) > rank(M)
            assert rank(np.column_stack([M, t]), q) > rank(M, q)
            continue
        assert np.array_equal(mat_vec_mul(M, x, q), t % q)


# --- sampling -------------------------------------------------------------

def test_expand_uniform_deterministic_and_domain_separated():
    seed = b"\x01" * 16
    a = expand_uniform(seed, "vector", 257, 64)
    assert np.array_equal(a, expand_uniform(seed, "vector", 257, 64))
    assert not np.array_equal(a, expand_uniform(seed, "nonzero_vector", 257, 64))
    assert not np.array_equal(a, expand_uniform(b"\x02" * 16, "vector", 257, 64))
    assert expand_uniform(seed, "scalar", 257) == expand_uniform(seed, "scalar", 257)
    with pytest.raises(ValueError):
        expand_uniform(seed, "matrix", 7, 3)


def test_expand_uniform_nonzero_and_permutation(rng):
    for i in range(200):
        seed = rng.bytes(16)
        n = int(rng.integers(1, 200))
        v = expand_uniform(seed, "nonzero_vector", 7, n)
        assert vec_weight(v) == n and v.max() < 7
        perm = expand_uniform(seed, "permutation", 7, n)
        assert sorted(perm.tolist()) == list(range(n))


@pytest.mark.parametrize("q", [2, 7, 31, 257])
def test_expand_uniform_chi_square(q):
    draws = expand_uniform(b"chi-square-" + bytes([q % 256]), "vector", q, 100_000)
    counts = np.bincount(draws, minlength=q)
    assert stats.chisquare(counts).pvalue > 0.001


def test_scalar_draws_chi_square():
    q = 31
    draws = [expand_uniform(i.to_bytes(4, "little") * 4, "scalar", q) for i in range(20_000)]
    assert stats.chisquare(np.bincount(draws, minlength=q)).pvalue > 0.001


def test_permutation_first_position_uniform():
    n = 8
    firsts = [int(expand_uniform(i.to_bytes(16, "little"), "permutation", 7, n)[0])
              for i in range(16_000)]
    assert stats.chisquare(np.bincount(firsts, minlength=n)).pvalue > 0.001


def test_uniform_below_non_prime_bound():
    vals = [uniform_below(i.to_bytes(8, "little"), 6) for i in range(12_000)]
    assert set(vals) == set(range(6))
    assert stats.chisquare(np.bincount(vals, minlength=6)).pvalue > 0.001


def test_error_pmf_matches_direct_summation():
    for sigma in (0.7, 1.5, 3.0, 4.2):
        tail = math.floor(12 * sigma)
        weights = {x: math.exp(-x * x / (2 * sigma * sigma)) for x in range(-tail, tail + 1)}
        total = sum(weights.values())
        support, pmf = error_pmf(sigma)
        assert support.tolist() == list(range(-tail, tail + 1))
        for x, p in zip(support.tolist(), pmf):
            assert p == pytest.approx(weights[x] / total, abs=1e-12)
        mean = sum(x * w for x, w in weights.items()) / total
        var = sum(x * x * w for x, w in weights.items()) / total
        assert abs(mean) < 1e-12
        if sigma >= 1.5:
            assert var == pytest.approx(sigma ** 2, rel=1e-3)


def test_sample_error_moments():
    params = Params(sigma=3.0)
    x = centered(sample_error(b"moments", 100_000, params), params.q)
    assert -0.1 < x.mean() < 0.1
    assert abs(x.var() - 9.0) < 0.9


def test_sample_error_matches_pmf():
    params = Params(sigma=1.5, q=31)
    x = centered(sample_error(b"pmf", 100_000, params), params.q)
    support, pmf = error_pmf(1.5)
    keep = pmf * x.size >= 5
    observed = np.array([(x == s).sum() for s in support[keep]])
    expected = pmf[keep] / pmf[keep].sum() * observed.sum()
    assert stats.chisquare(observed, expected).pvalue > 0.001


def test_sample_error_degenerate_and_deterministic():
    tiny = Params(sigma=0.05)
    assert not sample_error(b"x", 50, tiny).any()
    p = Params()
    assert np.array_equal(sample_error(b"same", 64, p), sample_error(b"same", 64, p))


def test_fixed_weight_vector(rng):
    for _ in range(200):
        n = int(rng.integers(1, 60))
        w = int(rng.integers(0, n + 1))
        v = fixed_weight_vector(rng.bytes(16), n, w, 13)
        assert vec_weight(v) == w and v.max(initial=0) < 13
    with pytest.raises(ValueError):
        fixed_weight_vector(b"s", 4, 5, 7)
