from __future__ import annotations

import hashlib
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from codedchain.multiexp import SMALL_TERMS, FixedBaseTable, multi_exp, naive_multi_exp
from codedchain.prf import XofStream, encode_key


def test_encode_key_is_length_prefixed():
    assert encode_key(b"t", b"ab", b"c") != encode_key(b"t", b"a", b"bc")
    assert encode_key(b"t", 5) == b"\x00\x00\x00\x01t" + b"\x00\x00\x00\x08" + (5).to_bytes(8, "big")


def test_stream_matches_shake_prefix():
    key = encode_key(b"x", 1)
    s = XofStream(key)
    chunks = s.read(10) + s.read(300) + s.read(1)
    assert chunks == hashlib.shake_256(key).digest(311)


def test_randbelow_uses_whole_byte_draws():
    key = b"k"
    s = XofStream(key)
    n = 1000  # 10 bits -> 2-byte draws, accept below 65000
    expected = None
    raw = hashlib.shake_256(key).digest(64)
    for t in range(0, 64, 2):
        x = int.from_bytes(raw[t:t + 2], "big")
        if x < 65000:
            expected = x % n
            break
    assert s.randbelow(n) == expected


@given(st.binary(max_size=16), st.integers(min_value=1, max_value=2**300))
def test_randbelow_in_range(key, n):
    assert 0 <= XofStream(key).randbelow(n) < n


def test_randbelow_rejects_nonpositive():
    with pytest.raises(ValueError):
        XofStream(b"").randbelow(0)


def test_shuffle_is_permutation_and_deterministic():
    items = list(range(50))
    a, b = items[:], items[:]
    XofStream(b"s").shuffle(a)
    XofStream(b"s").shuffle(b)
    assert a == b and sorted(a) == items and a != items


def test_uniform_in_unit_interval():
    s = XofStream(b"u")
    values = [s.uniform() for _ in range(1000)]
    assert all(0 <= v < 1 for v in values)
    assert 0.4 < sum(values) / len(values) < 0.6


P = 2**127 - 1  # Mersenne prime, ample for exercising the engines


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(1, P - 1), st.integers(0, 2**130)), min_size=0, max_size=40))
def test_multi_exp_matches_naive(terms):
    bases = [b for b, _ in terms]
    exps = [e for _, e in terms]
    assert multi_exp(bases, exps, P) == naive_multi_exp(bases, exps, P)


def test_multi_exp_large_path_taken():
    rng = random.Random(3)
    n = SMALL_TERMS * 5
    bases = [rng.randrange(2, P) for _ in range(n)]
    exps = [rng.randrange(2**200) for _ in range(n)]
    expected = 1
    for b, e in zip(bases, exps):
        expected = expected * pow(b, e, P) % P
    assert multi_exp(bases, exps, P) == expected


@pytest.mark.parametrize("m", [1, 3, 9, 40, 300])
def test_fixed_base_table_all_paths(m):
    rng = random.Random(m)
    bases = [rng.randrange(2, P) for _ in range(m)]
    table = FixedBaseTable(bases, P, 130)
    for density in (0.05, 0.5, 1.0):
        exps = [rng.randrange(2**130) if rng.random() < density else 0 for _ in range(m)]
        assert table.multi_exp(exps) == naive_multi_exp(bases, exps, P)


def test_fixed_base_table_large_modulus():
    p = 2**521 - 1
    rng = random.Random(9)
    bases = [rng.randrange(2, p) for _ in range(70)]
    table = FixedBaseTable(bases, p, 257)
    exps = [rng.randrange(2**257) for _ in range(70)]
    assert table.multi_exp(exps) == naive_multi_exp(bases, exps, p)
    assert table.multi_exp([0] * 70) == 1
