from __future__ import annotations

from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import toy_oracle as oracle
from codedchain.errors import InvalidGeometry, MalformedEncoding
from codedchain.group_params import (
    ZERO_SEED,
    fragment_elements,
    generate_params,
    parse_params,
    profile_params,
    seed_from_hex,
    serialize_params,
    validate_params,
    with_geometry,
)


def test_toy_params_validate(toy):
    assert validate_params(toy).ok
    assert (toy.p - 1) % toy.q == 0
    # orders from the brute-force oracle
    assert [oracle.order(g, toy.p) for g in toy.g] == [11, 11]


def test_identity_generator_reported(toy):
    report = validate_params(replace(toy, g=(1, 4)))
    assert not report
    assert any("generator 0 equals identity" in f for f in report.failures)


def test_composite_q_reported(toy):
    report = validate_params(replace(toy, q=12))
    assert "q not prime" in report.failures


def test_wrong_order_generator_reported(toy):
    # 5 generates all of Z_23^*, order 22
    report = validate_params(replace(toy, g=(2, 5)))
    assert any("order q" in f for f in report.failures)


def test_production_example():
    params = generate_params(1024, 257, 32, 1 << 20, 32, ZERO_SEED)
    assert params.p.bit_length() == 1024
    assert params.q.bit_length() == 257
    # length prefix pushes a full 1 MB block one element past 1024
    assert params.m == 1025
    assert validate_params(params).ok


def test_generation_is_deterministic():
    a = profile_params("test", 4, 512)
    b = profile_params("test", 4, 512)
    assert a == b
    c = profile_params("test", 4, 512, seed=b"\x01" * 32)
    assert c.q != a.q


def test_generators_prefix_stable_across_geometry(small):
    wider = with_geometry(small, 2, 4096)
    assert wider.m > small.m
    assert wider.g[:small.m] == small.g
    assert validate_params(wider).ok


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(q_bits=257, element_size=33),
        dict(q_bits=257, element_size=0),
        dict(k=0),
        dict(k=64, s_B=10),
        dict(seed=b"short"),
        dict(p_bits=200, q_bits=257),
    ],
)
def test_invalid_geometry(kwargs):
    with pytest.raises(InvalidGeometry):
        generate_params(**{"p_bits": 1024, "q_bits": 257, "k": 4, "s_B": 1024, "element_size": 32, **kwargs})


def test_fragment_elements():
    assert fragment_elements(1 << 20, 32, 32) == 1025
    assert fragment_elements(65528, 32, 32) == 64
    assert fragment_elements(0, 1, 8) == 1


def test_serialize_roundtrip_toy(toy):
    assert parse_params(serialize_params(toy)) == toy


def test_serialize_roundtrip_production(production):
    data = serialize_params(production)
    back = parse_params(data)
    assert back == production
    for name in ("p", "q", "g", "k", "m", "element_size", "s_B", "seed"):
        assert getattr(back, name) == getattr(production, name)


@settings(max_examples=25, deadline=None)
@given(
    k=st.integers(1, 64),
    s_B=st.integers(64, 4096),
    seed=st.binary(min_size=32, max_size=32),
)
def test_serialize_roundtrip_property(k, s_B, seed):
    params = profile_params("test", k, s_B, seed)
    assert parse_params(serialize_params(params)) == params


def test_truncated_bytes_rejected(toy):
    data = serialize_params(toy)
    for cut in (0, 3, 5, len(data) // 2, len(data) - 1):
        with pytest.raises(MalformedEncoding):
            parse_params(data[:cut])


def test_trailing_and_bad_magic_rejected(toy):
    data = serialize_params(toy)
    with pytest.raises(MalformedEncoding):
        parse_params(data + b"\0")
    with pytest.raises(MalformedEncoding):
        parse_params(b"XXXX" + data[4:])


def test_seed_from_hex():
    assert seed_from_hex("01") == bytes(31) + b"\x01"
    with pytest.raises(ValueError):
        seed_from_hex("00" * 33)
