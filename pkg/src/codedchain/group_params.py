"""Public hashing parameters G = (p, q, g) plus the block/fragment geometry.

A :class:`SystemParams` value is everything two nodes must agree on before
they can exchange coded fragments: the Schnorr group, the generator vector
and the way raw block bytes are packed into Z_q elements.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from functools import cached_property, lru_cache

import gmpy2

from .errors import GenerationFailure, InvalidGeometry, MalformedEncoding
from .multiexp import FixedBaseTable
from .prf import XofStream, encode_key

MAGIC = b"CCLS"
VERSION = 0x01
LENGTH_PREFIX = 8
MR_ROUNDS = 40
ZERO_SEED = bytes(32)

# (p_bits, q_bits, element_size)
PROFILES = {
    "production": (1024, 257, 32),
    # reduced-width group for long simulations; same code paths
    "test": (128, 65, 8),
}


def is_probable_prime(n: int, rounds: int = MR_ROUNDS) -> bool:
    """Miller-Rabin via GMP; error < 4^-rounds for composite n."""
    return n >= 2 and bool(gmpy2.is_prime(n, rounds))


def fragment_elements(s_B: int, k: int, element_size: int) -> int:
    """Elements per fragment: enough for s_B bytes plus the length prefix."""
    per_fragment = -(-(s_B + LENGTH_PREFIX) // k)
    return -(-per_fragment // element_size)


@dataclass(frozen=True)
class SystemParams:
    p: int
    q: int
    g: tuple[int, ...]
    k: int
    m: int
    element_size: int
    s_B: int
    seed: bytes = ZERO_SEED

    @property
    def p_bytes(self) -> int:
        return (self.p.bit_length() + 7) // 8

    @property
    def q_bytes(self) -> int:
        return (self.q.bit_length() + 7) // 8

    @cached_property
    def generator_table(self) -> FixedBaseTable:
        # frozen dataclass: cached_property writes straight into __dict__
        return FixedBaseTable(self.g, self.p, self.q.bit_length())

    def __repr__(self) -> str:
        return (
            f"SystemParams(|p|={self.p.bit_length()}, |q|={self.q.bit_length()}, "
            f"k={self.k}, m={self.m}, element_size={self.element_size}, s_B={self.s_B})"
        )


@dataclass
class ValidationReport:
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def __bool__(self) -> bool:
        return self.ok


def _search_q(q_bits: int, seed: bytes, max_attempts: int) -> int:
    stream = XofStream(encode_key(b"codedchain/q", seed, q_bits))
    top = 1 << (q_bits - 1)
    for _ in range(max_attempts):
        cand = stream.randbits(q_bits) | top | 1
        if is_probable_prime(cand):
            return cand
    raise GenerationFailure(f"no {q_bits}-bit prime q within {max_attempts} attempts")


def _search_p(p_bits: int, q: int, seed: bytes, max_attempts: int) -> int:
    # p = q*t + 1 with p in [2^(p_bits-1), 2^p_bits) and t even
    t_lo = -(-((1 << (p_bits - 1)) - 1) // q)
    t_hi = ((1 << p_bits) - 2) // q
    if t_lo % 2:
        t_lo += 1
    if t_hi < t_lo:
        raise GenerationFailure(f"no even t places q*t+1 in {p_bits} bits")
    span = (t_hi - t_lo) // 2 + 1
    stream = XofStream(encode_key(b"codedchain/p", seed, p_bits, q.to_bytes(q.bit_length() // 8 + 1, "big")))
    t = t_lo + 2 * stream.randbelow(span)
    start = t
    for _ in range(max_attempts):
        cand = q * t + 1
        if is_probable_prime(cand):
            return cand
        t += 2
        if t > t_hi:
            t = t_lo
        if t == start:
            break
    raise GenerationFailure(f"no {p_bits}-bit prime p = q*t+1 within {max_attempts} attempts")


@lru_cache(maxsize=32)
def _group(p_bits: int, q_bits: int, seed: bytes) -> tuple[int, int]:
    attempts = 64 * max(p_bits, 16)
    q = _search_q(q_bits, seed, attempts)
    p = _search_p(p_bits, q, seed, attempts)
    return p, q


def derive_generator(p: int, q: int, seed: bytes, v: int) -> int:
    """Generator g_v = x^((p-1)/q) mod p for a seed-derived x, skipping 1."""
    cofactor = (p - 1) // q
    stream = XofStream(encode_key(b"codedchain/g", seed, v))
    for _ in range(1024):
        x = stream.randrange(2, p - 1) if p > 3 else 2
        g = int(gmpy2.powmod(x, cofactor, p))
        if g != 1:
            return g
    raise GenerationFailure(f"could not derive generator {v}")


_generator_cache: dict[tuple[int, int, bytes], list[int]] = {}


def derive_generators(p: int, q: int, seed: bytes, count: int) -> tuple[int, ...]:
    # each g_v is keyed by its index, so smaller m is a prefix of larger m
    cached = _generator_cache.setdefault((p, q, seed), [])
    while len(cached) < count:
        cached.append(derive_generator(p, q, seed, len(cached)))
    return tuple(cached[:count])


def generate_params(
    p_bits: int = 1024,
    q_bits: int = 257,
    k: int = 32,
    s_B: int = 1 << 20,
    element_size: int = 32,
    seed: bytes = ZERO_SEED,
) -> SystemParams:
    """Deterministically build a Schnorr group and generator vector.

    q is a ``q_bits``-bit probable prime read from a seed-keyed stream; p is
    the first prime ``q*t + 1`` found scanning even t upward from a
    seed-chosen start. Same arguments always give the same params.
    """
    if len(seed) != 32:
        raise InvalidGeometry("seed must be 32 bytes")
    if q_bits < 2 or p_bits <= q_bits:
        raise InvalidGeometry(f"need 2 <= q_bits < p_bits, got q_bits={q_bits}, p_bits={p_bits}")
    if element_size < 1 or element_size * 8 >= q_bits:
        raise InvalidGeometry(f"element_size*8 = {element_size * 8} must be < q_bits = {q_bits}")
    if k < 1 or s_B < k:
        raise InvalidGeometry(f"need k >= 1 and s_B >= k, got k={k}, s_B={s_B}")
    p, q = _group(p_bits, q_bits, bytes(seed))
    m = fragment_elements(s_B, k, element_size)
    g = derive_generators(p, q, bytes(seed), m)
    return SystemParams(p=p, q=q, g=g, k=k, m=m, element_size=element_size, s_B=s_B, seed=bytes(seed))


def profile_params(name: str, k: int, s_B: int, seed: bytes = ZERO_SEED) -> SystemParams:
    try:
        p_bits, q_bits, element_size = PROFILES[name]
    except KeyError:
        raise InvalidGeometry(f"unknown profile {name!r}") from None
    return generate_params(p_bits, q_bits, k, s_B, element_size, seed)


def with_geometry(params: SystemParams, k: int, s_B: int) -> SystemParams:
    """Same group and seed, different (k, s_B); generators extended or cut."""
    m = fragment_elements(s_B, k, params.element_size)
    g = derive_generators(params.p, params.q, params.seed, m)
    return replace(params, g=g, k=k, m=m, s_B=s_B)


def toy_params() -> SystemParams:
    """p=23, q=11, g=(2,4); elements are supplied directly (no byte packing)."""
    return SystemParams(p=23, q=11, g=(2, 4), k=2, m=2, element_size=0, s_B=0)


def validate_params(params: SystemParams) -> ValidationReport:
    report = ValidationReport()
    fail = report.failures.append
    p, q = params.p, params.q
    if not is_probable_prime(q):
        fail("q not prime")
    if not is_probable_prime(p):
        fail("p not prime")
    if q <= 0 or (p - 1) % q:
        fail("q does not divide p-1")
    if len(params.g) != params.m:
        fail(f"generator count {len(params.g)} != m={params.m}")
    for v, gv in enumerate(params.g):
        if gv == 1:
            fail(f"generator {v} equals identity")
        elif not 1 < gv < p:
            fail(f"generator {v} outside [2, p-1]")
        elif q > 0 and gmpy2.powmod(gv, q, p) != 1:
            fail(f"generator {v} does not have order q")
    if params.k < 1 or params.m < 1:
        fail("k and m must be positive")
    if params.element_size:
        if params.element_size * 8 >= q.bit_length():
            fail("element_size*8 >= |q|: packed chunks may not be canonical")
        if params.k >= 1 and params.m != fragment_elements(params.s_B, params.k, params.element_size):
            fail("m inconsistent with s_B, k and element_size")
    if len(params.seed) != 32:
        fail("seed must be 32 bytes")
    return report


def _fixed(value: int, width: int) -> bytes:
    return value.to_bytes(width, "big")


def serialize_params(params: SystemParams) -> bytes:
    p_mag = params.p.to_bytes(params.p_bytes, "big")
    q_mag = params.q.to_bytes(params.q_bytes, "big")
    width = params.p_bytes
    parts = [
        MAGIC,
        bytes([VERSION]),
        struct.pack(">I", len(p_mag)),
        p_mag,
        struct.pack(">I", len(q_mag)),
        q_mag,
        struct.pack(">I", len(params.g)),
        *(_fixed(gv, width) for gv in params.g),
        struct.pack(">II", params.k, params.element_size),
        struct.pack(">Q", params.s_B),
        params.seed,
    ]
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise MalformedEncoding(f"truncated at offset {self.pos} (wanted {n} bytes)")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self.take(8))[0]


def parse_params(data: bytes) -> SystemParams:
    r = _Reader(bytes(data))
    if r.take(4) != MAGIC:
        raise MalformedEncoding("bad magic")
    if r.take(1)[0] != VERSION:
        raise MalformedEncoding("unsupported version")
    p = int.from_bytes(r.take(r.u32()), "big")
    q = int.from_bytes(r.take(r.u32()), "big")
    if p < 2 or q < 2:
        raise MalformedEncoding("p and q must be at least 2")
    m = r.u32()
    width = (p.bit_length() + 7) // 8
    g = tuple(int.from_bytes(r.take(width), "big") for _ in range(m))
    k, element_size = r.u32(), r.u32()
    s_B = r.u64()
    seed = r.take(32)
    if r.pos != len(r.data):
        raise MalformedEncoding(f"{len(r.data) - r.pos} trailing bytes")
    return SystemParams(p=p, q=q, g=g, k=k, m=m, element_size=element_size, s_B=s_B, seed=seed)


def encode_group_element(params: SystemParams, value: int) -> bytes:
    return value.to_bytes(params.p_bytes, "big")


def decode_group_element(params: SystemParams, data: bytes) -> int:
    if len(data) != params.p_bytes:
        raise MalformedEncoding(f"group element must be {params.p_bytes} bytes")
    return int.from_bytes(data, "big")


def seed_from_hex(text: str) -> bytes:
    raw = bytes.fromhex(text)
    if len(raw) > 32:
        raise ValueError("seed longer than 32 bytes")
    return raw.rjust(32, b"\0")

