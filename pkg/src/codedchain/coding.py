"""Random linear coding of blocks over Z_q.

A block is packed into k fragments of m field elements. A node ``i``
stores, for block ``j``, ``r`` coded fragments; coded fragment ``u`` is
``sum_l alpha[l] * F_l`` where ``alpha`` is derived from ``(seed, i, j, u)``
so any peer can recompute it. Coefficients are never taken from the wire.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import (
    BlockTooLarge,
    CorruptLayout,
    DimensionMismatch,
    ElementOutOfRange,
    InvalidDegree,
    InvalidGeometry,
    MalformedEncoding,
    RankDeficient,
)
from .group_params import LENGTH_PREFIX, SystemParams
from .prf import XofStream, encode_key

Fragment = tuple[int, ...]


@dataclass(frozen=True)
class BlockLayout:
    block_len: int
    k: int
    m: int
    element_size: int

    @property
    def capacity(self) -> int:
        return self.k * self.m * self.element_size

    @classmethod
    def for_params(cls, params: SystemParams, block_len: int) -> "BlockLayout":
        return cls(block_len, params.k, params.m, params.element_size)


@dataclass(frozen=True)
class CoeffVector:
    node_id: int
    block_id: int
    index: int
    coeffs: tuple[int, ...]
    degree: int

    @property
    def origin(self) -> tuple[int, int, int]:
        return (self.node_id, self.block_id, self.index)

    @property
    def support(self) -> list[int]:
        return [l for l, a in enumerate(self.coeffs) if a]


@dataclass(frozen=True)
class CodedFragment:
    origin: tuple[int, int, int]  # (node_id i, block_id j, index u)
    elements: tuple[int, ...]

    @property
    def node_id(self) -> int:
        return self.origin[0]

    @property
    def block_id(self) -> int:
        return self.origin[1]

    @property
    def index(self) -> int:
        return self.origin[2]

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __getitem__(self, v):
        return self.elements[v]


# --- block <-> fragments ---------------------------------------------------

def split_block(params: SystemParams, block: bytes) -> tuple[list[Fragment], BlockLayout]:
    """Pack ``len || block || zero padding`` into k fragments of m elements.

    Chunk t (``element_size`` bytes, big-endian) lands in fragment t // m at
    position t % m.
    """
    es = params.element_size
    if es < 1:
        raise InvalidGeometry("params carry no byte packing (element_size = 0)")
    if len(block) > params.s_B:
        raise BlockTooLarge(f"block of {len(block)} bytes exceeds s_B={params.s_B}")
    layout = BlockLayout.for_params(params, len(block))
    if layout.capacity < len(block) + LENGTH_PREFIX:
        raise InvalidGeometry("k*m*element_size leaves no room for the length prefix")
    payload = len(block).to_bytes(LENGTH_PREFIX, "big") + bytes(block)
    payload += bytes(layout.capacity - len(payload))
    frag_bytes = params.m * es
    fragments = []
    for l in range(params.k):
        chunk = payload[l * frag_bytes:(l + 1) * frag_bytes]
        fragments.append(tuple(int.from_bytes(chunk[v:v + es], "big") for v in range(0, frag_bytes, es)))
    return fragments, layout


def reassemble_block(params: SystemParams, fragments: Sequence[Sequence[int]], layout: BlockLayout) -> bytes:
    es = layout.element_size
    if len(fragments) != layout.k:
        raise DimensionMismatch(f"{len(fragments)} fragments, expected k={layout.k}")
    limit = 1 << (8 * es)
    parts = []
    for frag in fragments:
        if len(frag) != layout.m:
            raise DimensionMismatch(f"fragment has {len(frag)} elements, expected m={layout.m}")
        for x in frag:
            if not 0 <= x < limit:
                raise CorruptLayout(f"element {x} does not fit in {es} bytes")
            parts.append(x.to_bytes(es, "big"))
    payload = b"".join(parts)
    length = int.from_bytes(payload[:LENGTH_PREFIX], "big")
    if length > len(payload) - LENGTH_PREFIX:
        raise CorruptLayout(f"length prefix {length} exceeds payload capacity {len(payload) - LENGTH_PREFIX}")
    return payload[LENGTH_PREFIX:LENGTH_PREFIX + length]


# --- coefficients --------------------------------------------------------------

def coefficient_stream(params: SystemParams, i: int, j: int, u: int) -> XofStream:
    key = encode_key(b"codedchain/alpha", params.seed, i.to_bytes(8, "big"), j.to_bytes(8, "big"), u.to_bytes(4, "big"))
    return XofStream(key)


def derive_coefficients(params: SystemParams, i: int, j: int, u: int, d: int | None = None) -> CoeffVector:
    """The k coefficients alpha^(i,j)_{k*u + l}, l = 0..k-1.

    d = k: k uniform draws in [0, q), redrawn while all zero.
    d < k: d distinct positions by partial Fisher-Yates, each with a
    nonzero coefficient in [1, q).
    """
    k, q = params.k, params.q
    if d is None:
        d = k
    if not 1 <= d <= k:
        raise InvalidDegree(f"degree {d} outside [1, {k}]")
    stream = coefficient_stream(params, i, j, u)
    if d == k:
        while True:
            coeffs = [stream.randbelow(q) for _ in range(k)]
            if any(coeffs):
                break
    else:
        positions = list(range(k))
        for t in range(d):
            s = t + stream.randbelow(k - t)
            positions[t], positions[s] = positions[s], positions[t]
        coeffs = [0] * k
        for pos in positions[:d]:
            coeffs[pos] = 1 + stream.randbelow(q - 1)
    return CoeffVector(i, j, u, tuple(coeffs), d)


# --- encode / decode -------------------------------------------------------------

def encode_fragment(params: SystemParams, fragments: Sequence[Sequence[int]], cv: CoeffVector) -> CodedFragment:
    """Element v of the output is sum_l alpha_l * f_{l,v} mod q."""
    if len(fragments) != len(cv.coeffs):
        raise DimensionMismatch(f"{len(fragments)} fragments vs {len(cv.coeffs)} coefficients")
    q = params.q
    m = len(fragments[0]) if fragments else 0
    acc = [0] * m
    for a, frag in zip(cv.coeffs, fragments):
        if not a:
            continue
        if len(frag) != m:
            raise DimensionMismatch("fragments differ in length")
        acc = [x + a * f for x, f in zip(acc, frag)]
    return CodedFragment(cv.origin, tuple(x % q for x in acc))


class Decoder:
    """Incremental Gaussian elimination over Z_q on rows ``[alpha | data]``.

    Rows are kept in echelon form with unit pivots; a new row is reduced
    against existing pivots in ascending column order. Dependent rows are
    rejected, so after any prefix of input the stored rows are the first
    linearly independent ones in input order.
    """

    def __init__(self, q: int, k: int, m: int):
        self.q, self.k, self.m = q, k, m
        self._pivots: dict[int, list[int]] = {}
        self._order: list[int] = []
        self.accepted: list[tuple[int, int, int]] = []

    @property
    def rank(self) -> int:
        return len(self._pivots)

    @property
    def complete(self) -> bool:
        return len(self._pivots) == self.k

    def add(self, coeffs: Sequence[int], data: Sequence[int], origin=None) -> bool:
        """Insert one row; return False if it is linearly dependent."""
        k, q = self.k, self.q
        if len(coeffs) != k or len(data) != self.m:
            raise DimensionMismatch("row width does not match decoder geometry")
        if self.complete:
            return False
        row = [a % q for a in coeffs]
        row.extend(data)
        for c in self._order:
            f = row[c] % q
            if f:
                piv = self._pivots[c]
                # lazy reduction; pivot rows are zero left of c
                row[c:] = [x - f * y for x, y in zip(row[c:], piv[c:])]
        lead = next((c for c in range(k) if row[c] % q), None)
        if lead is None:
            return False
        inv = pow(row[lead] % q, -1, q)
        self._pivots[lead] = [x * inv % q for x in row]
        self._order.append(lead)
        self._order.sort()
        self.accepted.append(origin)
        return True

    def solve(self) -> list[Fragment]:
        if not self.complete:
            raise RankDeficient(self.rank, self.k)
        k, q = self.k, self.q
        solution: list[Fragment] = [()] * k
        # back substitution on the data columns only
        for c in range(k - 1, -1, -1):
            row = self._pivots[c]
            acc = row[k:]
            for c2 in range(c + 1, k):
                f = row[c2]
                if f:
                    acc = [x - f * y for x, y in zip(acc, solution[c2])]
            solution[c] = tuple(x % q for x in acc)
        return solution


def decode_block(params: SystemParams, coded: Iterable[tuple[CoeffVector, CodedFragment]]) -> list[Fragment]:
    """Recover the k source fragments from >= k (coefficients, fragment) pairs.

    Uses the first k linearly independent rows in input order; raises
    :class:`RankDeficient` when fewer exist.
    """
    decoder = Decoder(params.q, params.k, params.m)
    block_id = None
    for cv, frag in coded:
        if block_id is None:
            block_id = cv.block_id
        if cv.block_id != block_id or frag.origin != cv.origin:
            raise DimensionMismatch(f"row {cv.origin} does not match fragment {frag.origin} / block {block_id}")
        decoder.add(cv.coeffs, frag.elements, cv.origin)
        if decoder.complete:
            break
    return decoder.solve()


# --- wire forms ---------------------------------------------------------------------

def fragment_to_bytes(params: SystemParams, elements: Sequence[int]) -> bytes:
    width = params.q_bytes
    return struct.pack(">I", len(elements)) + b"".join(x.to_bytes(width, "big") for x in elements)


def fragment_from_bytes(params: SystemParams, data: bytes) -> Fragment:
    if len(data) < 4:
        raise MalformedEncoding("fragment shorter than its count field")
    (count,) = struct.unpack(">I", data[:4])
    width = params.q_bytes
    if len(data) != 4 + count * width:
        raise MalformedEncoding(f"fragment body is {len(data) - 4} bytes, expected {count * width}")
    out = tuple(int.from_bytes(data[4 + t * width:4 + (t + 1) * width], "big") for t in range(count))
    if any(x >= params.q for x in out):
        raise ElementOutOfRange("element >= q in encoded fragment")
    return out


def coded_fragment_to_bytes(params: SystemParams, frag: CodedFragment) -> bytes:
    i, j, u = frag.origin
    return struct.pack(">QQI", i, j, u) + fragment_to_bytes(params, frag.elements)


def coded_fragment_from_bytes(params: SystemParams, data: bytes) -> CodedFragment:
    if len(data) < 20:
        raise MalformedEncoding("coded fragment shorter than its header")
    i, j, u = struct.unpack(">QQI", data[:20])
    return CodedFragment((i, j, u), fragment_from_bytes(params, data[20:]))
