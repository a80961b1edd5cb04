"""Deterministic byte streams built on SHAKE-256.

Every pseudorandom choice in the package (prime search, generators,
coefficients, simulator decisions) is drawn from an :class:`XofStream` so
that results are bit-identical across runs, platforms and Python versions.
"""

from __future__ import annotations

import hashlib
import struct
from typing import MutableSequence, TypeVar

T = TypeVar("T")


def encode_key(tag: bytes, *fields: int | bytes) -> bytes:
    """Length-unambiguous key: tag, then each field as u32 length + bytes.

    Integers are encoded as 8-byte big-endian (they must fit in 64 bits).
    """
    out = [struct.pack(">I", len(tag)), tag]
    for f in fields:
        if isinstance(f, int):
            f = f.to_bytes(8, "big")
        out.append(struct.pack(">I", len(f)))
        out.append(f)
    return b"".join(out)


class XofStream:
    """Sequential reader over the SHAKE-256 output of ``key``."""

    def __init__(self, key: bytes):
        self._key = key
        self._buf = b""
        self._pos = 0

    def read(self, n: int) -> bytes:
        need = self._pos + n
        if need > len(self._buf):
            size = max(need, 2 * len(self._buf), 256)
            # XOF output of length L is a prefix of any longer output
            self._buf = hashlib.shake_256(self._key).digest(size)
        out = self._buf[self._pos:need]
        self._pos = need
        return out

    def randbits(self, bits: int) -> int:
        nbytes = (bits + 7) // 8
        value = int.from_bytes(self.read(nbytes), "big")
        return value >> (8 * nbytes - bits)

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection sampling.

        Draws are ceil(bitlen(n-1)/8) bytes wide, so a 257-bit bound uses
        264-bit draws.
        """
        if n <= 0:
            raise ValueError("bound must be positive")
        if n == 1:
            return 0
        nbytes = ((n - 1).bit_length() + 7) // 8
        span = 1 << (8 * nbytes)
        limit = span - span % n
        while True:
            x = int.from_bytes(self.read(nbytes), "big")
            if x < limit:
                return x % n

    def randrange(self, lo: int, hi: int) -> int:
        return lo + self.randbelow(hi - lo)

    def shuffle(self, items: MutableSequence[T]) -> None:
        for t in range(len(items) - 1, 0, -1):
            s = self.randbelow(t + 1)
            items[t], items[s] = items[s], items[t]

    def uniform(self) -> float:
        return self.randbits(53) / (1 << 53)
