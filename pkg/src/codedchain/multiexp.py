"""Simultaneous multi-exponentiation modulo a prime.

Two engines:

* :func:`multi_exp`: bucket (Pippenger-style) windowed evaluation of
  ``prod b_i^e_i mod p`` for arbitrary bases. All bases share one chain of
  squarings; each window costs one multiplication per base plus a bucket
  fold.
* :class:`FixedBaseTable`: for a base vector that never changes (the hash
  generators), precomputes ``b_v^(256^w)`` so every exponent byte becomes a
  single bucket multiplication and no squarings remain at evaluation time.

Arithmetic runs on gmpy2 ``mpz``; results are returned as Python ``int``.
"""

from __future__ import annotations

from typing import Iterable, Sequence

from gmpy2 import mpz, powmod

# below this many nonzero terms independent powmod calls (GMP's C loop) win
SMALL_TERMS = 12


def _fold_buckets(buckets: list, modulus) -> mpz:
    """Return prod_b buckets[b]^b using the running-product trick."""
    running = mpz(1)
    acc = mpz(1)
    started = False
    for b in range(len(buckets) - 1, 0, -1):
        bucket = buckets[b]
        if bucket is not None:
            running = running * bucket % modulus
            started = True
        if started:
            acc = acc * running % modulus
    return acc


def _best_window(n: int, bits: int) -> int:
    best, best_cost = 1, None
    for c in range(1, 17):
        windows = -(-bits // c)
        cost = windows * (n + 2 * (1 << c)) + bits
        if best_cost is None or cost < best_cost:
            best, best_cost = c, cost
    return best


def naive_multi_exp(bases: Iterable[int], exponents: Iterable[int], modulus: int) -> int:
    p = mpz(modulus)
    acc = mpz(1) % p
    for b, e in zip(bases, exponents):
        if e:
            acc = acc * powmod(b, e, p) % p
    return int(acc)


def multi_exp(bases: Sequence[int], exponents: Sequence[int], modulus: int) -> int:
    """prod bases[i]^exponents[i] mod modulus; exponents must be >= 0."""
    p = mpz(modulus)
    terms = [(mpz(b) % p, int(e)) for b, e in zip(bases, exponents) if e]
    if len(terms) < SMALL_TERMS:
        return naive_multi_exp((b for b, _ in terms), (e for _, e in terms), modulus)
    bits = max(e.bit_length() for _, e in terms)
    c = _best_window(len(terms), bits)
    mask = (1 << c) - 1
    windows = -(-bits // c)
    shift_pow = 1 << c
    result = mpz(1)
    for w in range(windows - 1, -1, -1):
        if w != windows - 1:
            result = powmod(result, shift_pow, p)
        buckets: list = [None] * (1 << c)
        shift = w * c
        for base, e in terms:
            digit = (e >> shift) & mask
            if digit:
                cur = buckets[digit]
                buckets[digit] = base if cur is None else cur * base % p
        result = result * _fold_buckets(buckets, p) % p
    return int(result % p)


class FixedBaseTable:
    """Byte-window power table for a fixed base vector.

    ``rows[v][w] = bases[v]^(256^w) mod p`` for ``w < windows`` where
    ``windows = ceil(exponent_bits / 8)``. Evaluation splits each exponent
    into little-endian bytes, drops ``rows[v][w]`` into bucket ``byte``, then
    folds the 255 buckets once.
    """

    def __init__(self, bases: Sequence[int], modulus: int, exponent_bits: int):
        self.modulus = mpz(modulus)
        self.windows = max(1, (exponent_bits + 7) // 8)
        self.bases = [mpz(b) % self.modulus for b in bases]
        self._rows: list[list[mpz]] | None = None
        # rough cost of an 8-bit powmod in units of one Python-level mulmod
        self._byte_pow_cost = 4 if modulus.bit_length() <= 256 else 10

    @property
    def rows(self) -> list[list[mpz]]:
        if self._rows is None:
            p = self.modulus
            rows = []
            for b in self.bases:
                row = [b]
                for _ in range(self.windows - 1):
                    row.append(powmod(row[-1], 256, p))
                rows.append(row)
            self._rows = rows
        return self._rows

    def __len__(self) -> int:
        return len(self.bases)

    def multi_exp(self, exponents: Sequence[int]) -> int:
        """prod bases[v]^exponents[v] mod p, exponents in [0, 256^windows)."""
        p = self.modulus
        nonzero = [(v, e) for v, e in enumerate(exponents) if e]
        if len(nonzero) < 4:
            acc = mpz(1) % p
            for v, e in nonzero:
                acc = acc * powmod(self.bases[v], e, p) % p
            return int(acc)
        rows = self.rows
        width = self.windows
        digits = len(nonzero) * width
        if digits * self._byte_pow_cost < digits + 510:
            # too few digits to amortise the 255-bucket fold
            acc = mpz(1) % p
            for v, e in nonzero:
                for t, byte in zip(rows[v], e.to_bytes(width, "little")):
                    if byte:
                        acc = acc * powmod(t, byte, p) % p
            return int(acc)
        buckets: list = [None] * 256
        for v, e in nonzero:
            for t, byte in zip(rows[v], e.to_bytes(width, "little")):
                if byte:
                    cur = buckets[byte]
                    buckets[byte] = t if cur is None else cur * t % p
        return int(_fold_buckets(buckets, p) % p)
