"""Homomorphic fragment hashes in the order-q subgroup of Z_p^*.

``h(F) = prod_v g_v^(f_v) mod p``. Because the map is a group
homomorphism from (Z_q^m, +) to the subgroup, the hash of a linear
combination of fragments equals the matching product of powers of the
source hashes. A verifier who knows the certified source hashes and the
coefficients can therefore check a coded fragment's hash without ever
seeing the source data.
"""

from __future__ import annotations

from typing import Sequence

from .errors import DimensionMismatch, ElementOutOfRange
from .group_params import SystemParams
from .multiexp import multi_exp

Fragment = Sequence[int]
FragmentHash = int


def _coeff_list(coeffs) -> Sequence[int]:
    # accept a bare sequence or anything carrying .coeffs (CoeffVector)
    return getattr(coeffs, "coeffs", coeffs)


def check_fragment(params: SystemParams, fragment: Fragment) -> None:
    if len(fragment) != params.m:
        raise DimensionMismatch(f"fragment has {len(fragment)} elements, expected m={params.m}")
    q = params.q
    for v, x in enumerate(fragment):
        if not 0 <= x < q:
            raise ElementOutOfRange(f"element {v} = {x} not in [0, q)")


def hash_fragment(params: SystemParams, fragment: Fragment) -> FragmentHash:
    check_fragment(params, fragment)
    return params.generator_table.multi_exp(fragment)


def hash_block(params: SystemParams, fragments: Sequence[Fragment]) -> list[FragmentHash]:
    if len(fragments) != params.k:
        raise DimensionMismatch(f"block has {len(fragments)} fragments, expected k={params.k}")
    return [hash_fragment(params, f) for f in fragments]


def combine_hashes(params: SystemParams, source_hashes: Sequence[FragmentHash], coeffs) -> FragmentHash:
    """prod_l source_hashes[l]^(coeffs[l] mod q) mod p.

    Zero coefficients cost nothing, so a degree-d vector touches only d
    hashes.
    """
    coeffs = _coeff_list(coeffs)
    if len(source_hashes) != len(coeffs):
        raise DimensionMismatch(f"{len(source_hashes)} hashes vs {len(coeffs)} coefficients")
    if len(coeffs) != params.k:
        raise DimensionMismatch(f"expected k={params.k} coefficients, got {len(coeffs)}")
    q = params.q
    return multi_exp(source_hashes, [a % q for a in coeffs], params.p)


def verify_coded_hash(params: SystemParams, source_hashes: Sequence[FragmentHash], coeffs, claimed: FragmentHash) -> bool:
    return combine_hashes(params, source_hashes, coeffs) == claimed


def verify_coded_fragment(params: SystemParams, fragment: Fragment, claimed: FragmentHash) -> bool:
    return hash_fragment(params, fragment) == claimed


def in_subgroup(params: SystemParams, value: int) -> bool:
    return 1 <= value < params.p and pow(value, params.q, params.p) == 1
