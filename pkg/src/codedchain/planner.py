"""Storage cost of coded blocks and the k that minimises it.

An LS node keeps, per block of ``S_B`` bytes, ``r`` coded fragments of
``S_B / k`` bytes plus ``k + r`` hashes of ``S_H`` bytes. The compression
factor is stored bytes over block size:

    c(k) = (k + r) * S_H / S_B + r / k

which is convex in k with its real minimum at ``sqrt(r * S_B / S_H)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

from .errors import InvalidArgument

DEFAULT_S_B = 1 << 20
# fitted against the reference cost table; see fit_hash_size
DEFAULT_S_H = 134
TABLE_K = (4, 32, 64, 128, 256)
TABLE_R = (1, 5)


def _positive(**values) -> None:
    for name, value in values.items():
        if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
            raise InvalidArgument(f"{name} must be a positive number, got {value!r}")


def compression_factor(k: int, r: int, S_B: float, S_H: float) -> float:
    _positive(k=k, r=r, S_B=S_B, S_H=S_H)
    return (k + r) * S_H / S_B + r / k


def optimal_k(r: int, S_B: float, S_H: float) -> int:
    """Integer k >= 1 minimising compression_factor; ties go to the smaller k."""
    _positive(r=r, S_B=S_B, S_H=S_H)
    real = math.sqrt(r * S_B / S_H)
    candidates = {max(1, math.floor(real)), max(1, math.ceil(real))}
    return min(sorted(candidates), key=lambda k: compression_factor(k, r, S_B, S_H))


@dataclass(frozen=True)
class StoragePlan:
    k: int
    r: int
    S_B: float
    S_H: float
    c: float
    k_opt: int

    @classmethod
    def evaluate(cls, k: int, r: int, S_B: float = DEFAULT_S_B, S_H: float = DEFAULT_S_H) -> "StoragePlan":
        return cls(k, r, S_B, S_H, compression_factor(k, r, S_B, S_H), optimal_k(r, S_B, S_H))

    @property
    def stored_bytes(self) -> float:
        return self.c * self.S_B


def sweep_table(
    k_list: Sequence[int] = TABLE_K,
    r_list: Sequence[int] = TABLE_R,
    S_B: float = DEFAULT_S_B,
    S_H: float = DEFAULT_S_H,
) -> list[StoragePlan]:
    """Cross product of k and r, k-major, as StoragePlan rows."""
    if not k_list or not r_list:
        raise InvalidArgument("k_list and r_list must be nonempty")
    return [StoragePlan.evaluate(k, r, S_B, S_H) for k in k_list for r in r_list]


def table_csv(plans: Sequence[StoragePlan]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["k", "r", "S_B", "S_H", "c"])
    for plan in plans:
        writer.writerow([plan.k, plan.r, _size(plan.S_B), _size(plan.S_H), f"{plan.c:.6g}"])
    return buf.getvalue()


def _size(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else f"{value:.6g}"


def fit_hash_size(cells: Sequence[tuple[int, int, float]], S_B: float = DEFAULT_S_B) -> float:
    """Least-squares S_H for observed (k, r, c) cells.

    c - r/k = S_H * (k + r) / S_B is linear in S_H, so the fit is closed form.
    """
    if not cells:
        raise InvalidArgument("need at least one (k, r, c) cell")
    _positive(S_B=S_B)
    num = den = 0.0
    for k, r, c in cells:
        _positive(k=k, r=r)
        x = (k + r) / S_B
        num += x * (c - r / k)
        den += x * x
    return num / den
