"""Micro-benchmarks for encoding, fragment hashing and hash combination.

Each point runs one untimed warm-up trial followed by ``trials`` timed
ones. Inputs are drawn from a seeded stream so repeated runs time the same
work.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import asdict, dataclass, fields
from typing import Callable, Iterable, Sequence

from .coding import derive_coefficients, encode_fragment, split_block
from .errors import InvalidArgument, InvalidSuite
from .group_params import SystemParams, fragment_elements, profile_params, with_geometry
from .homomorphic_hash import combine_hashes, hash_block, hash_fragment
from .prf import XofStream, encode_key

SUITES = ("encode", "hash", "combine")
DEFAULT_KS = (4, 32, 64, 128, 256)
DEFAULT_SIZES = (32 * 1024, 1024 * 1024)
DEFAULT_TRIALS = 50
MIN_TRIALS = 10
FLAT_RATIO = 2.0
SLOPE_RANGE = (0.8, 1.2)


@dataclass(frozen=True)
class BenchRecord:
    operation: str
    k: int
    d: int
    block_size: int
    trial_count: int
    mean: float
    min: float
    max: float

    def __post_init__(self) -> None:
        if self.trial_count < 1:
            raise InvalidArgument("trial_count must be >= 1")


BENCH_COLUMNS = [f.name for f in fields(BenchRecord)]


def time_trials(fn: Callable[[int], object], trials: int) -> tuple[float, float, float]:
    """(mean, min, max) seconds of fn(t) for t = 1..trials after fn(0) as warm-up."""
    fn(0)
    samples = []
    for t in range(1, trials + 1):
        start = time.perf_counter()
        fn(t)
        samples.append(time.perf_counter() - start)
    mean = math.fsum(samples) / len(samples)
    # clamp float summation drift so min <= mean <= max holds exactly
    return min(max(mean, min(samples)), max(samples)), min(samples), max(samples)


def _block(seed: bytes, size: int) -> bytes:
    return XofStream(encode_key(b"bench/block", seed, size)).read(size)


def _degrees(degrees: Sequence[int | None], k: int) -> list[int]:
    # None means d = k; at k = 4 the d=4 and d=k points coincide and run once
    return sorted({min(d or k, k) for d in degrees})


def _geometry(base: SystemParams, k: int, size: int) -> SystemParams:
    return with_geometry(base, k, size)


def bench_encode(base: SystemParams, ks: Sequence[int], sizes: Sequence[int], degrees: Sequence[int | None], trials: int) -> list[BenchRecord]:
    """Time to produce one coded fragment from already split source fragments."""
    out = []
    for size in sizes:
        block = _block(base.seed, size)
        for k in ks:
            params = _geometry(base, k, size)
            fragments, _ = split_block(params, block)
            for degree in _degrees(degrees, k):
                cvs = [derive_coefficients(params, 0, 0, t, degree) for t in range(trials + 1)]
                mean, lo, hi = time_trials(lambda t: encode_fragment(params, fragments, cvs[t]), trials)
                out.append(BenchRecord("encode", k, degree, size, trials, mean, lo, hi))
    return out


def bench_hash(base: SystemParams, ks: Sequence[int], sizes: Sequence[int], trials: int) -> list[BenchRecord]:
    """Time to hash one source fragment of m = ceil((size + 8) / k / element_size) elements."""
    out = []
    for size in sizes:
        block = _block(base.seed, size)
        for k in ks:
            params = _geometry(base, k, size)
            fragments, _ = split_block(params, block)
            params.generator_table.rows  # table build is one-off setup, not hashing
            mean, lo, hi = time_trials(lambda t: hash_fragment(params, fragments[t % k]), trials)
            out.append(BenchRecord("hash", k, k, size, trials, mean, lo, hi))
    return out


def bench_combine(base: SystemParams, ks: Sequence[int], sizes: Sequence[int], degrees: Sequence[int | None], trials: int) -> list[BenchRecord]:
    """Time to derive a coded fragment's hash from the k source hashes."""
    out = []
    for size in sizes:
        block = _block(base.seed, size)
        for k in ks:
            params = _geometry(base, k, size)
            fragments, _ = split_block(params, block)
            source = hash_block(params, fragments)
            for degree in _degrees(degrees, k):
                cvs = [derive_coefficients(params, 0, 0, t, degree) for t in range(trials + 1)]
                mean, lo, hi = time_trials(lambda t: combine_hashes(params, source, cvs[t]), trials)
                out.append(BenchRecord("combine", k, degree, size, trials, mean, lo, hi))
    return out


def run_bench(
    suite: str,
    base: SystemParams | None = None,
    ks: Sequence[int] = DEFAULT_KS,
    sizes: Sequence[int] = DEFAULT_SIZES,
    degrees: Sequence[int | None] = (4, None),
    trials: int = DEFAULT_TRIALS,
) -> list[BenchRecord]:
    """Run one suite ("encode", "hash", "combine" or "all"); None in degrees means d = k."""
    if suite not in SUITES + ("all",):
        raise InvalidSuite(f"unknown suite {suite!r}; choose from {', '.join(SUITES + ('all',))}")
    if trials < MIN_TRIALS:
        raise InvalidArgument(f"need at least {MIN_TRIALS} trials per point")
    if base is None:
        base = profile_params("production", min(ks), max(sizes))
    records: list[BenchRecord] = []
    if suite in ("encode", "all"):
        records += bench_encode(base, ks, sizes, degrees, trials)
    if suite in ("hash", "all"):
        records += bench_hash(base, ks, sizes, trials)
    if suite in ("combine", "all"):
        records += bench_combine(base, ks, sizes, degrees, trials)
    return records


def records_to_csv(records: Iterable[BenchRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BENCH_COLUMNS)
    for rec in records:
        row = asdict(rec)
        writer.writerow([f"{row[c]:.6e}" if isinstance(row[c], float) else row[c] for c in BENCH_COLUMNS])
    return buf.getvalue()


def records_from_csv(text: str) -> list[BenchRecord]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != BENCH_COLUMNS:
        raise InvalidArgument(f"bench CSV header must be {','.join(BENCH_COLUMNS)}")
    out = []
    for row in reader:
        out.append(BenchRecord(
            row["operation"], int(row["k"]), int(row["d"]), int(row["block_size"]),
            int(row["trial_count"]), float(row["mean"]), float(row["min"]), float(row["max"]),
        ))
    return out


# --- shape checks ---------------------------------------------------------------------

@dataclass(frozen=True)
class ShapeCheck:
    name: str
    passed: bool
    detail: str


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    lx = [math.log(x) for x in xs]
    ly = [math.log(y) for y in ys]
    mx, my = sum(lx) / len(lx), sum(ly) / len(ly)
    return sum((a - mx) * (b - my) for a, b in zip(lx, ly)) / sum((a - mx) ** 2 for a in lx)


def _series(records, operation, size, degree=None, dense=False):
    rows = [r for r in records if r.operation == operation and r.block_size == size]
    if dense:
        rows = [r for r in rows if r.d == r.k]
    elif degree is not None:
        rows = [r for r in rows if r.d == degree]
    return sorted(rows, key=lambda r: r.k)


def check_shapes(records: Sequence[BenchRecord], size: int = 1024 * 1024, element_size: int = 32) -> list[ShapeCheck]:
    """Shape properties expected of the three suites at one block size.

    encode-flat: d=4 encode time max/min < 2 across k.
    hash-decreasing: hash time strictly decreasing in k, log-log slope vs m in [0.8, 1.2].
    combine-increasing: d=k combine time strictly increasing in k.
    combine-sparse: d=4 combine below d=k for every k >= 32.
    """
    checks = []
    enc = _series(records, "encode", size, degree=4)
    if enc:
        means = [r.mean for r in enc]
        ratio = max(means) / min(means)
        checks.append(ShapeCheck("encode-flat", ratio < FLAT_RATIO, f"max/min = {ratio:.3g} over k={[r.k for r in enc]}"))
    hashes = _series(records, "hash", size)
    if len(hashes) >= 2:
        means = [r.mean for r in hashes]
        decreasing = all(a > b for a, b in zip(means, means[1:]))
        ms = [fragment_elements(size, r.k, element_size) for r in hashes]
        slope = loglog_slope(ms, means)
        ok = decreasing and SLOPE_RANGE[0] <= slope <= SLOPE_RANGE[1]
        checks.append(ShapeCheck("hash-decreasing", ok, f"strictly decreasing={decreasing}, slope vs m = {slope:.3f}"))
    dense = _series(records, "combine", size, dense=True)
    if len(dense) >= 2:
        means = [r.mean for r in dense]
        increasing = all(a < b for a, b in zip(means, means[1:]))
        checks.append(ShapeCheck("combine-increasing", increasing, f"d=k means {['%.3g' % x for x in means]}"))
    sparse = {r.k: r.mean for r in _series(records, "combine", size, degree=4)}
    if sparse and dense:
        pairs = [(r.k, sparse[r.k], r.mean) for r in dense if r.k >= 32 and r.k in sparse]
        ok = bool(pairs) and all(s < d for _, s, d in pairs)
        checks.append(ShapeCheck("combine-sparse", ok, f"(k, d=4, d=k) = {[(k, '%.3g' % s, '%.3g' % d) for k, s, d in pairs]}"))
    return checks
