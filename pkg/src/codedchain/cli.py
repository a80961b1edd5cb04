"""``codedchain`` command-line entry point.

Subcommands::

    gen-params  write a CCLS parameter file
    encode      ingest a file as one LS node and write its store directory
    recover     rebuild the file from a store directory via a loopback peer
    simulate    run a seeded network scenario, CSV of per-recovery metrics
    plan        compression factor and optimal k (``--table`` for the k x r sweep)
    bench       encode / hash / combine timings, or ``--check`` a bench CSV

Exit codes: 0 ok, 2 usage, 3 verification failure, 4 recovery failure, 5 I/O.

simulate CSV columns: recovery, block_id, recoverer, block_len, success,
exact, hashes_fetched, fragments_fetched, bad_hashes, bad_fragments,
blacklisted, epsilon, t_hash, t_fragment, t_decode. The last row has
``summary`` in the first column and holds totals, mean epsilon and summed
phase times.

bench CSV columns: operation, k, d, block_size, trial_count, mean, min, max
(seconds).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from . import bench, netsim, planner
from .coding import coded_fragment_from_bytes, coded_fragment_to_bytes
from .errors import (
    BlockTooLarge,
    CodedChainError,
    CorruptLayout,
    InvalidArgument,
    InvalidDegree,
    InvalidGeometry,
    InvalidSuite,
    MalformedEncoding,
    ManifestMismatch,
    ManifestUnavailable,
    RecoveryFailed,
    TamperedTrace,
    UnsolvableScenario,
)
from .group_params import (
    PROFILES,
    ZERO_SEED,
    SystemParams,
    parse_params,
    profile_params,
    seed_from_hex,
    serialize_params,
    validate_params,
)
from .node_protocol import (
    LocalDirectory,
    NodeState,
    StoredBlock,
    ingest_block,
    parse_manifest,
    recover_block,
    serialize_manifest,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VERIFY = 3
EXIT_RECOVERY = 4
EXIT_IO = 5

STORE_MANIFEST = "manifest.txt"
STORE_META = "store.txt"
STORE_HASHES = "hashes.txt"


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _exit_code(exc: CodedChainError) -> int:
    if isinstance(exc, (RecoveryFailed, ManifestUnavailable, UnsolvableScenario)):
        return EXIT_RECOVERY
    if isinstance(exc, (TamperedTrace, ManifestMismatch, CorruptLayout)):
        return EXIT_VERIFY
    if isinstance(exc, (MalformedEncoding, BlockTooLarge)):
        return EXIT_IO
    if isinstance(exc, (InvalidArgument, InvalidGeometry, InvalidSuite, InvalidDegree)):
        return EXIT_USAGE
    return EXIT_VERIFY


def _read_bytes(path: str, what: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except FileNotFoundError:
        raise CliError(f"{what} not found: {path}", EXIT_IO) from None
    except OSError as exc:
        raise CliError(f"cannot read {what} {path}: {exc.strerror}", EXIT_IO) from None


def _write(path: str | None, data: str | bytes) -> None:
    if path is None or path == "-":
        if isinstance(data, bytes):
            sys.stdout.buffer.write(data)
        else:
            sys.stdout.write(data)
        return
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        if isinstance(data, bytes):
            Path(path).write_bytes(data)
        else:
            Path(path).write_text(data)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror}", EXIT_IO) from None


def _seed(args) -> bytes:
    if args.seed is None:
        return ZERO_SEED
    try:
        return seed_from_hex(args.seed)
    except (ValueError, InvalidGeometry) as exc:
        raise CliError(f"--seed: {exc}", EXIT_USAGE) from None


def _load_params(args, k: int | None = None, s_B: int | None = None) -> SystemParams:
    if args.params:
        params = parse_params(_read_bytes(args.params, "params file"))
        report = validate_params(params)
        if not report:
            raise CliError("params file failed validation: " + "; ".join(report.failures), EXIT_VERIFY)
        return params
    return profile_params(args.profile, k or 32, s_B or planner.DEFAULT_S_B, _seed(args))


def _int_list(text: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("values must be positive integers")
    return values


# --- subcommands -----------------------------------------------------------------------

def cmd_gen_params(args) -> int:
    params = profile_params(args.profile, args.k or 32, args.sB or planner.DEFAULT_S_B, _seed(args))
    _write(args.out, serialize_params(params))
    print(f"p: {params.p.bit_length()} bits, q: {params.q.bit_length()} bits, k={params.k}, m={params.m}", file=sys.stderr)
    return EXIT_OK


def cmd_encode(args) -> int:
    """Ingest one file as node 0 and write fragments, hashes and manifest to --out."""
    data = _read_bytes(args.input, "input file")
    params = _load_params(args, args.k, max(len(data), args.sB or 0, args.k or 32))
    r = args.r or params.k
    state = NodeState(node_id=0, r=r, degree=args.d)
    ingest_block(state, params, args.block_id, data)
    entry = state.store[args.block_id]
    out = Path(args.out or "store")
    _write(str(out / STORE_MANIFEST), serialize_manifest(params, entry.manifest))
    _write(str(out / STORE_META), f"node_id=0\nblock_id={args.block_id}\nr={r}\nd={args.d or params.k}\n")
    width = 2 * params.p_bytes
    _write(str(out / STORE_HASHES), "".join(f"{h:0{width}x}\n" for h in entry.hashes))
    for u, frag in enumerate(entry.fragments):
        _write(str(out / f"fragment_{u}.bin"), coded_fragment_to_bytes(params, frag))
    if not args.params:
        _write(str(out / "params.ccls"), serialize_params(params))
    print(f"stored {r} coded fragments of block {args.block_id} in {out}", file=sys.stderr)
    return EXIT_OK


def _load_store(params: SystemParams, store: Path) -> tuple[NodeState, int, int]:
    meta: dict[str, int] = {}
    for line in _read_bytes(str(store / STORE_META), "store metadata").decode().splitlines():
        key, _, value = line.partition("=")
        meta[key.strip()] = int(value)
    manifest = parse_manifest(params, _read_bytes(str(store / STORE_MANIFEST), "manifest").decode())
    hashes = [int(line, 16) for line in _read_bytes(str(store / STORE_HASHES), "hashes").decode().split()]
    fragments = [
        coded_fragment_from_bytes(params, _read_bytes(str(store / f"fragment_{u}.bin"), "fragment"))
        for u in range(meta["r"])
    ]
    state = NodeState(node_id=meta["node_id"], r=meta["r"], degree=meta["d"])
    state.store[meta["block_id"]] = StoredBlock(fragments, hashes, manifest)
    return state, meta["block_id"], meta["d"]


def cmd_recover(args) -> int:
    store = Path(args.store)
    if not args.params and (store / "params.ccls").exists():
        args.params = str(store / "params.ccls")
    params = _load_params(args, args.k, args.sB)
    peer, j, d = _load_store(params, store)
    recoverer = NodeState(node_id=peer.node_id + 1, r=peer.r, degree=d)
    block, trace = recover_block(recoverer, params, j, LocalDirectory([peer]), manifest=peer.store[j].manifest)
    _write(args.out, block)
    print(f"recovered {len(block)} bytes from {trace.fragments_fetched} fragments", file=sys.stderr)
    return EXIT_OK


def _scenario(args) -> netsim.ScenarioConfig:
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise CliError(f"config not found: {args.config}", EXIT_IO)
        config = netsim.ScenarioConfig.load(path)
    else:
        config = netsim.ScenarioConfig()
    for name, value in (("k", args.k), ("r", args.r), ("d", args.d), ("n_nodes", args.nodes), ("block_count", args.blocks)):
        if value is not None:
            setattr(config, name, value)
    if args.sB is not None:
        config.block_size = args.sB
    if args.seed is not None:
        config.rng_seed = int.from_bytes(_seed(args), "big")
    config.validate()
    return config


def cmd_simulate(args) -> int:
    config = _scenario(args)
    params = _load_params(args, config.k, config.block_size) if args.params else None
    metrics = netsim.run_scenario(config, params)
    _write(args.out, metrics.to_csv())
    if args.replay:
        for trace in metrics.traces:
            netsim.replay_trace(metrics.params, trace)
    if metrics.unsolvable:
        print(f"unsolvable scenario: {metrics.unsolvable}", file=sys.stderr)
    print(
        f"{metrics.recoveries_succeeded}/{metrics.recoveries_attempted} recovered, "
        f"{metrics.peers_blacklisted} peers blacklisted, epsilon={metrics.measured_epsilon:.4g}",
        file=sys.stderr,
    )
    return EXIT_OK if metrics.recoveries_exact == metrics.recoveries_attempted else EXIT_RECOVERY


def cmd_plan(args) -> int:
    S_B = args.sB or planner.DEFAULT_S_B
    S_H = args.sH or planner.DEFAULT_S_H
    if args.table:
        plans = planner.sweep_table(args.k_list or planner.TABLE_K, args.r_list or planner.TABLE_R, S_B, S_H)
    else:
        r = args.r or 1
        k = args.k or planner.optimal_k(r, S_B, S_H)
        plans = [planner.StoragePlan.evaluate(k, r, S_B, S_H)]
        print(f"k_opt={plans[0].k_opt} for r={r}", file=sys.stderr)
    _write(args.out, planner.table_csv(plans))
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.check:
        records = bench.records_from_csv(_read_bytes(args.check, "bench CSV").decode())
        checks = bench.check_shapes(records, size=args.size_for_check)
        for check in checks:
            print(f"{'PASS' if check.passed else 'FAIL'} {check.name}: {check.detail}")
        if not checks:
            raise CliError("bench CSV has no series at the checked block size", EXIT_VERIFY)
        return EXIT_OK if all(c.passed for c in checks) else EXIT_VERIFY
    ks = args.k_list or list(bench.DEFAULT_KS)
    sizes = args.sizes or list(bench.DEFAULT_SIZES)
    base = _load_params(args, min(ks), max(sizes)) if args.params else None
    degrees = [args.d, None] if args.d else [4, None]
    records = bench.run_bench(args.suite, base, ks, sizes, degrees, args.trials)
    _write(args.out, bench.records_to_csv(records))
    return EXIT_OK


# --- parser ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--params", metavar="FILE", help="CCLS parameter file")
    shared.add_argument("--profile", choices=sorted(PROFILES), default="production", help="group size when no --params")
    shared.add_argument("--seed", metavar="HEX32", help="32-byte seed as 64 hex digits")
    shared.add_argument("--out", metavar="PATH", help="output path (default stdout)")
    shared.add_argument("--k", type=int, help="fragments per block")
    shared.add_argument("--r", type=int, help="coded fragments stored per node")
    shared.add_argument("--d", type=int, help="coding degree (default k)")
    shared.add_argument("--sB", type=int, help="block size in bytes")
    shared.add_argument("--sH", type=float, help="hash size in bytes")
    shared.add_argument("--trials", type=int, default=bench.DEFAULT_TRIALS, help="timed trials per bench point")

    parser = argparse.ArgumentParser(
        prog="codedchain",
        description=__doc__.split("\n\n")[0],
        epilog=__doc__.split("\n\n", 1)[1],
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-params", parents=[shared], help="generate system parameters")
    p.set_defaults(func=cmd_gen_params)

    p = sub.add_parser("encode", parents=[shared], help="encode a file into a node store")
    p.add_argument("input", help="file to encode as one block")
    p.add_argument("--block-id", type=int, default=0)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("recover", parents=[shared], help="recover a file from a node store")
    p.add_argument("store", help="directory written by encode")
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("simulate", parents=[shared], help="run a network scenario")
    p.add_argument("--config", metavar="FILE", help="key = value scenario file")
    p.add_argument("--nodes", type=int)
    p.add_argument("--blocks", type=int)
    p.add_argument("--replay", action="store_true", help="re-verify every trace after the run")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("plan", parents=[shared], help="storage cost planner")
    p.add_argument("--table", action="store_true", help="emit the k x r sweep")
    p.add_argument("--k-list", type=_int_list)
    p.add_argument("--r-list", type=_int_list)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("bench", parents=[shared], help="timing benchmarks")
    p.add_argument("--suite", default="all", help="encode, hash, combine or all")
    p.add_argument("--k-list", type=_int_list)
    p.add_argument("--sizes", type=_int_list)
    p.add_argument("--check", metavar="CSV", help="verify shape properties of an existing bench CSV")
    p.add_argument("--size-for-check", type=int, default=1024 * 1024)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except CliError as exc:
        print(f"codedchain: {exc}", file=sys.stderr)
        return exc.code
    except CodedChainError as exc:
        print(f"codedchain: {type(exc).__name__}: {exc}", file=sys.stderr)
        return _exit_code(exc)
    except OSError as exc:
        print(f"codedchain: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
