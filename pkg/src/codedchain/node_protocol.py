"""Low-storage (LS) node: coded ingest, serving, and verified recovery.

Ingest replaces a raw block with r coded fragments, their r hashes and the
block's k certified source hashes. Recovery downloads coded-fragment hashes
from peers, checks each against the source hashes, downloads fragments for
the hashes that passed, checks each fragment against its hash, and only
then feeds it to the decoder. Peers that serve data failing either public
check are blacklisted locally.
"""

from __future__ import annotations

import hashlib
import math
import re
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Protocol, Sequence

from .coding import (
    BlockLayout,
    CodedFragment,
    CoeffVector,
    Decoder,
    coded_fragment_to_bytes,
    derive_coefficients,
    encode_fragment,
    reassemble_block,
    split_block,
)
from .errors import (
    CorruptLayout,
    DimensionMismatch,
    MalformedEncoding,
    ManifestMismatch,
    ManifestUnavailable,
    NotStored,
    PeerUnresponsive,
    RecoveryFailed,
)
from .group_params import SystemParams
from .homomorphic_hash import combine_hashes, hash_block, hash_fragment

DEFAULT_EPSILON = 0.1


class Offense(str, Enum):
    BAD_HASH = "BadHash"
    BAD_FRAGMENT = "BadFragment"
    UNRESPONSIVE = "Unresponsive"


@dataclass(frozen=True)
class BlockManifest:
    block_id: int
    block_len: int
    source_hashes: tuple[int, ...]
    layout: BlockLayout

    @property
    def k(self) -> int:
        return len(self.source_hashes)


@dataclass
class StoredBlock:
    fragments: list[CodedFragment]
    hashes: list[int]
    manifest: BlockManifest


@dataclass(frozen=True)
class PeerReport:
    accused: int
    block_id: int
    index: int
    offense: Offense
    claimed_hash: int | None = None
    fragment_digest: str | None = None
    reporter: int | None = None

    def __post_init__(self) -> None:
        if self.offense is not Offense.UNRESPONSIVE and self.claimed_hash is None:
            raise ValueError("BadHash/BadFragment reports must carry evidence")


@dataclass
class NodeState:
    node_id: int
    r: int
    degree: int | None = None  # None means dense (d = k)
    epsilon: float = DEFAULT_EPSILON
    store: dict[int, StoredBlock] = field(default_factory=dict)
    blacklist: dict[int, set[Offense]] = field(default_factory=dict)
    report_log: list[PeerReport] = field(default_factory=list)

    def is_blacklisted(self, peer: int) -> bool:
        return peer in self.blacklist


# --- manifest file ---------------------------------------------------------------

_MANIFEST_LINE = re.compile(r"^([a-z_]+(?:\[\d+\])?)=([0-9a-f]+)$")


def serialize_manifest(params: SystemParams, manifest: BlockManifest) -> str:
    width = 2 * params.p_bytes
    lines = [
        f"block_id={manifest.block_id}",
        f"block_len={manifest.block_len}",
        f"k={manifest.k}",
        f"element_size={manifest.layout.element_size}",
    ]
    lines += [f"hash[{l}]={h:0{width}x}" for l, h in enumerate(manifest.source_hashes)]
    return "\n".join(lines) + "\n"


def parse_manifest(params: SystemParams, text: str) -> BlockManifest:
    fields: dict[str, str] = {}
    for n, line in enumerate(text.splitlines(), 1):
        match = _MANIFEST_LINE.match(line)
        if not match:
            raise MalformedEncoding(f"manifest line {n}: {line!r}")
        key, value = match.groups()
        if key in fields:
            raise MalformedEncoding(f"manifest line {n}: duplicate key {key}")
        fields[key] = value
    try:
        block_id = int(fields.pop("block_id"))
        block_len = int(fields.pop("block_len"))
        k = int(fields.pop("k"))
        element_size = int(fields.pop("element_size"))
        width = 2 * params.p_bytes
        hashes = []
        for l in range(k):
            value = fields.pop(f"hash[{l}]")
            if len(value) != width:
                raise MalformedEncoding(f"hash[{l}] is not {width} hex digits")
            hashes.append(int(value, 16))
    except KeyError as exc:
        raise MalformedEncoding(f"manifest missing {exc.args[0]}") from None
    except ValueError as exc:
        raise MalformedEncoding(str(exc)) from None
    if fields:
        raise MalformedEncoding(f"unexpected manifest keys: {sorted(fields)}")
    if k != params.k or element_size != params.element_size:
        raise MalformedEncoding("manifest geometry disagrees with params")
    return BlockManifest(block_id, block_len, tuple(hashes), BlockLayout.for_params(params, block_len))


def build_manifest(params: SystemParams, block_id: int, block: bytes) -> BlockManifest:
    fragments, layout = split_block(params, block)
    return BlockManifest(block_id, len(block), tuple(hash_block(params, fragments)), layout)


# --- ingest and serving -------------------------------------------------------------

def coefficients_for(params: SystemParams, state_degree: int | None, i: int, j: int, u: int) -> CoeffVector:
    return derive_coefficients(params, i, j, u, state_degree or params.k)


def ingest_block(
    state: NodeState,
    params: SystemParams,
    j: int,
    block: bytes,
    manifest: BlockManifest | None = None,
) -> NodeState:
    """Replace a (validated) raw block by r coded fragments plus hashes.

    Coded-fragment hashes come from ``combine_hashes`` over the source hashes
    rather than from hashing the coded data.
    """
    fragments, layout = split_block(params, block)
    source_hashes = tuple(hash_block(params, fragments))
    if manifest is None:
        manifest = BlockManifest(j, len(block), source_hashes, layout)
    elif (
        manifest.block_id != j
        or manifest.source_hashes != source_hashes
        or manifest.layout != layout
    ):
        raise ManifestMismatch(f"manifest for block {j} disagrees with local source hashes")
    coded, hashes = [], []
    for u in range(state.r):
        cv = coefficients_for(params, state.degree, state.node_id, j, u)
        coded.append(encode_fragment(params, fragments, cv))
        hashes.append(combine_hashes(params, manifest.source_hashes, cv))
    state.store[j] = StoredBlock(coded, hashes, manifest)
    return state


def drop_block(state: NodeState, j: int) -> None:
    state.store.pop(j, None)


def _entry(state: NodeState, j: int, u: int) -> StoredBlock:
    entry = state.store.get(j)
    if entry is None or not 0 <= u < len(entry.fragments):
        raise NotStored(f"node {state.node_id} holds no coded fragment ({j}, {u})")
    return entry


def serve_hash(state: NodeState, j: int, u: int) -> tuple[int, tuple[int, int, int]]:
    entry = _entry(state, j, u)
    return entry.hashes[u], entry.fragments[u].origin


def serve_fragment(state: NodeState, j: int, u: int) -> CodedFragment:
    return _entry(state, j, u).fragments[u]


def serve_manifest(state: NodeState, j: int) -> BlockManifest:
    entry = state.store.get(j)
    if entry is None:
        raise NotStored(f"node {state.node_id} holds no manifest for block {j}")
    return entry.manifest


def stored_indices(state: NodeState, j: int) -> list[int]:
    entry = state.store.get(j)
    return list(range(len(entry.fragments))) if entry else []


def stored_bytes(params: SystemParams, state: NodeState, j: int) -> int:
    """Wire-size footprint of block j: fragments, coded hashes, manifest."""
    entry = _entry(state, j, 0)
    r = len(entry.fragments)
    manifest_overhead = len(serialize_manifest(params, entry.manifest)) - entry.manifest.k * 2 * params.p_bytes
    return r * params.m * params.q_bytes + (entry.manifest.k + r) * params.p_bytes + manifest_overhead


def audit_store(params: SystemParams, state: NodeState) -> list[tuple[int, int]]:
    """(block, index) pairs whose stored hash differs from a fresh hash of the data."""
    bad = []
    for j, entry in sorted(state.store.items()):
        for u, (frag, h) in enumerate(zip(entry.fragments, entry.hashes)):
            if hash_fragment(params, frag.elements) != h:
                bad.append((j, u))
    return bad


# --- reports -------------------------------------------------------------------------

def fragment_digest(params: SystemParams, frag: CodedFragment) -> str:
    return hashlib.sha256(coded_fragment_to_bytes(params, frag)).hexdigest()


def report_malicious(state: NodeState, report: PeerReport) -> PeerReport:
    """Log a report; BadHash/BadFragment also blacklist the peer for good.

    Unresponsive peers are logged only: a timeout is not a failed public
    check, so it never justifies a blacklisting.
    """
    if report.reporter is None:
        report = PeerReport(
            report.accused, report.block_id, report.index, report.offense,
            report.claimed_hash, report.fragment_digest, state.node_id,
        )
    state.report_log.append(report)
    if report.offense is not Offense.UNRESPONSIVE:
        state.blacklist.setdefault(report.accused, set()).add(report.offense)
    return report


# --- peers -----------------------------------------------------------------------------

class PeerDirectory(Protocol):
    """Who holds what, plus request transport. Requests may raise PeerUnresponsive."""

    def peers(self, j: int) -> list[tuple[int, list[int]]]: ...

    def request_hash(self, peer: int, j: int, u: int) -> tuple[int, tuple[int, int, int]]: ...

    def request_fragment(self, peer: int, j: int, u: int) -> CodedFragment: ...

    def request_manifest(self, peer: int, j: int) -> BlockManifest: ...


class LocalDirectory:
    """Loopback directory over in-process honest nodes."""

    def __init__(self, nodes: Sequence[NodeState]):
        self.nodes = {n.node_id: n for n in nodes}

    def peers(self, j: int) -> list[tuple[int, list[int]]]:
        return [(i, stored_indices(n, j)) for i, n in sorted(self.nodes.items()) if j in n.store]

    def request_hash(self, peer, j, u):
        return serve_hash(self.nodes[peer], j, u)

    def request_fragment(self, peer, j, u):
        return serve_fragment(self.nodes[peer], j, u)

    def request_manifest(self, peer, j):
        return serve_manifest(self.nodes[peer], j)


# --- recovery --------------------------------------------------------------------------

@dataclass
class CheckRecord:
    kind: str  # "hash" or "fragment"
    peer: int
    block_id: int
    index: int
    claimed: int
    passed: bool
    fragment: tuple[int, ...] | None = None


@dataclass
class RecoveryTrace:
    block_id: int
    degree: int
    manifest: BlockManifest | None = None
    checks: list[CheckRecord] = field(default_factory=list)
    blacklisted: list[int] = field(default_factory=list)
    reports: list[PeerReport] = field(default_factory=list)
    unresponsive: list[int] = field(default_factory=list)
    hashes_fetched: int = 0
    fragments_fetched: int = 0
    rounds: int = 0
    success: bool = False
    error: str | None = None
    times: dict[str, float] = field(default_factory=lambda: {"hash": 0.0, "fragment": 0.0, "decode": 0.0})

    @property
    def bad_hashes(self) -> int:
        return sum(1 for c in self.checks if c.kind == "hash" and not c.passed)

    @property
    def bad_fragments(self) -> int:
        return sum(1 for c in self.checks if c.kind == "fragment" and not c.passed)


def _round_robin(peers: list[tuple[int, list[int]]]) -> Iterator[tuple[int, int]]:
    queues = [(peer, list(indices)) for peer, indices in peers]
    depth = 0
    while True:
        emitted = False
        for peer, indices in queues:
            if depth < len(indices):
                emitted = True
                yield peer, indices[depth]
        if not emitted:
            return
        depth += 1


def fetch_manifest(state: NodeState, params: SystemParams, j: int, directory: PeerDirectory, peer_order: Sequence[int]) -> BlockManifest:
    """Local pin if present, else the first manifest two distinct peers agree on."""
    if j in state.store:
        return state.store[j].manifest
    seen: dict[str, int] = {}
    for peer in peer_order:
        if state.is_blacklisted(peer):
            continue
        try:
            manifest = directory.request_manifest(peer, j)
        except (PeerUnresponsive, NotStored):
            continue
        try:
            text = serialize_manifest(params, manifest)
        except (AttributeError, TypeError, ValueError):
            continue
        if text in seen and seen[text] != peer:
            return manifest
        seen.setdefault(text, peer)
    raise ManifestUnavailable(f"no two peers agree on a manifest for block {j}")


def _well_formed(params: SystemParams, frag) -> bool:
    try:
        elements = frag.elements
        if len(elements) != params.m:
            return False
        return all(isinstance(x, int) and 0 <= x < params.q for x in elements)
    except (AttributeError, TypeError):
        return False


def recover_block(
    state: NodeState,
    params: SystemParams,
    j: int,
    directory: PeerDirectory,
    shuffle=None,
    manifest: BlockManifest | None = None,
) -> tuple[bytes, RecoveryTrace]:
    """Rebuild block j from peers' coded fragments, verifying everything.

    ``shuffle`` (callable on a list) fixes the peer visiting order; peers are
    then walked round-robin, one advertised index per peer per pass. Raises
    :class:`RecoveryFailed` (carrying the trace) when peers run out before k
    independent verified fragments arrive.
    """
    k, q = params.k, params.q
    degree = state.degree or k
    trace = RecoveryTrace(block_id=j, degree=degree)
    peers = [(peer, idx) for peer, idx in directory.peers(j) if peer != state.node_id]
    if shuffle is not None:
        shuffle(peers)
    if manifest is None:
        manifest = fetch_manifest(state, params, j, directory, [p for p, _ in peers])
    trace.manifest = manifest
    source = manifest.source_hashes
    if len(source) != k:
        raise DimensionMismatch(f"manifest has {len(source)} hashes, expected k={k}")

    candidates = _round_robin(peers)
    skipped: set[int] = set()  # unresponsive this recovery
    verified: list[tuple[int, CoeffVector, int]] = []  # (peer, cv, hash)
    next_fragment = 0
    decoder = Decoder(q, k, params.m)
    step = max(1, math.ceil(k / 10))
    hash_target = math.ceil(k * (1 + state.epsilon))
    exhausted = False

    def accuse(peer, u, offense, claimed, digest=None):
        report = report_malicious(state, PeerReport(peer, j, u, offense, claimed, digest))
        trace.reports.append(report)
        if offense is not Offense.UNRESPONSIVE and peer not in trace.blacklisted:
            trace.blacklisted.append(peer)

    def unreachable(peer, u):
        skipped.add(peer)
        trace.unresponsive.append(peer)
        accuse(peer, u, Offense.UNRESPONSIVE, None)

    while True:
        trace.rounds += 1
        # steps 1-2: hashes, each checked against the certified source hashes
        t0 = time.perf_counter()
        while not exhausted and len(verified) < hash_target:
            try:
                peer, u = next(candidates)
            except StopIteration:
                exhausted = True
                break
            if peer in skipped or state.is_blacklisted(peer):
                continue
            try:
                claimed, origin = directory.request_hash(peer, j, u)
            except PeerUnresponsive:
                unreachable(peer, u)
                continue
            except NotStored:
                continue
            trace.hashes_fetched += 1
            cv = coefficients_for(params, state.degree, peer, j, u)
            ok = isinstance(claimed, int) and combine_hashes(params, source, cv) == claimed
            trace.checks.append(CheckRecord("hash", peer, j, u, claimed, ok))
            if ok:
                verified.append((peer, cv, claimed))
            else:
                accuse(peer, u, Offense.BAD_HASH, claimed)
        trace.times["hash"] += time.perf_counter() - t0

        # steps 3-4: fragments for verified hashes, each checked against its hash
        t0 = time.perf_counter()
        while next_fragment < len(verified) and not decoder.complete:
            peer, cv, claimed = verified[next_fragment]
            next_fragment += 1
            if peer in skipped or state.is_blacklisted(peer):
                continue
            try:
                frag = directory.request_fragment(peer, j, cv.index)
            except PeerUnresponsive:
                unreachable(peer, cv.index)
                continue
            except NotStored:
                continue
            trace.fragments_fetched += 1
            ok = _well_formed(params, frag) and frag.origin == cv.origin and hash_fragment(params, frag.elements) == claimed
            elements = tuple(frag.elements) if _well_formed(params, frag) else None
            trace.checks.append(CheckRecord("fragment", peer, j, cv.index, claimed, ok, elements))
            if not ok:
                digest = fragment_digest(params, frag) if elements is not None else "malformed"
                accuse(peer, cv.index, Offense.BAD_FRAGMENT, claimed, digest)
                continue
            # step 5 input: only verified fragments reach the decoder
            t1 = time.perf_counter()
            decoder.add(cv.coeffs, frag.elements, cv.origin)
            trace.times["decode"] += time.perf_counter() - t1
        trace.times["fragment"] += time.perf_counter() - t0

        if decoder.complete:
            t1 = time.perf_counter()
            fragments = decoder.solve()
            try:
                block = reassemble_block(params, fragments, manifest.layout)
            except CorruptLayout as exc:
                trace.error = str(exc)
                raise RecoveryFailed(str(exc), trace) from exc
            if len(block) != manifest.block_len:
                trace.error = f"recovered {len(block)} bytes, manifest says {manifest.block_len}"
                raise RecoveryFailed(trace.error, trace)
            trace.times["decode"] += time.perf_counter() - t1
            trace.success = True
            return block, trace

        more_hashes = not exhausted
        more_fragments = next_fragment < len(verified)
        if not (more_hashes or more_fragments):
            trace.error = f"rank {decoder.rank} < k={k} after exhausting peers"
            raise RecoveryFailed(trace.error, trace)
        # rank deficient: widen the hash window by ~k/10
        hash_target = max(hash_target, len(verified)) + step

