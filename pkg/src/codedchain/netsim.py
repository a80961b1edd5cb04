"""Deterministic in-process network of LS nodes with scripted adversaries.

A scenario builds ``n_nodes`` nodes, has every node ingest each random
block, then for each block picks one recoverer that drops its copy and
rebuilds the block from its peers. Adversarial peers behave consistently
per (block, index) so every run with the same seed is identical.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, fields
from enum import Enum
from pathlib import Path

from .coding import CodedFragment, derive_coefficients
from .errors import CodedChainError, InvalidArgument, ManifestUnavailable, PeerUnresponsive, RecoveryFailed, TamperedTrace, UnsolvableScenario
from .group_params import SystemParams, profile_params
from .homomorphic_hash import combine_hashes, hash_fragment
from .node_protocol import (
    BlockManifest,
    NodeState,
    Offense,
    RecoveryTrace,
    drop_block,
    ingest_block,
    recover_block,
    serve_fragment,
    serve_hash,
    serve_manifest,
    stored_indices,
)
from .prf import XofStream, encode_key


class Strategy(str, Enum):
    HONEST = "Honest"
    CORRUPT_FRAGMENT = "CorruptFragment"
    CORRUPT_HASH = "CorruptHash"
    UNRESPONSIVE = "Unresponsive"


@dataclass
class ScenarioConfig:
    n_nodes: int = 20
    k: int = 32
    r: int = 2
    d: int = 0  # 0 means dense (d = k)
    block_count: int = 10
    block_size: int = 32 * 1024
    adversary_mix: dict[Strategy, float] = field(default_factory=dict)
    rng_seed: int = 0
    epsilon: float = 0.1
    profile: str = "test"
    size_mode: str = "fixed"  # "fixed", or "uniform" in [0, block_size] starting with 0 then block_size

    @property
    def degree(self) -> int:
        return self.d or self.k

    def validate(self) -> None:
        if self.n_nodes < 2:
            raise InvalidArgument("need at least 2 nodes")
        if self.k < 1 or self.r < 1 or self.block_count < 0:
            raise InvalidArgument("k, r must be positive and block_count non-negative")
        if not 1 <= self.degree <= self.k:
            raise InvalidArgument(f"d={self.d} outside [1, k]")
        if self.block_size < self.k:
            raise InvalidArgument("block_size must be at least k")
        if any(f < 0 for f in self.adversary_mix.values()) or sum(self.adversary_mix.values()) > 1 + 1e-9:
            raise InvalidArgument("adversary fractions must be non-negative and sum to <= 1")
        if self.size_mode not in ("fixed", "uniform"):
            raise InvalidArgument(f"unknown size_mode {self.size_mode!r}")
        if self.epsilon < 0:
            raise InvalidArgument("epsilon must be >= 0")

    @classmethod
    def from_text(cls, text: str) -> "ScenarioConfig":
        """Parse ``key = value`` lines; ``#`` starts a comment.

        Adversary fractions use ``adversary.<Strategy> = <fraction>``.
        """
        cfg = cls()
        types = {f.name: f.type for f in fields(cls)}
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidArgument(f"config line {n}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key.startswith("adversary."):
                try:
                    strategy = Strategy(key.split(".", 1)[1])
                except ValueError:
                    raise InvalidArgument(f"config line {n}: unknown strategy {key}") from None
                cfg.adversary_mix[strategy] = float(value)
            elif key in types and key != "adversary_mix":
                kind = types[key]
                try:
                    parsed = float(value) if kind == "float" else int(value, 0) if kind == "int" else value
                except ValueError:
                    raise InvalidArgument(f"config line {n}: bad value for {key}") from None
                setattr(cfg, key, parsed)
            else:
                raise InvalidArgument(f"config line {n}: unknown key {key}")
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        return cls.from_text(Path(path).read_text())


@dataclass
class RecoveryRow:
    recovery: int
    block_id: int
    recoverer: int
    block_len: int
    success: bool
    exact: bool
    hashes_fetched: int
    fragments_fetched: int
    bad_hashes: int
    bad_fragments: int
    blacklisted: int
    epsilon: float
    t_hash: float = field(default=0.0, compare=False)
    t_fragment: float = field(default=0.0, compare=False)
    t_decode: float = field(default=0.0, compare=False)


CSV_COLUMNS = [f.name for f in fields(RecoveryRow)]


@dataclass
class ScenarioMetrics:
    recoveries_attempted: int = 0
    recoveries_succeeded: int = 0
    recoveries_exact: int = 0
    hashes_fetched: int = 0
    fragments_fetched: int = 0
    bad_hashes_detected: int = 0
    bad_fragments_detected: int = 0
    peers_blacklisted: int = 0
    measured_epsilon: float = 0.0
    # ground truth kept by the network, for auditing detection claims
    corrupt_served: int = 0
    blacklist: dict[int, list[int]] = field(default_factory=dict)  # recoverer -> accused
    corrupt_contacts: dict[int, list[int]] = field(default_factory=dict)  # recoverer -> corrupting peers
    strategies: dict[int, str] = field(default_factory=dict)
    unsolvable: str | None = None
    rows: list[RecoveryRow] = field(default_factory=list)
    wall_times: dict[str, float] = field(default_factory=dict, compare=False)
    traces: list[RecoveryTrace] = field(default_factory=list, compare=False, repr=False)
    params: SystemParams | None = field(default=None, compare=False, repr=False)

    def honest_blacklisted(self) -> list[tuple[int, int]]:
        return [
            (rec, peer)
            for rec, accused in sorted(self.blacklist.items())
            for peer in accused
            if self.strategies.get(peer) in (Strategy.HONEST.value, Strategy.UNRESPONSIVE.value)
        ]

    def unpunished_contacts(self) -> list[tuple[int, int]]:
        return [
            (rec, peer)
            for rec, peers in sorted(self.corrupt_contacts.items())
            for peer in peers
            if peer not in self.blacklist.get(rec, [])
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in self.rows:
            writer.writerow([_fmt(getattr(row, c)) for c in CSV_COLUMNS])
        writer.writerow([
            "summary", "", "", "", self.recoveries_succeeded, self.recoveries_exact,
            self.hashes_fetched, self.fragments_fetched, self.bad_hashes_detected,
            self.bad_fragments_detected, self.peers_blacklisted, _fmt(self.measured_epsilon),
            *(_fmt(self.wall_times.get(phase, 0.0)) for phase in ("hash", "fragment", "decode")),
        ])
        return buf.getvalue()


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


class SimNetwork:
    """PeerDirectory over simulated nodes; adversaries wrap honest serving."""

    def __init__(self, params: SystemParams, nodes: dict[int, NodeState], strategies: dict[int, Strategy], seed: bytes):
        self.params = params
        self.nodes = nodes
        self.strategies = strategies
        self.seed = seed
        self.corrupt_served = 0
        self.recoverer: int | None = None
        self.contacts: dict[int, set[int]] = {}

    def _stream(self, tag: bytes, peer: int, j: int, u: int) -> XofStream:
        return XofStream(encode_key(tag, self.seed, peer, j, u))

    def _strategy(self, peer: int) -> Strategy:
        return self.strategies.get(peer, Strategy.HONEST)

    def _served_corrupt(self, peer: int) -> None:
        self.corrupt_served += 1
        if self.recoverer is not None:
            self.contacts.setdefault(self.recoverer, set()).add(peer)

    def peers(self, j: int) -> list[tuple[int, list[int]]]:
        return [(i, stored_indices(n, j)) for i, n in sorted(self.nodes.items()) if j in n.store]

    def request_hash(self, peer: int, j: int, u: int):
        strategy = self._strategy(peer)
        if strategy is Strategy.UNRESPONSIVE:
            raise PeerUnresponsive(f"peer {peer} timed out")
        value, origin = serve_hash(self.nodes[peer], j, u)
        if strategy is Strategy.CORRUPT_HASH:
            value = self._fake_hash(peer, j, u, value)
            self._served_corrupt(peer)
        return value, origin

    def request_fragment(self, peer: int, j: int, u: int) -> CodedFragment:
        strategy = self._strategy(peer)
        if strategy is Strategy.UNRESPONSIVE:
            raise PeerUnresponsive(f"peer {peer} timed out")
        frag = serve_fragment(self.nodes[peer], j, u)
        if strategy is Strategy.CORRUPT_FRAGMENT:
            frag = self._flip_element(peer, j, u, frag)
            self._served_corrupt(peer)
        return frag

    def request_manifest(self, peer: int, j: int) -> BlockManifest:
        if self._strategy(peer) is Strategy.UNRESPONSIVE:
            raise PeerUnresponsive(f"peer {peer} timed out")
        return serve_manifest(self.nodes[peer], j)

    def _fake_hash(self, peer: int, j: int, u: int, true_value: int) -> int:
        # a random element of the order-q subgroup, so it looks plausible
        p, q = self.params.p, self.params.q
        stream = self._stream(b"sim/fake-hash", peer, j, u)
        while True:
            h = pow(stream.randrange(2, p - 1), (p - 1) // q, p)
            if h not in (1, true_value):
                return h

    def _flip_element(self, peer: int, j: int, u: int, frag: CodedFragment) -> CodedFragment:
        q = self.params.q
        stream = self._stream(b"sim/flip", peer, j, u)
        v = stream.randbelow(len(frag.elements))
        elements = list(frag.elements)
        elements[v] = (elements[v] + 1 + stream.randbelow(q - 1)) % q
        return CodedFragment(frag.origin, tuple(elements))


def _assign_strategies(config: ScenarioConfig, stream: XofStream) -> dict[int, Strategy]:
    ids = list(range(config.n_nodes))
    stream.shuffle(ids)
    strategies = {i: Strategy.HONEST for i in range(config.n_nodes)}
    pos = 0
    for strategy in (Strategy.CORRUPT_FRAGMENT, Strategy.CORRUPT_HASH, Strategy.UNRESPONSIVE):
        count = round(config.adversary_mix.get(strategy, 0.0) * config.n_nodes)
        for i in ids[pos:pos + count]:
            strategies[i] = strategy
        pos += count
    return strategies


def _block_size(config: ScenarioConfig, j: int, stream: XofStream) -> int:
    if config.size_mode == "fixed":
        return config.block_size
    # uniform mode always covers both extremes first
    if j == 0:
        return 0
    if j == 1:
        return config.block_size
    return stream.randbelow(config.block_size + 1)


def scenario_seed(config: ScenarioConfig) -> bytes:
    return XofStream(encode_key(b"sim/params", config.rng_seed)).read(32)


def run_scenario(config: ScenarioConfig, params: SystemParams | None = None, keep_traces: bool = True) -> ScenarioMetrics:
    """Run one seeded scenario; metrics (timings aside) depend only on config."""
    import time

    config.validate()
    stream = XofStream(encode_key(b"sim/scenario", config.rng_seed))
    if params is None:
        params = profile_params(config.profile, config.k, config.block_size, scenario_seed(config))
    elif params.k != config.k or params.s_B < config.block_size:
        raise InvalidArgument("params geometry does not match scenario")
    strategies = _assign_strategies(config, stream)
    nodes = {
        i: NodeState(node_id=i, r=config.r, degree=config.d or None, epsilon=config.epsilon)
        for i in range(config.n_nodes)
    }
    network = SimNetwork(params, nodes, strategies, scenario_seed(config))
    metrics = ScenarioMetrics(strategies={i: s.value for i, s in strategies.items()}, params=params)
    walls = {"ingest": 0.0, "hash": 0.0, "fragment": 0.0, "decode": 0.0}

    try:
        check_solvable(config)
    except UnsolvableScenario as exc:
        metrics.unsolvable = str(exc)

    eps_samples = []
    for j in range(config.block_count):
        size = _block_size(config, j, stream)
        block = stream.read(size)
        t0 = time.perf_counter()
        manifest = None
        for i in range(config.n_nodes):
            ingest_block(nodes[i], params, j, block, manifest)
            manifest = nodes[i].store[j].manifest
        walls["ingest"] += time.perf_counter() - t0

        recoverer = stream.randbelow(config.n_nodes)
        state = nodes[recoverer]
        drop_block(state, j)
        network.recoverer = recoverer
        order_stream = XofStream(encode_key(b"sim/order", config.rng_seed, j))
        metrics.recoveries_attempted += 1
        try:
            recovered, trace = recover_block(state, params, j, network, shuffle=order_stream.shuffle)
            success, exact = True, recovered == block
            metrics.recoveries_succeeded += 1
            metrics.recoveries_exact += exact
            eps_samples.append(trace.fragments_fetched / config.k - 1)
        except RecoveryFailed as exc:
            trace, success, exact = exc.trace, False, False
        except ManifestUnavailable as exc:
            trace = RecoveryTrace(block_id=j, degree=config.degree, error=str(exc))
            success, exact = False, False
        network.recoverer = None
        for phase in ("hash", "fragment", "decode"):
            walls[phase] += trace.times[phase]
        metrics.hashes_fetched += trace.hashes_fetched
        metrics.fragments_fetched += trace.fragments_fetched
        metrics.bad_hashes_detected += trace.bad_hashes
        metrics.bad_fragments_detected += trace.bad_fragments
        metrics.rows.append(RecoveryRow(
            recovery=j, block_id=j, recoverer=recoverer, block_len=size,
            success=success, exact=exact,
            hashes_fetched=trace.hashes_fetched, fragments_fetched=trace.fragments_fetched,
            bad_hashes=trace.bad_hashes, bad_fragments=trace.bad_fragments,
            blacklisted=len(trace.blacklisted),
            epsilon=trace.fragments_fetched / config.k - 1 if success else math.nan,
            t_hash=trace.times["hash"], t_fragment=trace.times["fragment"], t_decode=trace.times["decode"],
        ))
        if keep_traces:
            metrics.traces.append(trace)
        # the recoverer stores the block again, as an honest node would
        ingest_block(state, params, j, block, manifest)

    metrics.corrupt_served = network.corrupt_served
    metrics.blacklist = {i: sorted(n.blacklist) for i, n in sorted(nodes.items()) if n.blacklist}
    metrics.peers_blacklisted = len({p for accused in metrics.blacklist.values() for p in accused})
    metrics.corrupt_contacts = {i: sorted(s) for i, s in sorted(network.contacts.items())}
    metrics.measured_epsilon = sum(eps_samples) / len(eps_samples) if eps_samples else math.nan
    metrics.wall_times = walls
    return metrics


def check_solvable(config: ScenarioConfig) -> None:
    """Raise UnsolvableScenario if honest capacity cannot reach k (static bound)."""
    honest = config.n_nodes - sum(round(f * config.n_nodes) for f in config.adversary_mix.values())
    if (honest - 1) * config.r < config.k:
        raise UnsolvableScenario(f"honest capacity {(honest - 1) * config.r} < k={config.k}")


# --- trace replay -----------------------------------------------------------------------

@dataclass
class Verdict:
    checks_replayed: int = 0
    confirmed: list[tuple[int, str]] = field(default_factory=list)  # (peer, offense)


def replay_trace(params: SystemParams, trace: RecoveryTrace | None) -> Verdict:
    """Re-run every recorded check and confirm each blacklisting.

    Raises :class:`TamperedTrace` if a recorded outcome disagrees with the
    recomputation or a blacklisted peer has no failing check behind it.
    """
    verdict = Verdict()
    if trace is None or (not trace.checks and not trace.blacklisted):
        return verdict
    if trace.manifest is None:
        raise TamperedTrace("trace has checks but no manifest")
    source = trace.manifest.source_hashes
    failing: dict[int, list[str]] = {}
    for n, check in enumerate(trace.checks):
        if check.block_id != trace.block_id:
            raise TamperedTrace(f"check {n} is for block {check.block_id}, trace is for {trace.block_id}")
        if check.kind == "hash":
            cv = derive_coefficients(params, check.peer, check.block_id, check.index, trace.degree)
            passed = combine_hashes(params, source, cv) == check.claimed
            offense = Offense.BAD_HASH
        elif check.kind == "fragment":
            if check.fragment is None:
                passed = False
            else:
                try:
                    passed = hash_fragment(params, check.fragment) == check.claimed
                except CodedChainError:
                    passed = False
            offense = Offense.BAD_FRAGMENT
        else:
            raise TamperedTrace(f"check {n} has unknown kind {check.kind!r}")
        if passed != check.passed:
            raise TamperedTrace(f"check {n} ({check.kind}, peer {check.peer}) recorded passed={check.passed}, replay says {passed}")
        verdict.checks_replayed += 1
        if not passed:
            failing.setdefault(check.peer, []).append(offense.value)
    for peer in trace.blacklisted:
        if peer not in failing:
            raise TamperedTrace(f"peer {peer} blacklisted without a failing check")
        verdict.confirmed.append((peer, failing[peer][0]))
    return verdict
