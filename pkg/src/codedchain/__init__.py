"""Coded block storage for low-storage blockchain nodes.

Blocks are split into k fragments over Z_q, stored as random linear
combinations, and verified on recovery with homomorphic hashes.
"""

from __future__ import annotations

from .coding import (
    BlockLayout,
    CodedFragment,
    CoeffVector,
    Decoder,
    decode_block,
    derive_coefficients,
    encode_fragment,
    reassemble_block,
    split_block,
)
from .errors import CodedChainError
from .group_params import SystemParams, generate_params, parse_params, profile_params, serialize_params, validate_params
from .homomorphic_hash import combine_hashes, hash_block, hash_fragment
from .netsim import ScenarioConfig, ScenarioMetrics, Strategy, replay_trace, run_scenario
from .node_protocol import BlockManifest, NodeState, ingest_block, recover_block
from .planner import StoragePlan, compression_factor, optimal_k, sweep_table

__version__ = "0.1.0"

__all__ = [
    "BlockLayout", "BlockManifest", "CodedChainError", "CodedFragment", "CoeffVector", "Decoder",
    "NodeState", "ScenarioConfig", "ScenarioMetrics", "StoragePlan", "Strategy", "SystemParams",
    "combine_hashes", "compression_factor", "decode_block", "derive_coefficients", "encode_fragment",
    "generate_params", "hash_block", "hash_fragment", "ingest_block", "optimal_k", "parse_params",
    "profile_params", "reassemble_block", "recover_block", "replay_trace", "run_scenario",
    "serialize_params", "split_block", "sweep_table", "validate_params",
]
