from __future__ import annotations

import copy
import csv
import io
from dataclasses import replace

import pytest

from codedchain.errors import InvalidArgument, TamperedTrace, UnsolvableScenario
from codedchain.netsim import (
    CSV_COLUMNS,
    ScenarioConfig,
    Strategy,
    Verdict,
    check_solvable,
    replay_trace,
    run_scenario,
)
from codedchain.node_protocol import CheckRecord

BASE = ScenarioConfig(n_nodes=20, k=32, r=2, block_count=10, block_size=2048, rng_seed=1)
MIXED = replace(
    BASE,
    n_nodes=30,
    adversary_mix={Strategy.CORRUPT_FRAGMENT: 0.2},
)


@pytest.fixture(scope="module")
def honest_run():
    return run_scenario(BASE)


@pytest.fixture(scope="module")
def mixed_run():
    return run_scenario(MIXED)


def test_all_honest(honest_run):
    m = honest_run
    assert (m.recoveries_attempted, m.recoveries_succeeded, m.recoveries_exact) == (10, 10, 10)
    assert m.peers_blacklisted == 0
    assert m.measured_epsilon <= 0.02


def test_corrupt_fragment_peers(mixed_run):
    m = mixed_run
    assert m.recoveries_exact == 10
    assert m.bad_fragments_detected == m.corrupt_served > 0
    assert m.honest_blacklisted() == []
    assert m.unpunished_contacts() == []
    assert m.peers_blacklisted == sum(s == "CorruptFragment" for s in m.strategies.values())


def test_all_corrupt_hash():
    cfg = ScenarioConfig(n_nodes=8, k=4, r=2, block_count=3, block_size=256, adversary_mix={Strategy.CORRUPT_HASH: 1.0})
    m = run_scenario(cfg)
    assert m.recoveries_succeeded == 0
    assert m.unsolvable
    assert m.peers_blacklisted == 8
    assert all(t.error for t in m.traces)


def test_unresponsive_not_blacklisted():
    cfg = replace(BASE, n_nodes=24, block_count=4, adversary_mix={Strategy.UNRESPONSIVE: 0.25})
    m = run_scenario(cfg)
    assert m.recoveries_exact == 4
    assert m.peers_blacklisted == 0
    assert any(t.unresponsive for t in m.traces)


def test_determinism(mixed_run):
    again = run_scenario(MIXED)
    assert again == mixed_run
    assert [r.t_hash for r in again.rows] != [] and again.rows == mixed_run.rows


def test_seed_changes_run(mixed_run):
    other = run_scenario(replace(MIXED, rng_seed=2))
    assert other.strategies != mixed_run.strategies or other.rows != mixed_run.rows


def test_invariants(mixed_run):
    m = mixed_run
    assert m.recoveries_succeeded <= m.recoveries_attempted
    assert m.bad_hashes_detected <= m.hashes_fetched
    assert m.bad_fragments_detected <= m.fragments_fetched


def test_replay_confirms_blacklistings(mixed_run):
    confirmed = 0
    for trace in mixed_run.traces:
        verdict = replay_trace(mixed_run.params, trace)
        assert {p for p, _ in verdict.confirmed} == set(trace.blacklisted)
        assert verdict.checks_replayed == len(trace.checks)
        confirmed += len(verdict.confirmed)
    assert confirmed > 0


def test_replay_detects_false_accusation(mixed_run):
    trace = next(t for t in mixed_run.traces if t.checks)
    forged = copy.deepcopy(trace)
    honest = next(c.peer for c in forged.checks if c.passed and mixed_run.strategies[c.peer] == "Honest")
    forged.blacklisted.append(honest)
    with pytest.raises(TamperedTrace):
        replay_trace(mixed_run.params, forged)


def test_replay_detects_flipped_outcome(mixed_run):
    trace = next(t for t in mixed_run.traces if t.checks)
    forged = copy.deepcopy(trace)
    first = forged.checks[0]
    forged.checks[0] = CheckRecord(first.kind, first.peer, first.block_id, first.index, first.claimed, not first.passed, first.fragment)
    with pytest.raises(TamperedTrace):
        replay_trace(mixed_run.params, forged)


def test_replay_empty(mixed_run):
    assert replay_trace(mixed_run.params, None) == Verdict()


def test_csv_output(mixed_run):
    rows = list(csv.reader(io.StringIO(mixed_run.to_csv())))
    assert rows[0] == CSV_COLUMNS
    assert len(rows) == 1 + 10 + 1
    assert rows[-1][0] == "summary"
    assert int(rows[-1][4]) == mixed_run.recoveries_succeeded


def test_config_file_parsing(tmp_path):
    path = tmp_path / "s.cfg"
    path.write_text(
        "# scenario\nn_nodes = 12\nk = 8\nr = 3\nd = 4\nblock_count = 2\n"
        "block_size = 512\nrng_seed = 0x10\nepsilon = 0.2\nsize_mode = uniform\n"
        "adversary.CorruptFragment = 0.25\nadversary.Unresponsive = 0.1\n"
    )
    cfg = ScenarioConfig.load(path)
    assert (cfg.n_nodes, cfg.k, cfg.r, cfg.d, cfg.rng_seed, cfg.epsilon) == (12, 8, 3, 4, 16, 0.2)
    assert cfg.adversary_mix == {Strategy.CORRUPT_FRAGMENT: 0.25, Strategy.UNRESPONSIVE: 0.1}


@pytest.mark.parametrize(
    "text",
    ["k 3", "bogus = 1", "adversary.Evil = 0.1", "k = x", "adversary.CorruptHash = 0.8\nadversary.Unresponsive = 0.5", "d = 99"],
)
def test_config_errors(text):
    with pytest.raises(InvalidArgument):
        ScenarioConfig.from_text(text)


def test_check_solvable():
    check_solvable(BASE)
    with pytest.raises(UnsolvableScenario):
        check_solvable(replace(BASE, adversary_mix={Strategy.CORRUPT_HASH: 0.5}))


def test_sparse_epsilon_reported():
    m = run_scenario(replace(BASE, n_nodes=30, d=4, block_count=4))
    assert m.recoveries_exact == 4
    assert m.measured_epsilon > 0
