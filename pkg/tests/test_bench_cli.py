from __future__ import annotations

import csv
import io

import pytest

from codedchain import cli
from codedchain.bench import (
    BENCH_COLUMNS,
    BenchRecord,
    check_shapes,
    loglog_slope,
    records_from_csv,
    records_to_csv,
    run_bench,
)
from codedchain.errors import InvalidArgument, InvalidSuite
from codedchain.group_params import profile_params

SEED = "00" * 31 + "07"


@pytest.fixture(scope="module")
def tiny_records():
    base = profile_params("test", 4, 4096)
    return run_bench("all", base, ks=(4, 8), sizes=(4096,), trials=10)


def test_bench_records(tiny_records):
    ops = {r.operation for r in tiny_records}
    assert ops == {"encode", "hash", "combine"}
    for r in tiny_records:
        assert r.trial_count == 10
        assert 0 < r.min <= r.mean <= r.max
    # k=4: d=4 and d=k coincide and appear once
    assert sum(1 for r in tiny_records if r.operation == "encode" and r.k == 4) == 1


def test_bench_csv_roundtrip(tiny_records):
    text = records_to_csv(tiny_records)
    assert text.splitlines()[0] == ",".join(BENCH_COLUMNS)
    back = records_from_csv(text)
    assert [(r.operation, r.k, r.d) for r in back] == [(r.operation, r.k, r.d) for r in tiny_records]


def test_bench_rejects():
    with pytest.raises(InvalidSuite):
        run_bench("decode")
    with pytest.raises(InvalidArgument):
        run_bench("hash", trials=3)
    with pytest.raises(InvalidArgument):
        BenchRecord("x", 1, 1, 1, 0, 0.0, 0.0, 0.0)


def _rec(op, k, d, mean, size=1 << 20):
    return BenchRecord(op, k, d, size, 10, mean, mean, mean)


def test_shape_checks_on_synthetic_series():
    ks = [4, 32, 64, 128, 256]
    records = [_rec("encode", k, 4, 1e-3) for k in ks]
    records += [_rec("hash", k, k, 1.0 / k) for k in ks]
    records += [_rec("combine", k, k, 1e-4 * k) for k in ks]
    records += [_rec("combine", k, 4, 1e-4) for k in ks[1:]]
    checks = {c.name: c.passed for c in check_shapes(records)}
    assert checks == {"encode-flat": True, "hash-decreasing": True, "combine-increasing": True, "combine-sparse": True}
    records[0] = _rec("encode", 4, 4, 1e-2)
    assert not {c.name: c.passed for c in check_shapes(records)}["encode-flat"]


def test_loglog_slope():
    assert loglog_slope([1, 10, 100], [2, 20, 200]) == pytest.approx(1.0)
    assert loglog_slope([1, 2, 4], [1, 4, 16]) == pytest.approx(2.0)


def test_cli_plan_table(capsys):
    assert cli.main(["plan", "--table", "--sB", "1048576", "--sH", "134"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["k", "r", "S_B", "S_H", "c"] and len(rows) == 11


def test_cli_plan_single(capsys):
    assert cli.main(["plan", "--r", "1"]) == 0
    out = capsys.readouterr()
    assert "k_opt=88" in out.err and out.out.splitlines()[1].startswith("88,1,")


def test_cli_encode_recover_roundtrip(tmp_path):
    data = bytes(range(256)) * 13 + b"tail"
    src = tmp_path / "in.bin"
    src.write_bytes(data)
    params = tmp_path / "p.ccls"
    assert cli.main(["gen-params", "--profile", "test", "--k", "8", "--sB", "8192", "--seed", SEED, "--out", str(params)]) == 0
    store = tmp_path / "store"
    assert cli.main(["encode", str(src), "--params", str(params), "--out", str(store)]) == 0
    out = tmp_path / "out.bin"
    assert cli.main(["recover", str(store), "--params", str(params), "--out", str(out)]) == 0
    assert out.read_bytes() == data


def test_cli_encode_sparse_without_params_file(tmp_path):
    src = tmp_path / "in.bin"
    src.write_bytes(b"x" * 3000)
    store = tmp_path / "s"
    assert cli.main(["encode", str(src), "--profile", "test", "--k", "8", "--r", "16", "--d", "4", "--out", str(store)]) == 0
    out = tmp_path / "o.bin"
    assert cli.main(["recover", str(store), "--out", str(out)]) == 0
    assert out.read_bytes() == src.read_bytes()


def test_cli_outputs_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for path in (a, b):
        assert cli.main(["gen-params", "--profile", "test", "--k", "4", "--sB", "512", "--seed", SEED, "--out", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_cli_recover_failure_exit(tmp_path):
    src = tmp_path / "in.bin"
    src.write_bytes(b"y" * 500)
    store = tmp_path / "s"
    assert cli.main(["encode", str(src), "--profile", "test", "--k", "8", "--r", "3", "--out", str(store)]) == 0
    assert cli.main(["recover", str(store), "--out", str(tmp_path / "o")]) == cli.EXIT_RECOVERY


def test_cli_manifest_length_mismatch_fails_recovery(tmp_path):
    src = tmp_path / "in.bin"
    src.write_bytes(b"z" * 700)
    store = tmp_path / "s"
    assert cli.main(["encode", str(src), "--profile", "test", "--k", "4", "--out", str(store)]) == 0
    manifest = store / "manifest.txt"
    manifest.write_text(manifest.read_text().replace("block_len=700", "block_len=701"))
    code = cli.main(["recover", str(store), "--out", str(tmp_path / "o")])
    assert code == cli.EXIT_RECOVERY


def test_cli_simulate_missing_config(capsys):
    assert cli.main(["simulate", "--config", "missing.cfg"]) == cli.EXIT_IO
    assert "config not found" in capsys.readouterr().err


def test_cli_simulate(tmp_path, capsys):
    cfg = tmp_path / "s.cfg"
    cfg.write_text("n_nodes = 10\nk = 4\nr = 1\nblock_count = 3\nblock_size = 300\nadversary.CorruptHash = 0.2\n")
    out = tmp_path / "m.csv"
    assert cli.main(["simulate", "--config", str(cfg), "--replay", "--out", str(out)]) == 0
    rows = list(csv.reader(io.StringIO(out.read_text())))
    assert rows[-1][0] == "summary" and len(rows) == 5


def test_cli_usage_errors(capsys):
    assert cli.main([]) == cli.EXIT_USAGE
    assert cli.main(["plan", "--k", "abc"]) == cli.EXIT_USAGE
    assert cli.main(["bench", "--suite", "nope", "--profile", "test"]) == cli.EXIT_USAGE
    assert cli.main(["plan", "--r", "-1"]) == cli.EXIT_USAGE
    assert cli.main(["gen-params", "--seed", "zz"]) == cli.EXIT_USAGE


def test_cli_missing_params_file(tmp_path):
    src = tmp_path / "in.bin"
    src.write_bytes(b"1")
    assert cli.main(["encode", str(src), "--params", str(tmp_path / "nope")]) == cli.EXIT_IO


def test_cli_bench_and_check(tmp_path, capsys):
    out = tmp_path / "b.csv"
    code = cli.main(["bench", "--suite", "hash", "--profile", "test", "--k-list", "4,8", "--sizes", "2048", "--trials", "10", "--out", str(out)])
    assert code == 0
    assert records_from_csv(out.read_text())
    assert cli.main(["bench", "--check", str(out), "--size-for-check", "2048"]) in (0, cli.EXIT_VERIFY)
    assert cli.main(["bench", "--check", str(out), "--size-for-check", "999"]) == cli.EXIT_VERIFY
