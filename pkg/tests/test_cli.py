import csv
import subprocess
import sys

import pytest

from aoiretx.cli import ConfigError, RunConfig, main, parse_config

PROBE = "p=0.5\nq1=0.3\nq2=0.9\n"


def run(tmp_path, *argv, config=PROBE):
    cfg = tmp_path / "c.txt"
    cfg.write_text(config)
    return main([argv[0], "--config", str(cfg), "--out", str(tmp_path), *argv[1:]])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# ---------------------------------------------------------------- parse_config


def test_parse_defaults():
    cfg = parse_config("p=0.5\nq1=0.3\nq2=0.9")
    assert cfg == RunConfig(0.5, 0.3, 0.9)
    assert (cfg.N, cfg.alpha, cfg.tol, cfg.max_iter, cfg.horizon, cfg.seed) == \
        (200, 0.95, 1e-9, 1_000_000, 1_000_000, 1)


def test_parse_comments_and_spaces():
    cfg = parse_config("# probe\n p = 0.5  # arrival\nq1=0.3\n\nq2=0.9\nN=40\n")
    assert cfg.N == 40 and cfg.p == 0.5


@pytest.mark.parametrize("text, message", [
    ("q1=0.9\nq2=0.3", "q1 must be ≤ q2"),
    ("p=0", "p must be > 0"),
    ("p=0.5\nq1=0.3\nq2=0.9\nn=5", "unknown key 'n'"),
    ("p=0.5\nq1=0.3\nq2=0.9\nN 5", "line 4"),
    ("p=0.5\nq1=0.3\nq2=0.9\nN=0", "key 'N'"),
    ("p=0.5\nq1=0.3\nq2=0.9\ntol=0", "tol must be > 0"),
    ("p=0.5\nq1=0.3\nq2=0.9\nalpha=1", "alpha"),
    ("p=0.5\nq1=abc\nq2=0.9", "line 2: key 'q1'"),
    ("p=0.5\nq1=0.3", "missing required key 'q2'"),
])
def test_parse_errors(text, message):
    with pytest.raises(ConfigError, match=message):
        parse_config(text)


def test_overrides_win():
    cfg = parse_config(PROBE + "N=10", {"N": 20, "p": "0.7"})
    assert cfg.N == 20 and cfg.p == 0.7


# ---------------------------------------------------------------- commands


def test_solve_pinned_age(tmp_path, capsys):
    assert run(tmp_path, "solve", "--N", "6", config="p=1\nq1=1\nq2=1") == 0
    assert "gain 1\n" in capsys.readouterr().out
    values = read_csv(tmp_path / "values.csv")
    policy = read_csv(tmp_path / "policy.csv")
    assert values[0] == ["v1", "v2", "b", "value"]
    assert policy[0] == ["v1", "v2", "b", "action"]
    assert len(values) == len(policy) == 6 * 9 + 1
    assert values[3][:3] == ["1", "inf", "0"]


def test_solve_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir(), b.mkdir()
    assert run(a, "solve", "--N", "15") == 0
    assert run(b, "solve", "--N", "15") == 0
    for name in ("values.csv", "policy.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert not [p for p in a.iterdir() if p.name.startswith(".tmp-")]


def test_oracle_agreement(tmp_path, capsys):
    assert run(tmp_path, "oracle", "--N", "4") == 0
    assert "|Δgain| < 1e-6" in capsys.readouterr().out


def test_oracle_refuses_large(tmp_path, capsys):
    assert run(tmp_path, "oracle", "--N", "6") == 1
    assert "error" in capsys.readouterr().err


def test_verify_literal_and_padded(tmp_path, capsys):
    code = run(tmp_path, "verify", "--N", "30")
    out = capsys.readouterr().out
    assert code == 2
    assert "monotonicity: FAIL" in out and "lemma4: PASS" in out
    rows = read_csv(tmp_path / "violations.csv")
    assert rows[0] == ["check", "v1", "v2", "b", "x", "y", "lhs", "rhs"]
    assert len(rows) > 1
    assert run(tmp_path, "verify", "--N", "30", "--pad", "60") == 0
    assert (tmp_path / "report.txt").read_text().count("PASS") == 5


def test_simulate_stats_row(tmp_path):
    assert run(tmp_path, "simulate", "--policy", "never_preempt", "--horizon", "20000",
               "--seed", "3") == 0
    rows = read_csv(tmp_path / "stats.csv")
    assert rows[0] == ["p", "q1", "q2", "policy_name", "horizon", "seed", "avg_age", "half_width_99"]
    assert rows[1][:6] == ["0.5", "0.3", "0.9", "never_preempt", "20000", "3"]
    first = (tmp_path / "stats.csv").read_bytes()
    run(tmp_path, "simulate", "--policy", "never_preempt", "--horizon", "20000", "--seed", "3")
    assert (tmp_path / "stats.csv").read_bytes() == first


def test_simulate_optimal_with_trace(tmp_path):
    assert run(tmp_path, "simulate", "--N", "40", "--horizon", "10000", "--trace") == 0
    trace = read_csv(tmp_path / "trace.csv")
    assert trace[0] == ["slot", "v1", "v2", "b", "action"]
    assert len(trace) == 10001
    assert trace[1] == ["0", "1", "inf", "0", "2"]


def test_simulate_drop_baseline_is_labelled(tmp_path):
    assert run(tmp_path, "simulate", "--policy", "drop_baseline", config="p=1\nq1=1\nq2=1") == 0
    row = read_csv(tmp_path / "stats.csv")[1]
    assert "engine-check" in row[3] and row[6] == "1"


def test_simulate_short_horizon_is_input_error(tmp_path):
    assert run(tmp_path, "simulate", "--horizon", "100", "--policy", "never_preempt") == 1


def test_compare(tmp_path):
    assert run(tmp_path, "compare", "--N", "60") == 0
    rows = dict(read_csv(tmp_path / "compare.csv")[1:])
    assert set(rows) == {"optimal", "always_preempt", "never_preempt", "threshold(1.5)"}
    g = {k: float(v) for k, v in rows.items()}
    assert g["optimal"] <= min(g.values()) + 1e-9


def test_sweep_skips_infeasible(tmp_path, capsys):
    code = run(tmp_path, "sweep", "--N", "10", "--workers", "1",
               config="p=0.3,0.7\nq1=0.2,0.95\nq2=0.9\n")
    assert code == 0
    assert "skipping" in capsys.readouterr().err
    rows = read_csv(tmp_path / "sweep.csv")
    assert rows[0] == ["p", "q1", "q2", "N", "gain", "iterations", "residual"]
    assert [r[:3] for r in rows[1:]] == [["0.3", "0.2", "0.9"], ["0.7", "0.2", "0.9"]]


def test_sweep_pool_matches_serial(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir(), b.mkdir()
    cfg = "p=0.3,0.7\nq1=0.2\nq2=0.6,0.9\n"
    assert run(a, "sweep", "--N", "8", "--workers", "1", config=cfg) == 0
    assert run(b, "sweep", "--N", "8", "--workers", "2", config=cfg) == 0
    assert (a / "sweep.csv").read_bytes() == (b / "sweep.csv").read_bytes()


def test_exit_codes(tmp_path):
    assert run(tmp_path, "solve", config="p=0") == 1
    assert run(tmp_path, "solve", "--N", "20", "--max-iter", "2") == 3
    assert main(["solve", "--config", str(tmp_path / "missing.txt")]) == 1


def test_flags_override_config(tmp_path, capsys):
    assert run(tmp_path, "solve", "--N", "3", "--p", "1", "--q1", "1", "--q2", "1") == 0
    assert "gain 1\n" in capsys.readouterr().out


def test_module_entry_point(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("p=1\nq1=1\nq2=1\nN=2\n")
    out = subprocess.run([sys.executable, "-m", "aoiretx", "solve", "--config", str(cfg),
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert out.returncode == 0
    assert out.stdout.startswith("gain 1\n")
