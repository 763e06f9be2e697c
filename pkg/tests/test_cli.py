import csv
import math

import pytest

from coop_rm.cli import (ConfigError, RunConfig, aggregate_rows, csv_header, main, parse_seeds,
                         read_config, t_interval)

FAST = ["--episodes", "40", "--eval-period", "20", "--eval-episodes", "2", "--horizon", "150"]


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_run_writes_per_seed_and_aggregate(tmp_path):
    out = tmp_path / "run"
    assert main(["run", "--task", "three_buttons", "--mode", "learn", "--seeds", "5",
                 "--out", str(out), *FAST]) == 0
    per_seed = sorted(p.name for p in out.glob("metrics_seed_*.csv"))
    assert per_seed == [f"metrics_seed_{s}.csv" for s in range(5)]
    assert (out / "metrics_aggregate.csv").is_file()
    assert len(list((out / "rms").glob("*.rm"))) == 15
    rows = _rows(out / "metrics_seed_0.csv")
    assert rows[0] == csv_header(3)
    assert rows[0][:4] == ["seed", "episode", "eval_steps_mean", "eval_reward_mean"]
    assert [r[1] for r in rows[1:]] == ["20", "40"]
    agg = _rows(out / "metrics_aggregate.csv")
    assert agg[0][:3] == ["episode", "n_seeds", "eval_steps_mean"]
    assert [r[1] for r in agg[1:]] == ["5", "5"]
    assert "seeds = 0,1,2,3,4" in (out / "config.txt").read_text()


def test_provided_mode_missing_files(tmp_path, capsys):
    code = main(["run", "--mode", "provided", "--rm-dir", str(tmp_path), "--seeds", "1",
                 "--out", str(tmp_path / "o"), *FAST])
    assert code == 2
    assert "three_buttons_a1.rm" in capsys.readouterr().err


def test_bad_config_exits_nonzero(tmp_path, capsys):
    assert main(["run", "--alpha", "0", "--out", str(tmp_path)]) == 2
    assert main(["run", "--map", str(tmp_path / "nope.map"), "--out", str(tmp_path)]) == 2


def test_t_interval_hand_computed():
    # mean 3, sample sd sqrt(2.5), t(0.975, 4) = 2.776445
    mean, lo, hi = t_interval([1.0, 2.0, 3.0, 4.0, 5.0])
    assert mean == 3.0
    assert lo == pytest.approx(1.036757, abs=1e-6)
    assert hi == pytest.approx(4.963243, abs=1e-6)
    m, lo1, hi1 = t_interval([0.5])
    assert m == 0.5 and math.isnan(lo1) and math.isnan(hi1)


def test_aggregate_rows_fixture():
    per_seed = {s: {50: (float(v), 1.0)} for s, v in enumerate([1, 2, 3, 4, 5])}
    rows = aggregate_rows(per_seed)
    assert rows[1][:5] == [50, 5, "3", "1.03676", "4.96324"]
    assert rows[1][5:] == ["1", "1", "1"]


def test_seeds_and_config_file():
    assert parse_seeds("5") == [0, 1, 2, 3, 4]
    assert parse_seeds("3,7") == [3, 7]
    with pytest.raises(ConfigError):
        parse_seeds("x")
    cfg = read_config("task = rendezvous  # note\n\np-sync = 0.5\nseeds = 2\nmap = none\n")
    assert cfg == {"task": "rendezvous", "p_sync": 0.5, "seeds": [0, 1], "map": None}
    assert RunConfig(**cfg).resolved_gamma() == 0.99
    assert RunConfig().resolved_gamma() == 0.95
    with pytest.raises(ConfigError):
        read_config("bogus = 1\n")
    with pytest.raises(ConfigError):
        read_config("episodes = many\n")


def test_defaults():
    cfg = RunConfig()
    assert cfg.seeds == [0, 1, 2, 3, 4]
    assert cfg.timeout_s == 3600.0
    assert cfg.episodes == 2000


def test_config_file_with_flag_override(tmp_path):
    conf = tmp_path / "c.txt"
    conf.write_text("mode = flat\nepisodes = 999\neval_period = 20\neval_episodes = 1\n"
                    "horizon = 100\nseeds = 1\n")
    out = tmp_path / "o"
    assert main(["run", "--config", str(conf), "--episodes", "20", "--out", str(out)]) == 0
    text = (out / "config.txt").read_text()
    assert "mode = flat" in text and "episodes = 20" in text


def _masked(path):
    rows = _rows(path)
    col = rows[0].index("induction_wall_s")
    return [r[:col] + r[col + 1:] for r in rows]


def test_same_seed_same_metrics(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["run", "--mode", "learn", "--seeds", "1", "--out", str(out), *FAST]) == 0
        outs.append(out)
    a, b = (o / "metrics_seed_0.csv" for o in outs)
    assert _masked(a) == _masked(b)
    assert (outs[0] / "rms" / "seed_0_agent_1.rm").read_text() == \
        (outs[1] / "rms" / "seed_0_agent_1.rm").read_text()


def test_inspect(tmp_path, capsys):
    assert main(["inspect", _path("three_buttons_a1.rm"), "--dot", str(tmp_path / "a.dot")]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "4 states, 3 transitions"
    assert "digraph" in (tmp_path / "a.dot").read_text()
    two = tmp_path / "two.rm"
    two.write_text("states 2\ninitial u0\nfinal uA\n")
    assert main(["inspect", str(two)]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "2 states, 0 transitions"
    bad = tmp_path / "bad.rm"
    bad.write_text("states 2\ninitial u0\nfinal uA\ntrans u0 a\n")
    assert main(["inspect", str(bad)]) == 2
    assert "line 4" in capsys.readouterr().err


def _path(name):
    from importlib import resources
    return str(resources.files("coop_rm") / "data" / "rms" / name)


A1_TRACES = """props GOAL RB YB
GOAL : {YB} {RB} {GOAL}
INC : {YB}
INC : {YB} {RB}
INC : {GOAL}
INC : {YB} {GOAL}
INC : {RB} {GOAL}
INC : {RB} {YB} {GOAL}
"""


@pytest.mark.parametrize("text, n_max, expect", [
    (A1_TRACES, 5, "4"),
    ("props a b\nINC : {a} {b}\n", 5, "2"),
    (A1_TRACES, 1, "NONE"),
    (A1_TRACES, 3, "NONE"),
])
def test_oracle(tmp_path, capsys, text, n_max, expect):
    f = tmp_path / "t.trace"
    f.write_text(text)
    assert main(["oracle", str(f), "--n-max", str(n_max)]) == 0
    assert capsys.readouterr().out.strip() == expect


def test_learn_and_parse_errors(tmp_path, capsys):
    f = tmp_path / "t.trace"
    f.write_text(A1_TRACES)
    assert main(["learn", str(f), "--out", str(tmp_path / "a1.rm")]) == 0
    assert "trans u1 RB u2" in (tmp_path / "a1.rm").read_text()
    capsys.readouterr()
    f.write_text("GOAL : {a}\nWHAT : {b}\n")
    assert main(["oracle", str(f)]) == 2
    assert "line 2" in capsys.readouterr().err
    f.write_text(A1_TRACES)
    assert main(["learn", str(f), "--max-states", "3"]) == 2
