import csv
import json
import subprocess
import sys

import pytest

from levycouple import __version__
from levycouple.cli import config_hash, fmt, run


def read_csv(path):
    lines = path.read_text().splitlines()
    return lines[0], list(csv.DictReader(lines[1:]))


def test_fmt():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(-0.0) == "0"
    assert fmt(True) == "1"
    assert fmt(3) == "3"
    assert fmt(float("inf")) == "inf"
    assert fmt(None) == ""


def test_check_condition(tmp_path):
    out = tmp_path / "c.csv"
    assert run(["check-condition", "--eps-family", "0.5", "--out", str(out)]) == 0
    comment, rows = read_csv(out)
    assert comment.startswith("# levycouple check-condition config_sha256=")
    assert f"version={__version__}" in comment and "seed=0" in comment
    (row,) = rows
    assert row["status"] == "finite"
    assert float(row["value"]) == pytest.approx(2.0, rel=1e-6)
    assert [row[f"sato_{a}"] for a in ("0.25", "0.5", "1", "1.5")] == ["0"] * 4


def test_check_condition_divergent(tmp_path):
    out = tmp_path / "c.csv"
    assert run(["check-condition", "--measure", '{"family": "quadratic"}', "--alpha", "0.5",
                "--out", str(out)]) == 0
    _, (row,) = read_csv(out)
    assert row["status"] == "divergent" and row["value"] == "" and row["sato_0.5"] == "0"


def test_eta_table(tmp_path):
    out = tmp_path / "e.csv"
    assert run(["eta", "--points", "7", "--out", str(out)]) == 0
    _, rows = read_csv(out)
    assert len(rows) == 7
    assert float(rows[-1]["x"]) == 1.0 and float(rows[-1]["g"]) == 0.0
    assert float(rows[-1]["eta"]) == 1.0


def test_simulate(tmp_path):
    out = tmp_path / "s.csv"
    assert run(["simulate", "--terminal", "--n", "5", "--eps", "0.01", "--out", str(out)]) == 0
    _, rows = read_csv(out)
    assert [r["replication"] for r in rows] == ["0", "1", "2", "3", "4"]
    out2 = tmp_path / "p.csv"
    assert run(["simulate", "--n", "2", "--eps", "0.5", "--out", str(out2)]) == 0
    _, rows = read_csv(out2)
    assert set(rows[0]) == {"replication", "t", "x"}


def test_couple_summary(tmp_path):
    out = tmp_path / "k.csv"
    assert run(["couple", "--a", "0.3", "--delta", "0.03", "--eps", "0.01", "--n", "20",
                "--out", str(out)]) == 0
    _, rows = read_csv(out)
    assert len(rows) == 21
    assert rows[-1]["replication"] == "summary"
    frac = sum(r["coupled"] == "1" for r in rows[:-1]) / 20
    assert float(rows[-1]["coupled"]) == frac


def test_sweep_columns(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "measure": {"family": "stable", "alpha": 1.0},
        "a_grid": [0.4, 0.2],
        "delta_rule": {"ratio": 0.1},
        "eps_rule": {"ratio": 0.5},
        "n": 300, "seed": 7, "T_max": 8,
    }))
    out = tmp_path / "w.csv"
    assert run(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
    comment, rows = read_csv(out)
    assert "seed=7" in comment
    assert [float(r["a"]) for r in rows] == [0.4, 0.2]
    assert float(rows[1]["delta"]) == pytest.approx(0.02)
    assert float(rows[1]["eps"]) == pytest.approx(0.01)
    for key in ("p_uncoupled", "p_stderr", "e_tau_bar", "tau_stderr", "censor_fraction"):
        assert key in rows[0]


def test_oracle_and_bound(tmp_path):
    out = tmp_path / "o.csv"
    assert run(["oracle-tv", "--a", "0.1", "0.5", "--out", str(out)]) == 0
    _, rows = read_csv(out)
    assert float(rows[0]["tv"]) < float(rows[1]["tv"])
    out = tmp_path / "b.csv"
    assert run(["bound-check", "--a", "0.5", "--delta", "0.05", "--eps", "0.01", "--n", "500",
                "--out", str(out)]) == 0
    _, (row,) = read_csv(out)
    assert float(row["slack"]) >= 0


def test_qv_probe(tmp_path):
    out = tmp_path / "q.csv"
    assert run(["qv-probe", "--a", "0.5", "--n", "200", "--out", str(out)]) == 0
    _, (row,) = read_csv(out)
    assert row["matches"] in {"both", "A", "B", "neither"}
    assert float(row["candidate_a"]) == pytest.approx(0.5)


@pytest.mark.parametrize("argv", [
    ["sweep"],
    ["sweep", "--a"],
    ["oracle-tv", "--a", "1.5"],
    ["sweep", "--a", "0.3", "--delta", "0.001", "--eps", "0.01"],
    ["check-condition", "--measure", '{"family": "levy"}'],
    ["check-condition", "--measure", "{not json"],
    ["check-condition", "--eps-family", "3"],
    ["oracle-tv", "--a", "0.3", "--eps-family", "0.5"],
    ["sweep", "--a", "0.3", "--n", "0"],
    ["check-condition", "--config", "/nonexistent/cfg.json"],
    ["check-condition", "--workers", "0"],
])
def test_config_errors_exit_one(argv, capsys):
    try:
        code = run(argv)
    except SystemExit as exc:  # argparse usage errors
        code = exc.code
    assert code in (1, 2) if argv == ["sweep", "--a"] else code == 1
    assert "levycouple" in capsys.readouterr().err or argv == ["sweep", "--a"]


def test_empty_a_grid(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"a_grid": []}))
    assert run(["sweep", "--config", str(cfg)]) == 1
    assert "a_grid" in capsys.readouterr().err


def test_unknown_config_field(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"a_grid": [0.3], "horizon": 2}))
    assert run(["sweep", "--config", str(cfg)]) == 1


def test_invariant_violation_exit_code(monkeypatch, tmp_path):
    import levycouple.cli as cli
    from levycouple.errors import InvariantViolation

    def boom(cfg, args):
        raise InvariantViolation("Z became negative")

    monkeypatch.setitem(cli.COMMANDS, "couple", (boom, ""))
    assert run(["couple", "--a", "0.3"]) == 2


def test_recorded_violations_exit_code(monkeypatch, tmp_path):
    import levycouple.cli as cli

    monkeypatch.setitem(cli.COMMANDS, "couple", (lambda cfg, args: (["a"], [[0.3]], 1), ""))
    out = tmp_path / "v.csv"
    assert run(["couple", "--a", "0.3", "--out", str(out)]) == 2
    assert out.exists()


def test_hash_ignores_workers_and_out(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    base = ["sweep", "--a", "0.3", "--n", "200", "--eps", "0.01", "--T-max", "4"]
    assert run(base + ["--workers", "1", "--out", str(a)]) == 0
    assert run(base + ["--workers", "2", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_hash_tracks_config():
    base = {"seed": 1, "n": 10}
    assert config_hash(base, "sweep") != config_hash({**base, "n": 11}, "sweep")
    assert config_hash(base, "sweep") != config_hash(base, "couple")
    assert config_hash({**base, "out": "x"}, "sweep") == config_hash(base, "sweep")


def test_module_entry_point(tmp_path):
    out = tmp_path / "m.csv"
    proc = subprocess.run([sys.executable, "-m", "levycouple", "oracle-tv", "--a", "0.2",
                           "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert out.read_text().startswith("# levycouple oracle-tv")
