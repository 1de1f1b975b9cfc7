from __future__ import annotations

import csv
import json

import pytest

from weylwalk import cli


def run(tmp_path, *argv, name="out.csv"):
    out = tmp_path / name
    code = cli.main([*argv, "--out", str(out)])
    return code, out


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_parsers():
    assert cli.parse_k_range("1..3") == [1, 2, 3]
    assert cli.parse_k_range("1,4") == [1, 4]
    assert cli.parse_grid("1,2;2,4") == [(1, 2), (2, 4)]
    with pytest.raises(cli.UsageError):
        cli.parse_k_range("3..1")


def test_constants(tmp_path):
    code, out = run(tmp_path, "constants", "--chamber", "C", "--k", "1..3")
    assert code == 0
    rows = read_csv(out)
    assert [int(r["k"]) for r in rows] == [1, 2, 3]
    assert float(rows[0]["kappa"]) == pytest.approx(0.797885, abs=1e-6)
    code, out = run(tmp_path, "constants", "--chamber", "D", "--k", "2")
    assert float(read_csv(out)[0]["kappa"]) == pytest.approx(0.0795775, abs=1e-7)
    assert out.read_bytes().endswith(b"\r\n")


def test_usage_errors(tmp_path, capsys):
    assert cli.main(["constants", "--chamber", "Q", "--k", "2"]) == 2
    assert cli.main(["tails", "--chamber", "C"]) == 2
    assert cli.main(["limit", "--chamber", "C", "--k", "1", "--x", "1", "--n", "5"]) == 2
    assert cli.main(["nonsense"]) == 2
    assert "error" in capsys.readouterr().err


def test_tails_exact_with_summary(tmp_path):
    code, out = run(tmp_path, "tails", "--chamber", "C", "--k", "1", "--x", "1", "--n-max", "200", "--every", "2")
    assert code == 0
    rows = read_csv(out)
    assert rows[0]["n"] == "2" and float(rows[0]["P_survive"]) == 0.5
    side = json.loads(out.with_name(out.name + ".summary.json").read_text())
    assert side["schema"] == cli.SCHEMA
    assert side["slope"] == pytest.approx(-0.5, abs=0.05)


def test_tails_mc_jsonl(tmp_path):
    code, out = run(tmp_path, "tails", "--mode", "mc", "--chamber", "D", "--k", "2", "--x", "0,3",
                    "--n-max", "100", "--samples", "3000", "--format", "jsonl", name="t.jsonl")
    assert code == 0
    recs = [json.loads(l) for l in out.read_text().splitlines()]
    assert all(r["schema"] == cli.SCHEMA for r in recs)


def test_transform_modes(tmp_path):
    code, out = run(tmp_path, "transform", "--build-v", "--chamber", "C", "--k", "2", "--radius", "20")
    assert code == 0 and len(read_csv(out)) > 100
    code, out = run(tmp_path, "transform", "--sample", "--chamber", "C", "--k", "2", "--x", "1,2",
                    "--n", "50", "--radius", "60", name="paths.csv")
    assert code == 0
    for r in read_csv(out):
        a, b = map(float, r["final"].split(";"))
        assert 0 < a < b and float(r["max_residual"]) < 1e-9
    code, out = run(tmp_path, "transform", "--tilde-c", "--chamber", "C", "--k", "1", "--grid", "1;3", name="tc.csv")
    assert code == 0
    assert [float(r["estimate"]) for r in read_csv(out)] == [1.0, 3.0]
    assert cli.main(["transform", "--build-v", "--sample", "--chamber", "C", "--k", "2"]) == 2


def test_limit_exact(tmp_path):
    code, out = run(tmp_path, "limit", "--chamber", "C", "--k", "1", "--x", "1", "--n", "400",
                                        "--format", "jsonl", name="l.jsonl")
    assert code == 0
    recs = [json.loads(l) for l in out.read_text().splitlines()]
    assert recs


def test_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"chamber": "D", "k": "2"}))
    code, out = run(tmp_path, "constants", "--config", str(cfg))
    assert code == 0 and read_csv(out)[0]["chamber"] == "D"
    cfg.write_text(json.dumps({"bogus": 1}))
    assert cli.main(["constants", "--config", str(cfg)]) == 2


def test_output_env(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "o"))
    assert cli.main(["constants", "--chamber", "C", "--k", "1"]) == 0
    assert (tmp_path / "o" / "constants.csv").exists()


def test_mc_bytes_identical_across_workers(tmp_path):
    outs = []
    for w in (1, 2):
        code, out = run(tmp_path, "tails", "--mode", "mc", "--chamber", "C", "--k", "2", "--x", "1,2",
                        "--n-max", "60", "--samples", "40000", "--seed", "9", "--workers", str(w), name=f"w{w}.csv")
        assert code == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
