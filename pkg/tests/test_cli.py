import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from proxmatch import acceptance
from proxmatch.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


def test_exact_expected_value(runner):
    res = runner.invoke(main, ["exact", "--gaps", "1/10,2/10,3/10,4/10",
                               "--op", "E"])
    assert res.exit_code == 0
    got = json.loads(res.output)
    assert got["value"] == {"numerator": "11", "denominator": "30",
                            "decimal": pytest.approx(11 / 30)}


def test_exact_greedy_and_oracle(runner):
    d = json.loads(runner.invoke(
        main, ["exact", "--gaps", "0.1,0.2,0.3,0.4", "--op", "D"]).output)
    assert d["value"]["numerator"] == "2" and d["value"]["denominator"] == "5"
    o = json.loads(runner.invoke(
        main, ["exact", "--gaps", "1/10,2/10,3/10,4/10",
               "--op", "oracle"]).output)
    assert o["value"]["numerator"] == "11"


def test_exact_partitions_and_weights(runner):
    res = runner.invoke(main, ["exact", "--op", "weights", "--k", "6"])
    got = json.loads(res.output)
    assert got["partitions"][0] == [5, 1]
    assert got["weights"][0] == {"numerator": "2", "denominator": "5",
                                 "decimal": pytest.approx(0.4)}
    assert runner.invoke(main, ["exact", "--op", "partitions"]).exit_code == 2
    assert runner.invoke(main, ["exact", "--op", "partitions",
                                "--k", "5"]).exit_code == 2


def test_exact_bad_gaps(runner):
    assert runner.invoke(main, ["exact", "--gaps", "1,2,3"]).exit_code == 2
    assert runner.invoke(main, ["exact", "--gaps", "0,1"]).exit_code == 2
    assert runner.invoke(main, ["exact", "--op", "E"]).exit_code == 2
    # beyond the exact cap
    long = ",".join(["1"] * 14)
    assert runner.invoke(main, ["exact", "--gaps", long]).exit_code == 2


def test_enumerate_bundled_fixture(runner):
    res = runner.invoke(main, ["enumerate", "--instance", "cyclic2x2"])
    assert res.exit_code == 0
    got = json.loads(res.output)
    assert got["count"] == 2
    assert [[0, 0], [1, 1]] in got["matchings"]
    assert runner.invoke(main, ["enumerate", "--instance",
                                "no-such-thing"]).exit_code == 2


def test_enumerate_file_and_csv(runner, tmp_path):
    inst = {"nMen": 1, "nWomen": 2, "menPrefs": [[1, 0]],
            "womenPrefs": [[0], [0]]}
    src = tmp_path / "inst.json"
    src.write_text(json.dumps(inst))
    out = tmp_path / "matchings.csv"
    res = runner.invoke(main, ["enumerate", "--instance", str(src),
                               "--out", str(out), "--format", "csv"])
    assert res.exit_code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "matchingIndex,man,woman"
    assert lines[1] == "0,0,1"
    assert (tmp_path / "matchings.manifest.json").exists()


def test_enumerate_cap_exit(runner, tmp_path):
    n = 9
    inst = {"nMen": n, "nWomen": n,
            "menPrefs": [list(range(n))] * n,
            "womenPrefs": [list(range(n))] * n}
    src = tmp_path / "big.json"
    src.write_text(json.dumps(inst))
    res = runner.invoke(main, ["enumerate", "--instance", str(src)])
    assert res.exit_code == 2


def test_rpmp_outputs_and_determinism(runner, tmp_path):
    out = tmp_path / "report.csv"
    args = ["rpmp", "--n", "12", "--k", "2", "--trials", "4", "--seed", "5",
            "--out", str(out)]
    assert runner.invoke(main, args).exit_code == 0
    first = out.read_bytes()
    assert first.startswith(b"trial,n,k,metric,")
    assert (tmp_path / "report.manifest.json").exists()
    assert (tmp_path / "report_rpmp.png").exists()

    again = tmp_path / "again.csv"
    args2 = ["rpmp", "--n", "12", "--k", "2", "--trials", "4", "--seed", "5",
             "--out", str(again), "--no-plot"]
    assert runner.invoke(main, args2).exit_code == 0
    assert again.read_bytes() == first
    assert not (tmp_path / "again_rpmp.png").exists()

    manifest = json.loads((tmp_path / "report.manifest.json").read_text())
    assert manifest["seed"] == 5 and manifest["command"] == "rpmp"
    assert str(out) in manifest["outputs"]
    assert manifest["rng_algorithm"].startswith("philox")


def test_rpmp_threads_equal_serial(runner, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    base = ["rpmp", "--n", "10", "--k", "1", "--trials", "6", "--seed", "2",
            "--no-plot"]
    assert runner.invoke(main, base + ["--out", str(a)]).exit_code == 0
    assert runner.invoke(main, base + ["--out", str(b),
                                       "--threads", "2"]).exit_code == 0
    assert a.read_bytes() == b.read_bytes()


def test_rpmp_json_format(runner, tmp_path):
    out = tmp_path / "r.json"
    res = runner.invoke(main, ["rpmp", "--n", "8", "--k", "1", "--trials",
                               "2", "--seed", "1", "--format", "json",
                               "--out", str(out), "--no-plot"])
    assert res.exit_code == 0
    got = json.loads(out.read_text())
    assert set(got) == {"summary", "rows"}
    assert got["summary"]["trials"] == 2
    assert len(got["rows"]) == 2


def test_rpmp_stdout_summary(runner):
    res = runner.invoke(main, ["rpmp", "--n", "8", "--k", "1",
                               "--trials", "2", "--seed", "1"])
    assert res.exit_code == 0
    got = json.loads(res.output)
    assert got["n"] == 8 and got["trials"] == 2


def test_seed_required(runner):
    res = runner.invoke(main, ["rpmp", "--n", "8", "--k", "1",
                               "--trials", "2"])
    assert res.exit_code == 2
    assert "seed" in res.output


def test_config_file_merging(runner, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n = 8\nk = 1\ntrials = 3\nseed = 4\n# a comment\n")
    res = runner.invoke(main, ["rpmp", "--config", str(cfg)])
    assert res.exit_code == 0
    assert json.loads(res.output)["trials"] == 3
    # explicit flag beats the file
    res2 = runner.invoke(main, ["rpmp", "--config", str(cfg),
                                "--trials", "2"])
    assert json.loads(res2.output)["trials"] == 2


def test_config_file_rejects_unknown_and_bad_values(runner, tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("bogus = 1\n")
    res = runner.invoke(main, ["rpmp", "--config", str(bad), "--seed", "1"])
    assert res.exit_code == 2 and "bogus" in res.output
    notint = tmp_path / "notint.cfg"
    notint.write_text("n = maybe\nseed = 1\n")
    res2 = runner.invoke(main, ["rpmp", "--config", str(notint)])
    assert res2.exit_code == 2
    garbled = tmp_path / "garbled.cfg"
    garbled.write_text("just words\n")
    res3 = runner.invoke(main, ["rpmp", "--config", str(garbled),
                                "--seed", "1"])
    assert res3.exit_code == 2


def test_line_outputs(runner, tmp_path):
    out = tmp_path / "line.csv"
    res = runner.invoke(main, ["line", "--lam", "1", "--mu", "2", "--window",
                               "80", "--seed", "3", "--tail-grid", "0.5,1",
                               "--out", str(out), "--no-plot"])
    assert res.exit_code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "trial,waveId,N_plus,N_minus,blueCoord,X,matchedRedCoord,matcher"
    manifest = json.loads((tmp_path / "line.manifest.json").read_text())
    assert manifest["config"]["tail_grid"] == [0.5, 1.0]


def test_line_rejects_bad_rates(runner):
    res = runner.invoke(main, ["line", "--lam", "2", "--mu", "1",
                               "--seed", "1"])
    assert res.exit_code == 2


def test_validate_subset_passes(runner, tmp_path):
    out = tmp_path / "gate.json"
    res = runner.invoke(main, ["validate", "--criteria", "1,2",
                               "--out", str(out)])
    assert res.exit_code == 0
    assert res.output.count("PASS") == 2
    assert "2/2 criteria passed" in res.output
    got = json.loads(out.read_text())
    assert got["allPassed"] is True
    assert [r["id"] for r in got["results"]] == [1, 2]
    assert all(r["passed"] for r in got["results"])


def test_validate_rejects_unknown_criteria(runner):
    assert runner.invoke(main, ["validate", "--criteria", "1,99"]).exit_code == 2
    assert runner.invoke(main, ["validate", "--criteria", "one"]).exit_code == 2


def test_validate_exit_one_on_failure(runner, monkeypatch, tmp_path):
    def always_fails(ctx):
        return acceptance.CriterionResult(1, "forced failure", False,
                                          {"detail": 0})
    monkeypatch.setattr(acceptance, "CRITERIA",
                        [(1, "forced failure", always_fails)])
    out = tmp_path / "gate.json"
    res = runner.invoke(main, ["validate", "--criteria", "1",
                               "--out", str(out)])
    assert res.exit_code == 1
    assert "FAIL" in res.output
    assert json.loads(out.read_text())["allPassed"] is False


def test_validate_reports_crashed_criterion(runner, monkeypatch):
    def crashes(ctx):
        raise RuntimeError("boom")
    monkeypatch.setattr(acceptance, "CRITERIA", [(1, "crashy", crashes)])
    res = runner.invoke(main, ["validate", "--criteria", "1"])
    assert res.exit_code == 1
    assert "boom" in res.output
