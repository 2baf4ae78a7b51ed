import json

import pytest

from bilevelnn import problems as P
from bilevelnn.cli import main


def run_pipeline(d):
    """Every stage once, small sizes; returns the produced files."""
    R = ["--reproducible"]
    assert main(R + ["gen-instances", "--kind", "kip", "--n", "8", "--k", "3", "--count", "2", "--seed", "5",
                     "--out", str(d / "inst")]) == 0
    assert main(R + ["collect", "--kind", "kip", "--n", "8", "--instances", "6", "--decisions", "6",
                     "--seed", "1", "--greedy-features", "--out", str(d / "data.jsonl")]) == 0
    assert main(R + ["train", "--data", str(d / "data.jsonl"), "--epochs", "4", "--seed", "2",
                     "--out", str(d / "net.json"), "--report", str(d / "train.json")]) == 0
    inst = sorted((d / "inst").glob("*.json"))[0]
    assert main(R + ["solve", "--instance", str(inst), "--model", str(d / "net.json"),
                     "--out", str(d / "sol.json")]) == 0
    assert main(R + ["evaluate", "--instances", str(d / "inst"), "--methods", "NN_l,NN_u,GVFA,bruteforce",
                     "--model-lower", str(d / "net.json"), "--out", str(d / "results.csv"),
                     "--summary", str(d / "table.txt")]) == 0
    return sorted(p for p in d.rglob("*") if p.is_file())


def test_pipeline_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    fa, fb = run_pipeline(a), run_pipeline(b)
    assert [p.relative_to(a) for p in fa] == [p.relative_to(b) for p in fb]
    assert len(fa) == 9
    for pa, pb in zip(fa, fb):
        assert pa.read_bytes() == pb.read_bytes(), pa.name
    rows = (a / "results.csv").read_text().splitlines()
    assert rows[0] == "instance_id,method,objective,mre_pct,surrogate_time_s,repair_time_s,status"
    assert len(rows) == 1 + 2 * 4
    sol = json.loads((a / "sol.json").read_text())
    assert sol["status"] == "heuristic" and sol["timings"] == {"repair": 0.0, "surrogate": 0.0}


def test_verify_exit_codes(tmp_path):
    assert main(["gen-instances", "--kind", "kip", "--n", "6", "--k", "2", "--count", "1",
                 "--out", str(tmp_path / "inst")]) == 0
    assert main(["collect", "--kind", "kip", "--n", "6", "--instances", "4", "--decisions", "5",
                 "--out", str(tmp_path / "d.jsonl")]) == 0
    assert main(["train", "--data", str(tmp_path / "d.jsonl"), "--epochs", "2",
                 "--out", str(tmp_path / "net.json")]) == 0
    for suite in ("thm1", "lemma1", "obs1"):
        out = tmp_path / f"{suite}.json"
        assert main(["verify", "--suite", suite, "--instances", str(tmp_path / "inst"),
                     "--model", str(tmp_path / "net.json"), "--out", str(out)]) == 0
        assert json.loads(out.read_text())["holds"] is True
    # a penalty of 1 is outside the guarantee's hypotheses
    assert main(["verify", "--suite", "thm1", "--instances", str(tmp_path / "inst"),
                 "--model", str(tmp_path / "net.json"), "--lam", "1", "--out", str(tmp_path / "x.json")]) != 0


def test_oracle_and_bruteforce(tmp_path, capsys):
    path = tmp_path / "k.json"
    P.save_instance(P.KipInstance((6, 5, 4), (3, 4, 5), 7, 1), path)
    assert main(["oracle", "--instance", str(path), "--x", "0,0,0"]) == 0
    assert json.loads(capsys.readouterr().out)["value"] == 11
    assert main(["--reproducible", "bruteforce", "--instance", str(path)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["x"] == [1.0, 0.0, 0.0] and out["leader_value"] == 5 and out["status"] == "optimal"


def test_bad_arguments(tmp_path, capsys):
    with pytest.raises(SystemExit):
        main(["solve"])
    path = tmp_path / "k.json"
    P.save_instance(P.KipInstance((6, 5, 4), (3, 4, 5), 7, 1), path)
    assert main(["oracle", "--instance", str(path), "--x", "0,0"]) == 2
    assert "error" in capsys.readouterr().err
