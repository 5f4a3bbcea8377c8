import json

from orabench.cli import main
from orabench.harness import CSV_COLUMNS


def test_gen_and_validate(tmp_path, capsys):
    out = tmp_path / "inst.json"
    assert main(["gen", "--family", "nonidentical", "--seed", "1", "--n", "10", "--out", str(out)]) == 0
    assert main(["validate", str(out)]) == 0
    assert capsys.readouterr().out.strip().endswith("ok")
    doc = json.loads(out.read_text())
    doc["distributions"][0][0]["p"] = 7.0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert main(["validate", str(bad)]) == 1


def test_gen_other_families(tmp_path):
    hard = tmp_path / "hard.json"
    assert main(["gen", "--family", "hard_lower_bound", "--z", "2", "--B", "8", "--out", str(hard)]) == 0
    assert json.loads(hard.read_text())["epsilon_implied"] == 0.5
    assert main(["validate", str(hard)]) == 0
    byz = tmp_path / "byz.json"
    assert main(["gen", "--family", "byzantine", "--n", "10", "--red-fraction", "0.2",
                 "--red-preset", "value_decoys", "--out", str(byz)]) == 0
    assert len(json.loads(byz.read_text())["red"]) == 2
    assert main(["validate", str(byz)]) == 0
    aug = tmp_path / "aug.json"
    assert main(["gen", "--family", "augmentation", "--n", "5", "--aug-preset", "uniform_boost",
                 "--out", str(aug)]) == 0
    assert (tmp_path / "aug.plan.json").exists()
    assert main(["gen", "--family", "hard_lower_bound", "--z", "2", "--B", "16",
                 "--out", str(hard)]) == 2


def test_run_and_summarize(tmp_path, capsys):
    cfg = {"algorithm": "exp_pricing", "trials": 3, "epsilon": 0.5,
           "generator": {"family": "nonidentical", "n": 40, "m": 2, "K_max": 2, "seed": 2,
                         "budgets": [200.0, 200.0]}}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    report = tmp_path / "report.csv"
    assert main(["run", "--config", str(path), "--seed", "7", "--out", str(report)]) == 0
    lines = report.read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS) and len(lines) == 4
    again = tmp_path / "again.csv"
    main(["run", "--config", str(path), "--seed", "7", "--out", str(again)])
    assert again.read_text() == report.read_text()
    capsys.readouterr()
    assert main(["summarize", "--report", str(report), "--group-by", "B"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("B,trials") and len(out) == 2


def test_lower_bound(capsys):
    assert main(["lower-bound", "--z", "1", "--B", "4", "--realizations", "10"]) == 0
    assert "violations=0/10" in capsys.readouterr().out


def test_bad_config_exit_code(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"algorithm": "nope", "generator": {}}))
    assert main(["run", "--config", str(path)]) == 2
    assert main(["validate", str(tmp_path / "missing.json")]) == 2
