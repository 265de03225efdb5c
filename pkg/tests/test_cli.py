import json

import pytest

from mbharvest.cli import EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_OK, build_parser, main


def test_run_writes_outputs(tmp_path):
    code = main(["run", "--mode", "svm", "--fraction", "0.5", "--slots", "1", "--seed", "3",
                 "--out", str(tmp_path), "--trace", str(tmp_path / "trace.jsonl")])
    assert code == EXIT_OK
    names = {p.name for p in tmp_path.iterdir()}
    assert {"plan.csv", "records.json", "summary.json", "trace.jsonl"} <= names
    assert sum(n.startswith("regions_band") for n in names) == 7
    summary = json.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))
    assert summary["config"]["seed"] == 3 and summary["config"]["mode"] == "svm"


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps({"n_sus": 4, "sensing": {"n_slots": 1}}), encoding="utf-8")
    code = main(["run", "--config", str(cfg), "--constraint-form", "corrected", "--sca-tol", "1e-8",
                 "--out", str(tmp_path / "o")])
    assert code == EXIT_OK
    echo = json.loads((tmp_path / "o" / "summary.json").read_text(encoding="utf-8"))["config"]
    assert echo["n_sus"] == 4 and echo["sca_tol"] == 1e-8


@pytest.mark.parametrize("doc", [{"sensing": {"max_false_alarm": 0.6}}, {"nope": 1}])
def test_config_errors_exit_2(tmp_path, doc, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps(doc), encoding="utf-8")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_missing_config_exit_2(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG


def test_bad_fraction_exit_2(tmp_path):
    assert main(["run", "--mode", "svm", "--fraction", "1.5", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["sweep", "--fractions", "0.5,2", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_paper_form_with_high_detection_target_exit_3(tmp_path):
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps({"n_sus": 2, "sensing": {"n_slots": 1}}), encoding="utf-8")
    code = main(["run", "--config", str(cfg), "--constraint-form", "paper", "--out", str(tmp_path / "o")])
    assert code == EXIT_INFEASIBLE


def test_sweep(tmp_path):
    code = main(["sweep", "--fractions", "0.5,0.2", "--seeds", "2", "--slots", "1", "--out", str(tmp_path)])
    assert code == EXIT_OK
    entries = json.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))["entries"]
    assert [e["fraction"] for e in entries] == [0.2, 0.5]
    assert (tmp_path / "sweep.csv").exists()


def test_oracle_moderate_snr(tmp_path):
    code = main(["oracle", "--instances", "10", "--snr-range", "0.3,10", "--out", str(tmp_path)])
    assert code == EXIT_OK
    res = json.loads((tmp_path / "oracle_summary.json").read_text(encoding="utf-8"))
    assert res["optimizer_ok"] and res["grid_ok"]


def test_parser_surface():
    p = build_parser()
    for cmd in ("run", "sweep", "oracle"):
        args = p.parse_args([cmd, "--seed", "1", "--mode", "svm", "--constraint-form", "paper", "--sca-tol", "1e-5",
                             "--out", "x"])
        assert args.seed == 1 and args.constraint_form == "paper"
    with pytest.raises(SystemExit):
        p.parse_args(["run", "--mode", "bogus"])
