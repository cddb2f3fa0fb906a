import json

import pytest

from gpdf.cli import (
    ConfigError,
    check_manifest,
    main,
    parse_config,
    run_scenario,
)


def test_defaults_per_scenario():
    cfg = parse_config("", "defocusing-scatter")
    assert cfg.get("grid", "L") == 32.0
    assert cfg.get("solver", "t_max") == 8.0
    assert cfg.get("run", "amplitude") == 0.1
    cfg2 = parse_config("", "dichotomy")
    assert cfg2.get("measure", "r") == 2.0
    assert cfg2.get("measure", "J") == 6


def test_overrides_and_scenario_line():
    text = """
scenario = lemma-sum

[measure]
r = 1.5

[run]
k_list = 10, 20
"""
    cfg = parse_config(text)
    assert cfg.scenario == "lemma-sum"
    assert cfg.get("measure", "r") == 1.5
    assert cfg.get("run", "k_list") == (10, 20)


def test_unknown_key_reports_line_number():
    text = "[solver]\ndt = 0.1\n"
    with pytest.raises(ConfigError, match="line 2.*unknown key 'dt'"):
        parse_config(text, "lemma-sum")


def test_unknown_section_and_scenario():
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config("[turbo]\nx = 1\n", "lemma-sum")
    with pytest.raises(ConfigError, match="unknown scenario"):
        parse_config("", "warp-drive")
    with pytest.raises(ConfigError, match="no scenario"):
        parse_config("")


def test_malformed_value_reports_line_number():
    text = "[grid]\nN = sixty-four\n"
    with pytest.raises(ConfigError, match="line 2.*bad value for grid.N"):
        parse_config(text, "lemma-sum")


def test_config_round_trip():
    cfg = parse_config("", "dichotomy")
    again = parse_config(cfg.to_text())
    assert again == cfg


def test_list_scenarios(capsys):
    assert main(["list-scenarios"]) == 0
    out = capsys.readouterr().out.split()
    assert "dichotomy" in out and "lemma-sum" in out


def test_lemma_sum_end_to_end(tmp_path, capsys):
    rc = main(["run", "lemma-sum", "--out", str(tmp_path / "out")])
    out = capsys.readouterr().out
    assert rc == 0
    assert "[PASS] finite_c" in out
    assert "[PASS] tail_below_one" in out
    doc = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert doc["passed"] is True
    names = [o["file"] for o in doc["outputs"]]
    assert "lemma.csv" in names


def test_manifest_check_detects_tampering(tmp_path, capsys):
    cfg = parse_config("", "lemma-sum")
    manifest, passed = run_scenario(cfg, tmp_path / "out")
    assert passed
    assert check_manifest(manifest) == []
    assert main(["check", str(manifest)]) == 0

    csv_path = tmp_path / "out" / "lemma.csv"
    csv_path.write_text(csv_path.read_text() + "tampered\n")
    problems = check_manifest(manifest)
    assert problems and "digest mismatch" in problems[0]
    assert main(["check", str(manifest)]) == 1
    capsys.readouterr()


def test_outputs_are_deterministic(tmp_path):
    cfg = parse_config("", "lemma-sum")
    run_scenario(cfg, tmp_path / "a")
    run_scenario(cfg, tmp_path / "b")
    assert ((tmp_path / "a" / "lemma.csv").read_bytes()
            == (tmp_path / "b" / "lemma.csv").read_bytes())
    da = json.loads((tmp_path / "a" / "manifest.json").read_text())
    db = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert da["outputs"] == db["outputs"]


def test_bad_config_file_exit_status(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[solver]\nwarp = 9\n")
    rc = main(["run", "lemma-sum", "--config", str(bad),
               "--out", str(tmp_path / "out")])
    assert rc == 2
    assert "config error" in capsys.readouterr().err
