import csv
import io
import json
import subprocess
import sys

import pytest

from forrlab.cli import COMMANDS, ExperimentConfig, build_parser, main

SMALL = {
    "forr-stats": ["--n", "5", "--trials", "500"],
    "walk-verify": ["--n", "3", "--trials", "10", "--fast"],
    "lemma55": ["--n", "6", "--kappa", "3"],
    "fourier-uniformity": ["--n", "6", "--kappa", "4", "--trials", "3"],
    "hybrid-advantage": ["--n", "6", "--kappa", "2", "--trials", "100"],
    "shifted-game": ["--n", "6", "--kappa", "2", "--trials", "50"],
    "lowdeg-battery": ["--n", "7", "--trials", "500"],
    "oracle-demo": ["--trials", "5"],
}


def run_cli(capsys, argv):
    rc = main(argv)
    out = capsys.readouterr()
    return rc, out.out, out.err


def test_every_command_has_small_params():
    assert set(SMALL) == set(COMMANDS)


@pytest.mark.parametrize("cmd", sorted(SMALL))
def test_output_is_deterministic_and_worker_independent(cmd, capsys):
    base = [cmd, *SMALL[cmd], "--seed", "3"]
    rc1, a, _ = run_cli(capsys, base)
    rc2, b, _ = run_cli(capsys, base + ["--workers", "4"])
    assert rc1 == rc2 == 0
    assert a == b
    doc = json.loads(a)
    assert doc["seed"] == 3 if "seed" in doc else True


@pytest.mark.parametrize("cmd", sorted(SMALL))
def test_csv_has_documented_fields(cmd, capsys):
    rc, out, _ = run_cli(capsys, [cmd, *SMALL[cmd], "--seed", "1", "--format", "csv"])
    assert rc == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert rows
    documented = COMMANDS[cmd][2].split(" (")[0].split()
    assert list(rows[0].keys()) == documented


def test_out_file_written(tmp_path, capsys):
    p = tmp_path / "r.json"
    rc, out, _ = run_cli(capsys, ["lemma55", "--n", "5", "--kappa", "2", "--seed", "2", "--out", str(p)])
    assert rc == 0 and out == ""
    assert json.loads(p.read_text())["matches"] is True


def test_check_prints_status(capsys):
    rc, _, err = run_cli(capsys, ["lemma55", "--n", "6", "--kappa", "3", "--seed", "2", "--check"])
    assert rc == 0 and "lemma55: PASS" in err
    rc, _, err = run_cli(capsys, ["lemma55", "--n", "4", "--kappa", "2", "--seed", "2", "--epsilon", "0.9", "--check"])
    assert rc == 1 and "FAIL" in err


def test_exit_codes(capsys):
    assert run_cli(capsys, ["forr-stats", "--n", "0", "--seed", "1"])[0] == 2
    assert run_cli(capsys, ["forr-stats", "--n", "40", "--seed", "1", "--trials", "10"])[0] == 3
    assert run_cli(capsys, ["lemma55", "--n", "13", "--kappa", "4", "--seed", "1"])[0] == 3
    assert run_cli(capsys, ["forr-stats", "--seed", "1", "--epsilon", "2"])[0] == 2
    assert run_cli(capsys, ["hybrid-advantage", "--seed", "1", "--hybrids", "0,9", "--n", "6", "--kappa", "2"])[0] == 2
    with pytest.raises(SystemExit) as e:
        main(["forr-stats"])
    assert e.value.code == 2


def test_environment_overrides(monkeypatch, capsys):
    monkeypatch.setenv("FORRLAB_SEED", "5")
    monkeypatch.setenv("FORRLAB_N", "5")
    monkeypatch.setenv("FORRLAB_TRIALS", "400")
    monkeypatch.setenv("FORRLAB_FORMAT", "csv")
    rc, out, _ = run_cli(capsys, ["forr-stats"])
    assert rc == 0
    row = next(csv.DictReader(io.StringIO(out)))
    assert row["n"] == "5" and row["trials"] == "400" and row["seed"] == "5"
    # explicit flags win over the environment
    rc, out, _ = run_cli(capsys, ["forr-stats", "--n", "4", "--format", "json"])
    assert json.loads(out)["n"] == 4


def test_help_lists_fields():
    for name, (_, _, fields) in COMMANDS.items():
        sub = build_parser()._subparsers._group_actions[0].choices[name]
        text = sub.format_help()
        assert "--seed" in text and fields.split()[0] in text


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig("nope", 1)
    with pytest.raises(ValueError):
        ExperimentConfig("forr-stats", 1, workers=0)
    with pytest.raises(ValueError):
        ExperimentConfig("forr-stats", 1, format="xml")


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "forrlab", "oracle-demo", "--seed", "1", "--trials", "2"], capture_output=True, text=True, check=False)
    assert r.returncode == 0
    assert json.loads(r.stdout)["agreement"] == 1.0
