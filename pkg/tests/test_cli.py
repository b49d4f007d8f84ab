import json

import pytest

from mlpicard.cli import main, parse_int_list, parse_radius
from mlpicard.harness import parse_csv


def test_parse_int_list():
    assert parse_int_list("1..4,6") == [1, 2, 3, 4, 6]
    assert parse_int_list("10,100") == [10, 100]
    assert parse_int_list(5) == [5]
    assert parse_int_list([1, 2]) == [1, 2]
    with pytest.raises(ValueError):
        parse_int_list("")


def test_parse_radius():
    assert parse_radius("inf") == float("inf")
    assert parse_radius("4") == 4.0
    with pytest.raises(ValueError):
        parse_radius("-1")


def test_cli_writes_outputs(tmp_path, capsys):
    csv_path, plot_path = tmp_path / "out.csv", tmp_path / "out.svg"
    code = main(["--example", "heat-system", "--d", "10", "--n", "1..3", "--runs", "2",
                 "--csv", str(csv_path), "--plot", str(plot_path), "--seed", "3"])
    assert code == 0
    rows = parse_csv(csv_path)
    assert [r.n for r in rows] == [1, 2, 3]
    assert rows[0].reference == (0.47621, 2.45726)
    assert plot_path.exists() and plot_path.with_suffix(".dat").exists()
    assert "heat_system" in capsys.readouterr().out


def test_config_file_with_flag_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    out = tmp_path / "out.csv"
    cfg.write_text(json.dumps({"example": "sine-gordon", "d": "10", "n": "1..2", "runs": 2,
                               "reference": "paper-ds", "csv": str(out), "no-timing": True}))
    assert main(["--config", str(cfg), "--n", "3"]) == 0
    rows = parse_csv(out)
    assert [r.n for r in rows] == [3]
    assert rows[0].provenance == "paper_ds" and rows[0].runtime_seconds is None


def test_missing_example_is_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["--d", "10"])
    assert info.value.code == 2


def test_missing_fixture_exit_code(capsys):
    assert main(["--example", "allen-cahn", "--d", "7", "--n", "1", "--runs", "1"]) == 1
    assert "no paper_mlp reference" in capsys.readouterr().err


def test_overrides(tmp_path):
    out = tmp_path / "o.csv"
    assert main(["--example", "semilinear-bs", "--d", "10", "--n", "2", "--runs", "2", "--t", "1",
                 "--r", "inf", "--em-steps", "10", "--csv", str(out)]) == 0
    row = parse_csv(out)[0]
    assert row.gaussian_scalars == 0
