import csv
import io
import math

import pytest

from doublewell.cli import build_parser, main
from doublewell.harness import (
    CSV_COLUMNS,
    ConfigError,
    config_from_dict,
    csv_text,
    parse_config,
    run_scan,
    serialize_config,
    svg_text,
)

MINIMAL = {"s": 2, "L": [6], "N": [100], "lambda": 0.1}


def small(**extra):
    raw = {"s": 2, "lambda": 0.1, "L": [4, 8], "N": [20, 60], "bogoliubov": {"M": [4, 8]},
           "grid": {"n": 1025}}
    raw.update(extra)
    return config_from_dict(raw)


def test_defaults_filled():
    cfg = config_from_dict(MINIMAL)
    assert cfg.grid.n == 2049 and cfg.grid.x_max is None
    assert cfg.bogoliubov.M == (8, 16, 32)
    assert cfg.trial.sigma_rule == "sqrt_gap_N"
    assert cfg.kernel.amplitude == 1.0 and cfg.kernel.range == 1.0
    assert cfg.points() == [(6.0, 100)]


@pytest.mark.parametrize("change, message", [
    ({"s": 1.5}, "s must be ≥ 2"),
    ({"L": [], "N": []}, "empty scan"),
    ({"colour": "red"}, "colour"),
    ({"grid": {"n": 2049, "spacing": 0.1}}, "spacing"),
    ({"lambda": -1}, r"lambda out of range \[0, inf\)"),
    ({"N": [1]}, r"N values out of range \[2, inf\)"),
    ({"trial": {"sigma_rule": "fixed"}}, "sigma_fixed"),
    ({"pairing": "zip", "L": [4, 6]}, "equal length"),
    ({"bogoliubov": {"M": [0]}}, ">= 1"),
])
def test_config_errors(change, message):
    with pytest.raises(ConfigError, match=message):
        config_from_dict({**MINIMAL, **change})


def test_missing_key():
    with pytest.raises(ConfigError, match="lambda"):
        config_from_dict({"s": 2, "L": [6], "N": [100]})


def test_round_trip(tmp_path):
    cfg = config_from_dict({**MINIMAL, "grid": {"n": 4097, "x_max": 14.0},
                            "trial": {"sigma_rule": "fixed", "sigma_fixed": 3.0},
                            "oracle": {"enabled": True}, "output": {"svg": "plot.svg"}})
    path = tmp_path / "cfg.toml"
    path.write_text(serialize_config(cfg))
    again = parse_config(path)
    assert again == cfg
    assert serialize_config(again) == serialize_config(cfg)


def test_malformed_toml(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("s = = 2\n")
    with pytest.raises(ConfigError):
        parse_config(path)


def test_zip_pairing():
    cfg = config_from_dict({**MINIMAL, "L": [8, 4], "N": [200, 50], "pairing": "zip"})
    assert cfg.points() == [(4.0, 50), (8.0, 200)]


def test_scan_records(tmp_path):
    cfg = small(output={"svg": "v.svg"})
    records = run_scan(cfg, out_dir=tmp_path)
    assert [r.key for r in records] == [(4.0, 20), (4.0, 60), (8.0, 20), (8.0, 60)]
    for r in records:
        assert not r.values.get("error")
        assert r["gap"] > 0 and r["E_bog"] <= 0 and r["variance"] >= 0
        assert r["delta"] == pytest.approx(-math.log(r["T"]) / math.log(r["N"]))
        assert r.runtime_ms > 0
        for key, value in r.values.items():
            if isinstance(value, float):
                assert math.isfinite(value), key
    rows = list(csv.reader(io.StringIO((tmp_path / "scan.csv").read_text())))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 5
    assert (tmp_path / "timings.csv").read_text().startswith("L,N,runtime_ms\n")
    svg = (tmp_path / "v.svg").read_text()
    assert svg.startswith("<svg") and svg.count("<polyline") == 3


def test_worker_count_does_not_change_output():
    cfg = small()
    assert csv_text(run_scan(cfg, workers=1)) == csv_text(run_scan(cfg, workers=3))


def test_point_failure_is_recorded_not_raised():
    cfg = small(grid={"n": 5})  # far too coarse for the requested modes
    records = run_scan(cfg)
    assert len(records) == 4
    assert all(r["error"].startswith("ValueError: grid too coarse") for r in records)
    assert "grid too coarse" in csv_text(records)


def test_oracle_columns_when_enabled():
    cfg = config_from_dict({"s": 2, "lambda": 0.1, "L": [6], "N": [3, 4],
                            "bogoliubov": {"M": [2]}, "grid": {"n": 1025},
                            "oracle": {"enabled": True, "modes": 4}})
    records = run_scan(cfg)
    for r in records:
        assert r["E_oracle"] <= r["E_2mode"]
        assert 0 <= r["oracle_n_perp"] <= 0.5


def test_svg_without_data():
    assert "no data" in svg_text([])


# ----------------------------------------------------------------------- CLI

def test_cli_parser_has_all_subcommands():
    parser = build_parser()
    for name in ("hartree", "spectrum", "twomode", "bogoliubov", "oracle", "scan"):
        args = parser.parse_args([name, "--config", "c.toml", "--seed", "5", "--workers", "2"])
        assert args.command == name and args.seed == 5 and args.workers == 2
        assert args.out == "out"


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text('s = 2\nlambda = 0.1\nL = [6]\nN = [3, 4]\n'
                    '[grid]\nn = 1025\n[bogoliubov]\nM = [2, 4]\n[oracle]\nmodes = 4\n')
    return path


@pytest.mark.parametrize("command, produced", [
    ("hartree", ["hartree.csv"]),
    ("spectrum", ["spectrum.csv"]),
    ("twomode", ["twomode.csv"]),
    ("bogoliubov", ["bogoliubov.csv", "variance_bound.csv"]),
    ("oracle", ["oracle.csv"]),
    ("scan", ["scan.csv", "timings.csv"]),
])
def test_cli_subcommands(tmp_path, config_file, command, produced):
    out = tmp_path / "out"
    assert main([command, "--config", str(config_file), "--out", str(out), "--seed", "1"]) == 0
    for name in produced:
        rows = list(csv.DictReader(io.StringIO((out / name).read_text())))
        assert rows


def test_cli_twomode_columns(tmp_path, config_file):
    out = tmp_path / "out"
    main(["twomode", "--config", str(config_file), "--out", str(out)])
    rows = list(csv.DictReader(io.StringIO((out / "twomode.csv").read_text())))
    for row in rows:
        assert float(row["identity_deviation"]) <= 1e-10
        assert float(row["E_trial"]) >= float(row["E_2mode"])


def test_cli_oracle_seed_only_affects_random_checks(tmp_path, config_file):
    tables = []
    for seed in ("1", "2"):
        out = tmp_path / seed
        main(["oracle", "--config", str(config_file), "--out", str(out), "--seed", seed])
        rows = list(csv.DictReader(io.StringIO((out / "oracle.csv").read_text())))
        assert all(float(r["isometry_defect"]) <= 1e-12 for r in rows)
        tables.append([{k: v for k, v in r.items() if k != "isometry_defect"} for r in rows])
    assert tables[0] == tables[1]


def test_cli_reports_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("s = 1.5\nlambda = 0.1\nL = [6]\nN = [10]\n")
    assert main(["scan", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "s must be" in capsys.readouterr().err
    assert main(["scan", "--config", str(tmp_path / "missing.toml")]) == 2
    assert main(["scan", "--config", str(bad), "--workers", "0"]) == 2
