import json

import pytest

from rpbauction.cli import (
    AGGREGATE_HEADER,
    ROW_HEADER,
    ConfigError,
    emit_results,
    load_rows_json,
    main,
    parse_config,
)
from rpbauction.simulator import ResultRow, ScenarioConfig, aggregate, run_scenario


def test_minimal_config_fills_defaults():
    config, output = parse_config(b'sweep_axis = "tasks"\n')
    assert config.sweep_values == tuple(range(40, 241, 20))
    assert config.fixed_n_participants == 100
    assert config.repetitions == 30
    assert [k.tag for k in config.mechanisms] == ["TSCM-RA", "2SB-RA", "RPB-RA"]
    assert config.generator.interest_radius == 30.0
    assert output.format == "csv" and not output.aggregate and output.path is None


def test_json_config():
    doc = {"sweep_axis": "participants", "sweep_values": [10, 20], "generator": {"alpha": 1.5},
           "output": {"format": "json", "aggregate": True}}
    config, output = parse_config(json.dumps(doc).encode())
    assert config.sweep_values == (10, 20) and config.fixed_n_tasks == 200
    assert config.generator.alpha == 1.5
    assert output.format == "json" and output.aggregate


@pytest.mark.parametrize("text, key", [
    ('sweep_axis = "tasks"\nrepetitions = 0\n', "repetitions"),
    ('sweep_axis = "tasks"\nsweep_values = [80, 40]\n', "sweep_values"),
    ('sweep_axis = "tasks"\nbogus = 1\n', "bogus"),
    ('sweep_axis = "tasks"\n[generator]\nradius = 3\n', "generator.radius"),
    ('sweep_axis = "tasks"\n[generator]\ntask_value_range = [5, 1]\n', "generator.task_value_range"),
    ('sweep_axis = "tasks"\n[output]\nformat = "xml"\n', "output.format"),
    ('sweep_axis = "tasks"\nmechanisms = ["VCG"]\n', "mechanisms"),
    ('sweep_axis = "days"\n', "sweep_axis"),
    ('sweep_axis = = "tasks"\n', "<document>"),
    ('{"sweep_axis": "tasks",', "<document>"),
])
def test_config_errors_name_key(text, key):
    with pytest.raises(ConfigError) as info:
        parse_config(text.encode(), source="cfg.toml")
    assert info.value.key == key
    assert f"`{key}`" in str(info.value) and "cfg.toml" in str(info.value)


@pytest.fixture
def rows():
    config = ScenarioConfig("tasks", (20, 30), repetitions=2, fixed_n_participants=10)
    return run_scenario(config)


def test_csv_format(tmp_path, rows):
    three = rows[:3]
    path = tmp_path / "out.csv"
    emit_results(three, "csv", path)
    lines = path.read_text().splitlines()
    assert len(lines) == 4
    assert lines[0] == ",".join(ROW_HEADER)
    assert lines[0] == "mechanism,axis,value,rep,seed,clearance_rate,n_primary,n_redundancy,n_secondary,payments,budget,runtime_ms"
    first = lines[1].split(",")
    assert first[0] == three[0].mechanism and first[5] == f"{three[0].clearance_rate:.6g}"


def test_csv_byte_identical(tmp_path, rows):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_results(rows, "csv", a)
    emit_results(rows, "csv", b)
    assert a.read_bytes() == b.read_bytes()


def test_aggregate_header(tmp_path, rows):
    path = tmp_path / "agg.csv"
    emit_results(aggregate(rows), "csv", path)
    assert path.read_text().splitlines()[0] == ",".join(AGGREGATE_HEADER)
    assert AGGREGATE_HEADER == ("mechanism", "axis", "value", "cr_mean", "cr_std", "payments_mean", "budget_mean")


def test_json_round_trip(tmp_path, rows):
    path = tmp_path / "rows.json"
    emit_results(rows, "json", path)
    assert load_rows_json(path.read_text()) == rows
    aggs = aggregate(rows)
    emit_results(aggs, "json", path)
    assert load_rows_json(path.read_text()) == aggs


def test_unwritable_destination(tmp_path, rows):
    with pytest.raises(OSError):
        emit_results(rows, "csv", tmp_path / "missing" / "dir" / "x.csv")


def _write_config(tmp_path, extra=""):
    path = tmp_path / "cfg.toml"
    path.write_text('sweep_axis = "tasks"\nsweep_values = [20, 30]\nrepetitions = 2\nn_participants = 10\n' + extra)
    return path


def test_cli_run_csv(tmp_path):
    cfg = _write_config(tmp_path)
    out = tmp_path / "rows.csv"
    assert main(["run", str(cfg), "--out", str(out), "--seed", "5"]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 1 + 2 * 2 * 3


def test_cli_run_flags(tmp_path):
    cfg = _write_config(tmp_path)
    out = tmp_path / "agg.json"
    code = main(["run", "--config", str(cfg), "--out", str(out), "--format", "json", "--aggregate",
                 "--mechanisms", "RPB-RA,RPB-RU", "--jobs", "2"])
    assert code == 0
    doc = json.loads(out.read_text())
    assert {d["mechanism"] for d in doc} == {"RPB-RA", "RPB-RU"}
    assert set(doc[0]) == set(("mechanism", "axis", "value", "cr_mean", "cr_std", "payments_mean", "budget_mean"))


def test_cli_seed_override_changes_rows(tmp_path):
    cfg = _write_config(tmp_path)
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    main(["run", str(cfg), "--out", str(a), "--seed", "1"])
    main(["run", str(cfg), "--out", str(b), "--seed", "2"])
    main(["run", str(cfg), "--out", str(c), "--seed", "1"])
    strip = lambda p: [",".join(l.split(",")[:-1]) for l in p.read_text().splitlines()]
    assert strip(a) != strip(b)
    assert strip(a) == strip(c)


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('sweep_axis = "tasks"\nrepetitions = 0\n')
    assert main(["run", str(bad)]) != 0
    assert "repetitions" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "nope.toml")]) != 0
    assert main(["run", str(_write_config(tmp_path)), "--out", str(tmp_path / "x" / "y.csv")]) != 0
    assert main(["run", str(_write_config(tmp_path)), "--mechanisms", "XYZ"]) != 0


def test_cli_demo(capsys):
    assert main(["demo", "--seed", "3"]) == 0
    text = capsys.readouterr().out
    assert "stage trace" in text and "clearance rate" in text
    assert main(["demo", "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert set(doc) == {"campaign", "outcome"}
    assert doc["outcome"]["stage_trace"]


def test_cli_oracle(capsys):
    assert main(["oracle", "--campaigns", "10"]) == 0
    assert "0 mismatches" in capsys.readouterr().out


@pytest.mark.parametrize("name", ["fig3_auctions", "fig4_tasks", "fig5_participants"])
def test_shipped_configs_parse(name):
    from pathlib import Path

    path = Path(__file__).parent.parent / "configs" / f"{name}.toml"
    config, output = parse_config(path.read_bytes(), source=str(path))
    assert output.aggregate and output.path == f"{name}.csv"
