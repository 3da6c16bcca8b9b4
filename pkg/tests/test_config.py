"""Тесты для конфигурации, утилит и форматирования отчётов."""
import json
from pathlib import Path

import numpy as np
import pytest

from src.config import RunConfig, parse_grid, settings
from src.errors import ConfigError
from src.report import Report, dumps, format_cell, to_jsonable
from src.utils import format_number, resolve_input, round_number, shipped_files


def test_parse_grid():
    assert parse_grid("0, 0.01,-0.05, 0.02+0.01j") == [0, 0.01, -0.05, 0.02 + 0.01j]
    assert parse_grid("") == []
    with pytest.raises(ConfigError):
        parse_grid("0,abc")


def test_run_config_defaults():
    config = RunConfig.build()
    assert config.tolerance == settings.TOLERANCE
    assert config.order == settings.TRUNCATION_ORDER
    assert all(abs(t) <= config.radius for t in config.grid)


def test_run_config_overrides_ignore_none():
    config = RunConfig.build(tolerance=None, order=3, grid="0,0.1j", output="csv")
    assert config.order == 3
    assert config.grid == [0, 0.1j]
    assert config.output == "csv"


@pytest.mark.parametrize(
    "overrides",
    [
        {"tolerance": 0.0},
        {"order": 0},
        {"grid": "0.2"},
        {"backend": "quad"},
        {"output": "xml"},
    ],
)
def test_run_config_errors(overrides):
    with pytest.raises(ConfigError):
        RunConfig.build(**overrides)


def test_number_formatting():
    assert format_number(0.0) == "0.0"
    assert round_number(1 / 3, 4) == 0.3333
    assert round_number(0.1 + 0.2) == 0.3


def test_shipped_files_and_resolve_input(tmp_path: Path):
    models = shipped_files("models")
    assert {"torus1", "torus2", "torus3", "iwasawa", "kodaira_thurston"} <= set(models)
    assert resolve_input("iwasawa", "models") == models["iwasawa"]
    assert resolve_input("iwasawa.json", "models") == models["iwasawa"]
    local = tmp_path / "iwasawa.json"
    local.write_text("{}", encoding="utf-8")
    assert resolve_input(local, "models") == local
    assert resolve_input("missing", "families") == Path("missing")


def test_to_jsonable():
    value = {(1, 0): np.array([1 + 2j]), "flag": np.bool_(True), "n": np.int64(3), "x": 0.1 + 0.2}
    assert to_jsonable(value) == {"1,0": [{"re": 1.0, "im": 2.0}], "flag": True, "n": 3, "x": 0.3}


def test_format_cell():
    assert format_cell(True) == "да"
    assert format_cell(2) == "2"
    assert format_cell(0.5 - 0.25j) == "0.5-0.25j"
    assert format_cell((1, 0)) == "(1, 0)"
    assert format_cell(None) == "None"


def test_report_is_deterministic():
    """Порядок добавления строк не влияет на вывод."""
    first = Report("r", ["t", "value"])
    second = Report("r", ["t", "value"])
    rows = [((0.05 + 0j,), 1.5), ((0j,), 2.0), ((-0.05 + 0j,), None)]
    for row in rows:
        first.add(*row)
    for row in reversed(rows):
        second.add(*row)
    for output in ("table", "json", "csv"):
        assert first.render(output) == second.render(output)
    data = json.loads(first.render("json"))
    assert data["rows"][0]["value"] == 2.0
    assert dumps({"b": 1, "a": 2}).index('"a"') < dumps({"b": 1, "a": 2}).index('"b"')
