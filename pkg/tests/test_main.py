"""Тесты для CLI (src.main)."""
import json
from pathlib import Path
from unittest.mock import patch

import pytest
from typer.testing import CliRunner

from src.main import app

runner = CliRunner()


@pytest.fixture(autouse=True)
def no_log_file():
    """Не даём CLI создавать файл журнала в рабочей директории."""
    with patch("src.main.setup_logging"):
        yield


def _json(result):
    assert result.exit_code == 0, result.output
    return json.loads(result.stdout)


def test_shipped():
    result = runner.invoke(app, ["shipped"])
    assert result.exit_code == 0
    assert "iwasawa" in result.stdout
    assert "kodaira_thurston" in result.stdout


def test_cohomology_json():
    data = _json(runner.invoke(app, ["cohomology", "torus1", "--theory", "derham", "--out", "json"]))
    dims = {tuple(row["degree"]): row["dim"] for row in data["rows"]}
    assert dims == {(0,): 1, (1,): 2, (2,): 1}
    assert data["meta"]["backend"] == "float"


def test_cohomology_exact_backend_with_family():
    """Точный бэкенд и деформированные группы в одной таблице."""
    args = ["cohomology", "iwasawa", "--theory", "bc", "--family", "iwasawa", "--grid", "0.05"]
    data = _json(runner.invoke(app, args + ["--backend", "exact", "--out", "json"]))
    plain = {tuple(r["degree"]): r["dim"] for r in data["rows"] if r["theory"] == "bc"}
    deformed = {tuple(r["degree"]): r["dim"] for r in data["rows"] if r["theory"].startswith("bc-deformed")}
    assert plain[(2, 0)] == 3
    assert deformed[(2, 0)] == 2


def test_cohomology_table_output():
    result = runner.invoke(app, ["cohomology", "iwasawa", "--theory", "bc"])
    assert result.exit_code == 0
    assert result.stdout.startswith("# Когомологии iwasawa")


@pytest.mark.parametrize(
    "args",
    [
        ["cohomology", "no_such_model"],
        ["cohomology", "torus1", "--theory", "aeppli"],
        ["cohomology", "torus1", "--tol=-1"],
        ["period", "torus1", "torus1", "--p", "2", "--k", "1"],
        ["period", "torus1", "torus1", "--grid", "0.5"],
        ["deform", "torus1", "torus1", "--bidegree", "x"],
        ["verify", "torus1", "--check", "nonsense"],
    ],
)
def test_input_errors_exit_with_code_2(args):
    result = runner.invoke(app, args)
    assert result.exit_code == 2
    assert "Ошибка" in result.output


def test_malformed_model_file(tmp_path: Path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"name": "bad", "n": 2, "d_omega": [[]]}), encoding="utf-8")
    result = runner.invoke(app, ["cohomology", str(path)])
    assert result.exit_code == 2


def test_ddbar_check():
    data = _json(runner.invoke(app, ["ddbar-check", "iwasawa", "--out", "json"]))
    assert data["meta"]["holds"] is False
    data = _json(runner.invoke(app, ["ddbar-check", "torus2", "--out", "json"]))
    assert data["meta"]["holds"] is True


def test_period_json():
    args = ["period", "torus1", "torus1", "--p", "1", "--k", "1", "--grid", "0.05", "--out", "json"]
    data = _json(runner.invoke(app, args))
    (row,) = data["rows"]
    assert row["dim"] == 1
    affine = [complex(z["re"], z["im"]) for z in row["affine"]]
    assert affine == [pytest.approx(1.0, abs=1e-12), pytest.approx(0.05, abs=1e-12)]
    assert row["note"] == ""


def test_period_reports_degenerate_point():
    """Вырожденная точка попадает в отчёт строкой с пояснением, а не обрывает запуск."""
    args = ["period", "torus1", "torus1", "--grid", "1", "--radius", "1", "--out", "json"]
    data = _json(runner.invoke(app, args))
    (row,) = data["rows"]
    assert row["dim"] is None
    assert row["note"].startswith("FrameDegenerate")


def test_deform_csv():
    args = ["deform", "iwasawa", "iwasawa", "--bidegree", "1,0", "--grid", "0.05", "--out", "csv"]
    result = runner.invoke(app, args)
    assert result.exit_code == 0
    lines = result.stdout.strip().splitlines()
    assert lines[0] == "t,sigma0,fixed_point,closedness,non_exactness,in_V_t"
    assert len(lines) == 3


def test_verify_passes_on_torus():
    args = ["verify", "torus1", "torus1", "--check", "axioms", "--grid", "0.05", "--out", "json"]
    data = _json(runner.invoke(app, args))
    assert {row["status"] for row in data["rows"]} == {"ok"}


def test_verify_gated_check_without_ddbar():
    result = runner.invoke(app, ["verify", "iwasawa", "--check", "filtration"])
    assert result.exit_code == 1
    result = runner.invoke(app, ["verify", "iwasawa", "--check", "filtration", "--allow-non-ddbar"])
    assert result.exit_code == 0
    assert "info" in result.stdout


def test_verify_family_checks_skipped_without_family():
    data = _json(runner.invoke(app, ["verify", "torus1", "--check", "integrability", "--out", "json"]))
    (row,) = data["rows"]
    assert row["detail"].startswith("пропущено")
