import json
from pathlib import Path

import jsonschema
import pytest

from modenet import camera
from modenet.cli import camera_model_doc, main
from modenet.modelfile import serialize_model

ROOT = Path(__file__).resolve().parent.parent
SCHEMAS = ROOT / "docs" / "schemas"


def schema(name):
    return json.loads((SCHEMAS / f"{name}.schema.json").read_text())


@pytest.fixture()
def model_path(tmp_path):
    path = tmp_path / "camera.model"
    path.write_text(serialize_model(camera_model_doc()), encoding="utf-8")
    return path


def write_scenario(tmp_path, script):
    path = tmp_path / "scenario.json"
    path.write_text(
        json.dumps({"events": [{"kind": e.kind, "at": e.at} for e in script]})
    )
    return path


def test_check_valid_model_exits_zero(model_path, capsys):
    assert main(["check", str(model_path)]) == 0
    assert "ok" in capsys.readouterr().out


def test_check_reports_violations_with_exit_one(tmp_path, capsys):
    bad = (
        "model-format 1\n"
        "net bad\n"
        "colourset U = u\n"
        "place P colour=U component=Main init=u\n"
        "var g kind=global init=0\n"
        "transition T component=Main\n"
        "arc in T P u\n"
        "assign T g \"g + 1\"\n"
    )
    path = tmp_path / "bad.model"
    path.write_text(bad)
    assert main(["check", str(path)]) == 1
    assert "global-written" in capsys.readouterr().out


def test_parse_error_exits_two(tmp_path, capsys):
    path = tmp_path / "junk.model"
    path.write_text("not a model\n")
    assert main(["check", str(path)]) == 2
    assert "parse error" in capsys.readouterr().err


def test_missing_file_exits_two(capsys):
    assert main(["check", "/nonexistent/q.model"]) == 2


def test_unknown_flag_exits_two(capsys):
    assert main(["check", "--frobnicate", "x"]) == 2


def test_unknown_subcommand_exits_two(capsys):
    assert main(["explode"]) == 2


def test_simulate_emits_schema_valid_json(model_path, tmp_path):
    scenario = write_scenario(tmp_path, camera.scenario_burst_script())
    out = tmp_path / "report.json"
    code = main(
        [
            "simulate",
            str(model_path),
            "--scenario",
            str(scenario),
            "--seed",
            "4",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    payload = json.loads(out.read_text())
    jsonschema.validate(payload, schema("simulate"))
    assert payload["seed"] == 4
    assert payload["frames_shot"] > 0


def test_budget_idle_energy_puts_af_ae_on_gpp(model_path, tmp_path):
    out = tmp_path / "budget.json"
    code = main(
        [
            "budget",
            str(model_path),
            "--objective",
            "energy",
            "--mode",
            "IDLE",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    payload = json.loads(out.read_text())
    jsonschema.validate(payload, schema("budget"))
    assert payload["assignment"] == {"AF": "GPP", "AE": "GPP"}


def test_budget_hs_infeasible_in_idle_context(model_path, tmp_path, capsys):
    code = main(
        [
            "budget",
            str(model_path),
            "--objective",
            "time",
            "--mode",
            "IDLE",
            "--net",
            "hs",
        ]
    )
    assert code == 1
    assert "infeasible" in capsys.readouterr().err


def test_layout_optimize_reaches_zero_side_switches(model_path, tmp_path):
    dot = tmp_path / "hs.dot"
    report = tmp_path / "layout.json"
    code = main(
        [
            "layout",
            str(model_path),
            "--mode",
            "HS",
            "--optimize",
            "--out",
            str(dot),
            "--report",
            str(report),
        ]
    )
    assert code == 0
    payload = json.loads(report.read_text())
    jsonschema.validate(payload, schema("layout"))
    assert payload["side_switches_after"] == 0
    assert dot.read_text().startswith("digraph")


def test_export_msc_writes_chart(model_path, tmp_path):
    out = tmp_path / "camera.msc"
    code = main(
        ["export-msc", str(model_path), "--automaton", "camera", "--out", str(out)]
    )
    assert code == 0
    text = out.read_text()
    assert text.startswith("msc camera;")
    assert "reference HS;" in text


def test_demo_camera_byte_stable_across_runs(tmp_path):
    first = tmp_path / "a"
    second = tmp_path / "b"
    assert main(["demo-camera", "--out", str(first)]) == 0
    assert main(["demo-camera", "--out", str(second)]) == 0
    names = sorted(p.name for p in first.iterdir())
    assert names == sorted(p.name for p in second.iterdir())
    for name in names:
        assert (first / name).read_bytes() == (second / name).read_bytes(), name


def test_demo_matches_committed_golden(tmp_path):
    golden = ROOT / "golden"
    if not golden.exists():
        pytest.skip("golden artifacts not generated yet")
    fresh = tmp_path / "fresh"
    assert main(["demo-camera", "--out", str(fresh)]) == 0
    for path in sorted(golden.iterdir()):
        assert (fresh / path.name).read_bytes() == path.read_bytes(), path.name
