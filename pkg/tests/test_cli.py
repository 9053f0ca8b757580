import csv
import json

import pytest
import yaml

from massbounds import cli, scenarios
from massbounds.errors import ConfigError


def _write_config(tmp_path, **cfg):
    cfg.setdefault("output", str(tmp_path / "out"))
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(cfg))
    return path


def _summary(out):
    with open(out / "summary.csv") as fh:
        return list(csv.DictReader(fh))


def test_empty_selection_writes_empty_summary(tmp_path):
    cfg = _write_config(tmp_path, scenarios=[])
    assert cli.main(["run", str(cfg)]) == 0
    out = tmp_path / "out"
    assert _summary(out) == []
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "pass" and manifest["scenarios"] == {}
    assert manifest["format"] == cli.ARTIFACT_FORMAT and manifest["version"] == 1


def test_unknown_scenario_lists_available_names(tmp_path, capsys):
    cfg = _write_config(tmp_path, scenarios=["nope"])
    assert cli.main(["run", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert "nope" in err and "schwarzschild-m1" in err


@pytest.mark.parametrize("raw", [
    {"output": "x", "colour": "blue"},
    {"scenarios": ["unit-sphere"]},
    {"output": "x", "resolutions": {"compact": []}},
    {"output": "x", "resolutions": {"weird": [8]}},
    {"output": "x", "truncations": [8.0, 4.0]},
    {"output": "x", "tolerances": {"mass_rel": -1}},
    {"output": "x", "workers": 0},
    {"output": "x", "acceptance": [13]},
    {"output": "x", "formats": ["xml"]},
    {"output": "x", "extrapolate": True, "resolutions": [32]},
    [1, 2],
])
def test_invalid_configs_are_rejected(raw):
    with pytest.raises(ConfigError):
        cli.validate_config(raw)


def test_malformed_yaml_and_missing_file_exit_2(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("output: [unclosed\n")
    assert cli.main(["run", str(bad)]) == 2
    assert cli.main(["run", str(tmp_path / "missing.yaml")]) == 2
    assert cli.main(["frobnicate"]) == 2


def test_config_defaults_and_expansion():
    cfg = cli.validate_config({"output": "x", "scenarios": "all", "resolutions": [12, 8, 12],
                               "acceptance": True})
    assert cfg["scenarios"] == sorted(scenarios.REGISTRY)
    assert cfg["resolutions"]["compact"] == [8, 12]
    assert cfg["acceptance"] == list(range(1, 13))


def test_richardson_is_exact_for_quadratic_error():
    assert cli.richardson(0.2, 1 + 3 * 0.04, 0.1, 1 + 3 * 0.01) == pytest.approx(1.0)


def test_surface_run_writes_artifacts_and_report(tmp_path, capsys):
    cfg = _write_config(tmp_path, scenarios=["unit-sphere", "spheroid-1-1-0.6"])
    assert cli.main(["run", str(cfg)]) == 0
    out = tmp_path / "out"
    rows = _summary(out)
    assert {r["scenario"] for r in rows} == {"unit-sphere", "spheroid-1-1-0.6"}
    assert all(r["status"] != "FAIL" for r in rows)
    registry = json.loads((out / "registry.json").read_text())
    assert registry["unit-sphere"]["kind"] == "surface"
    assert (out / "scenarios" / "unit-sphere.csv").read_text().startswith("scenario,theorem")
    assert any((out / "plots").rglob("*.dat"))
    capsys.readouterr()
    assert cli.main(["report", str(out)]) == 0
    text = capsys.readouterr().out
    assert "minkowski" in text and "asserted checks pass" in text


def test_two_resolution_schwarzschild_has_richardson_column(tmp_path):
    cfg = _write_config(tmp_path, scenarios=["schwarzschild-m1"],
                        resolutions={"asymptotic": [24, 32], "compact": [20, 28]},
                        extrapolate=True)
    assert cli.main(["run", str(cfg)]) == 0
    rows = [r for r in _summary(tmp_path / "out") if r["item"] == "adm_mass"]
    assert [r["resolution"] for r in rows] == ["24", "32"]
    assert rows[0]["richardson"] == "" and rows[1]["richardson"] != ""
    assert float(rows[1]["richardson"]) == pytest.approx(1.0, rel=1e-2)
    shells = list((tmp_path / "out" / "plots" / "schwarzschild-m1").glob("shell_*_n32.dat"))
    assert len(shells) == 3


def test_failing_scenario_is_isolated(tmp_path, monkeypatch):
    real = scenarios.evaluate

    def flaky(sc, n, constants=None):
        if sc.name == "unit-sphere":
            raise RuntimeError("boom")
        return real(sc, n, constants)

    monkeypatch.setattr(scenarios, "evaluate", flaky)
    cfg = _write_config(tmp_path, scenarios=["unit-sphere", "spheroid-1-1-0.6"])
    assert cli.main(["run", str(cfg)]) == 1
    out = tmp_path / "out"
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["scenarios"]["unit-sphere"]["status"] == "error"
    assert manifest["scenarios"]["spheroid-1-1-0.6"]["status"] == "pass"
    err = json.loads((out / "scenarios" / "unit-sphere.json").read_text())
    assert "boom" in err["error"] and "Traceback" in err["traceback"]
    assert cli.report(out) == 1


def test_report_flags_failed_margin_and_corruption(tmp_path, capsys):
    cfg = _write_config(tmp_path, scenarios=["euclidean-ball-r1"], resolutions={"compact": [16]})
    assert cli.main(["run", str(cfg)]) == 0
    out = tmp_path / "out"
    path = out / "scenarios" / "euclidean-ball-r1.json"
    bundle = json.loads(path.read_text())
    v = next(v for v in bundle["evaluations"][0]["verdicts"] if v["margin_asserted"])
    v["holds"], v["margin"] = False, -1.0
    path.write_text(json.dumps(bundle))
    capsys.readouterr()
    assert cli.report(out) == 1
    assert "!! euclidean-ball-r1" in capsys.readouterr().out
    path.write_text("{not json")
    assert cli.report(out) == 2
    assert cli.report(tmp_path / "nowhere") == 2
