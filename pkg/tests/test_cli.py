import json
import os

import pytest
import yaml

from simplexot.cli import main
from simplexot.config import DEFAULTS, dump_config, load_config, validate
from simplexot.errors import ConfigError
from simplexot.report import dumps, read_csv


def run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path)])


def only_run_dir(root):
    (d,) = [p for p in root.iterdir() if p.is_dir()]
    return d


def test_empty_config_gives_defaults(tmp_path):
    p = tmp_path / "empty.yaml"
    p.write_text("")
    assert load_config(p) == DEFAULTS


@pytest.mark.parametrize(
    "doc,path",
    [
        ({"dimension": 0}, "dimension"),
        ({"tolerances": {"tie": "small"}}, "tolerances.tie"),
        ({"solver": {"method": "simplex"}}, "solver.method"),
        ({"colour": 1}, "colour"),
        ({"metric": {"eps_ladder": [0.1, 0.2]}}, "metric.eps_ladder"),
        ({"resolutions": [4, 0]}, "resolutions[1]"),
    ],
)
def test_bad_configs_name_the_field(doc, path):
    with pytest.raises(ConfigError) as err:
        validate(doc)
    assert err.value.path == path


def test_config_roundtrip():
    cfg = validate({"dimension": 3, "mu": {"kind": "doubling", "amplitude": 0.2}})
    assert validate(yaml.safe_load(dump_config(cfg))) == cfg


def test_census_command(tmp_path, capsys):
    assert run(tmp_path, "geometry", "census", "--dim", "3") == 0
    out = capsys.readouterr().out
    assert "edges: 30" in out and "positive_vertices: 10" in out and "negative_vertices: 10" in out
    d = only_run_dir(tmp_path)
    rows = read_csv(d / "census.csv")
    assert sum(int(r["count"]) for r in rows if r["singular"] == "True") == 50
    manifest = json.loads((d / "manifest.json").read_text())
    assert manifest["exit_code"] == 0 and "census.json" in manifest["files"]


def test_solve_command_and_reproducibility(tmp_path, capsys):
    assert run(tmp_path / "a", "solve", "--dim", "2", "--resolution", "4") == 0
    d = only_run_dir(tmp_path / "a")
    rep = json.loads((d / "solve_r4.json").read_text())
    assert abs(rep["relative_gap"]) <= 1e-9
    assert (d / "phi_r4.svg").exists()
    # rerun from the echoed config: same directory name, same files
    assert run(tmp_path / "b", "solve", "--config", str(d / "config.yaml")) == 0
    d2 = only_run_dir(tmp_path / "b")
    assert d.name == d2.name
    m1 = json.loads((d / "manifest.json").read_text())
    m2 = json.loads((d2 / "manifest.json").read_text())
    m1.pop("timestamp"), m2.pop("timestamp")
    assert m1 == m2


def test_manifests_are_byte_identical_modulo_timestamp(tmp_path):
    for sub in ("a", "b"):
        assert run(tmp_path / sub, "appendix", "build") == 0
    texts = []
    for sub in ("a", "b"):
        doc = json.loads((only_run_dir(tmp_path / sub) / "manifest.json").read_text())
        doc["timestamp"] = None
        texts.append(dumps(doc))
    assert texts[0] == texts[1]


def test_solve_dim3_example(tmp_path):
    assert run(tmp_path, "solve", "--dim", "3", "--resolution", "8", "--mu", "uniform", "--nu", "uniform", "--solver", "exact") == 0
    rep = json.loads((only_run_dir(tmp_path) / "solve_r8.json").read_text())
    assert abs(rep["relative_gap"]) <= 1e-9
    assert not list(only_run_dir(tmp_path).glob("*.svg"))


def test_diagnose_report_has_every_check(tmp_path):
    assert run(tmp_path, "diagnose", "--dim", "2", "--resolution", "4") == 0
    rep = json.loads((only_run_dir(tmp_path) / "diagnose_r4.json").read_text())
    for key in ("partition_mapping", "single_valued", "inverse_homeomorphism", "equivariance", "fixed_points", "pushforward"):
        assert key in rep
    assert set(rep["passed"]) == {"partition_mapping", "single_valued", "inverse", "equivariance", "fixed_points"}


def test_metric_command(tmp_path):
    assert run(tmp_path, "metric", "--dim", "2", "--resolution", "6") == 0
    d = only_run_dir(tmp_path)
    rep = json.loads((d / "metric_r6.json").read_text())
    assert rep["bounds"]["violations"] == 0 and rep["jensen"]["violations"] == 0
    assert read_csv(d / "edges_r6.csv")


def test_appendix_verify_prints_length(tmp_path, capsys):
    assert run(tmp_path, "appendix", "verify", "--M", "4", "--N", "9", "--alpha", "0.5", "--beta", "2") == 0
    assert "length=3/4" in capsys.readouterr().out


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("dimension: 0\n")
    assert main(["solve", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "dimension" in capsys.readouterr().err
    assert run(tmp_path, "appendix", "verify", "--M", "4", "--N", "8") == 2
    assert run(tmp_path, "metric", "--dim", "2", "--probe") == 2
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["geometry", "census", "--out", str(blocker / "sub")]) == 4


def test_appendix_precondition_is_a_config_error(tmp_path):
    # M > 9N would break the upper interval bound, but M^alpha <= N^(1-alpha) rejects it first
    cfg = tmp_path / "tall.yaml"
    cfg.write_text("appendix: {M: 100, N: 3}\n")
    assert main(["appendix", "verify", "--config", str(cfg), "--out", str(tmp_path / "runs")]) == 2
    (d,) = (tmp_path / "runs").iterdir()
    assert json.loads((d / "error.json").read_text())["kind"] == "validation-error"


def test_diagnose_exit_three_when_a_check_fails(tmp_path, monkeypatch):
    from simplexot import diagnostics

    real = diagnostics.c_gradient_suite

    def broken(*a, **k):
        out = real(*a, **k)
        out["passed"]["equivariance"] = False
        return out

    monkeypatch.setattr(diagnostics, "c_gradient_suite", broken)
    assert run(tmp_path, "diagnose", "--dim", "1", "--resolution", "4") == 3
    d = only_run_dir(tmp_path)
    assert (d / "diagnose_r4.json").exists()
    assert json.loads((d / "manifest.json").read_text())["status"] == "numerical-failure"


@pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
def test_unwritable_directory(tmp_path):
    ro = tmp_path / "ro"
    ro.mkdir()
    ro.chmod(0o500)
    assert main(["geometry", "census", "--out", str(ro)]) == 4
