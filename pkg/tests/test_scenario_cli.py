import json

import pytest

from semigeo.cli import main
from semigeo.errors import ParseError, ValidationError
from semigeo.scenario import list_scenarios, parse_text, shipped_scenario

SHIPPED = ["flat", "galphabeta-compact", "galphabeta-unbounded", "lorentz-cylinder-null-conformal",
           "minkowski-timelike", "sphere-conjugate", "sphere-offset-nondegenerate", "split-product",
           "stationary-counterexample"]

MINIMAL = 'name = "t"\n[metric]\nkind = "flat-euclidean"\ndim = 2\n'


def test_shipped_scenarios_parse():
    assert list_scenarios() == SHIPPED
    for name in SHIPPED:
        assert shipped_scenario(name).name == name


def test_parse_error_has_position():
    with pytest.raises(ParseError) as info:
        parse_text('name = "t"\n[metric\n')
    assert info.value.line == 2
    with pytest.raises(ParseError):
        parse_text("   \n")


@pytest.mark.parametrize("extra,field", [
    ("bogus = 1\n", "metric.bogus"),
    ("[grid]\nm = 4\n", "grid.m"),
    ("[endpoints]\np = [0.0, 0.0]\nq = [0.0, 0.0]\n", "endpoints"),
    ("[endpoints]\np = [0.0]\nq = [1.0, 0.0]\n", "endpoints.p"),
    ("[perturbation]\nclasses = [\"weird\"]\n", "perturbation.classes"),
])
def test_validation_errors(extra, field):
    with pytest.raises(ValidationError) as info:
        parse_text(MINIMAL + extra)
    assert info.value.field == field


def test_unknown_top_level_key():
    with pytest.raises(ValidationError) as info:
        parse_text("bogus = 1\n" + MINIMAL)
    assert info.value.field == "bogus"


def test_defaults_and_stage_selection():
    sc = parse_text(MINIMAL + "[endpoints]\np = [0.0, 0.0]\nq = [1.0, 0.0]\n")
    assert sc.grid["m"] == 64 and sc.seed == 0
    assert sc.stages == ("geodesic", "conjugate", "index_form", "kernel", "surjectivity")


def test_cli_exit_codes(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text('name = "t"\n[metric\n')
    assert main(["run", "--scenario", str(bad), "--out", str(tmp_path)]) == 1
    assert main(["run", "--scenario", "no-such-scenario", "--out", str(tmp_path)]) == 1
    assert main(["frobnicate"]) == 1
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["geodesic", "--scenario", "flat", "--out", str(blocker / "sub")]) == 1
    assert main(["hyperbolic-check", "--scenario", "flat", "--out", str(tmp_path)]) == 1


def test_cli_overrides_and_formats(tmp_path):
    assert main(["sweep", "--scenario", "sphere-conjugate", "--m", "32", "--seed", "11",
                 "--eps=-0.01,0.01", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "sphere-conjugate.json").read_text())
    assert rep["seed"] == 11 and rep["scenario"]["grid"]["m"] == 32
    assert rep["schema_version"] == 1
    assert [r["kernel_dim"] for r in rep["stages"]["sweep"]["rows"]] == [0, 0]
    assert main(["hyperbolic-check", "--scenario", "galphabeta-compact", "--format", "csv",
                 "--out", str(tmp_path)]) == 0
    assert (tmp_path / "galphabeta-compact-seed7-hyperbolic.csv").exists()


def test_pipeline_outcomes_on_flat(tmp_path):
    assert main(["run", "--scenario", "flat", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "flat.json").read_text())
    st = rep["stages"]
    assert st["kernel"]["dimension"] == 0
    assert st["surjectivity"]["status"] == "skipped" and st["sweep"]["status"] == "skipped"
    assert st["geodesic"]["causal_character"] == "spacelike"
