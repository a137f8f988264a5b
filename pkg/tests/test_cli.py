import json

import pytest
from click.testing import CliRunner

from switchlyap.cli import main
from switchlyap.config import ConfigError, RunConfig

PRINTED_V = ["-1.0e-30", "1.0053096491e-20", "-2.0006218904e-13", "1.0013826592e-7", "-0.0100266667",
             "6.5449846949"]


@pytest.fixture
def run(tmp_path):
    runner = CliRunner()

    def go(toml: str, *args):
        path = tmp_path / "run.toml"
        path.write_text(toml)
        return runner.invoke(main, [args[0], str(path), *args[1:]])

    return go


COND_I_SAMPLE = """
[system]
family = "lienard"
coefficients = { b2p = "1", b3p = "-2", b3m = "1" }
"""


def test_check_center_condition_one(run):
    res = run(COND_I_SAMPLE, "check-center")
    assert res.exit_code == 0, res.output
    rep = json.loads(res.output)
    assert rep["conditions"] == ["I"]
    assert rep["certificates"][0]["kind"] == "hamiltonian-matching"


def test_unknown_key_is_config_error(run):
    res = run('[system]\ncoefficient = { b2p = "1" }\n', "check-center")
    assert res.exit_code == 2
    assert "system.coefficient" in res.output


def test_binary_float_rejected():
    with pytest.raises(ConfigError):
        RunConfig.from_text('[system]\ncoefficients = { b2p = 0.5 }\n')


def test_lyap_symmetric_system_is_zero(run):
    toml = """
[system]
family = "scaled"
coefficients = { a2p = "0", a3p = "0", a2m = "0", a3m = "0", b2p = "1", b2m = "-1", b3p = "2", b3m = "2" }

[orders]
xi = 5
eps = 3
"""
    res = run(toml, "lyap")
    assert res.exit_code == 0, res.output
    assert json.loads(res.output)["values"] == {}


def test_lyap_prints_exact_and_decimal(run):
    toml = """
[system]
family = "scaled"
coefficients = { a2p = "1", a3p = "0", a2m = "0", a3m = "0", b2p = "1", b2m = "0", b3p = "1", b3m = "1" }

[orders]
xi = 4
eps = 2
"""
    res = run(toml, "lyap")
    assert res.exit_code == 0, res.output
    v = json.loads(res.output)["values"]["V_2_1"]
    assert v["exact"] == "-4/3"
    assert v["decimal"].startswith("-1.33333333333333333333")


def test_cycles_with_printed_constants(run):
    body = ", ".join(f'"{c}"' for c in PRINTED_V)
    res = run(f"[cycles]\nconstants = [{body}]\nexpect_roots = 5\n", "cycles")
    assert res.exit_code == 0, res.output
    assert len(json.loads(res.output)["roots"]) == 5


def test_cycles_root_count_mismatch(run):
    body = ", ".join(f'"{c}"' for c in PRINTED_V)
    res = run(f"[cycles]\nconstants = [{body}]\nexpect_roots = 4\n", "cycles")
    assert res.exit_code == 4


def test_output_is_deterministic(run):
    first = run(COND_I_SAMPLE, "check-center").output
    assert run(COND_I_SAMPLE, "check-center").output == first


def test_engine_error_exit_code(run):
    toml = '[system]\nfamily = "lienard"\ncoefficients = { b2p = "-1" }\n'
    res = run(toml, "check-center")
    assert res.exit_code == 3
    assert "engine error" in res.output


def test_out_directory(run, tmp_path):
    res = run(COND_I_SAMPLE, "check-center", "--out", str(tmp_path / "o"))
    assert res.exit_code == 0
    assert json.loads((tmp_path / "o" / "check-center.json").read_text())["conditions"] == ["I"]


def test_simulate_writes_csv(run, tmp_path):
    toml = """
[system]
family = "scaled"
coefficients = { a2p = "1", a3p = "0", a2m = "0", a3m = "0", b2p = "1", b2m = "0", b3p = "1", b3m = "1" }

[simulate]
start = ["1/10", "0"]
t_end = "7"
eps = "1/8"

[numerics]
bits = 128
tol = "1e-30"
"""
    res = run(toml, "simulate", "--out", str(tmp_path / "s"))
    assert res.exit_code == 0, res.output
    lines = (tmp_path / "s" / "trajectory.csv").read_text().splitlines()
    assert lines[0] == "t,x,y,regime" and len(lines) > 3
