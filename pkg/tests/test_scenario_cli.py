import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from phsingular.cli import main
from phsingular.descriptor import DescriptorPHSystem
from phsingular.scenario import ScenarioError, load_scenario, parse_scenario

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

BASE = """\
system:
  J: [[0.0, 1.0], [-1.0, 0.0]]
  R: {diag: [0.5, 0.0]}
  Q: {eye: 2}
  G: [[1.0], [0.0]]
cost: supplied_energy
sim:
  x0: [1.0, 0.0]
  T: 0.05
  dt: 1.0e-3
"""


def write(tmp_path, text, name="case.scenario"):
    p = tmp_path / name
    p.write_text(text)
    return p


# ---------------------------------------------------------------- parsing

def test_parse_base():
    scen = parse_scenario(BASE)
    assert scen.system.n == 2 and scen.system.m == 1
    assert scen.cost.is_supplied_energy
    assert scen.T == 0.05 and scen.policy == "open_loop"


def test_malformed_row_cites_system_section():
    text = BASE.replace("[-1.0, 0.0]]", "[-1.0]]")
    with pytest.raises(ScenarioError) as exc:
        parse_scenario(text)
    assert exc.value.section == "system"
    assert exc.value.line == 1
    assert "system" in str(exc.value)


def test_unknown_key_and_section_rejected():
    with pytest.raises(ScenarioError, match="unknown key"):
        parse_scenario(BASE.replace("  T: 0.05", "  T: 0.05\n  tfinal: 3"))
    with pytest.raises(ScenarioError) as exc:
        parse_scenario(BASE + "plots: {}\n")
    assert exc.value.section == "plots"


def test_missing_section_and_yaml_error():
    with pytest.raises(ScenarioError, match="cost"):
        parse_scenario(BASE.replace("cost: supplied_energy\n", ""))
    with pytest.raises(ScenarioError) as exc:
        parse_scenario("system: [1, 2\n")
    assert exc.value.line is not None


def test_general_cost_and_bounds():
    text = BASE.replace("cost: supplied_energy",
                        "cost: {Y: [[1.0]], N: [[0.5]], l: [0.1]}\nbounds: {lower: [-1.0], upper: [1.0]}")
    scen = parse_scenario(text)
    assert scen.cost.N[0, 0] == 0.5
    assert np.array_equal(scen.bounds.upper, [1.0])


def test_wrong_x0_length():
    with pytest.raises(ScenarioError) as exc:
        parse_scenario(BASE.replace("x0: [1.0, 0.0]", "x0: [1.0, 0.0, 2.0]"))
    assert exc.value.section == "sim"


def test_constrained_policy_needs_bounds():
    with pytest.raises(ScenarioError, match="bounds"):
        parse_scenario(BASE + "  policy: constrained_singular\n")


def test_control_from_file(tmp_path):
    (tmp_path / "u.csv").write_text("t,u1\n0,0\n1,2\n")
    p = write(tmp_path, BASE + "  control: {file: u.csv}\n")
    scen = load_scenario(p)
    assert scen.control(0.5) == pytest.approx([1.0])


@pytest.mark.parametrize("name", sorted(p.name for p in SCENARIOS.glob("*.scenario")))
def test_shipped_scenarios_load(name):
    scen = load_scenario(SCENARIOS / name)
    assert scen.has_sim


def test_mechanical_singular_mass_is_descriptor():
    assert isinstance(load_scenario(SCENARIOS / "singular_mass.scenario").system, DescriptorPHSystem)


# -------------------------------------------------------------------- CLI

def test_check_passes_on_definite(capsys):
    code = main(["check", "--scenario", str(SCENARIOS / "supplied_energy_definite.scenario")])
    out = capsys.readouterr().out
    assert code == 0
    assert "W_definiteness: negative_definite" in out
    assert "feedback_mode: definite_inverse" in out


def test_check_machine_format(capsys):
    code = main(["check", "--scenario", str(SCENARIOS / "mdk.scenario"), "--format", "machine"])
    data = json.loads(capsys.readouterr().out)
    assert code == 0
    assert data["W_definiteness"] == "negative_semidefinite"
    assert np.allclose(data["W"], [[-0.2, 0.0], [0.0, 0.0]], atol=1e-12)


def test_check_goh_failure_exit_2(tmp_path, capsys):
    text = """\
system: {J: {zeros: [2, 2]}, R: {zeros: [2, 2]}, Q: {eye: 2}, G: {eye: 2}}
cost: {Y: {zeros: [2, 2]}, N: [[0.0, 1.0], [0.0, 0.0]], l: [0.0, 0.0]}
"""
    assert main(["check", "--scenario", str(write(tmp_path, text))]) == 2
    assert "goh_pass: false" in capsys.readouterr().out


def test_structure_failure_exit_1(tmp_path, capsys):
    text = BASE.replace("R: {diag: [0.5, 0.0]}", "R: {diag: [0.5, -1.0]}")
    assert main(["check", "--scenario", str(write(tmp_path, text))]) == 1


def test_malformed_scenario_exit_1(tmp_path, capsys):
    text = BASE.replace("[-1.0, 0.0]]", "[-1.0]]")
    assert main(["check", "--scenario", str(write(tmp_path, text))]) == 1
    assert "section 'system'" in capsys.readouterr().err


def test_missing_file_exit_1(tmp_path, capsys):
    assert main(["simulate", "--scenario", str(tmp_path / "nope.scenario")]) == 1


def test_simulate_writes_csv_and_report(tmp_path, capsys):
    p = write(tmp_path, BASE)
    out = tmp_path / "out"
    assert main(["simulate", "--scenario", str(p), "--out", str(out), "--quiet"]) == 0
    assert capsys.readouterr().out == ""
    csv = out / "case.trajectory.csv"
    assert csv.read_text().splitlines()[0].startswith("t,x1,x2,p1,p2,u1,y1,energy")
    report = (out / "case.simulate.txt").read_text()
    assert "energy_balance_residual" in report


def test_simulate_early_stop_exit_3(tmp_path, capsys):
    text = (SCENARIOS / "mdk.scenario").read_text()
    text = text.replace("policy: open_loop", "policy: singular\n  p0: zero")
    p = write(tmp_path, text)
    assert main(["simulate", "--scenario", str(p), "--out", str(tmp_path)]) == 3
    assert "infeasible" in capsys.readouterr().out


def test_simulate_is_byte_deterministic(tmp_path, capsys):
    p = SCENARIOS / "supplied_energy_definite.scenario"
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--scenario", str(p), "--out", str(a), "--quiet"]) == 0
    assert main(["simulate", "--scenario", str(p), "--out", str(b), "--quiet"]) == 0
    name = "supplied_energy_definite.trajectory.csv"
    assert (a / name).read_bytes() == (b / name).read_bytes()


def test_dt_override(tmp_path, capsys):
    p = write(tmp_path, BASE)
    assert main(["simulate", "--scenario", str(p), "--out", str(tmp_path), "--dt", "1e-2"]) == 0
    assert "steps: 5" in capsys.readouterr().out
    assert main(["simulate", "--scenario", str(p), "--dt", "-1"]) == 1


def test_reduce_descriptor(capsys):
    assert main(["reduce", "--scenario", str(SCENARIOS / "descriptor.scenario")]) == 0
    out = capsys.readouterr().out
    assert "A_reduced: [" in out and "x2_recovery: [" in out


def test_reduce_rejects_ordinary_system(capsys):
    assert main(["reduce", "--scenario", str(SCENARIOS / "mdk.scenario")]) == 1


def test_reduce_singular_pivot_exit_2(tmp_path, capsys):
    text = """\
system:
  descriptor:
    n1: 1
    J: [[0.0, 1.0], [-1.0, 0.0]]
    R: {zeros: [2, 2]}
    Q: {eye: 2}
    G1: [[1.0]]
cost: supplied_energy
"""
    assert main(["reduce", "--scenario", str(write(tmp_path, text))]) == 2


def test_console_entry_point_runs(tmp_path):
    r = subprocess.run([sys.executable, "-m", "phsingular", "check", "--scenario",
                        str(SCENARIOS / "lossless.scenario")], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert "necessary_conditions_pass: true" in r.stdout
