"""Command-line front end: ``phsingular {check,simulate,reduce} --scenario FILE``.

Exit codes
    0  success / all necessary conditions hold
    1  input error (unreadable or inconsistent scenario, structure violation)
    2  a necessary condition fails (check) or the index-1 pivot is singular (reduce)
    3  simulation stopped early (feedback infeasible or non-finite state)
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .conditions import evaluate_conditions, goh_linear
from .descriptor import DescriptorPHSystem, IndexViolationError, reduce_linear
from .feedback import singular_feedback
from .ph_core import StructureError, validate_structure
from .scenario import Scenario, ScenarioError, load_scenario
from .simulator import COMPLETE, audit, consistent_initial_adjoint, integrate_closed_loop

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_CONDITION = 2
EXIT_SIM_STOPPED = 3


def _fmt(v) -> str:
    return " ".join("%.17g" % float(a) for a in np.ravel(v))


def _matrix_lines(name: str, M) -> list[str]:
    M = np.atleast_2d(M)
    return [f"{name}: ["] + ["  " + _fmt(row) for row in M] + ["]"]


class Output:
    """Collects ordered key/value entries and matrix blocks for one command."""

    def __init__(self):
        self.items: list[tuple[str, object]] = []

    def add(self, key: str, value) -> None:
        self.items.append((key, value))

    def report_text(self) -> str:
        lines = []
        for key, val in self.items:
            if isinstance(val, np.ndarray) and val.ndim == 2:
                lines += _matrix_lines(key, val)
            elif isinstance(val, np.ndarray):
                lines.append(f"{key}: {_fmt(val)}")
            elif isinstance(val, bool):
                lines.append(f"{key}: {str(val).lower()}")
            elif isinstance(val, float):
                lines.append(f"{key}: {val:.17g}")
            else:
                lines.append(f"{key}: {val}")
        return "\n".join(lines) + "\n"

    def machine_text(self) -> str:
        def conv(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, (np.floating, np.integer, np.bool_)):
                return v.item()
            return v
        return json.dumps({k: conv(v) for k, v in self.items}, indent=1, sort_keys=False) + "\n"

    def render(self, fmt: str) -> str:
        return self.machine_text() if fmt == "machine" else self.report_text()


def _emit(args, scen: Scenario, out: Output, kind: str) -> None:
    text = out.render(args.format)
    if not args.quiet:
        sys.stdout.write(text)
    path = _output_path(args, scen, "report", f"{kind}.{'json' if args.format == 'machine' else 'txt'}")
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)


def _output_path(args, scen: Scenario, key: str, default_name: str) -> Path | None:
    stem = scen.source.stem if scen.source is not None else "scenario"
    if args.out is not None:
        return Path(args.out) / f"{stem}.{default_name}"
    if key in scen.outputs:
        p = Path(scen.outputs[key])
        if not p.is_absolute() and scen.source is not None:
            p = scen.source.parent / p
        return p
    return None


def _ordinary(scen: Scenario):
    """The ordinary system the conditions act on (descriptor systems are reduced first)."""
    if isinstance(scen.system, DescriptorPHSystem):
        red = reduce_linear(scen.system)
        return red.system, red
    return scen.system, None


def _x0(scen: Scenario, n: int) -> np.ndarray:
    if scen.x0 is None:
        return np.zeros(n)
    return scen.x0[:n]


def cmd_check(args) -> int:
    scen = load_scenario(args.scenario)
    system, red = _ordinary(scen)
    out = Output()
    out.add("command", "check")
    x0 = _x0(scen, system.n)
    if red is not None:
        out.add("reduced_from_descriptor", True)
        out.add("pivot_condition", red.pivot_cond)
        out.add("reduced_split_certified", red.certified)
    val = validate_structure(system, [x0])
    for line in val.to_lines():
        k, v = line.split(": ", 1)
        out.add(k, v)
    if not val.passed:
        out.add("structure_failures", "; ".join(val.failures()))
        _emit(args, scen, out, "check")
        return EXIT_INPUT
    init = consistent_initial_adjoint(system, scen.cost, x0)
    out.add("x0", x0)
    out.add("p0", init.p0)
    out.add("p0_switching_residual", init.switching_residual)
    out.add("p0_rate_residual", init.rate_residual)
    glin = goh_linear(system, scen.cost)
    out.add("goh_linear_pass", glin.passed)
    out.add("goh_linear_asymmetry", glin.asymmetry)
    rep = evaluate_conditions(system, scen.cost, x0, init.p0)
    goh_ok = rep.goh_pass and glin.passed
    out.add("goh_pass", goh_ok)
    out.add("goh_max_residual", rep.goh.max_violation)
    out.add("goh_tolerance", rep.goh.tolerance)
    out.add("lc_pass", rep.lc_pass)
    out.add("W_definiteness", rep.certificate.definiteness)
    out.add("W_max_eigenvalue", rep.certificate.max_eigenvalue)
    out.add("W_eigenvalues", rep.W_eigs)
    out.add("W", rep.W)
    out.add("d", rep.d)
    fb = singular_feedback(rep.W, rep.d) if rep.lc_pass else None
    out.add("feedback_mode", fb.mode if fb is not None else "not_evaluated")
    if fb is not None:
        out.add("feedback_u", fb.u)
        out.add("feedback_residual", fb.residual)
    passed = goh_ok and rep.lc_pass
    out.add("necessary_conditions_pass", passed)
    _emit(args, scen, out, "check")
    return EXIT_OK if passed else EXIT_CONDITION


def cmd_simulate(args) -> int:
    scen = load_scenario(args.scenario)
    cfg = scen.config(args.dt)
    traj = integrate_closed_loop(cfg)
    csv_path = _output_path(args, scen, "csv", "trajectory.csv")
    if csv_path is None:
        csv_path = Path(f"{scen.source.stem if scen.source else 'scenario'}.trajectory.csv")
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    traj.write_csv(csv_path)
    rep = audit(traj)
    out = Output()
    out.add("command", "simulate")
    out.add("csv", str(csv_path))
    out.add("backend", traj.backend)
    out.add("steps", len(traj.times) - 1)
    out.add("final_time", float(traj.times[-1]))
    if traj.diagnostic:
        out.add("diagnostic", traj.diagnostic)
    if traj.p0_residual is not None:
        out.add("p0_switching_residual", traj.p0_residual[0])
        out.add("p0_rate_residual", traj.p0_residual[1])
    if traj.initial_certificate is not None:
        out.add("initial_W_definiteness", traj.initial_certificate.definiteness)
    out.add("energy_initial", float(traj.energy[0]))
    out.add("energy_final", float(traj.energy[-1]))
    out.add("cost_final", float(traj.cost[-1]))
    for line in rep.to_lines():
        k, v = line.split(": ", 1)
        out.add(k, v)
    _emit(args, scen, out, "simulate")
    return EXIT_OK if traj.status == COMPLETE else EXIT_SIM_STOPPED


def cmd_reduce(args) -> int:
    scen = load_scenario(args.scenario)
    if not isinstance(scen.system, DescriptorPHSystem):
        raise ScenarioError("reduce needs a descriptor system", "system")
    red = reduce_linear(scen.system)
    s = red.system
    out = Output()
    out.add("command", "reduce")
    out.add("n1", scen.system.n1)
    out.add("n2", scen.system.n2)
    out.add("pivot_condition", red.pivot_cond)
    out.add("split_certified", red.certified)
    out.add("J_reduced", s.J_at(None))
    out.add("R_reduced", s.R_at(None))
    out.add("Q_reduced", s.Q)
    out.add("G_reduced", s.G_at(None))
    out.add("A_reduced", red.coefficient)
    out.add("x2_recovery", red.recovery)
    _emit(args, scen, out, "reduce")
    return EXIT_OK


COMMANDS = {"check": cmd_check, "simulate": cmd_simulate, "reduce": cmd_reduce}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phsingular",
        description="Singular optimal control checks and simulation for port-Hamiltonian systems.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {"check": "validate structure and evaluate the Goh and Legendre-Clebsch conditions",
             "simulate": "integrate state, adjoint and cost; write CSV and an audit report",
             "reduce": "reduce an index-1 descriptor system to an ordinary one"}
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--scenario", required=True, help="scenario file (YAML)")
        p.add_argument("--out", default=None, help="directory for reports and CSV output")
        p.add_argument("--format", choices=("report", "machine"), default="report",
                       help="flat key: value report or JSON")
        p.add_argument("--dt", type=float, default=None, help="override the scenario step size")
        p.add_argument("--quiet", action="store_true", help="do not print the report")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.dt is not None and not args.dt > 0:
        print("error: --dt must be positive", file=sys.stderr)
        return EXIT_INPUT
    try:
        return COMMANDS[args.command](args)
    except IndexViolationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONDITION
    except (ScenarioError, StructureError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
