"""Scenario files: YAML documents describing a system, a cost and a run.

Top-level sections::

    system:   {J, R, Q, G, E?} | {mechanical: {M, D, K, B}} | {descriptor: {J, R, Q, G1, n1}}
    cost:     supplied_energy | {Y, N, l, horizon?}
    bounds:   {lower, upper}                                   (optional)
    sim:      {x0, T, dt?, policy?, p0?, feedback_eval?, control?}
    outputs:  {csv?, report?}                                  (optional)

Matrices are row-major nested lists; ``{diag: [...]}``, ``{eye: k}`` and
``{zeros: [r, c]}`` are accepted shorthands.  Open-loop controls are
``{constant: [...]}``, ``{sinusoid: {amplitude, omega, phase?}}`` or
``{file: path}`` (CSV with columns t,u1..um, linearly interpolated).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np
import yaml

from .descriptor import DescriptorPHSystem, from_mechanical
from .feedback import ControlBounds
from .ph_core import LinearQuadraticCost, PHSystem, StructureError
from .simulator import DEFAULT_DT, FEEDBACK_EVAL, POLICIES, ScenarioConfig

SECTIONS = ("system", "cost", "bounds", "sim", "outputs")
REQUIRED = ("system", "cost")


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario; carries the offending section."""

    def __init__(self, message: str, section: str | None = None, line: int | None = None,
                 column: int | None = None):
        where = []
        if section:
            where.append(f"section '{section}'")
        if line is not None:
            where.append(f"line {line}" + (f", column {column}" if column is not None else ""))
        super().__init__(f"{'; '.join(where)}: {message}" if where else message)
        self.section = section
        self.line = line
        self.column = column


@dataclass
class Scenario:
    system: PHSystem | DescriptorPHSystem
    cost: LinearQuadraticCost
    bounds: ControlBounds | None = None
    x0: np.ndarray | None = None
    T: float | None = None
    dt: float = DEFAULT_DT
    policy: str = "open_loop"
    p0: str | np.ndarray = "consistent"
    feedback_eval: str = "stage"
    control: Callable[[float], np.ndarray] | None = None
    outputs: dict = field(default_factory=dict)
    source: Path | None = None

    @property
    def is_descriptor(self) -> bool:
        return isinstance(self.system, DescriptorPHSystem)

    @property
    def has_sim(self) -> bool:
        return self.x0 is not None and self.T is not None

    def config(self, dt: float | None = None) -> ScenarioConfig:
        if not self.has_sim:
            raise ScenarioError("scenario has no runnable 'sim' section (x0 and T)", "sim")
        return ScenarioConfig(self.system, self.cost, self.x0, self.T,
                              self.dt if dt is None else dt, self.policy, self.control,
                              self.bounds, self.p0, self.feedback_eval)


# ------------------------------------------------------------------ helpers

def _section_lines(text: str) -> dict[str, int]:
    try:
        node = yaml.compose(text)
    except yaml.YAMLError:
        return {}
    if not isinstance(node, yaml.MappingNode):
        return {}
    return {k.value: k.start_mark.line + 1 for k, _ in node.value if isinstance(k, yaml.ScalarNode)}


class _Ctx:
    def __init__(self, lines: dict[str, int]):
        self.lines = lines

    def err(self, section: str, msg: str) -> ScenarioError:
        return ScenarioError(msg, section, self.lines.get(section))


def _mapping(ctx: _Ctx, section: str, value, allowed: tuple[str, ...], what: str | None = None) -> dict:
    if not isinstance(value, dict):
        raise ctx.err(section, f"{what or section} must be a mapping")
    unknown = sorted(set(value) - set(allowed))
    if unknown:
        raise ctx.err(section, f"unknown key(s) {unknown}; allowed {list(allowed)}")
    return value


def _matrix(ctx: _Ctx, section: str, name: str, value, shape: tuple[int | None, int | None] = (None, None)):
    try:
        if isinstance(value, dict):
            if set(value) == {"diag"}:
                M = np.diag(np.atleast_1d(np.asarray(value["diag"], dtype=float)))
            elif set(value) == {"eye"}:
                M = np.eye(int(value["eye"]))
            elif set(value) == {"zeros"}:
                r, c = value["zeros"]
                M = np.zeros((int(r), int(c)))
            else:
                raise ValueError(f"unknown matrix shorthand {sorted(value)}")
        else:
            if isinstance(value, list) and value and isinstance(value[0], list):
                widths = {len(row) for row in value}
                if len(widths) != 1:
                    raise ValueError(f"rows have different lengths {sorted(widths)}")
            M = np.asarray(value, dtype=float)
            if M.ndim == 0:
                M = M.reshape(1, 1)
            elif M.ndim == 1:
                M = M.reshape(-1, 1) if shape[1] == 1 or shape[0] not in (None, 1) else M.reshape(1, -1)
    except (TypeError, ValueError) as exc:
        raise ctx.err(section, f"matrix '{name}' is malformed: {exc}") from None
    if M.ndim != 2:
        raise ctx.err(section, f"matrix '{name}' must be two-dimensional")
    if not np.all(np.isfinite(M)):
        raise ctx.err(section, f"matrix '{name}' has non-finite entries")
    for axis, want in enumerate(shape):
        if want is not None and M.shape[axis] != want:
            raise ctx.err(section, f"matrix '{name}' has shape {M.shape}, expected "
                                   f"{tuple(s if s is not None else '*' for s in shape)}")
    return M


def _vector(ctx: _Ctx, section: str, name: str, value, size: int | None = None) -> np.ndarray:
    try:
        v = np.atleast_1d(np.asarray(value, dtype=float))
    except (TypeError, ValueError):
        raise ctx.err(section, f"'{name}' must be a list of numbers") from None
    if v.ndim != 1:
        raise ctx.err(section, f"'{name}' must be a flat list")
    if size is not None and v.size != size:
        raise ctx.err(section, f"'{name}' has length {v.size}, expected {size}")
    return v


def _scalar(ctx: _Ctx, section: str, name: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ctx.err(section, f"'{name}' must be a number")
    return float(value)


# ---------------------------------------------------------------- sections

def _parse_system(ctx: _Ctx, raw):
    sec = "system"
    raw = _mapping(ctx, sec, raw, ("J", "R", "Q", "G", "E", "mechanical", "descriptor"))
    try:
        if "mechanical" in raw:
            if len(raw) != 1:
                raise ctx.err(sec, "'mechanical' cannot be combined with other keys")
            mech = _mapping(ctx, sec, raw["mechanical"], ("M", "D", "K", "B"), "mechanical")
            missing = [k for k in ("M", "D", "K", "B") if k not in mech]
            if missing:
                raise ctx.err(sec, f"mechanical system missing {missing}")
            M = _matrix(ctx, sec, "M", mech["M"])
            k = M.shape[0]
            D = _matrix(ctx, sec, "D", mech["D"], (k, k))
            K = _matrix(ctx, sec, "K", mech["K"], (k, k))
            B = _matrix(ctx, sec, "B", mech["B"], (k, None))
            return from_mechanical(M, D, K, B)
        if "descriptor" in raw:
            if len(raw) != 1:
                raise ctx.err(sec, "'descriptor' cannot be combined with other keys")
            ds = _mapping(ctx, sec, raw["descriptor"], ("J", "R", "Q", "G1", "n1"), "descriptor")
            missing = [k for k in ("J", "R", "Q", "G1", "n1") if k not in ds]
            if missing:
                raise ctx.err(sec, f"descriptor system missing {missing}")
            Q = _matrix(ctx, sec, "Q", ds["Q"])
            n = Q.shape[0]
            n1 = int(ds["n1"])
            return DescriptorPHSystem(_matrix(ctx, sec, "J", ds["J"], (n, n)),
                                      _matrix(ctx, sec, "R", ds["R"], (n, n)), Q,
                                      _matrix(ctx, sec, "G1", ds["G1"], (n1, None)), n1)
        missing = [k for k in ("J", "R", "Q", "G") if k not in raw]
        if missing:
            raise ctx.err(sec, f"missing matrices {missing}")
        Q = _matrix(ctx, sec, "Q", raw["Q"])
        n = Q.shape[0]
        E = _matrix(ctx, sec, "E", raw["E"], (n, n)) if "E" in raw else None
        return PHSystem(_matrix(ctx, sec, "J", raw["J"], (n, n)),
                        _matrix(ctx, sec, "R", raw["R"], (n, n)), Q,
                        _matrix(ctx, sec, "G", raw["G"], (n, None)), E)
    except StructureError as exc:
        raise ctx.err(sec, str(exc)) from None


def _parse_cost(ctx: _Ctx, raw, m: int) -> LinearQuadraticCost:
    sec = "cost"
    if raw == "supplied_energy":
        return LinearQuadraticCost.supplied_energy(m)
    raw = _mapping(ctx, sec, raw, ("supplied_energy", "Y", "N", "l", "horizon"))
    horizon = _scalar(ctx, sec, "horizon", raw.get("horizon", 1.0))
    if raw.get("supplied_energy"):
        if set(raw) - {"supplied_energy", "horizon"}:
            raise ctx.err(sec, "'supplied_energy' cannot be combined with Y, N or l")
        return LinearQuadraticCost.supplied_energy(m, horizon)
    Y = _matrix(ctx, sec, "Y", raw.get("Y", {"zeros": [m, m]}), (m, m))
    N = _matrix(ctx, sec, "N", raw.get("N", {"zeros": [m, m]}), (m, m))
    l = _vector(ctx, sec, "l", raw.get("l", [0.0] * m), m)
    try:
        return LinearQuadraticCost(Y, N, l, horizon)
    except (StructureError, ValueError) as exc:
        raise ctx.err(sec, str(exc)) from None


def _parse_bounds(ctx: _Ctx, raw, m: int) -> ControlBounds:
    sec = "bounds"
    raw = _mapping(ctx, sec, raw, ("lower", "upper"))
    lo = _vector(ctx, sec, "lower", raw.get("lower", [-np.inf] * m), m)
    hi = _vector(ctx, sec, "upper", raw.get("upper", [np.inf] * m), m)
    try:
        return ControlBounds(lo, hi)
    except StructureError as exc:
        raise ctx.err(sec, str(exc)) from None


def _parse_control(ctx: _Ctx, raw, m: int, base: Path | None):
    sec = "sim"
    raw = _mapping(ctx, sec, raw, ("constant", "sinusoid", "file"), "control")
    if len(raw) != 1:
        raise ctx.err(sec, "control needs exactly one of constant, sinusoid, file")
    kind, spec = next(iter(raw.items()))
    if kind == "constant":
        u = _vector(ctx, sec, "control.constant", spec, m)
        return lambda t: u
    if kind == "sinusoid":
        spec = _mapping(ctx, sec, spec, ("amplitude", "omega", "phase"), "control.sinusoid")
        a = _vector(ctx, sec, "amplitude", spec.get("amplitude", [1.0] * m), m)
        w = _vector(ctx, sec, "omega", spec.get("omega", [1.0] * m), m)
        ph = _vector(ctx, sec, "phase", spec.get("phase", [0.0] * m), m)
        return lambda t: a * np.sin(w * t + ph)
    path = Path(str(spec))
    if base is not None and not path.is_absolute():
        path = base / path
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2, comments="#",
                          skiprows=1 if _has_header(path) else 0)
    except OSError as exc:
        raise ctx.err(sec, f"cannot read control file: {exc}") from None
    except ValueError as exc:
        raise ctx.err(sec, f"control file {path} is malformed: {exc}") from None
    if data.shape[1] != m + 1:
        raise ctx.err(sec, f"control file has {data.shape[1]} columns, expected t plus {m} inputs")
    t = data[:, 0]
    if np.any(np.diff(t) <= 0):
        raise ctx.err(sec, "control file times must be strictly increasing")
    cols = data[:, 1:]
    return lambda s: np.array([np.interp(s, t, cols[:, i]) for i in range(m)])


def _has_header(path: Path) -> bool:
    with open(path) as fh:
        first = fh.readline().strip().split(",")[0]
    try:
        float(first)
        return False
    except ValueError:
        return True


def _parse_sim(ctx: _Ctx, raw, n_full: int, n_reduced: int, m: int, base: Path | None) -> dict:
    sec = "sim"
    raw = _mapping(ctx, sec, raw, ("x0", "T", "dt", "policy", "p0", "feedback_eval", "control"))
    out: dict[str, Any] = {}
    if "x0" in raw:
        x0 = _vector(ctx, sec, "x0", raw["x0"])
        if x0.size not in (n_full, n_reduced):
            raise ctx.err(sec, f"'x0' has length {x0.size}, expected {n_full}"
                               + (f" or {n_reduced}" if n_reduced != n_full else ""))
        out["x0"] = x0
    if "T" in raw:
        out["T"] = _scalar(ctx, sec, "T", raw["T"])
    if "dt" in raw:
        out["dt"] = _scalar(ctx, sec, "dt", raw["dt"])
        if out["dt"] <= 0:
            raise ctx.err(sec, "'dt' must be positive")
    if "T" in out and out["T"] < out.get("dt", DEFAULT_DT):
        raise ctx.err(sec, "'T' must be at least dt")
    if "policy" in raw:
        if raw["policy"] not in POLICIES:
            raise ctx.err(sec, f"'policy' must be one of {list(POLICIES)}")
        out["policy"] = raw["policy"]
    if "feedback_eval" in raw:
        if raw["feedback_eval"] not in FEEDBACK_EVAL:
            raise ctx.err(sec, f"'feedback_eval' must be one of {list(FEEDBACK_EVAL)}")
        out["feedback_eval"] = raw["feedback_eval"]
    if "p0" in raw:
        p0 = raw["p0"]
        if isinstance(p0, str):
            if p0 not in ("consistent", "stable", "zero"):
                raise ctx.err(sec, "'p0' must be consistent, stable, zero or a vector")
            out["p0"] = p0
        else:
            out["p0"] = _vector(ctx, sec, "p0", p0, n_reduced)
    if "control" in raw:
        out["control"] = _parse_control(ctx, raw["control"], m, base)
    return out


def parse_scenario(text: str, source: Path | str | None = None) -> Scenario:
    source = Path(source) if source is not None else None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        problem = getattr(exc, "problem", None) or str(exc)
        raise ScenarioError(f"parse error: {problem}", None,
                            mark.line + 1 if mark else None, mark.column + 1 if mark else None) from None
    ctx = _Ctx(_section_lines(text))
    if not isinstance(raw, dict):
        raise ScenarioError("scenario must be a mapping of sections")
    unknown = sorted(set(raw) - set(SECTIONS))
    if unknown:
        raise ScenarioError(f"unknown section(s) {unknown}; allowed {list(SECTIONS)}",
                            unknown[0], ctx.lines.get(unknown[0]))
    for sec in REQUIRED:
        if sec not in raw:
            raise ScenarioError(f"missing required section '{sec}'", sec)
    system = _parse_system(ctx, raw["system"])
    m = system.m
    n_full = system.n
    n_reduced = system.n1 if isinstance(system, DescriptorPHSystem) else system.n
    cost = _parse_cost(ctx, raw["cost"], m)
    bounds = _parse_bounds(ctx, raw["bounds"], m) if "bounds" in raw else None
    base = source.parent if source is not None else None
    sim = _parse_sim(ctx, raw["sim"], n_full, n_reduced, m, base) if "sim" in raw else {}
    if sim.get("policy") == "constrained_singular" and bounds is None:
        raise ctx.err("sim", "policy constrained_singular needs a 'bounds' section")
    outputs = {}
    if "outputs" in raw:
        outputs = _mapping(ctx, "outputs", raw["outputs"], ("csv", "report"))
        outputs = {k: str(v) for k, v in outputs.items()}
    return Scenario(system, cost, bounds, source=source, outputs=outputs, **sim)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}") from None
    return parse_scenario(text, path)
