"""Read scenario files (TOML, ``schema_version = 1``).

Layout::

    schema_version = 1
    name = "my-run"

    [signal]            # kind: builtin | constant | piecewise-constant |
    kind = "closed-form" #       sampled-grid | closed-form | regressor
    expr = "[[1/(1+t)]]"

    [truncation]
    kind = "triangular"
    S = 1.0

    [[criteria]]
    name = "simple-corollary"
    horizon = 100.0

    [simulation]
    x0 = [[1.0]]
    T = 101.0

    [output]
    report = "report.json"
    series = "series"

Unknown keys are errors, so typos do not silently fall back to defaults.
"""
from __future__ import annotations

import math
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from .corpus import SCENARIO_NAMES, builtin_scenario
from .criteria import CRITERIA, CriterionConfig
from .errors import GenPEError, ParseError
from .expr import ExpressionError, compile_expression
from .scenario import SCHEMA_VERSION, OutputSpec, Scenario, SimulationSpec
from .signal import (
    ClosedFormSignal,
    PiecewiseConstantSignal,
    RegressorSignal,
    SampledSignal,
    constant_signal,
    read_sampled_csv,
)
from .truncation import TruncationFunction

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

_TOP = {"schema_version", "name", "description", "signal", "truncation", "criteria", "simulation", "output"}
_CRITERION_KEYS = {f.name for f in fields(CriterionConfig)} - {"criterion", "S", "threads"}


class _Fields:
    """Typed access to one table with field-path diagnostics."""

    def __init__(self, path: Path, where: str, table):
        if not isinstance(table, dict):
            raise ParseError(f"{path}: field '{where}' must be a table")
        self.path, self.where, self.table = path, where, table

    def fail(self, key: str, msg: str):
        name = f"{self.where}.{key}" if self.where else key
        raise ParseError(f"{self.path}: field '{name}': {msg}")

    def only(self, allowed) -> None:
        extra = sorted(set(self.table) - set(allowed))
        if extra:
            self.fail(extra[0], f"unknown key; allowed: {', '.join(sorted(allowed))}")

    def get(self, key, kind, default=...):
        if key not in self.table:
            if default is ...:
                self.fail(key, "is required")
            return default
        v = self.table[key]
        if kind is float:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                self.fail(key, f"must be a finite number, got {v!r}")
            return float(v)
        if kind is int:
            if isinstance(v, bool) or not isinstance(v, int):
                self.fail(key, f"must be an integer, got {v!r}")
            return v
        if kind is str:
            if not isinstance(v, str):
                self.fail(key, f"must be a string, got {v!r}")
            return v
        if kind == "array":
            try:
                return np.asarray(v, dtype=float)
            except (TypeError, ValueError):
                self.fail(key, "must be a numeric array")
        return v


def _signal(path: Path, tab: _Fields):
    kind = tab.get("kind", str)
    spec = {"kind": kind}
    try:
        if kind == "builtin":
            tab.only({"kind", "name"})
            name = tab.get("name", str)
            if name not in SCENARIO_NAMES:
                tab.fail("name", f"unknown builtin {name!r}; expected one of {', '.join(SCENARIO_NAMES)}")
            base = builtin_scenario(name)
            return base.signal, dict(base.signal_spec)
        if kind == "constant":
            tab.only({"kind", "matrix"})
            m = np.atleast_2d(tab.get("matrix", "array"))
            spec["matrix"] = m.tolist()
            return constant_signal(m), spec
        if kind == "piecewise-constant":
            tab.only({"kind", "breakpoints", "values", "end"})
            b = tab.get("breakpoints", "array")
            v = tab.get("values", "array")
            end = tab.get("end", float, math.inf)
            spec.update(breakpoints=b.tolist(), values=v.tolist())
            return PiecewiseConstantSignal(b, v, end=end), spec
        if kind == "sampled-grid":
            tab.only({"kind", "csv", "times", "samples", "interpolation"})
            interp = tab.get("interpolation", str, "hold")
            spec["interpolation"] = interp
            if "csv" in tab.table:
                csv_path = (path.parent / tab.get("csv", str)).resolve()
                spec["csv"] = tab.get("csv", str)
                return read_sampled_csv(csv_path, interp), spec
            t = tab.get("times", "array")
            s = tab.get("samples", "array")
            spec.update(times=t.tolist(), samples=s.tolist())
            return SampledSignal(t, s, interpolation=interp), spec
        if kind in ("closed-form", "regressor"):
            tab.only({"kind", "expr", "dimension", "start", "end"})
            src = tab.get("expr", str)
            try:
                fn = compile_expression(src)
            except ExpressionError as exc:
                tab.fail("expr", str(exc))
            start = tab.get("start", float, 0.0)
            end = tab.get("end", float, math.inf)
            probe = fn(np.array([start]))
            n = tab.get("dimension", int, int(math.isqrt(probe[0].size)) if kind == "closed-form" else probe[0].size)
            spec.update(expr=src, dimension=n)
            if kind == "regressor":
                if probe[0].size != n:
                    tab.fail("expr", f"regressor has {probe[0].size} entries, dimension is {n}")
                return RegressorSignal(lambda ts: fn(ts).reshape(-1, n), n, start, end, vectorized=True), spec
            if probe[0].size != n * n:
                tab.fail("expr", f"expression gives {probe[0].size} entries, expected {n * n}")
            return ClosedFormSignal(lambda ts: fn(ts).reshape(-1, n, n), n, start, end, vectorized=True), spec
    except ParseError:
        raise
    except (ValueError, TypeError) as exc:
        raise ParseError(f"{path}: field 'signal': {exc}") from None
    tab.fail("kind", "expected builtin, constant, piecewise-constant, sampled-grid, closed-form or regressor")


def _truncation(path: Path, tab: _Fields) -> TruncationFunction:
    tab.only({"kind", "S", "knots", "peak"})
    kind = tab.get("kind", str, "triangular")
    try:
        if kind == "piecewise-linear":
            return TruncationFunction.piecewise_linear(tab.get("knots", "array").tolist())
        if kind == "smooth-bump":
            return TruncationFunction.smooth_bump(tab.get("S", float), tab.get("peak", float, 1.0))
        if kind == "triangular":
            return TruncationFunction.triangular(tab.get("S", float))
    except (ValueError, TypeError) as exc:
        raise ParseError(f"{path}: field 'truncation': {exc}") from None
    tab.fail("kind", "expected triangular, smooth-bump or piecewise-linear")


def _criterion(path: Path, tab: _Fields, S: float) -> CriterionConfig:
    tab.only(_CRITERION_KEYS | {"name"})
    name = tab.get("name", str)
    if name not in CRITERIA:
        tab.fail("name", f"unknown criterion {name!r}; expected one of {', '.join(CRITERIA)}")
    kw = {}
    for key in sorted(_CRITERION_KEYS & set(tab.table)):
        if key == "quadrature":
            kw[key] = tab.get(key, str)
        elif key == "samples":
            kw[key] = tab.get(key, int)
        elif key == "sample_times":
            kw[key] = tuple(tab.get(key, "array").ravel().tolist())
        else:
            kw[key] = tab.get(key, float)
    try:
        return CriterionConfig(criterion=name, S=S, **kw)
    except GenPEError as exc:
        raise ParseError(f"{path}: field '{tab.where}': {exc}") from None


def _simulation(tab: _Fields) -> SimulationSpec:
    tab.only({"x0", "T", "method", "step", "weak_tests"})
    x0 = np.atleast_2d(tab.get("x0", "array"))
    if x0.ndim != 2:
        tab.fail("x0", "must be a vector or a list of vectors")
    step = tab.get("step", float, None)
    return SimulationSpec(
        x0=tuple(tuple(r) for r in x0.tolist()),
        T=tab.get("T", float),
        method=tab.get("method", str, "auto"),
        step=step,
        weak_tests=tab.get("weak_tests", int, 20),
    )


def parse_scenario(text: str, path="<string>") -> Scenario:
    path = Path(path)
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    top = _Fields(path, "", doc)
    top.only(_TOP)
    version = top.get("schema_version", int)
    if version != SCHEMA_VERSION:
        top.fail("schema_version", f"unsupported version {version}; this reader understands {SCHEMA_VERSION}")
    signal, spec = _signal(path, _Fields(path, "signal", top.get("signal", dict)))
    omega = _truncation(path, _Fields(path, "truncation", top.get("truncation", dict)))
    crit_list = top.get("criteria", list, [])
    if not isinstance(crit_list, list):
        top.fail("criteria", "must be an array of tables")
    criteria = tuple(
        _criterion(path, _Fields(path, f"criteria[{i}]", c), omega.S) for i, c in enumerate(crit_list)
    )
    sim = _simulation(_Fields(path, "simulation", top.get("simulation", dict)))
    out_tab = _Fields(path, "output", top.get("output", dict, {}))
    out_tab.only({"report", "series"})
    output = OutputSpec(out_tab.get("report", str, "report.json"), out_tab.get("series", str, "series"))
    try:
        return Scenario(
            name=top.get("name", str, path.stem),
            description=top.get("description", str, ""),
            signal=signal,
            signal_spec=spec,
            omega=omega,
            criteria=criteria,
            simulation=sim,
            output=output,
            schema_version=version,
        )
    except GenPEError as exc:
        raise ParseError(f"{path}: {exc}") from None


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from None
    return parse_scenario(text, path)
