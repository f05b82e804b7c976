"""Run a scenario end to end and write its report and series.

The report is canonical JSON: keys in a fixed order, floats rounded to 12
significant digits, non-finite floats spelled ``"nan"``, ``"inf"`` or
``"-inf"``. Running the same scenario twice gives byte-identical files.
"""
from __future__ import annotations

import csv
import json
import math
import time
from pathlib import Path

import numpy as np

from . import criteria as crit
from .corpus import a, example_integral, example_signal
from .errors import BadParameters, ValidationFailure
from .scenario import SCHEMA_VERSION, Scenario
from .signal import PiecewiseConstantSignal, validate
from .simulate import gronwall_check, integrate, weak_residual

TRAJECTORY_ROWS = 5001


def canonical(obj):
    """Convert to plain JSON types with 12-significant-digit floats."""
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return canonical(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        v = float(format(v, ".12g"))
        return 0.0 if v == 0 else v
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "value"):
        return canonical(obj.value)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(report: dict) -> str:
    return json.dumps(canonical(report), indent=2, ensure_ascii=False) + "\n"


def _fmt(v: float) -> str:
    return format(float(v), ".12g")


def write_growth_csv(path, cert) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "I_of_t"])
        for t, v in cert.growth_rows():
            w.writerow([_fmt(t), _fmt(v)])


def _validation_grid(scn: Scenario) -> np.ndarray:
    T = max([scn.simulation.T] + [c.horizon + scn.omega.S for c in scn.criteria])
    grid = np.linspace(0.0, T, 2001)
    if isinstance(scn.signal, PiecewiseConstantSignal):
        grid = np.union1d(grid, scn.signal.breakpoints_in(0.0, T))
    return grid


def _evaluate(scn: Scenario, cfg):
    """Run one configured criterion; returns a list of (slug, result)."""
    name = cfg.criterion
    if name == "classical-PE":
        return [("classical-PE", crit.classical_pe(scn.signal, cfg))]
    if name == "simple-corollary":
        return [("simple-corollary", crit.simple_corollary(scn.signal, cfg))]
    if name == "GPE-theorem":
        return [("GPE-theorem", crit.gpe_lower(scn.signal, scn.omega, cfg)),
                ("GPE-theorem_upper", crit.gpe_upper(scn.signal, scn.omega, cfg))]
    return [("weighted-corollary", crit.weighted_corollary(scn.signal, scn.omega, cfg)),
            ("weighted-corollary_upper", crit.weighted_corollary(scn.signal, scn.omega, cfg, branch="upper"))]


def _envelope_certificates(scn: Scenario, results: dict):
    """``I`` and ``J`` growth series for the envelope check.

    Taken from the scenario's GPE-theorem run when present; otherwise computed
    with default settings over ``[0, T_sim - S]``.
    """
    if "GPE-theorem" in results:
        return results["GPE-theorem"], results["GPE-theorem_upper"], "criteria"
    threads = max([c.threads for c in scn.criteria] + [1])
    cfg = crit.CriterionConfig(criterion="GPE-theorem", S=scn.omega.S,
                               horizon=scn.simulation.T - scn.omega.S, threads=threads)
    return (crit.gpe_lower(scn.signal, scn.omega, cfg), crit.gpe_upper(scn.signal, scn.omega, cfg),
            "default GPE-theorem run over [0, T - S]")


def run_scenario(scn: Scenario, out_dir, *, seed: int = 0, record_timing: bool = False) -> dict:
    """Validate, evaluate criteria, simulate and check; write all artifacts.

    Returns the report dictionary (before canonicalization).
    """
    out_dir = Path(out_dir)
    series = out_dir / scn.output.series
    series.mkdir(parents=True, exist_ok=True)
    clock = {}
    t0 = time.perf_counter()

    val = validate(scn.signal, _validation_grid(scn))
    if not val.passed:
        raise ValidationFailure(f"scenario {scn.name!r}: " + "; ".join(val.failures))
    clock["validate"] = time.perf_counter() - t0

    t1 = time.perf_counter()
    results: dict = {}
    crit_reports = []
    for cfg in scn.criteria:
        for slug, res in _evaluate(scn, cfg):
            results.setdefault(slug, res)
            crit_reports.append(res.as_dict())
            if isinstance(res, crit.StabilityCertificate):
                write_growth_csv(series / f"growth_{slug}.csv", res)
    clock["criteria"] = time.perf_counter() - t1

    t2 = time.perf_counter()
    sim = scn.simulation
    lower, upper, source = _envelope_certificates(scn, results)
    t_eval = np.union1d(lower.times + scn.omega.S, upper.times)
    t_eval = t_eval[t_eval <= sim.T]
    trajectories = []
    for k, x0 in enumerate(sim.x0):
        traj = integrate(scn.signal, x0, sim.T, method=sim.method, step=sim.step, t_eval=t_eval, S=scn.omega.S)
        traj.to_csv(series / f"trajectory_{k}.csv", max_rows=TRAJECTORY_ROWS)
        res = weak_residual(traj, scn.signal, count=sim.weak_tests, seed=seed)
        env = gronwall_check(traj, lower, scn.omega, upper)
        trajectories.append({
            "x0": list(x0),
            "method": traj.method,
            "step": traj.step,
            "points": int(traj.times.size),
            "final_energy": float(traj.energies[-1]),
            "energies_monotone": traj.energies_monotone(),
            "max_energy_increase": traj.max_energy_increase,
            "weak_residual": res,
            "gronwall": env.as_dict(),
        })
    clock["simulate"] = time.perf_counter() - t2

    lower_flags = [t["gronwall"]["lower_ok"] for t in trajectories]
    simulation = {
        "T": sim.T,
        "energies_monotone": all(t["energies_monotone"] for t in trajectories),
        "weak_residual_max": max(t["weak_residual"] for t in trajectories),
        "gronwall": {
            "upper_ok": all(t["gronwall"]["upper_ok"] for t in trajectories),
            "lower_ok": None if any(f is None for f in lower_flags) else all(lower_flags),
            "worst_margin": min(t["gronwall"]["worst_margin"] for t in trajectories),
            "source": source,
        },
        "trajectories": trajectories,
    }
    timing = {"recorded": False}
    if record_timing:
        timing = {"recorded": True, **{f"{k}_s": v for k, v in clock.items()},
                  "total_s": time.perf_counter() - t0}
    report = {
        "schema_version": SCHEMA_VERSION,
        "scenario": scn.summary(),
        "signal_validation": val.as_dict(),
        "criteria": crit_reports,
        "simulation": simulation,
        "timing": timing,
    }
    (out_dir / scn.output.report).write_text(dumps(report))
    return report


def intermittent_table(n_max: int, S: float, threads: int = 1) -> list[dict]:
    """Numeric ``L(a_n + 1)`` on the intermittent example against ``(n - 1) S^3 / 6``."""
    if int(n_max) != n_max or n_max < 2:
        raise BadParameters(f"n-max must be an integer >= 2, got {n_max}")
    if not 0 < S < 1:
        raise BadParameters(f"S must lie in (0, 1), got {S}")
    ts = [float(a(n) + 1) for n in range(2, n_max + 1)]
    cfg = crit.CriterionConfig(criterion="simple-corollary", S=S, horizon=ts[-1], sample_times=tuple(ts),
                               quadrature="piecewise-exact", threads=threads)
    cert = crit.simple_corollary(example_signal(ts[-1]), cfg)
    rows = []
    for n, t in zip(range(2, n_max + 1), ts):
        num = float(cert.value_at(t))
        exact = example_integral(n, S)
        rows.append({"n": n, "t": t, "L_numeric": num, "L_closed_form": exact,
                     "rel_err": abs(num - exact) / exact})
    return rows


def write_intermittent_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "t", "L_numeric", "L_closed_form", "rel_err"])
        for r in rows:
            w.writerow([r["n"], _fmt(r["t"]), _fmt(r["L_numeric"]), _fmt(r["L_closed_form"]), _fmt(r["rel_err"])])

