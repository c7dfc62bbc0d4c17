"""End-to-end runs: simulate, persist, map the window onto [-1, 1], and report.

Every run writes ``report.json`` with the same key set whether or not its
stages succeed; a failed stage leaves its keys null and is listed under
``errors`` together with the stage name.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..criteria import (
    affine_linf_check,
    affine_ratios,
    criteria_suite,
    density_series,
    linf_series,
    log_ps_density,
    rescale,
    time_slice,
)
from ..degiorgi import Kinematics, _chebyshev_from, _level_energy_from, build_ledger, pointwise_suite
from ..grid import Trajectory, curl, integrate, space_norm
from ..gronwall import GronwallProblem, comparison_check, integrate_majorant
from ..iteration import smallness_gate
from ..solver import SolverConfig, energy_inequality_residual, simulate, spectral_energy, spectral_enstrophy
from .checkpoint import write_trajectory
from .config import RunConfig
from .plots import render_report_plots

logger = logging.getLogger(__name__)

SERIES_COLUMNS = ("time", "kinetic_energy", "enstrophy", "linf", "G", "F")
POINTWISE_SAMPLES = 9
_TIME_TOL = 1e-9


def window_scale(window) -> float:
    t_a, t_b = window
    if not t_b > t_a:
        raise ValueError(f"window [{t_a}, {t_b}] has non-positive length")
    return math.sqrt((t_b - t_a) / 2.0)


def _require_sample_time(traj: Trajectory, t: float):
    span = max(1.0, traj.times[-1] - traj.times[0])
    if np.min(np.abs(traj.times - t)) > _TIME_TOL * span:
        raise ValueError(f"window endpoint {t} is not a snapshot time")


def diagnose_window(traj: Trajectory, window) -> Trajectory:
    """Rescale by eps = sqrt(tau/2) and translate so [t_a, t_b] lands on [-1, 1].

    Both endpoints must be snapshot times; snapshots outside the window are dropped.
    """
    t_a, t_b = float(window[0]), float(window[1])
    eps = window_scale((t_a, t_b))
    if not traj.covers(t_a, t_b):
        raise ValueError(f"window [{t_a}, {t_b}] is outside the trajectory [{traj.times[0]}, {traj.times[-1]}]")
    _require_sample_time(traj, t_a)
    _require_sample_time(traj, t_b)
    part = time_slice(traj, t_a, t_b)
    scaled = rescale(part, eps)
    return Trajectory(scaled.grid, (part.times - t_a) / eps**2 - 1.0, scaled.data)


def undiagnose_window(traj: Trajectory, window) -> Trajectory:
    """Inverse of :func:`diagnose_window` on the retained snapshots."""
    t_a = float(window[0])
    eps = window_scale(window)
    grid = traj.grid.with_box_length(traj.grid.box_length * eps)
    return Trajectory(grid, (traj.times + 1.0) * eps**2 + t_a, traj.data / eps)


def empty_report(config: dict | None) -> dict:
    return {
        "status": "ok",
        "errors": [],
        "skipped": [],
        "config": config,
        "solver": {"energy_inequality_residual": None, "n_snapshots": None},
        "window": {"t_a": None, "t_b": None, "eps": None},
        "ledger": {
            "U": None,
            "U_common": None,
            "measured_A": None,
            "measured_B": None,
            "slab_l6": None,
            "late_max_speed": None,
            "late_excess": None,
        },
        "pointwise_max_violations": [None] * 5,
        "chebyshev": [],
        "level_energy": [],
        "criteria": [],
        "affine": {"lambda": None, "A_lambda": None, "A_quarter": None, "monotone": None},
        "gronwall": {
            "A_measured": None,
            "tau1": None,
            "tau2": None,
            "H_final": None,
            "finite": None,
            "psi_check": None,
            "rk4_half_step_rel_diff": None,
            "comparison": None,
            "times": None,
            "F": None,
            "H": None,
        },
        "gate": {
            "C_star": None,
            "passed": None,
            "claim": None,
            "slab_l6": None,
            "A": None,
            "B": None,
            "hypothesis_met": None,
            "decayed": None,
            "bounded": None,
            "terminal_ok": None,
        },
        "densities": {"time": None, "log_ps": None, "l5": None, "vorticity_l1": None},
    }


class _Stages:
    """Runs named stages, recording the first failure and skipping dependants."""

    def __init__(self, report: dict):
        self.report = report
        self.failed: set[str] = set()

    def run(self, name: str, fn, needs=()):
        if any(n in self.failed for n in needs):
            self.failed.add(name)
            self.report["skipped"].append(name)
            return None
        try:
            return fn()
        except Exception as exc:  # recorded, not swallowed: the exit code reflects it
            logger.warning("stage %s failed: %s", name, exc)
            self.failed.add(name)
            self.report["errors"].append({"stage": name, "type": type(exc).__name__, "message": str(exc)})
            self.report["status"] = "failed"
            return None


def _pointwise(rescaled: Trajectory, levels: int) -> list[float]:
    idx = np.unique(np.linspace(0, len(rescaled) - 1, min(POINTWISE_SAMPLES, len(rescaled))).round().astype(int))
    worst = np.zeros(5)
    for i in idx:
        kin = Kinematics.of(rescaled.snapshot(int(i)))
        for k in range(1, levels + 1):
            rep = pointwise_suite(kin, k)
            worst = np.maximum(worst, np.array(rep.violations) / (1.0 + rep.max_d))
    return [float(x) for x in worst]


def _snapshot_rows(traj: Trajectory) -> dict:
    grid = traj.grid
    energy, enstrophy = [], []
    for u in traj.snapshots():
        energy.append(spectral_energy(u.spectral, grid))
        enstrophy.append(spectral_enstrophy(u.spectral, grid))
    linf = linf_series(traj)
    return {
        "time": traj.times,
        "kinetic_energy": np.array(energy),
        "enstrophy": np.array(enstrophy),
        "linf": linf,
        "G": density_series(traj, log_ps_density),
        "F": linf,
    }


def write_series_csv(rows: dict, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SERIES_COLUMNS)
        for i in range(len(rows["time"])):
            writer.writerow([repr(float(rows[c][i])) for c in SERIES_COLUMNS])
    return path


def read_series_csv(path) -> dict:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in ("time", "G", "F") if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        rows = list(reader)
    return {c: np.array([float(r[c]) for r in rows]) for c in reader.fieldnames}


def gronwall_stage(part: Trajectory, lam: float, eps: float) -> dict:
    """Majorant pipeline on the physical window [t_a, t_b].

    tau1 = t_a and tau2 is the snapshot closest to t_a + lam eps^2 (lam in
    window units). A is the affine constant measured from tau1 with the
    seed-window length tau2 - tau1.
    """
    times = part.times
    m = len(times)
    if m < 3:
        raise ValueError("the Gronwall stage needs at least three snapshots in the window")
    i2 = int(np.argmin(np.abs(times - (times[0] + lam * eps**2))))
    i2 = min(max(i2, 1), m - 2)
    tau1, tau2 = float(times[0]), float(times[i2])
    t_rel, _, _, ratios = affine_ratios(part)
    A = float(np.max(ratios[t_rel > tau2 - tau1 + _TIME_TOL]))
    if not A > 0:
        A = 1.0  # zero flow: any positive constant works
    F = linf_series(part)
    G = density_series(part, log_ps_density)
    prob = GronwallProblem(A, tau1, tau2, times, G, F)
    sol = integrate_majorant(prob)
    ref = integrate_majorant(prob, substeps=2)
    later = slice(i2, m)
    if sol.finite and ref.finite:
        rk_diff = float(np.max(np.abs(sol.H[later] - ref.H[later]) / np.abs(ref.H[later])))
    else:
        rk_diff = None
    return {
        "A_measured": A,
        "tau1": tau1,
        "tau2": tau2,
        "H_final": sol.H_final if sol.finite else None,
        "finite": sol.finite,
        "psi_check": {"max_gap": sol.max_psi_gap, "holds": bool(sol.max_psi_gap <= 1e-6)} if sol.finite else None,
        "rk4_half_step_rel_diff": rk_diff,
        "comparison": comparison_check(prob, sol),
        "times": [float(t) for t in times],
        "F": [float(x) for x in F],
        "H": [float(x) for x in sol.H],
    }


def analyze(traj: Trajectory, window, levels: int, lam: float, report: dict, stages: _Stages | None = None) -> dict:
    """Every diagnostic downstream of a physical trajectory, filled into ``report``."""
    stages = stages or _Stages(report)
    window = (float(window[0]), float(window[1]))
    report["window"] = {"t_a": window[0], "t_b": window[1], "eps": None}

    rescaled = stages.run("diagnose_window", lambda: diagnose_window(traj, window))
    if rescaled is not None:
        report["window"]["eps"] = window_scale(window)
    ledger = stages.run("build_ledger", lambda: build_ledger(rescaled, levels, with_pressure=True), ["diagnose_window"])
    if ledger is not None:
        report["ledger"] = {k: v for k, v in ledger.as_dict().items() if k in report["ledger"]}
        report["level_energy"] = []
        for k in range(1, levels + 1):
            le = _level_energy_from(ledger.series, k)
            report["level_energy"].append(
                {"k": k, "relative_residual": le.relative_residual, "relative_defect": le.relative_defect}
            )
        report["chebyshev"] = []
        for k in range(1, levels + 1):
            ch = _chebyshev_from(ledger.series, k, 3.0)
            report["chebyshev"].append({"k": k, "lhs": ch.lhs, "rhs": ch.rhs, "holds": ch.holds})

    viol = stages.run("pointwise", lambda: _pointwise(rescaled, levels), ["diagnose_window"])
    if viol is not None:
        report["pointwise_max_violations"] = viol

    gate = stages.run("smallness_gate", lambda: smallness_gate(ledger), ["build_ledger"])
    if gate is not None:
        report["gate"] = gate.as_dict()

    crit = stages.run("criteria", lambda: criteria_suite(traj, window=window))
    if crit is not None:
        report["criteria"] = [c.as_dict() for c in crit]

    aff = stages.run("affine", lambda: affine_linf_check(time_slice(rescaled, -1.0, 1.0), lam), ["diagnose_window"])
    if aff is not None:
        report["affine"] = aff.as_dict()

    part = stages.run("window_slice", lambda: time_slice(traj, *window))
    gron = stages.run("gronwall", lambda: gronwall_stage(part, lam, window_scale(window)), ["window_slice"])
    if gron is not None:
        report["gronwall"] = gron

    def densities():
        grid = part.grid
        return {
            "time": [float(t) for t in part.times],
            "log_ps": [float(x) for x in density_series(part, log_ps_density)],
            "l5": [integrate(u.speed**5, grid) for u in part.snapshots()],
            "vorticity_l1": [space_norm(curl(u), grid, 1.0) for u in part.snapshots()],
        }

    dens = stages.run("densities", densities, ["window_slice"])
    if dens is not None:
        report["densities"] = dens
    return report


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_report(report: dict, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "report.json"
    path.write_text(json.dumps(_json_safe(report), indent=2, sort_keys=True) + "\n")
    return path


@dataclass
class ExperimentResult:
    report: dict
    out_dir: Path
    trajectory: Trajectory | None

    @property
    def exit_code(self) -> int:
        return 0 if not self.report["errors"] else 1


def finish(report: dict, out_dir, rows: dict | None, stages: _Stages) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if rows is not None:
        stages.run("series_csv", lambda: write_series_csv(rows, out / "series.csv"))
    stages.run("plots", lambda: render_report_plots(_json_safe(report), out))
    write_report(report, out)


def run_experiment(cfg: RunConfig, out_dir=None, write_checkpoints: bool = True) -> ExperimentResult:
    """simulate, checkpoint, diagnose the window, ledger, gate, criteria, Gronwall; then write outputs."""
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    report = empty_report(cfg.as_dict())
    stages = _Stages(report)

    def sim():
        u0 = cfg.initial_condition.build(cfg.grid)
        solver = SolverConfig(cfg.dt, cfg.t_end, cfg.viscosity, cfg.snapshot_stride)
        return simulate(u0, solver)

    traj = stages.run("simulate", sim)
    rows = None
    if traj is not None:
        report["solver"] = {"energy_inequality_residual": energy_inequality_residual(traj), "n_snapshots": len(traj)}
        if write_checkpoints:
            stages.run("checkpoint", lambda: write_trajectory(traj, out / "checkpoints"))
        analyze(traj, cfg.diagnostic_window, cfg.levels, cfg.lam, report, stages)
        rows = stages.run("series", lambda: _snapshot_rows(traj))
    else:
        report["skipped"].append("analysis")
    finish(report, out, rows, stages)
    return ExperimentResult(report, out, traj)


def diagnose_checkpoints(traj: Trajectory, window, levels: int, lam: float, out_dir, config: dict | None = None):
    report = empty_report(config)
    stages = _Stages(report)
    report["solver"] = {"energy_inequality_residual": None, "n_snapshots": len(traj)}
    analyze(traj, window, levels, lam, report, stages)
    rows = stages.run("series", lambda: _snapshot_rows(traj))
    finish(report, out_dir, rows, stages)
    return ExperimentResult(report, Path(out_dir), traj)
