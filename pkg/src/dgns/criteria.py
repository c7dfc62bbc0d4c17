"""Regularity-criterion integrals, parabolic rescaling and the affine L^inf bound."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import (
    Trajectory,
    VelocityField,
    cumulative_trapezoid,
    curl,
    gradient,
    integrate,
    slab_norm,
    space_norm,
    window_integral,
)

_RELATION_TOL = 1e-12
_TIME_TOL = 1e-9

VORTICITY_NOTE = (
    "evaluated as sup_t ||curl u||_{L^1}; the classical Beale-Kato-Majda condition "
    "is int ||curl u||_{L^inf} dt instead"
)


def log_ps_integrand(speed: np.ndarray) -> np.ndarray:
    """|u|^5 / log(1 + |u|), continued by 0 at |u| = 0."""
    s = np.asarray(speed, dtype=float)
    pos = s > 0
    safe = np.where(pos, s, 1.0)
    return np.where(pos, s**5 / np.log1p(safe), 0.0)


def log_ps_density(u: VelocityField) -> float:
    """G = int |u|^5 / log(1 + |u|) dx."""
    return integrate(log_ps_integrand(u.speed), u.grid)


def sixth_power_density(u: VelocityField) -> float:
    return integrate(u.speed**6, u.grid)


def density_series(traj: Trajectory, density) -> np.ndarray:
    return np.array([density(u) for u in traj.snapshots()])


def linf_series(traj: Trajectory) -> np.ndarray:
    return np.array([float(np.max(u.speed)) for u in traj.snapshots()])


@dataclass(frozen=True)
class CriterionReport:
    name: str
    value: float
    window: tuple[float, float]
    dt: float
    n: int
    box_length: float
    params: dict = field(default_factory=dict)
    note: str | None = None

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "window": list(self.window),
            "quadrature": {"dt": self.dt, "N": self.n, "L": self.box_length},
            "params": dict(self.params),
            "note": self.note,
        }


def _window(traj: Trajectory, window):
    if window is None:
        return float(traj.times[0]), float(traj.times[-1])
    t_a, t_b = float(window[0]), float(window[1])
    if not t_b > t_a:
        raise ValueError(f"empty window [{t_a}, {t_b}]")
    if not traj.covers(t_a, t_b):
        raise ValueError(f"window [{t_a}, {t_b}] is outside the trajectory")
    return t_a, t_b


def _report(name, value, traj, window, params=None, note=None) -> CriterionReport:
    return CriterionReport(name, float(value), window, traj.dt, traj.grid.n, traj.grid.box_length, params or {}, note)


def _check_relation(p: float, q: float, target: float, label: str):
    residual = 2.0 / p + 3.0 / q - target
    if abs(residual) > _RELATION_TOL:
        raise ValueError(f"{label} needs 2/p + 3/q = {target:g}; residual {residual:.3g}")


def _in_window(times, t_a, t_b):
    return (times >= t_a - _TIME_TOL) & (times <= t_b + _TIME_TOL)


def log_prodi_serrin(traj: Trajectory, window=None) -> CriterionReport:
    """int int |u|^5 / log(1 + |u|) dx dt over the window."""
    t_a, t_b = _window(traj, window)
    value = window_integral(traj.times, density_series(traj, log_ps_density), t_a, t_b)
    return _report("log_prodi_serrin", value, traj, (t_a, t_b))


def prodi_serrin(traj: Trajectory, p: float, q: float, window=None) -> CriterionReport:
    if not (2 <= p < np.inf):
        raise ValueError("prodi_serrin needs 2 <= p < inf")
    _check_relation(p, q, 1.0, "prodi_serrin")
    t_a, t_b = _window(traj, window)
    if len(traj) < 2:
        raise ValueError("prodi_serrin needs at least two snapshots")
    value = slab_norm(traj, (t_a, t_b), p, q)
    return _report("prodi_serrin", value, traj, (t_a, t_b), {"p": p, "q": q})


def montgomery_smith(traj: Trajectory, p: float, q: float, window=None) -> CriterionReport:
    """int ||u||_q^p / (1 + log+ ||u||_q) dt."""
    if not (p >= 1 and q >= 1):
        raise ValueError("montgomery_smith needs p, q >= 1")
    t_a, t_b = _window(traj, window)
    norms = np.array([space_norm(u.data, traj.grid, q) for u in traj.snapshots()])
    with np.errstate(divide="ignore"):
        log_plus = np.maximum(0.0, np.log(np.where(norms > 0, norms, 1.0)))
    value = window_integral(traj.times, norms**p / (1.0 + log_plus), t_a, t_b)
    return _report("montgomery_smith", value, traj, (t_a, t_b), {"p": p, "q": q})


def vorticity_criterion(traj: Trajectory, window=None) -> CriterionReport:
    t_a, t_b = _window(traj, window)
    inside = np.flatnonzero(_in_window(traj.times, t_a, t_b))
    value = max(space_norm(curl(traj.snapshot(i)), traj.grid, 1.0) for i in inside)
    return _report("vorticity_l1", value, traj, (t_a, t_b), note=VORTICITY_NOTE)


def gradient_criterion(traj: Trajectory, p: float, q: float, window=None) -> CriterionReport:
    if not (1 < p < np.inf):
        raise ValueError("gradient_criterion needs 1 < p < inf")
    _check_relation(p, q, 2.0, "gradient_criterion")
    t_a, t_b = _window(traj, window)
    value = slab_norm(traj, (t_a, t_b), p, q, reduce=lambda tr, i: gradient(tr.snapshot(i)))
    return _report("gradient_lpq", value, traj, (t_a, t_b), {"p": p, "q": q})


CRITERIA = ("log_prodi_serrin", "prodi_serrin", "montgomery_smith", "vorticity_l1", "gradient_lpq")


def criteria_suite(traj: Trajectory, which=CRITERIA, window=None) -> list[CriterionReport]:
    """Default exponents: Prodi-Serrin (5,5), Montgomery-Smith (5,5), gradient (2,3)."""
    table = {
        "log_prodi_serrin": lambda: log_prodi_serrin(traj, window),
        "prodi_serrin": lambda: prodi_serrin(traj, 5.0, 5.0, window),
        "montgomery_smith": lambda: montgomery_smith(traj, 5.0, 5.0, window),
        "vorticity_l1": lambda: vorticity_criterion(traj, window),
        "gradient_lpq": lambda: gradient_criterion(traj, 2.0, 3.0, window),
    }
    unknown = [w for w in which if w not in table]
    if unknown:
        raise ValueError(f"unknown criteria {unknown}; choose from {list(table)}")
    return [table[w]() for w in which]


def rescale(traj: Trajectory, eps: float) -> Trajectory:
    """u_eps(t, x) = eps u(eps^2 t, eps x) as a relabelling of the same samples.

    Values are multiplied by eps, times divided by eps^2 and the box length
    divided by eps; the per-step series are dropped.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    grid = traj.grid.with_box_length(traj.grid.box_length / eps)
    return Trajectory(grid, traj.times / eps**2, traj.data * eps)


def time_slice(traj: Trajectory, t_a: float, t_b: float | None = None, origin: float = 0.0) -> Trajectory:
    """Snapshots with t_a <= t <= t_b, with ``origin`` subtracted from the times."""
    t_b = traj.times[-1] if t_b is None else t_b
    keep = _in_window(traj.times, t_a, t_b)
    if not keep.any():
        raise ValueError(f"no snapshots in [{t_a}, {t_b}]")
    return Trajectory(traj.grid, traj.times[keep] - origin, traj.data[keep])


@dataclass(frozen=True, eq=False)
class AffineReport:
    lam: float
    a_lambda: float  # max ratio over T > lam
    a_quarter: float  # max ratio over T > lam / 4
    times: np.ndarray  # T measured from the first snapshot
    linf: np.ndarray  # F(T) = ||u(T)||_inf
    l6_integral: np.ndarray  # I(T) = int_0^T int |u|^6
    ratios: np.ndarray

    @property
    def monotone(self) -> bool:
        return self.a_quarter >= self.a_lambda

    def as_dict(self) -> dict:
        return {"lambda": self.lam, "A_lambda": self.a_lambda, "A_quarter": self.a_quarter, "monotone": self.monotone}


def affine_ratios(traj: Trajectory):
    """(T, F(T), I(T), F/(1 + I)) with T measured from the first snapshot."""
    t = traj.times - traj.times[0]
    F = linf_series(traj)
    I = cumulative_trapezoid(t, density_series(traj, sixth_power_density))
    return t, F, I, F / (1.0 + I)


def affine_linf_check(traj: Trajectory, lam: float) -> AffineReport:
    """Measure A_lam = max_{T > lam} ||u(T)||_inf / (1 + int_0^T int |u|^6).

    Time is measured from the first snapshot. Also records the same maximum
    over T > lam/4, which can only be larger.
    """
    if not 0 < lam < 2:
        raise ValueError("lambda must lie in (0, 2)")
    t, F, I, ratios = affine_ratios(traj)
    later = t > lam + _TIME_TOL
    if not later.any():
        raise ValueError(f"trajectory ends at T = {t[-1]:.6g} <= lambda = {lam}")
    quarter = t > lam / 4 + _TIME_TOL
    return AffineReport(lam, float(np.max(ratios[later])), float(np.max(ratios[quarter])), t, F, I, ratios)
