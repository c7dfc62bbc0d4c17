"""Level-set truncation machinery on slabs Q_k = [T_k, 1] x box.

For a level k the threshold is ``c_k = 1 - 2^-k``; the truncation is
``v_k = (|u| - c_k)_+`` and the dissipation density is

    d_k^2 = (c_k/|u|) chi{|u| >= c_k} |grad |u||^2 + (v_k/|u|) |grad u|^2.

``d_k`` is the non-negative square root. Ratios with ``|u|`` in the
denominator vanish where ``|u| <= DELTA_FLOOR``. Gradients of ``|u|`` and of
everything built from it are formed algebraically from ``grad u``.

Trajectories handed to the slab functions live in rescaled time on [-1, 1]
(see :func:`dgns.harness.experiment.diagnose_window`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import (
    DELTA_FLOOR,
    Trajectory,
    VelocityField,
    cumulative_trapezoid,
    gradient,
    speed_gradient,
    window_integral,
)
from .pressure import solve_pressure

EPS_FLOOR = 1e-14
BETA = 19.0 / 18.0
_TOL = 1e-9


def threshold(k: int) -> float:
    return 1.0 - 2.0**-k


@dataclass(frozen=True)
class SlabSpec:
    level: int

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("slab level must be >= 0")

    @property
    def t_start(self) -> float:
        return -0.5 * (1.0 + 2.0**-self.level)

    @property
    def t_end(self) -> float:
        return 1.0


def truncate(u: VelocityField | np.ndarray, k: int) -> np.ndarray:
    """v_k = (|u| - (1 - 2^-k))_+ at every node. Accepts a field or a speed array."""
    if k < 0:
        raise ValueError("truncation level must be >= 0")
    speed = u.speed if isinstance(u, VelocityField) else np.asarray(u, dtype=float)
    return np.maximum(speed - threshold(k), 0.0)


@dataclass(frozen=True, eq=False)
class Kinematics:
    """Pointwise speed and velocity gradients of one snapshot."""

    u: VelocityField
    grad_u: np.ndarray
    grad_speed: np.ndarray

    @classmethod
    def of(cls, u: VelocityField) -> "Kinematics":
        grad_u = gradient(u)
        return cls(u, grad_u, speed_gradient(u, grad_u))

    @property
    def speed(self) -> np.ndarray:
        return self.u.speed

    @property
    def inv_speed(self) -> np.ndarray:
        s = self.speed
        ok = s > DELTA_FLOOR
        return np.where(ok, 1.0 / np.where(ok, s, 1.0), 0.0)

    @property
    def grad_u_sq(self) -> np.ndarray:
        return np.sum(self.grad_u**2, axis=(0, 1))

    @property
    def grad_speed_sq(self) -> np.ndarray:
        return np.sum(self.grad_speed**2, axis=0)


def _level_fields(kin: Kinematics, k: int):
    c = threshold(k)
    inv = kin.inv_speed
    v = truncate(kin.speed, k)
    w = v * inv
    chi_ge = kin.speed >= c
    d2 = c * inv * chi_ge * kin.grad_speed_sq + w * kin.grad_u_sq
    return v, w, d2


def dissipation_squared(u: VelocityField | Kinematics, k: int) -> np.ndarray:
    if k < 0:
        raise ValueError("level must be >= 0")
    kin = u if isinstance(u, Kinematics) else Kinematics.of(u)
    return _level_fields(kin, k)[2]


def dissipation(u: VelocityField | Kinematics, k: int) -> np.ndarray:
    return np.sqrt(dissipation_squared(u, k))


@dataclass(frozen=True, eq=False)
class LevelSet:
    level: int
    v: np.ndarray
    d: np.ndarray
    indicator: np.ndarray


def level_set(u: VelocityField, k: int) -> LevelSet:
    v, _, d2 = _level_fields(Kinematics.of(u), k)
    return LevelSet(k, v, np.sqrt(d2), (v > 0).astype(float))


@dataclass(frozen=True)
class PointwiseReport:
    """Largest violation (lhs - rhs, floored at 0) of each pointwise inequality."""

    level: int
    amplitude_bound: float  # |(1 - v/|u|) u| <= 1 - 2^-k
    weighted_gradient: float  # (v/|u|) |grad u| <= d
    speed_gradient: float  # chi{v>0} |grad |u|| <= d
    truncation_gradient: float  # |grad v| <= d
    product_gradient: float  # |grad((v/|u|) u)| <= 3 d
    max_d: float

    @property
    def violations(self) -> tuple[float, float, float, float, float]:
        return (
            self.amplitude_bound,
            self.weighted_gradient,
            self.speed_gradient,
            self.truncation_gradient,
            self.product_gradient,
        )

    def holds(self, rel_tol: float = 1e-10) -> bool:
        return max(self.violations) <= rel_tol * (1.0 + self.max_d)


def pointwise_suite(u: VelocityField | Kinematics, k: int) -> PointwiseReport:
    if k < 0:
        raise ValueError("level must be >= 0")
    kin = u if isinstance(u, Kinematics) else Kinematics.of(u)
    speed, inv = kin.speed, kin.inv_speed
    v, w, d2 = _level_fields(kin, k)
    d = np.sqrt(d2)
    chi = v > 0
    grad_v = chi * kin.grad_speed
    grad_speed_norm = np.sqrt(kin.grad_speed_sq)

    # product rule: grad(w u)_ij = (u_i/|u|) d_j v + w d_j u_i - (v/|u|^2) u_i d_j|u|
    unit = kin.u.data * inv
    grad_wu = (
        np.einsum("i...,j...->ij...", unit, grad_v)
        + w * kin.grad_u
        - np.einsum("i...,j...->ij...", v * inv * unit, kin.grad_speed)
    )

    def worst(excess):
        return float(max(0.0, np.max(excess)))

    return PointwiseReport(
        level=k,
        amplitude_bound=worst((1 - w) * speed - threshold(k)),
        weighted_gradient=worst(w * np.sqrt(kin.grad_u_sq) - d),
        speed_gradient=worst(chi * grad_speed_norm - d),
        truncation_gradient=worst(np.sqrt(np.sum(grad_v**2, axis=0)) - d),
        product_gradient=worst(np.sqrt(np.sum(grad_wu**2, axis=(0, 1))) - 3 * d),
        max_d=float(np.max(d)),
    )


@dataclass(frozen=True, eq=False)
class LevelSeries:
    """Per-snapshot spatial integrals for a set of levels; level arrays are (m, len(levels))."""

    times: np.ndarray
    levels: tuple[int, ...]
    half_v2: np.ndarray  # 0.5 * int v_k^2
    d2: np.ndarray  # int d_k^2
    support: np.ndarray  # |{v_k > 0}|
    v_pow: np.ndarray  # int v_k^(10/3)
    chebyshev: np.ndarray  # int (2^k v_{k-1})^(10/3), nan for k = 0
    pressure_work: np.ndarray | None  # int (v_k/|u|) u . grad P
    l6: np.ndarray  # int |u|^6
    max_speed: np.ndarray
    excess: np.ndarray  # 0.5 * int (|u| - 1)_+^2

    def column(self, k: int) -> int:
        return self.levels.index(k)


def level_series(traj: Trajectory, levels, with_pressure: bool = False) -> LevelSeries:
    levels = tuple(int(k) for k in levels)
    if any(k < 0 for k in levels):
        raise ValueError("levels must be >= 0")
    m, nk = len(traj), len(levels)
    dv = traj.grid.cell_volume
    arrays = {name: np.zeros((m, nk)) for name in ("half_v2", "d2", "support", "v_pow", "chebyshev", "pressure_work")}
    l6, max_speed, excess = np.zeros(m), np.zeros(m), np.zeros(m)
    for i in range(m):
        kin = Kinematics.of(traj.snapshot(i))
        speed = kin.speed
        l6[i] = np.sum(speed**6) * dv
        max_speed[i] = np.max(speed)
        excess[i] = 0.5 * np.sum(np.maximum(speed - 1.0, 0.0) ** 2) * dv
        if with_pressure:
            grad_p = gradient(solve_pressure(kin.u), traj.grid)
            u_dot_gp = np.sum(kin.u.data * grad_p, axis=0)
        for j, k in enumerate(levels):
            v, w, d2 = _level_fields(kin, k)
            arrays["half_v2"][i, j] = 0.5 * np.sum(v**2) * dv
            arrays["d2"][i, j] = np.sum(d2) * dv
            arrays["support"][i, j] = np.count_nonzero(v > 0) * dv
            arrays["v_pow"][i, j] = np.sum(v ** (10.0 / 3.0)) * dv
            if k >= 1:
                prev = truncate(speed, k - 1)
                arrays["chebyshev"][i, j] = np.sum((2.0**k * prev) ** (10.0 / 3.0)) * dv
            else:
                arrays["chebyshev"][i, j] = np.nan
            if with_pressure:
                arrays["pressure_work"][i, j] = np.sum(w * u_dot_gp) * dv
    if not with_pressure:
        arrays["pressure_work"] = None
    return LevelSeries(traj.times, levels, l6=l6, max_speed=max_speed, excess=excess, **arrays)


def _require_cover(traj_or_times, t_a: float, t_b: float = 1.0):
    times = traj_or_times.times if hasattr(traj_or_times, "times") else traj_or_times
    if times[0] > t_a + _TOL or times[-1] < t_b - _TOL:
        raise ValueError(f"trajectory [{times[0]}, {times[-1]}] does not cover the slab [{t_a}, {t_b}]")


def _in_window(times, t_a, t_b=1.0):
    return (times >= t_a - _TOL) & (times <= t_b + _TOL)


def _slab_energy_from(series: LevelSeries, col: int, t_start: float) -> float:
    times = series.times
    inside = _in_window(times, t_start)
    sup = float(np.max(series.half_v2[inside, col])) if inside.any() else 0.0
    return sup + float(window_integral(times, series.d2[:, col], t_start, 1.0))


def slab_energy(traj: Trajectory, window_map: SlabSpec, k: int) -> float:
    """U_k evaluated on the time window of ``window_map``.

    With ``window_map = SlabSpec(k)`` this is the usual U_k on Q_k; a larger
    window (e.g. ``SlabSpec(k - 1)``) gives the common-window variant.
    """
    if k < 0:
        raise ValueError("level must be >= 0")
    _require_cover(traj, window_map.t_start)
    series = level_series(traj, [k])
    return _slab_energy_from(series, 0, window_map.t_start)


def interpolation_check(f: Trajectory, k: int) -> float | None:
    """Ratio ||F||_{L^{10/3}(Q_k)} / (||F||_{L^inf L^2}^{2/5} (||grad F||_{L^2} + ||F||_{L^2}/L)^{3/5}).

    The zeroth-order term makes the bound meaningful on the torus, where
    constants have zero gradient. Returns ``None`` if the denominator is zero.
    """
    slab = SlabSpec(k)
    _require_cover(f, slab.t_start)
    grid = f.grid
    dv = grid.cell_volume
    m = len(f)
    pow_int, l2, g2 = np.zeros(m), np.zeros(m), np.zeros(m)
    for i in range(m):
        a = f.data[i]
        pow_int[i] = np.sum(np.abs(a) ** (10.0 / 3.0)) * dv
        l2[i] = np.sum(a**2) * dv
        g2[i] = np.sum(gradient(a, grid) ** 2) * dv
    inside = _in_window(f.times, slab.t_start)
    sup_l2 = np.sqrt(np.max(l2[inside]))
    lhs = window_integral(f.times, pow_int, slab.t_start, 1.0) ** 0.3
    grad_term = np.sqrt(window_integral(f.times, g2, slab.t_start, 1.0))
    grad_term += np.sqrt(window_integral(f.times, l2, slab.t_start, 1.0)) / grid.box_length
    denom = sup_l2**0.4 * grad_term**0.6
    if denom == 0:
        return None
    return float(lhs / denom)


@dataclass(frozen=True)
class ChebyshevCheck:
    level: int
    q: float
    lhs: float  # space-time measure of {v_k > 0} on Q_{k-1}
    rhs: float  # 2^(10k/3) int int v_{k-1}^(10/3) on Q_{k-1}

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs

    @property
    def norm_lhs(self) -> float:
        return self.lhs ** (1.0 / self.q)

    @property
    def norm_rhs(self) -> float:
        return self.rhs ** (1.0 / self.q)


def _chebyshev_from(series: LevelSeries, k: int, q: float) -> ChebyshevCheck:
    col = series.column(k)
    t_a = SlabSpec(k - 1).t_start
    lhs = float(window_integral(series.times, series.support[:, col], t_a, 1.0))
    rhs = float(window_integral(series.times, series.chebyshev[:, col], t_a, 1.0))
    return ChebyshevCheck(k, q, lhs, rhs)


def chebyshev_check(traj: Trajectory, k: int, q: float = 3.0) -> ChebyshevCheck:
    if k < 1:
        raise ValueError("chebyshev_check needs k >= 1")
    if not q > 1:
        raise ValueError("q must exceed 1")
    _require_cover(traj, SlabSpec(k - 1).t_start)
    return _chebyshev_from(level_series(traj, [k]), k, q)


@dataclass(frozen=True)
class LevelEnergyReport:
    """Integrated level-energy inequality over snapshot pairs sigma <= T_k <= t.

    ``max_residual`` is the largest positive LHS - RHS of the inequality.
    ``max_defect`` is the largest |defect| of the underlying identity, in which
    the absolute value around the pressure term is dropped; it measures the
    discretisation error. ``scale`` is int int d_k^2 + sup_t int v_k^2 + EPS_FLOOR
    over [T_{k-1}, 1].
    """

    level: int
    max_residual: float
    max_defect: float
    scale: float
    n_pairs: int

    @property
    def relative_residual(self) -> float:
        return self.max_residual / self.scale

    @property
    def relative_defect(self) -> float:
        return self.max_defect / self.scale


def _level_energy_from(series: LevelSeries, k: int) -> LevelEnergyReport:
    col = series.column(k)
    times = series.times
    t_prev, t_k = SlabSpec(k - 1).t_start, SlabSpec(k).t_start
    sig = np.flatnonzero((times >= t_prev - _TOL) & (times <= t_k + _TOL))
    tt = np.flatnonzero((times >= t_k - _TOL) & (times <= 1.0 + _TOL))
    energy = series.half_v2[:, col]
    cum_d = cumulative_trapezoid(times, series.d2[:, col])
    work = series.pressure_work[:, col]
    cum_abs = cumulative_trapezoid(times, np.abs(work))
    cum_work = cumulative_trapezoid(times, work)

    lhs = energy[tt][None, :] + cum_d[tt][None, :] - cum_d[sig][:, None]
    rhs = energy[sig][:, None] + cum_abs[tt][None, :] - cum_abs[sig][:, None]
    identity = energy[sig][:, None] - (cum_work[tt][None, :] - cum_work[sig][:, None])
    valid = times[tt][None, :] >= times[sig][:, None]
    residual = np.where(valid, lhs - rhs, -np.inf)
    defect = np.where(valid, np.abs(lhs - identity), 0.0)

    window = _in_window(times, t_prev)
    scale = float(window_integral(times, series.d2[:, col], t_prev, 1.0))
    scale += 2.0 * float(np.max(energy[window])) + EPS_FLOOR
    n_pairs = int(np.count_nonzero(valid))
    max_res = float(max(0.0, np.max(residual))) if n_pairs else 0.0
    return LevelEnergyReport(k, max_res, float(np.max(defect)) if n_pairs else 0.0, scale, n_pairs)


def level_energy_inequality(traj: Trajectory, k: int) -> LevelEnergyReport:
    if k < 1:
        raise ValueError("level_energy_inequality needs k >= 1")
    _require_cover(traj, SlabSpec(k - 1).t_start)
    return _level_energy_from(level_series(traj, [k], with_pressure=True), k)


@dataclass(frozen=True, eq=False)
class EnergyLedger:
    levels: int
    u_seq: np.ndarray  # U_1 .. U_K on their own slabs
    u_common: np.ndarray  # U_k on [T_{k-1}, 1], k = 1 .. K
    slab_l6: float  # ||u||_{L^6(Q_0)}
    measured_A: float | None
    measured_B: float | None
    beta: float = BETA
    snapshot_dt: float = 0.0
    late_max_speed: float = 0.0  # max |u| over snapshots in [-1/2, 1]
    late_excess: float = 0.0  # max over [-1/2, 1] of 0.5 int (|u| - 1)_+^2
    series: LevelSeries | None = field(default=None, repr=False)

    def as_dict(self) -> dict:
        return {
            "U": [float(x) for x in self.u_seq],
            "U_common": [float(x) for x in self.u_common],
            "measured_A": self.measured_A,
            "measured_B": self.measured_B,
            "slab_l6": self.slab_l6,
            "beta": self.beta,
            "snapshot_dt": self.snapshot_dt,
            "late_max_speed": self.late_max_speed,
            "late_excess": self.late_excess,
        }


def ledger_from_series(series: LevelSeries, K: int, snapshot_dt: float = 0.0) -> EnergyLedger:
    u_seq = np.array([_slab_energy_from(series, series.column(k), SlabSpec(k).t_start) for k in range(1, K + 1)])
    u_common = np.array(
        [_slab_energy_from(series, series.column(k), SlabSpec(k - 1).t_start) for k in range(1, K + 1)]
    )
    times = series.times
    l6_int = float(window_integral(times, series.l6, -1.0, 1.0))
    slab_l6 = l6_int ** (1.0 / 6.0)
    measured_A = float(u_seq[0] / l6_int) if l6_int > 0 else None
    ratios = [
        u_seq[k - 1] / (2.0 ** (7.0 * k / 3.0) * u_seq[k - 2] ** BETA)
        for k in range(2, K + 1)
        if u_seq[k - 2] > EPS_FLOOR
    ]
    measured_B = float(max(ratios)) if ratios else None
    late = _in_window(times, -0.5)
    return EnergyLedger(
        levels=K,
        u_seq=u_seq,
        u_common=u_common,
        slab_l6=slab_l6,
        measured_A=measured_A,
        measured_B=measured_B,
        snapshot_dt=snapshot_dt,
        late_max_speed=float(np.max(series.max_speed[late])),
        late_excess=float(np.max(series.excess[late])),
        series=series,
    )


def build_ledger(traj: Trajectory, K: int, with_pressure: bool = False) -> EnergyLedger:
    """U_1..U_K with the fitted constants A = U_1/||u||_{L^6(Q_0)}^6 and
    B = max_k U_k / (2^(7k/3) U_{k-1}^(19/18)) over levels with U_{k-1} > EPS_FLOOR."""
    if K < 2:
        raise ValueError("build_ledger needs K >= 2")
    _require_cover(traj, -1.0)
    series = level_series(traj, range(0, K + 1), with_pressure=with_pressure)
    return ledger_from_series(series, K, traj.dt)
