"""Log-Gronwall majorant: psi(t) = t log(1+t), its Osgood integral, and dH/dt = A psi(H) G."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .grid import cumulative_trapezoid

_NODE_TOL = 1e-9


def psi(t):
    """t * log(1 + t) for t >= 0; arrays are handled elementwise."""
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("psi is defined for t >= 0 only")
    out = arr * np.log1p(arr)
    return float(out) if out.ndim == 0 else out


def _inv_log1p_exp(s: float) -> float:
    # 1/psi(t) dt with t = e^s
    return 1.0 / math.log1p(math.exp(s)) if s < 700 else 1.0 / s


def capital_psi(y: float, A: float) -> float:
    """int_A^y dt / psi(t), by adaptive quadrature in the variable s = ln t."""
    if not y > 0 or not A > 0:
        raise ValueError("capital_psi needs y > 0 and A > 0")
    if y == A:
        return 0.0
    a, b = math.log(A), math.log(y)
    val, _ = quad(_inv_log1p_exp, a, b, epsabs=0.0, epsrel=1e-13, limit=200)
    return float(val)


@dataclass(frozen=True, eq=False)
class GronwallProblem:
    """Inputs of the majorant argument on a common uniform time grid.

    ``f_series`` only needs to be finite on [tau1, tau2]; beyond tau2 it is
    used solely by :func:`comparison_check`.
    """

    A: float
    tau1: float
    tau2: float
    times: np.ndarray
    g_series: np.ndarray
    f_series: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        g = np.asarray(self.g_series, dtype=float)
        f = np.asarray(self.f_series, dtype=float)
        if not self.A > 0:
            raise ValueError("A must be positive")
        if not self.tau2 > self.tau1:
            raise ValueError("need tau2 > tau1")
        if t.ndim != 1 or g.shape != t.shape or f.shape != t.shape:
            raise ValueError("times, g_series and f_series must be 1-d and aligned")
        if len(t) < 2 or np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        if np.any(g < 0) or not np.all(np.isfinite(g)):
            raise ValueError("g_series must be finite and nonnegative")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "g_series", g)
        object.__setattr__(self, "f_series", f)

    def node(self, t: float) -> int:
        span = self.times[-1] - self.times[0]
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > _NODE_TOL * max(1.0, span):
            raise ValueError(f"time {t} is not a sample time")
        return i


@dataclass(frozen=True, eq=False)
class MajorantSolution:
    times: np.ndarray
    H: np.ndarray
    i_tau1: int
    i_tau2: int
    g_integral: np.ndarray  # int_{tau2}^t G at each output time (0 before tau2)
    psi_gap: np.ndarray  # Psi(H(t)) - Psi(H(tau2)) - A int G, for t >= tau2; nan before
    finite: bool

    @property
    def H_final(self) -> float:
        return float(self.H[-1])

    @property
    def max_psi_gap(self) -> float:
        gaps = self.psi_gap[self.i_tau2 :]
        gaps = gaps[np.isfinite(gaps)]
        return float(np.max(gaps)) if len(gaps) else 0.0


def _rhs(A: float, w: float, g: float) -> float:
    # dH/dt = A psi(H) G in the variable w = ln ln(1 + H): dw/dt = A G H/(1 + H)
    return -A * g * math.expm1(-math.exp(min(w, 700.0)))


def _to_w(h: float) -> float:
    return math.log(math.log1p(h))


def _from_w(w: float) -> float:
    try:
        return math.expm1(math.exp(w))
    except OverflowError:
        return math.inf


def integrate_majorant(prob: GronwallProblem, substeps: int = 1) -> MajorantSolution:
    """H on [tau1, end]: trapezoid seed up to tau2, then RK4 on dH/dt = A psi(H) G.

    G is linearly interpolated between samples; each sample interval is split
    into ``substeps`` RK4 steps. The steps act on w = ln ln(1 + H), whose
    right-hand side is bounded by A G, so the doubly exponential growth of H
    cannot outrun the step size; H is non-finite only once it leaves the
    float range. Output is at the sample times.
    """
    if substeps < 1:
        raise ValueError("substeps must be positive")
    t, g, f = prob.times, prob.g_series, prob.f_series
    i1, i2 = prob.node(prob.tau1), prob.node(prob.tau2)
    seed_f = f[i1 : i2 + 1]
    if not np.all(np.isfinite(seed_f)) or np.any(seed_f < 0):
        raise ValueError("Kato window violated: F is not finite on [tau1, tau2]")
    A = prob.A
    H = np.full(t.shape, np.nan)
    H[i1 : i2 + 1] = A * (1.0 + cumulative_trapezoid(t[i1 : i2 + 1], psi(seed_f) * g[i1 : i2 + 1]))
    finite = bool(np.isfinite(H[i2]))
    w_cur = _to_w(float(H[i2])) if finite else math.nan
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(i2, len(t) - 1):
            if not finite:
                break
            dt = (t[i + 1] - t[i]) / substeps
            g0, g1 = g[i], g[i + 1]
            for s in range(substeps):
                a = s / substeps
                ga = g0 + (g1 - g0) * a
                gm = g0 + (g1 - g0) * (a + 0.5 / substeps)
                gb = g0 + (g1 - g0) * (a + 1.0 / substeps)
                k1 = _rhs(A, w_cur, ga)
                k2 = _rhs(A, w_cur + 0.5 * dt * k1, gm)
                k3 = _rhs(A, w_cur + 0.5 * dt * k2, gm)
                k4 = _rhs(A, w_cur + dt * k3, gb)
                w_cur = w_cur + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            h_cur = _from_w(w_cur)
            if not math.isfinite(h_cur):
                finite = False
                break
            H[i + 1] = h_cur
    g_int = np.zeros(t.shape)
    g_int[i2:] = cumulative_trapezoid(t[i2:], g[i2:])
    gap = np.full(t.shape, np.nan)
    if finite:
        h2 = float(H[i2])
        for i in range(i2, len(t)):
            gap[i] = capital_psi(float(H[i]), h2) - A * g_int[i]
    return MajorantSolution(t, H, i1, i2, g_int, gap, finite)


def comparison_check(prob: GronwallProblem, H) -> float:
    """max over sample times t > tau2 of F(t) - H(t); 0.0 when no such time exists."""
    h = H.H if isinstance(H, MajorantSolution) else np.asarray(H, dtype=float)
    if h.shape != prob.times.shape:
        raise ValueError("H must be sampled on the problem's time grid")
    later = prob.times > prob.tau2 + _NODE_TOL * max(1.0, prob.times[-1] - prob.times[0])
    if not later.any():
        return 0.0
    return float(np.max(prob.f_series[later] - h[later]))
