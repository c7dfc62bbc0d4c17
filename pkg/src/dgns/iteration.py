"""The nonlinear recurrence a_k <= B^k a_{k-1}^beta and its smallness threshold.

Orbits are iterated in log space, l_k = k ln B + beta l_{k-1}, since the
thresholds of interest underflow double precision (B = 16, beta = 1.01 gives
a threshold near 10^-12000).

Closed-form threshold: with r = B^(-1/(beta-1)), the ansatz a_k <= a_1 r^(k-1)
survives one induction step exactly when a_1^(beta-1) B^((2beta-1)/(beta-1)) <= 1,
i.e. a_1 <= B^(-(2beta-1)/(beta-1)^2). Writing
D_k = (beta-1)(-l_k) - (k+1) ln B, the equality orbit obeys
D_{k+1} = beta D_k - ln B, whose fixed point ln B/(beta-1) is reached at
exactly that a_1, so the bound is sharp for the equality orbit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .degiorgi import BETA, EnergyLedger

LOG_HUGE = math.log(1e300)
LOG_TINY = math.log(1e-30)
LEDGER_BASE = 2.0 ** (7.0 / 3.0)


@dataclass(frozen=True)
class RecurrenceSpec:
    B: float
    beta: float
    a1: float
    max_steps: int = 10_000

    def __post_init__(self):
        if not self.B > 1:
            raise ValueError("B must exceed 1")
        if not self.beta > 1:
            raise ValueError("beta must exceed 1")
        if not self.a1 > 0:
            raise ValueError("a1 must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")


@dataclass(frozen=True, eq=False)
class Orbit:
    log_values: np.ndarray
    verdict: str  # "converged" or "diverged"
    steps: int

    @property
    def values(self) -> np.ndarray:
        with np.errstate(over="ignore", under="ignore"):
            return np.exp(self.log_values)

    @property
    def converged(self) -> bool:
        return self.verdict == "converged"


def log_analytic_threshold(B: float, beta: float) -> float:
    return -math.log(B) * (2 * beta - 1) / (beta - 1) ** 2


def analytic_threshold(B: float, beta: float) -> float:
    """B^(-(2beta-1)/(beta-1)^2); underflows to 0 for extreme parameters."""
    return math.exp(log_analytic_threshold(B, beta))


def certified(k: int, log_a: float, B: float, beta: float, rel_tol: float = 1e-12) -> bool:
    """True once restarting the ansatz at index k guarantees convergence."""
    ln_b = math.log(B)
    d = (beta - 1) * (-log_a) - (k + 1) * ln_b
    fixed = ln_b / (beta - 1)
    return d >= fixed - rel_tol * (abs(fixed) + (k + 1) * ln_b + abs(log_a))


def iterate(spec: RecurrenceSpec, log_a1: float | None = None) -> Orbit:
    """Equality orbit a_k = B^k a_{k-1}^beta.

    Once the certificate holds at some index j, the exact orbit stays below
    a_j r^(k-j) with r = B^(-1/(beta-1)); later terms are clamped to that
    bound so rounding cannot push a sharp orbit over the edge. Converged once
    a_k < 1e-30 under a certificate; diverged once a_k > 1e300 or after
    ``max_steps`` terms. ``log_a1`` overrides ``spec.a1`` for starting points
    below the float range.
    """
    ln_b = math.log(spec.B)
    decay = ln_b / (spec.beta - 1)
    l_cur = math.log(spec.a1) if log_a1 is None else float(log_a1)
    logs = [l_cur]
    anchor = None  # (index, log value) where the certificate first held
    verdict = "diverged"
    for k in range(1, spec.max_steps + 1):
        if anchor is None and certified(k, l_cur, spec.B, spec.beta):
            anchor = (k, l_cur)
        if anchor is not None and l_cur < LOG_TINY:
            verdict = "converged"
            break
        if l_cur > LOG_HUGE or k == spec.max_steps:
            break
        l_cur = (k + 1) * ln_b + spec.beta * l_cur
        if anchor is not None:
            l_cur = min(l_cur, anchor[1] - (k + 1 - anchor[0]) * decay)
        logs.append(l_cur)
    return Orbit(np.array(logs), verdict, len(logs))


def _orbit_survives(log_a1: np.ndarray, ln_b: np.ndarray, beta: np.ndarray, steps: int) -> np.ndarray:
    """Brute-force verdict by plain iteration: never exceeds 1e300 and ends below 1e-30."""
    l_cur = np.array(log_a1, dtype=float)
    blown = l_cur > LOG_HUGE
    with np.errstate(invalid="ignore", over="ignore"):
        for k in range(2, steps + 1):
            l_cur = k * ln_b + beta * np.where(blown, 0.0, l_cur)
            blown |= l_cur > LOG_HUGE
            l_cur = np.maximum(l_cur, -1e300)
    return ~blown & (l_cur < LOG_TINY)


@dataclass(frozen=True)
class ThresholdEstimate:
    B: float
    beta: float
    log_analytic: float
    log_lower: float  # largest log a_1 seen to converge
    log_upper: float  # smallest log a_1 seen to diverge

    @property
    def analytic(self) -> float:
        return math.exp(self.log_analytic)

    @property
    def log_empirical(self) -> float:
        return 0.5 * (self.log_lower + self.log_upper)

    @property
    def empirical(self) -> float:
        return math.exp(self.log_empirical)


def bisect_thresholds(Bs, betas, steps: int = 10_000, tol: float = 1e-10):
    """Vectorised bisection on log a_1 using brute-force orbits only.

    Returns (log_lower, log_upper) arrays bracketing the convergence boundary.
    ``tol`` is an absolute width in log a_1; bisection also stops once the
    midpoint is no longer representable between the endpoints.
    """
    ln_b = np.log(np.asarray(Bs, dtype=float))
    beta = np.asarray(betas, dtype=float)
    ln_b, beta = np.broadcast_arrays(ln_b, beta)
    ln_b, beta = ln_b.ravel(), beta.ravel()
    lo = np.full(ln_b.shape, np.nan)
    hi = np.full(ln_b.shape, np.nan)
    start = _orbit_survives(np.zeros_like(ln_b), ln_b, beta, steps)
    lo[start] = 0.0
    hi[~start] = 0.0
    for j in range(0, 40):
        step = 2.0**j
        need_hi = np.isnan(hi)
        need_lo = np.isnan(lo)
        if not (need_hi.any() or need_lo.any()):
            break
        if need_hi.any():
            ok = _orbit_survives(np.where(need_hi, step, 0.0), ln_b, beta, steps)
            hi[need_hi & ~ok] = step
            lo[need_hi & ok] = step
        if need_lo.any():
            ok = _orbit_survives(np.where(need_lo, -step, 0.0), ln_b, beta, steps)
            lo[need_lo & ok] = -step
            hi[need_lo & ~ok] = -step
    while True:
        mid = 0.5 * (lo + hi)
        active = (hi - lo > tol) & (mid > lo) & (mid < hi)
        if not active.any():
            break
        ok = _orbit_survives(mid, ln_b, beta, steps)
        lo = np.where(active & ok, mid, lo)
        hi = np.where(active & ~ok, mid, hi)
    return lo, hi


def estimate_threshold(B: float, beta: float, steps: int = 10_000, tol: float = 1e-10) -> ThresholdEstimate:
    """Closed-form threshold together with a bisection bracket from brute-force orbits."""
    if not (B > 1 and beta > 1):
        raise ValueError("need B > 1 and beta > 1")
    lo, hi = bisect_thresholds([B], [beta], steps, tol)
    return ThresholdEstimate(B, beta, log_analytic_threshold(B, beta), float(lo[0]), float(hi[0]))


def tail_bound(u1: float, B: float, beta: float, K: int) -> float:
    """Induction bound a_K <= a_1 B^(-(K-1)/(beta-1)), valid below the threshold."""
    return u1 * B ** (-(K - 1) / (beta - 1))


@dataclass(frozen=True)
class GateVerdict:
    c_star: float
    slab_l6: float
    A: float
    B: float
    log_c0: float  # log of the threshold for (B, beta)
    hypothesis_met: bool  # slab_l6 <= C*
    decayed: bool  # U_K < decay_tol
    bounded: bool  # max |u| <= 1 on [-1/2, 1]
    terminal_ok: bool  # 0.5 int (|u| - 1)_+^2 <= U_K on [-1/2, 1]

    @property
    def claim(self) -> str:
        return "bounded" if self.hypothesis_met else "no claim"

    @property
    def passed(self) -> bool:
        if not self.hypothesis_met:
            return True
        return self.decayed and self.bounded and self.terminal_ok

    def as_dict(self) -> dict:
        return {
            "C_star": self.c_star,
            "passed": self.passed,
            "claim": self.claim,
            "slab_l6": self.slab_l6,
            "A": self.A,
            "B": self.B,
            "hypothesis_met": self.hypothesis_met,
            "decayed": self.decayed,
            "bounded": self.bounded,
            "terminal_ok": self.terminal_ok,
        }


def smallness_gate(
    ledger: EnergyLedger, A: float | None = None, C: float | None = None, decay_tol: float = 1e-12
) -> GateVerdict:
    """Evaluate C* = min(A^(-1/6), (C0*/A)^(1/6)) and what the run actually did.

    ``A`` and ``C`` default to the ledger's measured constants; A is floored at
    1 (the lemma's constant exceeds 1), and the recurrence base is
    B = max(1, C) * 2^(7/3) so that C 2^(7k/3) <= B^k for every k >= 1.
    C0* is the closed-form threshold for (B, 19/18).
    """
    a_val = max(1.0, A if A is not None else (ledger.measured_A or 0.0))
    c_val = C if C is not None else (ledger.measured_B or 0.0)
    b_val = max(1.0, c_val) * LEDGER_BASE
    log_c0 = log_analytic_threshold(b_val, BETA)
    log_c_star = min(-math.log(a_val) / 6.0, (log_c0 - math.log(a_val)) / 6.0)
    c_star = math.exp(log_c_star)
    met = ledger.slab_l6 == 0 or math.log(ledger.slab_l6) <= log_c_star
    u_last = float(ledger.u_seq[-1])
    return GateVerdict(
        c_star=c_star,
        slab_l6=ledger.slab_l6,
        A=a_val,
        B=b_val,
        log_c0=log_c0,
        hypothesis_met=bool(met),
        decayed=u_last < decay_tol,
        bounded=ledger.late_max_speed <= 1.0,
        terminal_ok=ledger.late_excess <= u_last,
    )
