import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dgns.degiorgi import BETA, build_ledger
from dgns.grid import GridSpec, Trajectory, VelocityField, taylor_green
from dgns.harness.experiment import diagnose_window
from dgns.iteration import (
    LEDGER_BASE,
    RecurrenceSpec,
    analytic_threshold,
    bisect_thresholds,
    certified,
    estimate_threshold,
    iterate,
    log_analytic_threshold,
    smallness_gate,
    tail_bound,
)
from dgns.solver import SolverConfig, simulate


def test_spec_validation():
    for bad in ((1.0, 2.0, 0.1), (2.0, 1.0, 0.1), (2.0, 2.0, 0.0)):
        with pytest.raises(ValueError):
            RecurrenceSpec(*bad)
    with pytest.raises(ValueError):
        RecurrenceSpec(2.0, 2.0, 0.1, max_steps=0)


def test_dyadic_orbit_converges():
    orbit = iterate(RecurrenceSpec(2.0, 2.0, 0.125))
    assert orbit.values[1] == pytest.approx(1 / 16, rel=1e-14)
    assert orbit.values[2] == pytest.approx(1 / 32, rel=1e-14)
    assert orbit.converged
    assert orbit.values[-1] < 1e-30


def test_dyadic_orbit_diverges():
    orbit = iterate(RecurrenceSpec(2.0, 2.0, 1.0))
    assert orbit.values[1] == pytest.approx(4.0)
    assert orbit.values[2] == pytest.approx(128.0)
    assert orbit.verdict == "diverged"
    assert orbit.log_values[-1] > math.log(1e300)


def test_closed_form_threshold():
    assert analytic_threshold(2.0, 2.0) == pytest.approx(0.125, rel=1e-15)
    # B = 16, beta = 1.01: far below the float range, only the log is usable
    assert log_analytic_threshold(16.0, 1.01) == pytest.approx(-math.log(16) * 1.02 / 1e-4)
    assert analytic_threshold(16.0, 1.01) == 0.0


def test_threshold_is_bracketed_by_bisection():
    est = estimate_threshold(2.0, 2.0)
    assert est.log_lower < est.log_upper
    assert est.log_upper - est.log_lower <= 1e-10
    assert est.log_analytic <= est.log_empirical + 1e-8
    # the closed form is sharp for the equality orbit: the bracket sits on it
    assert est.log_empirical == pytest.approx(est.log_analytic, abs=1e-8)


@pytest.mark.parametrize("B,beta", [(2.0, 2.0), (1.5, 1.3), (10.0, 2.7), (LEDGER_BASE, BETA)])
def test_half_converges_ten_times_diverges(B, beta):
    la = log_analytic_threshold(B, beta)
    spec = RecurrenceSpec(B, beta, 1.0)
    assert iterate(spec, la + math.log(0.5)).converged
    assert not iterate(spec, la + math.log(10.0)).converged


def test_ledger_constants_converge_from_below():
    est = estimate_threshold(LEDGER_BASE, BETA)
    orbit = iterate(RecurrenceSpec(LEDGER_BASE, BETA, 1.0, 10_000), est.log_analytic + math.log(0.9))
    assert orbit.converged
    assert orbit.steps <= 10_000


def test_threshold_vanishes_as_beta_approaches_one():
    betas = [3.0, 2.0, 1.5, 1.1, 1.01, 1.001]
    logs = [log_analytic_threshold(4.0, b) for b in betas]
    assert all(b < a for a, b in zip(logs, logs[1:]))
    assert logs[-1] < -1e6


@given(
    B=st.floats(1.1, 16.0),
    beta=st.floats(1.01, 3.0),
    x=st.floats(-3.0, 3.0),
    y=st.floats(-3.0, 3.0),
)
def test_verdict_is_monotone_in_the_start(B, beta, x, y):
    la = log_analytic_threshold(B, beta)
    lo, hi = sorted((x, y))
    spec = RecurrenceSpec(B, beta, 1.0)
    if iterate(spec, la + hi).converged:
        assert iterate(spec, la + lo).converged


def test_analytic_below_empirical_on_a_coarse_grid():
    Bs, betas = np.meshgrid(np.linspace(1.1, 16, 5), np.linspace(1.01, 3, 5))
    lo, hi = bisect_thresholds(Bs.ravel(), betas.ravel(), steps=10_000)
    la = np.array([log_analytic_threshold(b, t) for b, t in zip(Bs.ravel(), betas.ravel())])
    assert np.all(la <= 0.5 * (lo + hi) + 1e-8)


def test_certificate():
    # at the threshold the certificate holds from the first index
    assert certified(1, math.log(0.125), 2.0, 2.0)
    assert not certified(1, math.log(0.2), 2.0, 2.0)


def test_tail_bound_holds_below_threshold():
    B, beta = 3.0, 1.5
    a1 = 0.5 * analytic_threshold(B, beta)
    orbit = iterate(RecurrenceSpec(B, beta, a1, max_steps=30))
    for K in range(1, len(orbit.values) + 1):
        assert orbit.values[K - 1] <= tail_bound(a1, B, beta, K) * (1 + 1e-12)


def _window_ledger(u0, K=4, t_end=0.5):
    tr = simulate(u0, SolverConfig(dt=1 / 256, t_end=t_end, snapshot_stride=8))
    return build_ledger(diagnose_window(tr, (0.0, t_end)), K)


def test_gate_on_zero_trajectory(grid16):
    times = np.linspace(-1, 1, 5)
    z = Trajectory(grid16, times, np.zeros((5, 3) + grid16.shape))
    verdict = smallness_gate(build_ledger(z, 3))
    assert verdict.hypothesis_met and verdict.passed
    assert verdict.bounded and verdict.decayed
    assert verdict.claim == "bounded"


def test_gate_makes_no_claim_for_large_runs():
    led = _window_ledger(taylor_green(GridSpec(16), 4.0))
    verdict = smallness_gate(led)
    assert not verdict.hypothesis_met
    assert verdict.claim == "no claim"
    assert verdict.passed  # the contrapositive is not asserted
    d = verdict.as_dict()
    assert set(d) >= {"C_star", "passed"}
    assert 0 < d["C_star"] < 1


def test_gate_constants_follow_the_ledger():
    led = _window_ledger(taylor_green(GridSpec(16), 4.0))
    v = smallness_gate(led, A=2.0, C=3.0)
    assert v.A == 2.0
    assert v.B == pytest.approx(3.0 * LEDGER_BASE)
    log_c0 = log_analytic_threshold(3.0 * LEDGER_BASE, BETA)
    assert math.log(v.c_star) == pytest.approx(min(-math.log(2) / 6, (log_c0 - math.log(2)) / 6))
    # A below 1 and C below 1 are floored
    v = smallness_gate(led, A=0.1, C=0.1)
    assert v.A == 1.0 and v.B == pytest.approx(LEDGER_BASE)


def test_ledger_level_implication():
    # when the measured recurrence holds and U_1 is under the threshold, the tail bound follows
    led = _window_ledger(taylor_green(GridSpec(16), 4.0), K=5)
    if led.measured_B is None:
        pytest.skip("ledger has no recurrence fit")
    Bp = max(1.0, led.measured_B) * LEDGER_BASE
    u = led.u_seq
    for k in range(2, len(u) + 1):
        assert u[k - 1] <= led.measured_B * 2 ** (7 * k / 3) * u[k - 2] ** BETA * (1 + 1e-12)
    if u[0] <= analytic_threshold(Bp, BETA):
        assert u[-1] <= tail_bound(u[0], Bp, BETA, len(u))
    # a synthetic sequence satisfying both hypotheses
    a1 = 0.5 * analytic_threshold(4.0, 1.5)
    orbit = iterate(RecurrenceSpec(4.0, 1.5, a1, max_steps=8)).values
    assert orbit[-1] <= tail_bound(a1, 4.0, 1.5, len(orbit))


def test_zero_field_ledger_gate(grid16):
    z = VelocityField.zeros(grid16)
    tr = Trajectory(grid16, np.linspace(-1, 1, 3), np.stack([z.data] * 3))
    assert smallness_gate(build_ledger(tr, 2)).as_dict()["passed"]
