import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dgns.grid import GridSpec, VelocityField, make_field, random_field, space_norm, taylor_green
from dgns.pressure import (
    measure_cz_constant,
    riesz_apply,
    solve_pressure,
    split_pressure,
    split_tensors,
)


def _l2(f, grid):
    return space_norm(f, grid, 2)


def fourier_d1(n, length):
    """Periodic spectral first-derivative matrix (even n), closed form."""
    h = 2 * np.pi / n
    i = np.arange(n)
    diff = i[:, None] - i[None, :]
    with np.errstate(divide="ignore"):
        d = 0.5 * (-1.0) ** diff / np.tan(diff * h / 2)
    d[diff == 0] = 0.0
    return d * (2 * np.pi / length)


def fourier_d2(n, length):
    """Periodic spectral second-derivative matrix (even n), closed form."""
    h = 2 * np.pi / n
    i = np.arange(n)
    diff = i[:, None] - i[None, :]
    with np.errstate(divide="ignore"):
        d = -0.5 * (-1.0) ** diff / np.sin(diff * h / 2) ** 2
    d[diff == 0] = -np.pi**2 / (3 * h**2) - 1.0 / 6.0
    return d * (2 * np.pi / length) ** 2


def _along(mat, f, axis):
    return np.moveaxis(np.tensordot(mat, f, axes=([1], [axis])), 0, axis)


def dense_pressure(u: VelocityField):
    """-Lap P = sum_ij d_i d_j (u_i u_j) solved as a dense linear system with a mean constraint."""
    g = u.grid
    n = g.n
    d1, d2 = fourier_d1(n, g.box_length), fourier_d2(n, g.box_length)
    rhs = np.zeros(g.shape)
    for i in range(3):
        for j in range(3):
            t = u.data[i] * u.data[j]
            if i == j:
                rhs += _along(d2, t, i)
            else:
                rhs += _along(d1, _along(d1, t, j), i)
    eye = np.eye(n)
    lap = np.kron(np.kron(d2, eye), eye) + np.kron(np.kron(eye, d2), eye) + np.kron(np.kron(eye, eye), d2)
    system = -lap + np.ones((n**3, n**3)) / n**3
    return np.linalg.solve(system, rhs.ravel()).reshape(g.shape)


def test_derivative_matrices_on_modes():
    n, length = 16, 2 * np.pi
    x = np.arange(n) * length / n
    assert np.max(np.abs(fourier_d1(n, length) @ np.sin(3 * x) - 3 * np.cos(3 * x))) <= 1e-12
    assert np.max(np.abs(fourier_d2(n, length) @ np.sin(3 * x) + 9 * np.sin(3 * x))) <= 1e-11


def test_pressure_of_zero_and_shear(grid16):
    assert np.all(solve_pressure(VelocityField.zeros(grid16)) == 0)
    u = make_field(grid16, lambda x, y, z: (np.sin(y) + 0 * x * z, 0.0, 0.0))
    assert np.max(np.abs(solve_pressure(u))) <= 1e-14


def test_taylor_green_pressure_against_dense_oracle(grid16):
    u = taylor_green(grid16)
    p = solve_pressure(u)
    ref = dense_pressure(u)
    assert np.max(np.abs(p - ref)) <= 1e-10 * np.max(np.abs(ref))


def test_taylor_green_pressure_closed_form(grid16):
    p = solve_pressure(taylor_green(grid16))
    x, y, z = grid16.coordinates()
    exact = (np.cos(2 * x) + np.cos(2 * y)) * (np.cos(2 * z) + 2) / 16
    assert np.max(np.abs(p - exact)) <= 1e-13


def test_random_pressure_against_dense_oracle(grid16):
    # k_max keeps u_i u_j away from the Nyquist plane, where the oracle's d1 d1 vanishes
    u = random_field(grid16, seed=3, energy=1.0, k_max=3)
    assert np.max(np.abs(solve_pressure(u) - dense_pressure(u))) <= 1e-10 * np.max(np.abs(solve_pressure(u)))


def test_riesz_single_mode(grid16):
    x, _, _ = grid16.coordinates()
    f = np.broadcast_to(np.sin(x), grid16.shape)
    # R_i R_j = d_i d_j (-Lap)^{-1}: on sin x the (0, 0) multiplier is -1
    assert np.max(np.abs(riesz_apply(f, grid16, 0, 0) + f)) <= 1e-13
    assert np.max(np.abs(riesz_apply(f, grid16, 1, 1))) <= 1e-13


@given(seed=st.integers(0, 2**31))
def test_riesz_trace_identity(seed):
    g = GridSpec(16)
    f = np.random.default_rng(seed).standard_normal(g.shape)
    total = sum(riesz_apply(f, g, i, i) for i in range(3))
    assert np.max(np.abs(total + (f - f.mean()))) <= 1e-12


@given(seed=st.integers(0, 2**31), c=st.sampled_from([0.25, 0.5, 2.0, 8.0]))
def test_pressure_homogeneity(seed, c):
    g = GridSpec(16)
    u = random_field(g, seed=seed, energy=1.0)
    p = solve_pressure(u)
    pc = solve_pressure(u.scaled(c))
    assert np.max(np.abs(pc - c**2 * p)) <= 1e-14 * c**2 * np.max(np.abs(p))


@pytest.mark.parametrize("k", [1, 2, 3, 5])
def test_split_is_additive(rough16, k):
    s = split_pressure(rough16, k)
    p = solve_pressure(rough16)
    assert _l2(s.p_k1 + s.p_k2 - p, rough16.grid) <= 1e-10 * _l2(p, rough16.grid)
    assert s.grad_p_k2.shape == (3,) + rough16.grid.shape


def test_split_below_threshold(grid16):
    u = taylor_green(grid16, amplitude=0.4)  # |u| <= 0.4 < 1/2
    s = split_pressure(u, 1)
    assert np.all(s.p_k2 == 0)
    assert np.array_equal(s.p_k1, solve_pressure(u))
    z = split_pressure(VelocityField.zeros(grid16), 2)
    assert np.all(z.p_k1 == 0) and np.all(z.p_k2 == 0)
    with pytest.raises(ValueError):
        split_pressure(u, 0)


@pytest.mark.parametrize("k", [1, 2, 4])
def test_low_tensor_majorant(rough16, k):
    low, high = split_tensors(rough16, k)
    speed = rough16.speed
    assert np.max(np.abs(low) - 3 * speed) <= 1e-12
    outer = np.einsum("i...,j...->ij...", rough16.data, rough16.data)
    assert np.max(np.abs(low + high - outer)) <= 1e-12 * np.max(np.abs(outer))


def test_cz_constant_protocol(grid32):
    shear = make_field(grid32, lambda x, y, z: (np.sin(y) + 0 * x * z, 0.0, 0.0))
    assert measure_cz_constant([shear], 6, 3) <= 1e-14
    assert measure_cz_constant([VelocityField.zeros(grid32)], 6, 3) == 0.0

    sample = [random_field(grid32, seed=s, energy=1.0) for s in range(200)]
    small = measure_cz_constant(sample[:100], 6, 3)
    large = measure_cz_constant(sample, 6, 3)
    assert 0 < small < np.inf
    assert abs(large - small) <= 0.2 * small

    u = sample[0]
    base = measure_cz_constant([u], 6, 3)
    for c in (0.1, 3.0, 50.0):
        assert measure_cz_constant([u.scaled(c)], 6, 3) == pytest.approx(base, rel=1e-12)


def test_cz_constant_for_low_part(grid16):
    sample = [random_field(grid16, seed=s, energy=2.0) for s in range(20)]
    c6 = measure_cz_constant(sample, 6, 6, level=2)
    assert 0 < c6 < np.inf
