"""Pressure recovery through Riesz-transform multipliers and its level split.

Sign convention: ``R_i R_j`` is the multiplier ``-xi_i xi_j / |xi|^2``, i.e.
``d_i d_j (-Laplacian)^{-1}``, so the pressure solving
``-Laplacian P = sum_ij d_i d_j (u_i u_j)`` is ``P = sum_ij R_i R_j (u_i u_j)``.
Axes are 0-based. The zero mode is always annihilated (mean-free pressure).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import DELTA_FLOOR, GridSpec, VelocityField, gradient, space_norm

_PAIRS = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)]


def _riesz_symbol(grid: GridSpec, i: int, j: int) -> np.ndarray:
    k = grid.wavenumbers
    k2 = grid.k_squared
    safe = np.where(k2 > 0, k2, 1.0)
    return np.where(k2 > 0, -k[i] * k[j] / safe, 0.0)


def riesz_apply(f: np.ndarray, grid: GridSpec, i: int, j: int) -> np.ndarray:
    """Apply R_i R_j to a scalar field."""
    return grid.inverse(_riesz_symbol(grid, i, j) * grid.forward(np.asarray(f, dtype=float)))


def pressure_from_tensor(t: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Mean-free P with -Laplacian P = sum_ij d_i d_j t_ij for a symmetric tensor field t."""
    p_hat = np.zeros(grid.spectral_shape, dtype=complex)
    for i, j in _PAIRS:
        weight = 1.0 if i == j else 2.0
        p_hat += weight * _riesz_symbol(grid, i, j) * grid.forward(t[i, j])
    return grid.inverse(p_hat)


def solve_pressure(u: VelocityField) -> np.ndarray:
    return pressure_from_tensor(np.einsum("i...,j...->ij...", u.data, u.data), u.grid)


def truncation_weight(u: VelocityField, k: int) -> np.ndarray:
    """v_k/|u|, set to zero where |u| <= DELTA_FLOOR."""
    speed = u.speed
    v = np.maximum(speed - (1.0 - 2.0**-k), 0.0)
    ok = speed > DELTA_FLOOR
    return np.where(ok, v / np.where(ok, speed, 1.0), 0.0)


def split_tensors(u: VelocityField, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Source tensors for P_k1 and P_k2; they sum to u_i u_j."""
    w = truncation_weight(u, k)
    outer = np.einsum("i...,j...->ij...", u.data, u.data)
    low = ((1 - w) ** 2 + 2 * (1 - w) * w) * outer
    high = w**2 * outer
    return low, high


@dataclass(frozen=True, eq=False)
class PressureSplit:
    level: int
    p_k1: np.ndarray
    p_k2: np.ndarray
    grad_p_k2: np.ndarray


def split_pressure(u: VelocityField, k: int) -> PressureSplit:
    if k < 1:
        raise ValueError("split_pressure needs k >= 1")
    _, high = split_tensors(u, k)
    p_k2 = pressure_from_tensor(high, u.grid)
    p_k1 = solve_pressure(u) - p_k2
    return PressureSplit(k, p_k1, p_k2, gradient(p_k2, u.grid))


def measure_cz_constant(sample, p_in: float, p_out: float, level: int | None = None) -> float:
    """Empirical Calderon-Zygmund constant over a sample of fields.

    Without ``level``: max of ||P||_{p_out} / ||u||_{p_in}^2. With ``level=k``:
    max of ||P_k1||_{p_out} / ||3|u| ||_{p_in}, the majorant form used for the
    low part of the split. Zero fields are skipped.
    """
    best = 0.0
    for u in sample:
        denom = space_norm(u.speed, u.grid, p_in)
        if denom == 0:
            continue
        if level is None:
            ratio = space_norm(solve_pressure(u), u.grid, p_out) / denom**2
        else:
            ratio = space_norm(split_pressure(u, level).p_k1, u.grid, p_out) / (3 * denom)
        best = max(best, ratio)
    return best
