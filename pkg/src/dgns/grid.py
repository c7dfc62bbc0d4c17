"""Periodic grids on [0, L)^3, velocity fields and spectral operators.

Scalar fields are plain ``(n, n, n)`` float arrays indexed ``(ix, iy, iz)``;
vector fields carry a leading component axis and gradients a further one, so
``gradient(u)[i, j]`` is ``d u_i / d x_j``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.fft as sfft

DELTA_FLOOR = 1e-30
DIVERGENCE_TOL = 1e-10


def fft_workers() -> int:
    """Thread count for FFTs; ``DGNS_THREADS`` unset means single-threaded."""
    value = os.environ.get("DGNS_THREADS")
    if not value:
        return 1
    return max(1, int(value))


class FieldError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    n: int
    box_length: float = 2 * np.pi
    dealias_fraction: float = 2.0 / 3.0

    def __post_init__(self):
        n = int(self.n)
        if n < 8 or n & (n - 1):
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")
        if not (np.isfinite(self.box_length) and self.box_length > 0):
            raise ValueError(f"box_length must be positive, got {self.box_length}")
        if not 0 < self.dealias_fraction <= 1:
            raise ValueError(f"dealias_fraction must lie in (0, 1], got {self.dealias_fraction}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "box_length", float(self.box_length))

    @property
    def h(self) -> float:
        return self.box_length / self.n

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def spectral_shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n // 2 + 1)

    @property
    def cell_volume(self) -> float:
        return self.h**3

    @property
    def volume(self) -> float:
        return self.box_length**3

    def with_box_length(self, box_length: float) -> "GridSpec":
        return GridSpec(self.n, box_length, self.dealias_fraction)

    def coordinates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        x = np.arange(self.n) * self.h
        return np.meshgrid(x, x, x, indexing="ij", sparse=True)

    @cached_property
    def _integer_modes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        full = np.fft.fftfreq(self.n, 1.0 / self.n)
        half = np.arange(self.n // 2 + 1, dtype=float)
        return full[:, None, None], full[None, :, None], half[None, None, :]

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Physical wavenumbers, broadcastable to the rfft spectral shape."""
        scale = 2 * np.pi / self.box_length
        return tuple(scale * m for m in self._integer_modes)

    @cached_property
    def derivative_wavenumbers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Wavenumbers with the Nyquist entry zeroed, for odd derivatives."""
        out = []
        for m, k in zip(self._integer_modes, self.wavenumbers):
            out.append(np.where(np.abs(m) == self.n // 2, 0.0, k))
        return tuple(out)

    @cached_property
    def k_squared(self) -> np.ndarray:
        kx, ky, kz = self.wavenumbers
        return kx**2 + ky**2 + kz**2

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        cutoff = self.dealias_fraction * self.n / 2
        mx, my, mz = self._integer_modes
        return (np.abs(mx) < cutoff) & (np.abs(my) < cutoff) & (np.abs(mz) < cutoff)

    @cached_property
    def parseval_weights(self) -> np.ndarray:
        """Multiplicity of each rfft coefficient in the full spectrum."""
        w = np.full(self.n // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return w[None, None, :]

    def forward(self, a: np.ndarray) -> np.ndarray:
        return sfft.rfftn(a, axes=(-3, -2, -1), workers=fft_workers())

    def inverse(self, a_hat: np.ndarray) -> np.ndarray:
        return sfft.irfftn(a_hat, s=self.shape, axes=(-3, -2, -1), workers=fft_workers())


@dataclass(frozen=True, eq=False)
class VelocityField:
    """Three-component field on a periodic grid. The data array is read-only."""

    grid: GridSpec
    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=float)
        if data.shape != (3,) + self.grid.shape:
            raise FieldError(f"expected shape {(3,) + self.grid.shape}, got {data.shape}")
        if not np.isfinite(data).all():
            bad = np.argwhere(~np.isfinite(data))[0]
            raise FieldError(f"non-finite value in component {bad[0]} at node {tuple(bad[1:])}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "VelocityField":
        return cls(grid, np.zeros((3,) + grid.shape))

    @classmethod
    def from_spectral(cls, grid: GridSpec, u_hat: np.ndarray) -> "VelocityField":
        return cls(grid, grid.inverse(u_hat))

    @cached_property
    def spectral(self) -> np.ndarray:
        out = self.grid.forward(self.data)
        out.setflags(write=False)
        return out

    @cached_property
    def speed(self) -> np.ndarray:
        return np.sqrt(np.sum(self.data**2, axis=0))

    def scaled(self, factor: float) -> "VelocityField":
        return VelocityField(self.grid, factor * self.data)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-ordered snapshots with a uniform step.

    ``data`` has shape ``(m, ...) + grid.shape``: ``(m, 3, n, n, n)`` for a
    velocity trajectory, ``(m, n, n, n)`` for a scalar one. ``series`` holds
    optional per-step diagnostics recorded by the solver.
    """

    grid: GridSpec
    times: np.ndarray
    data: np.ndarray
    series: dict = field(default_factory=dict)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        data = np.asarray(self.data, dtype=float)
        if times.ndim != 1 or len(times) == 0:
            raise ValueError("a trajectory needs at least one snapshot")
        if data.shape[0] != len(times) or data.shape[-3:] != self.grid.shape:
            raise ValueError(f"data shape {data.shape} does not match {len(times)} snapshots on {self.grid.shape}")
        if len(times) > 1:
            steps = np.diff(times)
            if np.any(steps <= 0):
                raise ValueError("times must be strictly increasing")
            if np.max(np.abs(steps - self.dt)) > 1e-9 * self.dt:
                raise ValueError("times must have a uniform step")
        data.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "data", data)

    @property
    def dt(self) -> float:
        if len(self.times) < 2:
            return 0.0
        return (self.times[-1] - self.times[0]) / (len(self.times) - 1)

    @property
    def is_velocity(self) -> bool:
        return self.data.ndim == 5 and self.data.shape[1] == 3

    def __len__(self) -> int:
        return len(self.times)

    def snapshot(self, i: int) -> VelocityField:
        return VelocityField(self.grid, self.data[i])

    def snapshots(self):
        for i in range(len(self)):
            yield self.snapshot(i)

    def covers(self, t_a: float, t_b: float, tol: float = 1e-9) -> bool:
        return self.times[0] <= t_a + tol and self.times[-1] >= t_b - tol


def make_field(grid: GridSpec, formula: Callable) -> VelocityField:
    """Sample ``formula(x, y, z) -> (u1, u2, u3)`` at the grid nodes (no projection)."""
    x, y, z = grid.coordinates()
    comps = [np.broadcast_to(np.asarray(c, dtype=float), grid.shape) for c in formula(x, y, z)]
    data = np.stack(comps)
    if not np.isfinite(data).all():
        c, ix, iy, iz = np.argwhere(~np.isfinite(data))[0]
        h = grid.h
        raise FieldError(f"formula is not finite at node ({ix * h}, {iy * h}, {iz * h}), component {c}")
    return VelocityField(grid, data)


def taylor_green(grid: GridSpec, amplitude: float = 1.0) -> VelocityField:
    s = 2 * np.pi / grid.box_length
    return make_field(
        grid,
        lambda x, y, z: (
            amplitude * np.sin(s * x) * np.cos(s * y) * np.cos(s * z),
            -amplitude * np.cos(s * x) * np.sin(s * y) * np.cos(s * z),
            0.0 * x,
        ),
    )


def abc_flow(grid: GridSpec, a: float = 1.0, b: float = 1.0, c: float = 1.0) -> VelocityField:
    s = 2 * np.pi / grid.box_length
    return make_field(
        grid,
        lambda x, y, z: (
            a * np.sin(s * z) + c * np.cos(s * y),
            b * np.sin(s * x) + a * np.cos(s * z),
            c * np.sin(s * y) + b * np.cos(s * x),
        ),
    )


def random_field(
    grid: GridSpec,
    seed: int | np.random.Generator = 0,
    energy: float = 0.5,
    spectrum_slope: float = -2.0,
    k_max: float | None = None,
) -> VelocityField:
    """Random divergence-free field with mean kinetic energy ``energy``.

    Mode amplitudes follow ``|m|^spectrum_slope`` for integer modes
    ``1 <= |m| <= k_max`` (default: the dealiasing cutoff).
    """
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((3,) + grid.shape)
    if energy == 0:
        return VelocityField.zeros(grid)
    u_hat = grid.forward(noise)
    mx, my, mz = grid._integer_modes
    mag = np.sqrt(mx**2 + my**2 + mz**2)
    if k_max is None:
        k_max = grid.dealias_fraction * grid.n / 2
    band = (mag >= 1) & (mag <= k_max) & grid.dealias_mask
    u_hat = u_hat * np.where(band, np.where(band, mag, 1.0) ** spectrum_slope, 0.0)
    u_hat = _project_hat(u_hat, grid)
    data = grid.inverse(u_hat)
    mean_energy = 0.5 * np.mean(np.sum(data**2, axis=0))
    return VelocityField(grid, data * np.sqrt(energy / mean_energy))


def _project_hat(u_hat: np.ndarray, grid: GridSpec) -> np.ndarray:
    kx, ky, kz = grid.derivative_wavenumbers
    k2 = kx**2 + ky**2 + kz**2
    inv = np.where(k2 > 0, 1.0 / np.where(k2 > 0, k2, 1.0), 0.0)
    k_dot_u = (kx * u_hat[0] + ky * u_hat[1] + kz * u_hat[2]) * inv
    return np.stack([u_hat[0] - kx * k_dot_u, u_hat[1] - ky * k_dot_u, u_hat[2] - kz * k_dot_u])


def leray_project(u: VelocityField) -> VelocityField:
    """Orthogonal projection onto divergence-free fields; the mean is untouched."""
    return VelocityField.from_spectral(u.grid, _project_hat(u.spectral, u.grid))


def divergence(u: VelocityField) -> np.ndarray:
    kx, ky, kz = u.grid.derivative_wavenumbers
    uh = u.spectral
    return u.grid.inverse(1j * (kx * uh[0] + ky * uh[1] + kz * uh[2]))


def curl(u: VelocityField) -> np.ndarray:
    kx, ky, kz = u.grid.derivative_wavenumbers
    uh = u.spectral
    w_hat = np.stack(
        [
            1j * (ky * uh[2] - kz * uh[1]),
            1j * (kz * uh[0] - kx * uh[2]),
            1j * (kx * uh[1] - ky * uh[0]),
        ]
    )
    return u.grid.inverse(w_hat)


def gradient(f: VelocityField | np.ndarray, grid: GridSpec | None = None) -> np.ndarray:
    """Dealiased spectral gradient; appends a derivative axis before the grid axes."""
    if isinstance(f, VelocityField):
        grid, f_hat = f.grid, f.spectral
    else:
        if grid is None:
            raise TypeError("grid is required for array input")
        f_hat = grid.forward(np.asarray(f, dtype=float))
    f_hat = f_hat * grid.dealias_mask
    kx, ky, kz = grid.derivative_wavenumbers
    d_hat = np.stack([1j * kx * f_hat, 1j * ky * f_hat, 1j * kz * f_hat], axis=-4)
    return grid.inverse(d_hat)


def speed_gradient(u: VelocityField, grad_u: np.ndarray | None = None) -> np.ndarray:
    """Chain-rule gradient of |u|: sum_i u_i grad u_i / |u|, zero where |u| <= DELTA_FLOOR."""
    if grad_u is None:
        grad_u = gradient(u)
    speed = u.speed
    inv = np.where(speed > DELTA_FLOOR, 1.0 / np.where(speed > DELTA_FLOOR, speed, 1.0), 0.0)
    return np.einsum("i...,ij...->j...", u.data, grad_u) * inv


def magnitude(a: np.ndarray) -> np.ndarray:
    """Pointwise Euclidean norm over every axis before the three grid axes."""
    a = np.asarray(a, dtype=float)
    if a.ndim <= 3:
        return np.abs(a)
    lead = tuple(range(a.ndim - 3))
    return np.sqrt(np.sum(a**2, axis=lead))


def integrate(f: np.ndarray, grid: GridSpec) -> float:
    return float(np.sum(f) * grid.cell_volume)


def space_norm(f: np.ndarray, grid: GridSpec, p: float) -> float:
    """Rectangle-rule L^p norm over the box; tensor input is reduced pointwise by magnitude."""
    if not p >= 1:
        raise ValueError(f"space_norm needs p >= 1, got {p}")
    a = magnitude(f)
    if np.isinf(p):
        return float(np.max(a))
    return float((np.sum(a**p) * grid.cell_volume) ** (1.0 / p))


def kinetic_energy(u: VelocityField) -> float:
    return 0.5 * integrate(np.sum(u.data**2, axis=0), u.grid)


def window_integral(times: np.ndarray, values: np.ndarray, t_a: float, t_b: float) -> np.ndarray:
    """Exact integral over [t_a, t_b] of the piecewise-linear interpolant of ``values``.

    Reduces to the trapezoid rule when the endpoints are sample times.
    ``values`` may carry trailing axes.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    tol = 1e-9 * max(1.0, abs(times[-1] - times[0]))
    if t_a < times[0] - tol or t_b > times[-1] + tol or t_b < t_a:
        raise ValueError(f"window [{t_a}, {t_b}] is outside [{times[0]}, {times[-1]}]")
    t_a = min(max(t_a, times[0]), times[-1])
    t_b = min(max(t_b, times[0]), times[-1])
    if len(times) == 1 or t_b == t_a:
        return np.zeros(values.shape[1:])
    inside = (times > t_a) & (times < t_b)
    knots = np.concatenate([[t_a], times[inside], [t_b]])
    idx = np.flatnonzero(inside)
    v_a = _interp_rows(times, values, t_a)
    v_b = _interp_rows(times, values, t_b)
    rows = np.concatenate([v_a[None], values[idx], v_b[None]])
    widths = np.diff(knots).reshape((-1,) + (1,) * (values.ndim - 1))
    return np.sum(0.5 * widths * (rows[1:] + rows[:-1]), axis=0)


def _interp_rows(times, values, t):
    j = int(np.searchsorted(times, t, side="right")) - 1
    j = min(max(j, 0), len(times) - 2)
    t0, t1 = times[j], times[j + 1]
    if t == t0:
        return values[j]
    if t == t1:
        return values[j + 1]
    theta = (t - t0) / (t1 - t0)
    return (1 - theta) * values[j] + theta * values[j + 1]


def cumulative_trapezoid(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    out = np.zeros_like(values)
    if len(times) > 1:
        widths = np.diff(times).reshape((-1,) + (1,) * (values.ndim - 1))
        out[1:] = np.cumsum(0.5 * widths * (values[1:] + values[:-1]), axis=0)
    return out


def snapshot_norms(traj: Trajectory, q: float, reduce: Callable | None = None) -> np.ndarray:
    """Spatial L^q norm of every snapshot (after ``reduce``, if given)."""
    out = np.empty(len(traj))
    for i in range(len(traj)):
        a = traj.data[i] if reduce is None else reduce(traj, i)
        out[i] = space_norm(a, traj.grid, q)
    return out


def slab_norm(traj: Trajectory, window: tuple[float, float], p: float, q: float, reduce: Callable | None = None) -> float:
    """L^p in time (trapezoid) of spatial L^q norms over ``window``.

    For ``p == q`` this is the joint space-time rectangle/trapezoid quadrature.
    """
    t_a, t_b = window
    if not (p >= 1 and q >= 1):
        raise ValueError("slab_norm needs p, q >= 1")
    if not t_b > t_a:
        raise ValueError(f"empty window [{t_a}, {t_b}]")
    if not traj.covers(t_a, t_b):
        raise ValueError(f"window [{t_a}, {t_b}] is outside the trajectory")
    norms = snapshot_norms(traj, q, reduce)
    if np.isinf(p):
        inside = (traj.times >= t_a - 1e-12) & (traj.times <= t_b + 1e-12)
        return float(np.max(norms[inside]))
    return float(window_integral(traj.times, norms**p, t_a, t_b) ** (1.0 / p))
