"""High-resolution forward solvers for synthetic advection-diffusion data.

Space is discretized by dense collocation differentiation matrices
(Chebyshev-Gauss-Lobatto points for Dirichlet problems, uniform Fourier grid
for periodic ones).  Time stepping is Crank-Nicolson for linear flux; for the
Burgers flux an IMEX scheme treats diffusion with the trapezoidal rule and
advection explicitly (second-order Adams-Bashforth after one Heun startup
step).  Dirichlet boundary values are held at the initial-condition trace.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .basis import BoxDomain

__all__ = [
    "FluxSpec",
    "CoefficientFields",
    "SolverConfig",
    "SolutionTrajectory",
    "UnstableSolveError",
    "solve",
    "chebyshev_diff_matrix",
    "fourier_diff_matrix",
]

_TIME_TOL = 1e-9


class UnstableSolveError(RuntimeError):
    """Solution became non-finite during time stepping."""

    def __init__(self, step: int, time: float):
        super().__init__(f"solution lost finiteness at step {step} (t={time:g})")
        self.step = step
        self.time = time


@dataclass(frozen=True)
class FluxSpec:
    """Known constitutive flux inside the advection term."""

    kind: str
    F: Callable
    dF: Callable

    @classmethod
    def linear(cls) -> "FluxSpec":
        return cls(kind="linear", F=lambda u: u, dF=lambda u: np.ones_like(u))

    @classmethod
    def burgers(cls) -> "FluxSpec":
        return cls(kind="burgers", F=lambda u: 0.5 * u * u, dF=lambda u: u)


@dataclass(frozen=True)
class CoefficientFields:
    """True velocity components, diffusivity, and flux used to generate data.

    Field callables take one positional array per coordinate: f(x) in 1D,
    f(x, y) in 2D.
    """

    alpha: tuple
    kappa: Callable
    flux: FluxSpec

    def alpha_values(self, pts: np.ndarray) -> np.ndarray:
        return np.column_stack([np.broadcast_to(a(*pts.T), pts.shape[0]) for a in self.alpha])

    def kappa_values(self, pts: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self.kappa(*pts.T), pts.shape[0]).astype(float)


@dataclass(frozen=True)
class SolverConfig:
    domain: BoxDomain
    scheme_space: str  # "chebyshev" | "fourier"
    bc: str  # "dirichlet" | "periodic"
    n_coll: int
    dt: float
    t_final: float
    initial_condition: Callable

    def __post_init__(self):
        if self.scheme_space not in ("chebyshev", "fourier"):
            raise ValueError(f"unknown space scheme {self.scheme_space!r}")
        if self.bc not in ("dirichlet", "periodic"):
            raise ValueError(f"unknown boundary condition {self.bc!r}")
        if self.scheme_space == "fourier" and self.bc != "periodic":
            raise ValueError("fourier collocation requires periodic boundary conditions")
        if self.scheme_space == "chebyshev" and self.bc != "dirichlet":
            raise ValueError("chebyshev collocation requires dirichlet boundary conditions")
        if self.dt <= 0 or self.t_final <= 0:
            raise ValueError("dt and t_final must be positive")
        if self.n_coll < 4:
            raise ValueError("n_coll must be at least 4")


def chebyshev_diff_matrix(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """(points, D) on the n-point Chebyshev-Gauss-Lobatto grid over [a, b].

    Points are returned in ascending order including both endpoints.
    """
    m = n - 1
    k = np.arange(n)
    s = np.cos(np.pi * k / m)  # descending on [-1, 1]
    c = np.ones(n)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** k
    S = np.tile(s, (n, 1)).T
    dS = S - S.T + np.eye(n)
    D = np.outer(c, 1.0 / c) / dS
    D -= np.diag(D.sum(axis=1))
    # flip to ascending order and map to [a, b]
    D = D[::-1, ::-1] * (2.0 / (b - a))
    x = a + (b - a) * (s[::-1] + 1.0) / 2.0
    return x, D


def fourier_diff_matrix(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """(points, D) on the n-point uniform periodic grid over [a, b), n even."""
    if n % 2 != 0:
        raise ValueError("fourier grid size must be even")
    length = b - a
    h = 2.0 * np.pi / n
    x = a + length * np.arange(n) / n
    idx = np.arange(1, n)
    col = np.zeros(n)
    col[1:] = 0.5 * (-1.0) ** idx / np.tan(idx * h / 2.0)
    row = np.zeros(n)
    row[1:] = col[1:][::-1]
    D = scipy.linalg.toeplitz(col, row) * (2.0 * np.pi / length)
    return x, D


def _bary_weights(x: np.ndarray) -> np.ndarray:
    """Barycentric weights for the ascending Chebyshev-Gauss-Lobatto grid."""
    n = x.size
    w = (-1.0) ** np.arange(n)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def _bary_matrix(x: np.ndarray, w: np.ndarray, xq: np.ndarray) -> np.ndarray:
    """Interpolation matrix (P, n): row p maps grid values to the value at xq[p]."""
    diff = xq[:, None] - x[None, :]
    exact = np.isclose(diff, 0.0, rtol=0.0, atol=1e-14)
    diff[exact] = 1.0
    num = w[None, :] / diff
    mat = num / num.sum(axis=1, keepdims=True)
    hit_rows = exact.any(axis=1)
    mat[hit_rows] = 0.0
    mat[exact] = 1.0
    return mat


def _trig_matrix(a: float, length: float, n: int, xq: np.ndarray) -> np.ndarray:
    """Real matrix (P, n) evaluating the trigonometric interpolant at xq."""
    k = np.fft.fftfreq(n, d=1.0 / n)
    theta = 2.0 * np.pi * (xq - a) / length
    E = np.exp(1j * np.outer(theta, k))
    # right-multiplying by the DFT matrix turns grid values into coefficients
    F = np.fft.fft(np.eye(n), axis=0) / n
    return (E @ F).real


class SolutionTrajectory:
    """Stored time levels of the discrete solution with off-grid interpolation.

    Immutable after construction; query methods are pure.
    """

    def __init__(self, config: SolverConfig, axes: tuple, times: np.ndarray,
                 values: np.ndarray, diff_matrices: tuple):
        self.config = config
        self.domain = config.domain
        self.axes = axes  # per-dimension 1D grids
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)  # (n_times, n_grid)
        self.diff_matrices = diff_matrices
        self._bary_w = tuple(_bary_weights(ax) for ax in axes) \
            if config.scheme_space == "chebyshev" else None

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def grid_shape(self) -> tuple:
        return tuple(ax.size for ax in self.axes)

    def grid_points(self) -> np.ndarray:
        """All grid points flattened to (n_grid, d), C order over the axes."""
        return _flat_grid_points(self.axes, self.dim)

    def level_index(self, t: float, allow_interp: bool = False):
        """Index of the stored level at time t, or neighbor pair for interpolation."""
        i = int(np.searchsorted(self.times, t))
        for j in (i - 1, i, i + 1):
            if 0 <= j < self.times.size and abs(self.times[j] - t) <= _TIME_TOL * max(1.0, abs(t)):
                return j
        if not allow_interp:
            raise KeyError(
                f"t={t:g} is not a stored level (nearest stored: "
                f"{self.times[min(max(i - 1, 0), self.times.size - 1)]:g})")
        if not (self.times[0] - _TIME_TOL <= t <= self.times[-1] + _TIME_TOL):
            raise KeyError(f"t={t:g} outside stored range")
        i = min(max(i, 1), self.times.size - 1)
        return (i - 1, i)

    def values_at(self, t: float) -> np.ndarray:
        """Flattened grid values at a stored time level."""
        idx = self.level_index(t)
        return self.values[idx]

    def _interp_matrices(self, pts: np.ndarray) -> list:
        mats = []
        for ell, ax in enumerate(self.axes):
            if self.config.scheme_space == "chebyshev":
                mats.append(_bary_matrix(ax, self._bary_w[ell], pts[:, ell]))
            else:
                a = self.domain.lower[ell]
                length = self.domain.lengths[ell]
                mats.append(_trig_matrix(a, length, ax.size, pts[:, ell]))
        return mats

    def interpolate(self, grid_values: np.ndarray, points) -> np.ndarray:
        """Spectral interpolation of flattened grid values to arbitrary points."""
        pts, single = self.domain.as_points(points)
        mats = self._interp_matrices(pts)
        if self.dim == 1:
            out = mats[0] @ grid_values
        else:
            U = grid_values.reshape(self.grid_shape)
            out = ((mats[0] @ U) * mats[1]).sum(axis=1)
        return float(out[0]) if single else out

    def query(self, t: float, points, allow_time_interp: bool = False):
        """Solution value(s) at time t and the given spatial point(s)."""
        loc = self.level_index(t, allow_interp=allow_time_interp)
        if isinstance(loc, tuple):
            i0, i1 = loc
            t0, t1 = self.times[i0], self.times[i1]
            lam = (t - t0) / (t1 - t0)
            grid_values = (1 - lam) * self.values[i0] + lam * self.values[i1]
        else:
            grid_values = self.values[loc]
        return self.interpolate(grid_values, points)

    def gradient_at(self, t: float, points) -> np.ndarray:
        """Spectral gradient of the stored solution, interpolated to points."""
        grid_values = self.values_at(t)
        pts, single = self.domain.as_points(points)
        out = np.empty((pts.shape[0], self.dim))
        if self.dim == 1:
            out[:, 0] = self.interpolate(self.diff_matrices[0] @ grid_values, pts)
        else:
            U = grid_values.reshape(self.grid_shape)
            out[:, 0] = self.interpolate((self.diff_matrices[0] @ U).ravel(), pts)
            out[:, 1] = self.interpolate((U @ self.diff_matrices[1].T).ravel(), pts)
        return out[0] if single else out


def _grid_and_diff(config: SolverConfig):
    builder = chebyshev_diff_matrix if config.scheme_space == "chebyshev" else fourier_diff_matrix
    axes, mats = [], []
    for a, b in zip(config.domain.lower, config.domain.upper):
        x, D = builder(a, b, config.n_coll)
        axes.append(x)
        mats.append(D)
    return tuple(axes), tuple(mats)


def _flat_grid_points(axes: tuple, dim: int) -> np.ndarray:
    if dim == 1:
        return axes[0][:, None]
    X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel()])


def _boundary_mask(config: SolverConfig, axes: tuple) -> np.ndarray:
    """1.0 at interior unknowns, 0.0 at Dirichlet-pinned grid points."""
    if config.bc == "periodic":
        return np.ones(int(np.prod([ax.size for ax in axes])))
    if len(axes) == 1:
        m = np.ones(axes[0].size)
        m[0] = m[-1] = 0.0
        return m
    mx = np.ones(axes[0].size)
    mx[0] = mx[-1] = 0.0
    my = np.ones(axes[1].size)
    my[0] = my[-1] = 0.0
    return np.outer(mx, my).ravel()


def _assemble_linear_operator(coeffs, pts, axes, mats, dim):
    """Dense (1D) or sparse (2D) matrix for -div(alpha u) + div(kappa grad u)."""
    al = coeffs.alpha_values(pts)
    ka = coeffs.kappa_values(pts)
    if ka.min() < -1e-13:
        raise ValueError("kappa must be nonnegative on the solver grid")
    if dim == 1:
        D = mats[0]
        return -D @ np.diag(al[:, 0]) + D @ np.diag(ka) @ D
    nx, ny = axes[0].size, axes[1].size
    Dx = scipy.sparse.kron(scipy.sparse.csr_matrix(mats[0]), scipy.sparse.identity(ny))
    Dy = scipy.sparse.kron(scipy.sparse.identity(nx), scipy.sparse.csr_matrix(mats[1]))
    d_a1 = scipy.sparse.diags(al[:, 0])
    d_a2 = scipy.sparse.diags(al[:, 1])
    d_k = scipy.sparse.diags(ka)
    return (-Dx @ d_a1 - Dy @ d_a2 + Dx @ d_k @ Dx + Dy @ d_k @ Dy).tocsr()


def _store_indices(store_times, dt: float, n_steps: int) -> dict:
    """Map of step index -> stored slot, widened by two steps for FD stencils."""
    requested = {0, n_steps}  # initial and final states always retrievable
    for t in store_times:
        i = int(round(t / dt))
        if abs(i * dt - t) > 1e-8 * max(1.0, abs(t)):
            raise ValueError(f"store time {t:g} is not commensurate with dt={dt:g}")
        if not 0 <= i <= n_steps:
            raise ValueError(f"store time {t:g} outside [0, t_final]")
        requested.add(i)
    widened = set()
    for i in requested:
        widened.update(j for j in range(i - 2, i + 3) if 0 <= j <= n_steps)
    return {i: slot for slot, i in enumerate(sorted(widened))}


def solve(config: SolverConfig, coeffs: CoefficientFields,
          store_times: Optional[np.ndarray] = None) -> SolutionTrajectory:
    """Advance du/dt = -div(alpha F(u)) + div(kappa grad u) and store snapshots.

    ``store_times`` lists the levels that must be retrievable exactly (they
    are widened by two neighbouring steps to support difference stencils);
    by default every step is stored.
    """
    if coeffs.flux.kind == "burgers" and config.domain.dim != 1:
        raise ValueError("burgers flux is supported in 1D only")

    axes, mats = _grid_and_diff(config)
    traj_pts = _flat_grid_points(axes, config.domain.dim)
    n_grid = traj_pts.shape[0]
    u = np.asarray(config.initial_condition(*traj_pts.T), dtype=float).reshape(n_grid).copy()

    n_steps = int(round(config.t_final / config.dt))
    if abs(n_steps * config.dt - config.t_final) > 1e-8 * config.t_final:
        n_steps = int(np.ceil(config.t_final / config.dt))
    dt = config.dt

    if store_times is None:
        slots = {i: i for i in range(n_steps + 1)}
    else:
        slots = _store_indices(store_times, dt, n_steps)
    stored = np.empty((len(slots), n_grid))
    times = np.empty(len(slots))

    def record(step, vec):
        slot = slots.get(step)
        if slot is not None:
            stored[slot] = vec
            times[slot] = step * dt

    mask = _boundary_mask(config, axes)
    pinned = 1.0 - mask
    record(0, u)

    if coeffs.flux.kind == "linear":
        L = _assemble_linear_operator(coeffs, traj_pts, axes, mats, config.domain.dim)
        if config.domain.dim == 1:
            ident = np.eye(n_grid)
            A = np.diag(pinned) + mask[:, None] * (ident - 0.5 * dt * L)
            B = np.diag(pinned) + mask[:, None] * (ident + 0.5 * dt * L)
            lu = scipy.linalg.lu_factor(A)
            solve_A = lambda rhs: scipy.linalg.lu_solve(lu, rhs)
            apply_B = lambda vec: B @ vec
        else:
            ident = scipy.sparse.identity(n_grid, format="csr")
            d_mask = scipy.sparse.diags(mask)
            d_pin = scipy.sparse.diags(pinned)
            A = (d_pin + d_mask @ (ident - 0.5 * dt * L)).tocsc()
            B = (d_pin + d_mask @ (ident + 0.5 * dt * L)).tocsr()
            lu = scipy.sparse.linalg.splu(A)
            solve_A = lu.solve
            apply_B = lambda vec: B @ vec
        for step in range(1, n_steps + 1):
            rhs = apply_B(u)
            if not np.isfinite(rhs).all():
                raise UnstableSolveError(step, step * dt)
            u = solve_A(rhs)
            if not np.isfinite(u).all():
                raise UnstableSolveError(step, step * dt)
            record(step, u)
    else:
        # IMEX: trapezoidal diffusion, explicit advection (AB2 after Heun startup)
        D = mats[0]
        x = traj_pts[:, 0]
        al = coeffs.alpha_values(traj_pts)[:, 0]
        ka = coeffs.kappa_values(traj_pts)
        if ka.min() < -1e-13:
            raise ValueError("kappa must be nonnegative on the solver grid")
        Kd = D @ np.diag(ka) @ D
        ident = np.eye(n_grid)

        def adv(vec):
            # blow-up is detected via finiteness checks, not float warnings
            with np.errstate(over="ignore", invalid="ignore"):
                return -(D @ (al * coeffs.flux.F(vec)))

        A_half = np.diag(pinned) + mask[:, None] * (ident - 0.5 * dt * Kd)
        lu_half = scipy.linalg.lu_factor(A_half)
        A_full = np.diag(pinned) + mask[:, None] * (ident - dt * Kd)
        lu_full = scipy.linalg.lu_factor(A_full)

        # Heun startup: backward-Euler-diffusion predictor, trapezoidal corrector
        rhs = pinned * u + mask * (u + dt * adv(u))
        u_pred = scipy.linalg.lu_solve(lu_full, rhs)
        rhs = pinned * u + mask * (u + 0.5 * dt * (adv(u) + adv(u_pred)) + 0.5 * dt * (Kd @ u))
        u_new = scipy.linalg.lu_solve(lu_half, rhs)
        adv_prev = adv(u)
        u = u_new
        if not np.isfinite(u).all():
            raise UnstableSolveError(1, dt)
        record(1, u)
        for step in range(2, n_steps + 1):
            adv_curr = adv(u)
            rhs = pinned * u + mask * (
                u + dt * (1.5 * adv_curr - 0.5 * adv_prev) + 0.5 * dt * (Kd @ u))
            if not np.isfinite(rhs).all():
                raise UnstableSolveError(step, step * dt)
            u = scipy.linalg.lu_solve(lu_half, rhs)
            adv_prev = adv_curr
            if not np.isfinite(u).all():
                raise UnstableSolveError(step, step * dt)
            record(step, u)

    return SolutionTrajectory(config, axes, times, stored, mats)
