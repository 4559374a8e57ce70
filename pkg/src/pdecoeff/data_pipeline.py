"""Snapshot sampling, noise injection, filtering and derivative estimation.

The measurement layout is fixed by a quadrature rule: state values are
collected at the rule's points for a random subset of a master set of time
instances.  Noisy data are smoothed by local least-squares polynomials fitted
over neighbouring samples drawn from a densely sampled noisy source; the same
local fits provide spatial derivatives.  Time derivatives come from local
polynomial fits in time (noisy data) or second-order finite differences at
the solver's step size (clean data).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .forward_solver import SolutionTrajectory
from .quadrature import BoundaryFace, BoundaryRule, QuadratureRule

__all__ = [
    "SnapshotSet",
    "FilterConfig",
    "DerivativeEstimates",
    "DenseSource",
    "FilterRankError",
    "sample",
    "add_noise",
    "build_dense_source",
    "filter_snapshots",
    "estimate_derivatives_noiseless",
    "estimate_derivatives_noisy",
    "from_callables",
    "save_snapshots",
    "load_snapshots",
    "export_snapshot_csv",
]

_MAGIC = b"PDCSNAP1"


class FilterRankError(RuntimeError):
    """Local least-squares fit was rank deficient at the listed (m, q) pairs."""

    def __init__(self, pairs):
        super().__init__(f"rank-deficient local fits at (m, q) pairs: {pairs[:10]}"
                         + ("..." if len(pairs) > 10 else ""))
        self.pairs = pairs


@dataclass(frozen=True)
class FilterConfig:
    """Local polynomial filter: degree and neighbourhood size."""

    poly_degree: int = 10
    n_neighbors: int = 300

    def n_coefficients(self, dim: int) -> int:
        if dim == 1:
            return self.poly_degree + 1
        return (self.poly_degree + 1) * (self.poly_degree + 2) // 2

    def validate(self, dim: int):
        need = self.n_coefficients(dim)
        if self.n_neighbors <= need:
            raise ValueError(
                f"n_neighbors={self.n_neighbors} must exceed the "
                f"{need} coefficients of a degree-{self.poly_degree} fit in {dim}D")


@dataclass(frozen=True)
class SnapshotSet:
    """State samples u_{m,q} on a quadrature layout at M sampled times."""

    times: np.ndarray
    master_times: np.ndarray
    interior_rule: QuadratureRule
    interior_values: np.ndarray  # (M, Q)
    boundary_rule: BoundaryRule
    boundary_values: np.ndarray  # (M, B)
    noise_level: float = 0.0
    rng_seed: int = 0
    filtered: bool = False

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "master_times", np.asarray(self.master_times, dtype=float))
        object.__setattr__(self, "interior_values", np.asarray(self.interior_values, dtype=float))
        object.__setattr__(self, "boundary_values", np.asarray(self.boundary_values, dtype=float))
        m, q = self.interior_values.shape
        if m != self.times.size or q != self.interior_rule.n_points:
            raise ValueError("interior value array does not match times/rule")
        if self.boundary_values.shape != (m, self.boundary_rule.n_points):
            raise ValueError("boundary value array does not match times/rule")

    @property
    def n_times(self) -> int:
        return self.times.size

    @property
    def dim(self) -> int:
        return self.interior_rule.points.shape[1]

    @property
    def boundary_points(self) -> np.ndarray:
        return self.boundary_rule.all_points

    @property
    def boundary_normals(self) -> np.ndarray:
        return np.vstack([
            np.tile(f.normal, (f.points.shape[0], 1)) for f in self.boundary_rule.faces])

    @property
    def boundary_weights(self) -> np.ndarray:
        return np.concatenate([f.weights for f in self.boundary_rule.faces])


@dataclass(frozen=True)
class DerivativeEstimates:
    """Estimated derivatives of the state on the snapshot layout.

    Interior gradients and diagonal second derivatives are populated only for
    the strong-form (collocation) path; the weak-form path never needs them.
    """

    u_t_interior: np.ndarray  # (M, Q)
    u_t_boundary: np.ndarray  # (M, B)
    grad_u_boundary: np.ndarray  # (M, B, d)
    grad_u_interior: Optional[np.ndarray] = None  # (M, Q, d)
    hess_diag_interior: Optional[np.ndarray] = None  # (M, Q, d)

    def __post_init__(self):
        for name in ("u_t_interior", "u_t_boundary", "grad_u_boundary"):
            if not np.isfinite(getattr(self, name)).all():
                raise ValueError(f"non-finite values in {name}")


@dataclass(frozen=True)
class DenseSource:
    """Densely sampled noisy data backing the filter and derivative fits.

    Spatial values are fresh noisy samples on a dense uniform grid at each
    snapshot time; the time series hold noisy values at every master time for
    each snapshot point.
    """

    spatial_grid: np.ndarray  # (P, d)
    spatial_values: np.ndarray  # (M, P)
    master_times: np.ndarray  # (K,)
    series_interior: np.ndarray  # (K, Q)
    series_boundary: np.ndarray  # (K, B)
    noise_level: float
    rng_seed: int


def sample(traj: SolutionTrajectory, master_times, n_samples: int,
           interior: QuadratureRule, boundary: BoundaryRule, seed: int,
           with_replacement: bool = False) -> SnapshotSet:
    """Draw snapshot times uniformly from the master set and query the solver.

    Sampling is without replacement by default (duplicate times add no
    information); pass ``with_replacement=True`` for plain i.i.d. draws.
    """
    master = np.sort(np.asarray(master_times, dtype=float))
    if n_samples > master.size and not with_replacement:
        raise ValueError(f"cannot draw {n_samples} times from {master.size} without replacement")
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(master, size=n_samples, replace=with_replacement))
    b_pts = boundary.all_points
    interior_vals = np.empty((n_samples, interior.n_points))
    boundary_vals = np.empty((n_samples, b_pts.shape[0]))
    for m, t in enumerate(chosen):
        interior_vals[m] = traj.query(t, interior.points)
        boundary_vals[m] = traj.query(t, b_pts)
    return SnapshotSet(
        times=chosen, master_times=master, interior_rule=interior,
        interior_values=interior_vals, boundary_rule=boundary,
        boundary_values=boundary_vals, noise_level=0.0, rng_seed=seed, filtered=False)


def add_noise(snapshots: SnapshotSet, epsilon: float, seed: int) -> SnapshotSet:
    """Add i.i.d. N(0, epsilon^2) noise to every interior and boundary value."""
    if epsilon < 0:
        raise ValueError("noise level must be nonnegative")
    if epsilon == 0:
        return replace(snapshots, noise_level=0.0, rng_seed=seed)
    rng = np.random.default_rng(seed)
    interior = snapshots.interior_values + epsilon * rng.standard_normal(
        snapshots.interior_values.shape)
    boundary = snapshots.boundary_values + epsilon * rng.standard_normal(
        snapshots.boundary_values.shape)
    return replace(snapshots, interior_values=interior, boundary_values=boundary,
                   noise_level=epsilon, rng_seed=seed)


def build_dense_source(traj: SolutionTrajectory, snapshots: SnapshotSet,
                       epsilon: float, seed: int,
                       n_spatial_per_dim: Optional[int] = None) -> DenseSource:
    """Noisy dense companion data: a fine spatial grid at each snapshot time
    plus full master-time series at every snapshot point (fresh noise draws).
    """
    dim = snapshots.dim
    if n_spatial_per_dim is None:
        n_spatial_per_dim = 2000 if dim == 1 else 96
    axes = [np.linspace(a, b, n_spatial_per_dim)
            for a, b in zip(traj.domain.lower, traj.domain.upper)]
    if dim == 1:
        grid = axes[0][:, None]
    else:
        X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
        grid = np.column_stack([X.ravel(), Y.ravel()])

    master = snapshots.master_times
    spatial = np.empty((snapshots.n_times, grid.shape[0]))
    for m, t in enumerate(snapshots.times):
        spatial[m] = traj.query(t, grid)
    all_pts = np.vstack([snapshots.interior_rule.points, snapshots.boundary_points])
    series = np.empty((master.size, all_pts.shape[0]))
    for k, t in enumerate(master):
        series[k] = traj.query(t, all_pts)

    rng = np.random.default_rng(seed)
    if epsilon > 0:
        spatial = spatial + epsilon * rng.standard_normal(spatial.shape)
        series = series + epsilon * rng.standard_normal(series.shape)
    q = snapshots.interior_rule.n_points
    return DenseSource(
        spatial_grid=grid, spatial_values=spatial, master_times=master,
        series_interior=series[:, :q], series_boundary=series[:, q:],
        noise_level=epsilon, rng_seed=seed)


def _monomial_design(ds: np.ndarray, degree: int) -> tuple[np.ndarray, list]:
    """Design matrix of scaled monomials up to total degree; returns exponents."""
    if ds.shape[1] == 1:
        expo = [(k,) for k in range(degree + 1)]
        cols = [ds[:, 0] ** k for k in range(degree + 1)]
    else:
        expo = [(i, j) for tot in range(degree + 1)
                for i in range(tot + 1) for j in [tot - i]]
        cols = [ds[:, 0] ** i * ds[:, 1] ** j for i, j in expo]
    return np.column_stack(cols), expo


def _local_fit(points: np.ndarray, values: np.ndarray, center: np.ndarray,
               degree: int) -> tuple[np.ndarray, np.ndarray, int]:
    """Least-squares polynomial fit in coordinates centred and scaled at center.

    Returns (coefficients, per-dimension scale, rank).
    """
    ds = points - center
    scale = np.abs(ds).max(axis=0)
    scale[scale == 0] = 1.0
    ds = ds / scale
    design, _ = _monomial_design(ds, degree)
    coef, _, rank, _ = np.linalg.lstsq(design, values, rcond=None)
    return coef, scale, rank


def _fit_eval(coef, scale, dim, degree):
    """Value, gradient and diagonal second derivatives at the fit centre."""
    if dim == 1:
        value = coef[0]
        grad = np.array([coef[1] / scale[0]]) if degree >= 1 else np.zeros(1)
        hess = np.array([2 * coef[2] / scale[0] ** 2]) if degree >= 2 else np.zeros(1)
        return value, grad, hess
    _, expo = _monomial_design(np.zeros((1, dim)), degree)
    lookup = {e: c for e, c in zip(expo, coef)}
    value = lookup[(0, 0)]
    grad = np.array([lookup.get((1, 0), 0.0) / scale[0],
                     lookup.get((0, 1), 0.0) / scale[1]])
    hess = np.array([2 * lookup.get((2, 0), 0.0) / scale[0] ** 2,
                     2 * lookup.get((0, 2), 0.0) / scale[1] ** 2])
    return value, grad, hess


def _local_estimates(targets: np.ndarray, dense_values: np.ndarray, tree: cKDTree,
                     grid: np.ndarray, cfg: FilterConfig):
    """Fit around each target point; returns values, gradients, second derivatives."""
    dim = targets.shape[1]
    n_pts = targets.shape[0]
    values = np.empty(n_pts)
    grads = np.empty((n_pts, dim))
    hess = np.empty((n_pts, dim))
    bad = []
    _, idx = tree.query(targets, k=cfg.n_neighbors)
    need = cfg.n_coefficients(dim)
    for p in range(n_pts):
        coef, scale, rank = _local_fit(grid[idx[p]], dense_values[idx[p]],
                                       targets[p], cfg.poly_degree)
        if rank < need:
            bad.append(p)
            continue
        values[p], grads[p], hess[p] = _fit_eval(coef, scale, dim, cfg.poly_degree)
    return values, grads, hess, bad


def filter_snapshots(snapshots: SnapshotSet, cfg: FilterConfig,
                     dense: DenseSource) -> SnapshotSet:
    """Replace each sample by the value of a local least-squares polynomial.

    The fit at (m, q) uses the n_neighbors dense noisy samples nearest x_q at
    time t_m; boundary samples are filtered the same way.
    """
    cfg.validate(snapshots.dim)
    tree = cKDTree(dense.spatial_grid)
    interior = np.empty_like(snapshots.interior_values)
    boundary = np.empty_like(snapshots.boundary_values)
    targets_i = snapshots.interior_rule.points
    targets_b = snapshots.boundary_points
    failures = []
    for m in range(snapshots.n_times):
        vals_i, _, _, bad_i = _local_estimates(
            targets_i, dense.spatial_values[m], tree, dense.spatial_grid, cfg)
        vals_b, _, _, bad_b = _local_estimates(
            targets_b, dense.spatial_values[m], tree, dense.spatial_grid, cfg)
        failures += [(m, q) for q in bad_i] + [(m, targets_i.shape[0] + q) for q in bad_b]
        interior[m] = vals_i
        boundary[m] = vals_b
    if failures:
        raise FilterRankError(failures)
    return replace(snapshots, interior_values=interior, boundary_values=boundary,
                   filtered=True)


def _time_derivative_from_series(times_out: np.ndarray, master: np.ndarray,
                                 series: np.ndarray, cfg: FilterConfig) -> np.ndarray:
    """d/dt at each requested time from local polynomial fits of the series."""
    if master.size < cfg.n_neighbors:
        raise ValueError(
            f"need at least n_neighbors={cfg.n_neighbors} master times, have {master.size}")
    out = np.empty((times_out.size, series.shape[1]))
    for m, t in enumerate(times_out):
        nearest = np.argsort(np.abs(master - t))[:cfg.n_neighbors]
        nearest.sort()
        ts = master[nearest] - t
        scale = np.abs(ts).max()
        design = np.vander(ts / scale, cfg.poly_degree + 1, increasing=True)
        coef, _, rank, _ = np.linalg.lstsq(design, series[nearest], rcond=None)
        if rank < cfg.poly_degree + 1:
            raise FilterRankError([(m, -1)])
        out[m] = coef[1] / scale
    return out


def _time_derivative_fd(traj: SolutionTrajectory, times_out: np.ndarray,
                        points: np.ndarray) -> np.ndarray:
    """Second-order differences at the solver step size (one-sided at the ends)."""
    dt = traj.config.dt
    t_final = traj.times[-1]
    out = np.empty((times_out.size, points.shape[0]))
    for m, t in enumerate(times_out):
        if t - dt >= -1e-12 and t + dt <= t_final + 1e-12:
            up = traj.query(t + dt, points)
            um = traj.query(t - dt, points)
            out[m] = (up - um) / (2 * dt)
        elif t - dt < 0:
            u0 = traj.query(t, points)
            u1 = traj.query(t + dt, points)
            u2 = traj.query(t + 2 * dt, points)
            out[m] = (-3 * u0 + 4 * u1 - u2) / (2 * dt)
        else:
            u0 = traj.query(t, points)
            u1 = traj.query(t - dt, points)
            u2 = traj.query(t - 2 * dt, points)
            out[m] = (3 * u0 - 4 * u1 + u2) / (2 * dt)
    return out


def _grid_fd(axis_pts: np.ndarray, values: np.ndarray, order: int,
             periodic: bool, period: float) -> np.ndarray:
    """3-point finite-difference derivative along axis 0 of a grid-value array."""
    x = axis_pts
    if periodic:
        xe = np.concatenate([[x[0] - (period - (x[-1] - x[0]))], x,
                             [x[-1] + (period - (x[-1] - x[0]))]])
        ve = np.concatenate([values[-1:], values, values[:1]], axis=0)
    else:
        xe, ve = x, values
    h1 = xe[1:-1] - xe[:-2]
    h2 = xe[2:] - xe[1:-1]
    shape = (-1,) + (1,) * (values.ndim - 1)
    h1 = h1.reshape(shape)
    h2 = h2.reshape(shape)
    if order == 1:
        mid = (-h2 / (h1 * (h1 + h2)) * ve[:-2]
               + (h2 - h1) / (h1 * h2) * ve[1:-1]
               + h1 / (h2 * (h1 + h2)) * ve[2:])
    else:
        mid = 2 * (ve[:-2] / (h1 * (h1 + h2))
                   - ve[1:-1] / (h1 * h2)
                   + ve[2:] / (h2 * (h1 + h2)))
    if periodic:
        return mid
    out = np.empty_like(values)
    out[1:-1] = mid
    ha = x[1] - x[0]
    hb = x[2] - x[1]
    hy = x[-1] - x[-2]
    hz = x[-2] - x[-3]
    if order == 1:
        out[0] = (-(2 * ha + hb) / (ha * (ha + hb)) * values[0]
                  + (ha + hb) / (ha * hb) * values[1]
                  - ha / (hb * (ha + hb)) * values[2])
        out[-1] = ((2 * hy + hz) / (hy * (hy + hz)) * values[-1]
                   - (hy + hz) / (hy * hz) * values[-2]
                   + hy / (hz * (hy + hz)) * values[-3])
    else:
        out[0] = 2 * (values[0] / (ha * (ha + hb))
                      - values[1] / (ha * hb)
                      + values[2] / (hb * (ha + hb)))
        out[-1] = 2 * (values[-1] / (hy * (hy + hz))
                       - values[-2] / (hy * hz)
                       + values[-3] / (hz * (hy + hz)))
    return out


def _grid_spatial_derivatives(traj: SolutionTrajectory, t: float, order: int) -> list:
    """Per-axis FD derivative grids of the stored solution at time t."""
    periodic = traj.config.bc == "periodic"
    vals = traj.values_at(t)
    out = []
    if traj.dim == 1:
        out.append(_grid_fd(traj.axes[0], vals, order, periodic, traj.domain.lengths[0]))
    else:
        U = vals.reshape(traj.grid_shape)
        out.append(_grid_fd(traj.axes[0], U, order, periodic,
                            traj.domain.lengths[0]).ravel())
        Ut = _grid_fd(traj.axes[1], U.T, order, periodic, traj.domain.lengths[1])
        out.append(Ut.T.ravel())
    return out


def _fd_gradient_at(traj, times, points, order=1):
    out = np.empty((times.size, points.shape[0], traj.dim))
    for m, t in enumerate(times):
        for ax, dvals in enumerate(_grid_spatial_derivatives(traj, t, order)):
            out[m, :, ax] = traj.interpolate(dvals, points)
    return out


def estimate_derivatives_noiseless(traj: SolutionTrajectory, snapshots: SnapshotSet,
                                   include_interior: bool = False,
                                   gradient_method: str = "spectral") -> DerivativeEstimates:
    """Derivative estimates for clean data, from the resolved solver grid.

    Time derivatives use second-order differences at the solver step size.
    Spatial gradients are spectral by default (differentiation matrix applied
    to the stored grid values); ``gradient_method="fd"`` selects second-order
    finite differences on the solver grid instead.
    """
    pts_i = snapshots.interior_rule.points
    pts_b = snapshots.boundary_points
    u_t_i = _time_derivative_fd(traj, snapshots.times, pts_i)
    u_t_b = _time_derivative_fd(traj, snapshots.times, pts_b)
    if gradient_method == "spectral":
        grad_b = np.stack([traj.gradient_at(t, pts_b) for t in snapshots.times])
    elif gradient_method == "fd":
        grad_b = _fd_gradient_at(traj, snapshots.times, pts_b)
    else:
        raise ValueError(f"unknown gradient_method {gradient_method!r}")
    grad_i = hess_i = None
    if include_interior:
        if gradient_method == "spectral":
            grad_i = np.stack([traj.gradient_at(t, pts_i) for t in snapshots.times])
        else:
            grad_i = _fd_gradient_at(traj, snapshots.times, pts_i)
        hess_i = _fd_gradient_at(traj, snapshots.times, pts_i, order=2)
    return DerivativeEstimates(u_t_interior=u_t_i, u_t_boundary=u_t_b,
                               grad_u_boundary=grad_b, grad_u_interior=grad_i,
                               hess_diag_interior=hess_i)


def estimate_derivatives_noisy(snapshots: SnapshotSet, dense: DenseSource,
                               cfg: FilterConfig,
                               include_interior: bool = False) -> DerivativeEstimates:
    """Derivative estimates for noisy data via local polynomial fits.

    Time derivatives differentiate degree-``poly_degree`` fits over the
    nearest master times; spatial derivatives differentiate the local spatial
    fits used by the filter.
    """
    cfg.validate(snapshots.dim)
    q = snapshots.interior_rule.n_points
    u_t_i = _time_derivative_from_series(
        snapshots.times, dense.master_times, dense.series_interior, cfg)
    u_t_b = _time_derivative_from_series(
        snapshots.times, dense.master_times, dense.series_boundary, cfg)

    tree = cKDTree(dense.spatial_grid)
    pts_b = snapshots.boundary_points
    grad_b = np.empty((snapshots.n_times, pts_b.shape[0], snapshots.dim))
    grad_i = hess_i = None
    if include_interior:
        grad_i = np.empty((snapshots.n_times, q, snapshots.dim))
        hess_i = np.empty((snapshots.n_times, q, snapshots.dim))
    failures = []
    for m in range(snapshots.n_times):
        _, g_b, _, bad = _local_estimates(
            pts_b, dense.spatial_values[m], tree, dense.spatial_grid, cfg)
        failures += [(m, p) for p in bad]
        grad_b[m] = g_b
        if include_interior:
            _, g_i, h_i, bad = _local_estimates(
                snapshots.interior_rule.points, dense.spatial_values[m], tree,
                dense.spatial_grid, cfg)
            failures += [(m, p) for p in bad]
            grad_i[m] = g_i
            hess_i[m] = h_i
    if failures:
        raise FilterRankError(failures)
    return DerivativeEstimates(u_t_interior=u_t_i, u_t_boundary=u_t_b,
                               grad_u_boundary=grad_b, grad_u_interior=grad_i,
                               hess_diag_interior=hess_i)


def from_callables(times, interior: QuadratureRule, boundary: BoundaryRule,
                   u, u_t, grad_u, hess_diag=None) -> tuple:
    """Build (SnapshotSet, DerivativeEstimates) from analytic fields.

    Callables receive (t, x) in 1D or (t, x, y) in 2D with array coordinates.
    Used for manufactured-data verification; master set equals the times.
    """
    times = np.asarray(times, dtype=float)
    pts_i = interior.points
    pts_b = boundary.all_points
    dim = pts_i.shape[1]

    def ev(fn, pts, t):
        return np.broadcast_to(fn(t, *pts.T), pts.shape[0]).astype(float)

    vals_i = np.stack([ev(u, pts_i, t) for t in times])
    vals_b = np.stack([ev(u, pts_b, t) for t in times])
    u_t_i = np.stack([ev(u_t, pts_i, t) for t in times])
    u_t_b = np.stack([ev(u_t, pts_b, t) for t in times])
    grad_fns = grad_u if isinstance(grad_u, (tuple, list)) else (grad_u,)
    grad_b = np.stack([
        np.column_stack([ev(g, pts_b, t) for g in grad_fns]) for t in times])
    grad_i = hess_i = None
    if hess_diag is not None:
        hess_fns = hess_diag if isinstance(hess_diag, (tuple, list)) else (hess_diag,)
        grad_i = np.stack([
            np.column_stack([ev(g, pts_i, t) for g in grad_fns]) for t in times])
        hess_i = np.stack([
            np.column_stack([ev(h, pts_i, t) for h in hess_fns]) for t in times])
    snaps = SnapshotSet(
        times=times, master_times=times, interior_rule=interior,
        interior_values=vals_i, boundary_rule=boundary, boundary_values=vals_b)
    derivs = DerivativeEstimates(
        u_t_interior=u_t_i, u_t_boundary=u_t_b, grad_u_boundary=grad_b,
        grad_u_interior=grad_i, hess_diag_interior=hess_i)
    return snaps, derivs


# --- snapshot container format -------------------------------------------
#
# Little-endian layout:
#   magic "PDCSNAP1" | int32 version=1 | int32 dim | int32 M | int32 Q
#   int32 n_faces | int64 rng_seed | float64 noise_level | int32 filtered
#   int32 exactness_degree | int32 K (master size)
#   float64[K] master_times | float64[M] times
#   float64[Q*dim] interior points | float64[Q] interior weights
#   float64[M*Q] interior values
#   per face: int32 n_pts | float64[dim] normal | float64[n_pts*dim] points
#             | float64[n_pts] weights
#   float64[M*B] boundary values (faces concatenated in declaration order)


def _write_array(fh, arr):
    fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def save_snapshots(snapshots: SnapshotSet, path):
    """Write the snapshot container (bit-exact: fixed layout, little-endian)."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<5i", 1, snapshots.dim, snapshots.n_times,
                             snapshots.interior_rule.n_points,
                             len(snapshots.boundary_rule.faces)))
        fh.write(struct.pack("<qdii", snapshots.rng_seed, snapshots.noise_level,
                             int(snapshots.filtered),
                             snapshots.interior_rule.exactness_degree))
        fh.write(struct.pack("<i", snapshots.master_times.size))
        _write_array(fh, snapshots.master_times)
        _write_array(fh, snapshots.times)
        _write_array(fh, snapshots.interior_rule.points)
        _write_array(fh, snapshots.interior_rule.weights)
        _write_array(fh, snapshots.interior_values)
        for face in snapshots.boundary_rule.faces:
            fh.write(struct.pack("<i", face.points.shape[0]))
            _write_array(fh, face.normal)
            _write_array(fh, face.points)
            _write_array(fh, face.weights)
        _write_array(fh, snapshots.boundary_values)


def _read_array(fh, count):
    return np.frombuffer(fh.read(8 * count), dtype="<f8").copy()


def load_snapshots(path) -> SnapshotSet:
    with open(path, "rb") as fh:
        if fh.read(8) != _MAGIC:
            raise ValueError(f"{path} is not a snapshot container")
        version, dim, m, q, n_faces = struct.unpack("<5i", fh.read(20))
        if version != 1:
            raise ValueError(f"unsupported container version {version}")
        seed, noise_level, filtered, exactness = struct.unpack("<qdii", fh.read(24))
        k = struct.unpack("<i", fh.read(4))[0]
        master = _read_array(fh, k)
        times = _read_array(fh, m)
        pts = _read_array(fh, q * dim).reshape(q, dim)
        wts = _read_array(fh, q)
        interior_vals = _read_array(fh, m * q).reshape(m, q)
        faces = []
        for _ in range(n_faces):
            n_pts = struct.unpack("<i", fh.read(4))[0]
            normal = _read_array(fh, dim)
            f_pts = _read_array(fh, n_pts * dim).reshape(n_pts, dim)
            f_wts = _read_array(fh, n_pts)
            faces.append(BoundaryFace(points=f_pts, weights=f_wts, normal=normal))
        b_total = sum(f.points.shape[0] for f in faces)
        boundary_vals = _read_array(fh, m * b_total).reshape(m, b_total)
    return SnapshotSet(
        times=times, master_times=master,
        interior_rule=QuadratureRule(points=pts, weights=wts, exactness_degree=exactness),
        interior_values=interior_vals, boundary_rule=BoundaryRule(faces=tuple(faces)),
        boundary_values=boundary_vals, noise_level=noise_level, rng_seed=seed,
        filtered=bool(filtered))


def export_snapshot_csv(snapshots: SnapshotSet, path):
    """One row per interior sample (m, q): t, coordinates, u."""
    coords = "x" if snapshots.dim == 1 else "x,y"
    with open(path, "w") as fh:
        fh.write(f"t,{coords},u\n")
        for m, t in enumerate(snapshots.times):
            for q in range(snapshots.interior_rule.n_points):
                xs = ",".join(f"{c:.17g}" for c in snapshots.interior_rule.points[q])
                fh.write(f"{t:.17g},{xs},{snapshots.interior_values[m, q]:.17g}\n")
