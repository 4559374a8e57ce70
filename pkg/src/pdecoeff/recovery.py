"""Least-squares recovery of advection/diffusion coefficient fields.

The weak-form (Galerkin) path projects the PDE residual onto a test basis.
Integration by parts moves spatial derivatives off the state everywhere except
the domain boundary, so assembly needs only state values at the quadrature
points, time derivatives, and boundary gradients.  Per time sample the test
projections are linear in the unknown expansion coefficients,

    E(t_m) c ~ b(t_m),

and the weighted normal equations accumulate into a symmetric positive
semidefinite matrix whose nonsingularity certifies unique recovery.  The
strong-form (collocation) alternative evaluates the PDE residual pointwise and
additionally requires interior gradients and second derivatives of the state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .basis import BasisSet
from .data_pipeline import DerivativeEstimates, SnapshotSet
from .forward_solver import FluxSpec

__all__ = [
    "RecoveryConfig",
    "GalerkinSystem",
    "CoefficientSolution",
    "NonUniqueSolutionError",
    "assemble_A_block",
    "assemble_K_block",
    "assemble_b",
    "build_system",
    "solve_galerkin",
    "solve_collocation",
    "evaluate_solution",
    "save_solution",
    "load_solution",
]


class NonUniqueSolutionError(RuntimeError):
    """The normal matrix is numerically singular: the data admit multiple
    coefficient fields (solvability condition violated)."""

    def __init__(self, eig_ratio: float, null_basis: np.ndarray):
        super().__init__(
            f"normal matrix numerically singular (min/max eigenvalue ratio "
            f"{eig_ratio:.3e}); recovered coefficients are not unique")
        self.eig_ratio = eig_ratio
        self.null_basis = null_basis


@dataclass(frozen=True)
class RecoveryConfig:
    """Trial/test spaces and solve options for coefficient recovery.

    ``unknowns`` selects which coefficient fields are treated as unknown:
    "both", "alpha" (diffusivity known to vanish) or "kappa" (velocity known
    to vanish), matching the pure-advection and pure-diffusion sub-problems.
    """

    trial_basis: BasisSet
    test_basis: BasisSet
    flux: FluxSpec
    method: str = "galerkin"
    unknowns: str = "both"
    weights: Optional[np.ndarray] = None
    rank_tol: float = 1e-12
    ridge: float = 0.0

    def __post_init__(self):
        if self.method not in ("galerkin", "collocation"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.unknowns not in ("both", "alpha", "kappa"):
            raise ValueError(f"unknown unknowns selector {self.unknowns!r}")
        if self.trial_basis.dim != self.test_basis.dim:
            raise ValueError("trial and test bases live on different dimensions")

    @property
    def dim(self) -> int:
        return self.trial_basis.dim

    @property
    def n_alpha_blocks(self) -> int:
        return self.dim if self.unknowns in ("both", "alpha") else 0

    @property
    def has_kappa(self) -> bool:
        return self.unknowns in ("both", "kappa")

    @property
    def n_unknowns(self) -> int:
        return (self.n_alpha_blocks + int(self.has_kappa)) * self.trial_basis.size

    def sample_weights(self, n_times: int) -> np.ndarray:
        if self.weights is None:
            return np.full(n_times, 1.0 / n_times)
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (n_times,) or (w <= 0).any():
            raise ValueError("weights must be positive and match the number of time samples")
        return w


@dataclass
class _AssemblyTables:
    """Basis evaluations on the snapshot layout, shared across time samples."""

    phi: np.ndarray  # (Q, N) trial values
    dphi: np.ndarray  # (Q, N, d)
    psi: np.ndarray  # (Q, NG) test values
    dpsi: np.ndarray  # (Q, NG, d)
    lap_psi: np.ndarray  # (Q, NG)
    w: np.ndarray  # (Q,)
    phi_b: np.ndarray  # (B, N)
    psi_b: np.ndarray  # (B, NG)
    dpsi_b_n: np.ndarray  # (B, NG) test normal derivative on the boundary
    w_b: np.ndarray  # (B,)
    normals: np.ndarray  # (B, d)


def _tables(cfg: RecoveryConfig, snapshots: SnapshotSet) -> _AssemblyTables:
    trial, test = cfg.trial_basis, cfg.test_basis
    pts = snapshots.interior_rule.points
    pts_b = snapshots.boundary_points
    normals = snapshots.boundary_normals
    dpsi_b = test.eval_grad(pts_b)
    return _AssemblyTables(
        phi=trial.eval(pts), dphi=trial.eval_grad(pts),
        psi=test.eval(pts), dpsi=test.eval_grad(pts), lap_psi=test.eval_laplacian(pts),
        w=snapshots.interior_rule.weights,
        phi_b=trial.eval(pts_b), psi_b=test.eval(pts_b),
        dpsi_b_n=np.einsum("bjd,bd->bj", dpsi_b, normals),
        w_b=snapshots.boundary_weights, normals=normals)


def assemble_A_block(tables: _AssemblyTables, ell: int, flux_u: np.ndarray,
                     flux_u_b: np.ndarray) -> np.ndarray:
    """Advection coupling for velocity component ell at one time sample:

        A_ji = boundary integral of F(u) psi_j phi_i n_ell
             - interior integral of F(u) d(psi_j)/dx_ell phi_i
    """
    bnd = tables.psi_b.T @ ((tables.w_b * flux_u_b * tables.normals[:, ell])[:, None]
                            * tables.phi_b)
    interior = tables.dpsi[:, :, ell].T @ ((tables.w * flux_u)[:, None] * tables.phi)
    return bnd - interior


def assemble_K_block(tables: _AssemblyTables, u: np.ndarray, u_b: np.ndarray,
                     grad_u_b_n: np.ndarray) -> np.ndarray:
    """Diffusion coupling at one time sample:

        K_ji = boundary integral of psi_j phi_i (grad u . n)
             - boundary integral of u phi_i (grad psi_j . n)
             + interior integral of u (grad phi_i . grad psi_j + phi_i lap psi_j)

    Only boundary gradients of the state appear; the interior needs values only.
    """
    t1 = tables.psi_b.T @ ((tables.w_b * grad_u_b_n)[:, None] * tables.phi_b)
    t2 = tables.dpsi_b_n.T @ ((tables.w_b * u_b)[:, None] * tables.phi_b)
    wu = tables.w * u
    t3 = tables.lap_psi.T @ (wu[:, None] * tables.phi)
    for ell in range(tables.dphi.shape[2]):
        t3 += tables.dpsi[:, :, ell].T @ (wu[:, None] * tables.dphi[:, :, ell])
    return t1 - t2 + t3


def assemble_b(tables: _AssemblyTables, u_t: np.ndarray) -> np.ndarray:
    """Projection of the time derivative: b_j = interior integral of u_t psi_j."""
    return tables.psi.T @ (tables.w * u_t)


def _assemble_E(cfg: RecoveryConfig, tables: _AssemblyTables, snapshots: SnapshotSet,
                derivs: DerivativeEstimates, m: int) -> np.ndarray:
    """E(t_m): advection blocks enter negated, the diffusion block unnegated."""
    u = snapshots.interior_values[m]
    u_b = snapshots.boundary_values[m]
    blocks = []
    if cfg.n_alpha_blocks:
        flux_u = cfg.flux.F(u)
        flux_u_b = cfg.flux.F(u_b)
        for ell in range(cfg.dim):
            blocks.append(-assemble_A_block(tables, ell, flux_u, flux_u_b))
    if cfg.has_kappa:
        grad_u_b_n = np.einsum("bd,bd->b", derivs.grad_u_boundary[m], tables.normals)
        blocks.append(assemble_K_block(tables, u, u_b, grad_u_b_n))
    return np.hstack(blocks)


@dataclass
class GalerkinSystem:
    """Per-time-sample projections and the accumulated normal equations."""

    config: RecoveryConfig
    E_blocks: list  # M arrays (NG, n_unknowns)
    b_vecs: np.ndarray  # (M, NG)
    weights: np.ndarray  # (M,)
    Xi: np.ndarray  # (n_unknowns, n_unknowns), symmetric PSD
    rhs: np.ndarray  # (n_unknowns,)

    def objective(self, c_active: np.ndarray) -> float:
        """J(c): weighted sum of squared projection residuals."""
        return float(sum(
            w * np.sum((E @ c_active - b) ** 2)
            for w, E, b in zip(self.weights, self.E_blocks, self.b_vecs)))


def build_system(cfg: RecoveryConfig, snapshots: SnapshotSet,
                 derivs: DerivativeEstimates) -> GalerkinSystem:
    """Assemble E(t_m), b(t_m) for every sample and accumulate the normal
    equations in fixed time order (deterministic reduction)."""
    m_times = snapshots.n_times
    n_g = cfg.test_basis.size
    if m_times * n_g < cfg.n_unknowns:
        raise ValueError(
            f"underdetermined: M*N_G = {m_times * n_g} < {cfg.n_unknowns} unknowns")
    tables = _tables(cfg, snapshots)
    weights = cfg.sample_weights(m_times)
    E_blocks = []
    b_vecs = np.empty((m_times, n_g))
    xi = np.zeros((cfg.n_unknowns, cfg.n_unknowns))
    rhs = np.zeros(cfg.n_unknowns)
    for m in range(m_times):
        E = _assemble_E(cfg, tables, snapshots, derivs, m)
        b = assemble_b(tables, derivs.u_t_interior[m])
        E_blocks.append(E)
        b_vecs[m] = b
        xi += weights[m] * (E.T @ E)
        rhs += weights[m] * (E.T @ b)
    xi = 0.5 * (xi + xi.T)
    return GalerkinSystem(config=cfg, E_blocks=E_blocks, b_vecs=b_vecs,
                          weights=weights, Xi=xi, rhs=rhs)


@dataclass
class CoefficientSolution:
    """Recovered expansion coefficients and reconstructed fields.

    ``c`` is the full stacked vector [a_1; ...; a_d; k] over the trial basis;
    blocks that were not treated as unknown are zero.  ``alpha`` / ``kappa``
    are callables (None when the corresponding field was not recovered).
    """

    config: RecoveryConfig
    c: np.ndarray
    residual: float
    xi_min_eig: float
    xi_eig_ratio: float

    @property
    def trial_basis(self) -> BasisSet:
        return self.config.trial_basis

    @property
    def alpha_coefficients(self) -> Optional[np.ndarray]:
        if self.config.n_alpha_blocks == 0:
            return None
        n = self.trial_basis.size
        return self.c[:self.config.dim * n].reshape(self.config.dim, n)

    @property
    def kappa_coefficients(self) -> Optional[np.ndarray]:
        if not self.config.has_kappa:
            return None
        return self.c[self.config.dim * self.trial_basis.size:]

    @property
    def alpha(self) -> Optional[tuple]:
        coefs = self.alpha_coefficients
        if coefs is None:
            return None
        return tuple(self.trial_basis.expand(a) for a in coefs)

    @property
    def kappa(self):
        coefs = self.kappa_coefficients
        if coefs is None:
            return None
        return self.trial_basis.expand(coefs)

    def active_vector(self) -> np.ndarray:
        """The solved coefficients, without padding for known-zero blocks."""
        n = self.trial_basis.size
        parts = []
        if self.config.n_alpha_blocks:
            parts.append(self.c[:self.config.dim * n])
        if self.config.has_kappa:
            parts.append(self.c[self.config.dim * n:])
        return np.concatenate(parts)


def _pad_full(cfg: RecoveryConfig, c_active: np.ndarray) -> np.ndarray:
    n = cfg.trial_basis.size
    full = np.zeros((cfg.dim + 1) * n)
    pos = 0
    if cfg.n_alpha_blocks:
        full[:cfg.dim * n] = c_active[:cfg.dim * n]
        pos = cfg.dim * n
    if cfg.has_kappa:
        full[cfg.dim * n:] = c_active[pos:pos + n]
    return full


def solve_galerkin(system: GalerkinSystem, rank_tol: Optional[float] = None) -> CoefficientSolution:
    """Solve the normal equations Xi c = rhs by symmetric eigendecomposition.

    Raises NonUniqueSolutionError (carrying a numerical null-space basis) when
    the smallest-to-largest eigenvalue ratio falls below ``rank_tol``.
    """
    cfg = system.config
    tol = cfg.rank_tol if rank_tol is None else rank_tol
    xi = system.Xi
    if cfg.ridge > 0:
        xi = xi + cfg.ridge * np.eye(xi.shape[0])
    eigvals, eigvecs = scipy.linalg.eigh(xi)
    lam_max = float(eigvals[-1])
    lam_min = float(eigvals[0])
    ratio = lam_min / lam_max if lam_max > 0 else 0.0
    if lam_max <= 0 or ratio < tol:
        null = eigvecs[:, eigvals <= max(tol * lam_max, 0.0)]
        raise NonUniqueSolutionError(ratio, null)
    c_active = eigvecs @ ((eigvecs.T @ system.rhs) / eigvals)
    return CoefficientSolution(
        config=cfg, c=_pad_full(cfg, c_active),
        residual=system.objective(c_active),
        xi_min_eig=lam_min, xi_eig_ratio=ratio)


def solve_collocation(cfg: RecoveryConfig, snapshots: SnapshotSet,
                      derivs: DerivativeEstimates) -> CoefficientSolution:
    """Strong-form pointwise least squares at the interior quadrature points.

    Requires interior gradient and diagonal second-derivative estimates:
    the residual rows expand div(alpha_N F(u)) and div(kappa_N grad u)
    pointwise in the trial coefficients.
    """
    if derivs.grad_u_interior is None or derivs.hess_diag_interior is None:
        raise ValueError("collocation requires interior derivative estimates")
    trial = cfg.trial_basis
    pts = snapshots.interior_rule.points
    n_pts = pts.shape[0]
    m_times = snapshots.n_times
    if m_times * n_pts < cfg.n_unknowns:
        raise ValueError(
            f"underdetermined: M*Q = {m_times * n_pts} < {cfg.n_unknowns} unknowns")
    weights = cfg.sample_weights(m_times)
    phi = trial.eval(pts)
    dphi = trial.eval_grad(pts)

    rows = []
    rhs = []
    for m in range(m_times):
        u = snapshots.interior_values[m]
        grad_u = derivs.grad_u_interior[m]
        lap_u = derivs.hess_diag_interior[m].sum(axis=1)
        blocks = []
        if cfg.n_alpha_blocks:
            flux_u = cfg.flux.F(u)
            dflux_u = cfg.flux.dF(u)
            for ell in range(cfg.dim):
                blocks.append(dphi[:, :, ell] * flux_u[:, None]
                              + phi * (dflux_u * grad_u[:, ell])[:, None])
        if cfg.has_kappa:
            diff_rows = phi * lap_u[:, None]
            for ell in range(cfg.dim):
                diff_rows = diff_rows + dphi[:, :, ell] * grad_u[:, ell][:, None]
            blocks.append(-diff_rows)
        rows.append(np.sqrt(weights[m]) * np.hstack(blocks))
        rhs.append(-np.sqrt(weights[m]) * derivs.u_t_interior[m])
    A = np.vstack(rows)
    y = np.concatenate(rhs)
    c_active, _, rank, svals = np.linalg.lstsq(A, y, rcond=None)
    s_ratio = (svals[-1] / svals[0]) ** 2 if svals[0] > 0 else 0.0
    if rank < cfg.n_unknowns or s_ratio < cfg.rank_tol:
        _, _, vt = np.linalg.svd(A, full_matrices=True)
        raise NonUniqueSolutionError(s_ratio, vt[rank:].T)
    resid = float(np.sum((A @ c_active - y) ** 2))
    return CoefficientSolution(
        config=cfg, c=_pad_full(cfg, c_active), residual=resid,
        xi_min_eig=float(svals[-1] ** 2), xi_eig_ratio=s_ratio)


def evaluate_solution(sol: CoefficientSolution, points: np.ndarray,
                      truth_alpha=None, truth_kappa=None) -> dict:
    """Relative l2 errors of the recovered fields against supplied truth.

    Returns {"alpha_1": err, ..., "kappa": err, "fields": {...arrays...}} for
    whichever fields were recovered and have truth callables.
    """
    pts, _ = sol.trial_basis.domain.as_points(points)
    values = sol.trial_basis.eval(pts)
    out = {"points": pts, "fields": {}, "errors": {}}
    alpha_coefs = sol.alpha_coefficients
    if alpha_coefs is not None and truth_alpha is not None:
        truths = truth_alpha if isinstance(truth_alpha, (tuple, list)) else (truth_alpha,)
        for ell, (coefs, truth) in enumerate(zip(alpha_coefs, truths), start=1):
            rec = values @ coefs
            tru = np.broadcast_to(truth(*pts.T), rec.shape).astype(float)
            err = np.linalg.norm(rec - tru) / np.linalg.norm(tru)
            out["fields"][f"alpha_{ell}"] = (rec, tru)
            out["errors"][f"alpha_{ell}"] = float(err)
    kappa_coefs = sol.kappa_coefficients
    if kappa_coefs is not None and truth_kappa is not None:
        rec = values @ kappa_coefs
        tru = np.broadcast_to(truth_kappa(*pts.T), rec.shape).astype(float)
        out["fields"]["kappa"] = (rec, tru)
        out["errors"]["kappa"] = float(np.linalg.norm(rec - tru) / np.linalg.norm(tru))
    return out


def save_solution(sol: CoefficientSolution, path):
    """Structured text serialization; coefficients as full-precision hex floats."""
    dom = sol.trial_basis.domain
    with open(path, "w") as fh:
        fh.write("pdecoeff-solution v1\n")
        fh.write(f"method: {sol.config.method}\n")
        fh.write(f"unknowns: {sol.config.unknowns}\n")
        fh.write(f"dim: {dom.dim}\n")
        fh.write(f"lower: {' '.join(repr(v) for v in dom.lower)}\n")
        fh.write(f"upper: {' '.join(repr(v) for v in dom.upper)}\n")
        fh.write(f"degree: {sol.trial_basis.degree}\n")
        fh.write(f"truncation: {sol.trial_basis.truncation}\n")
        fh.write(f"n_basis: {sol.trial_basis.size}\n")
        fh.write(f"residual: {float(sol.residual).hex()}\n")
        fh.write(f"xi_min_eig: {float(sol.xi_min_eig).hex()}\n")
        fh.write(f"xi_eig_ratio: {float(sol.xi_eig_ratio).hex()}\n")
        fh.write(f"c: {sol.c.size}\n")
        for v in sol.c:
            fh.write(float(v).hex() + "\n")


def load_solution(path) -> dict:
    """Parse a solution file back into a plain dict (metadata + coefficients)."""
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "pdecoeff-solution v1":
            raise ValueError(f"{path} is not a solution file")
        meta = {}
        c = None
        for line in fh:
            key, _, value = line.partition(":")
            key = key.strip()
            value = value.strip()
            if key == "c":
                count = int(value)
                c = np.array([float.fromhex(fh.readline().strip()) for _ in range(count)])
                break
            meta[key] = value
    for name in ("residual", "xi_min_eig", "xi_eig_ratio"):
        if name in meta:
            meta[name] = float.fromhex(meta[name])
    meta["c"] = c
    return meta
