"""Orthonormal Legendre polynomial bases on box domains (1D and 2D).

Basis members are tensor products of normalized Legendre polynomials mapped
affinely from the reference interval [-1, 1] to the physical domain, so that
the Gram matrix over the domain is the identity.  Values, gradients and
Laplacians are evaluated with the stable three-term recurrences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["BoxDomain", "BasisSet", "build_basis"]

_DOMAIN_TOL = 1e-12


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box [lower_1, upper_1] x ... x [lower_d, upper_d], d in {1, 2}."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if len(lo) != len(hi):
            raise ValueError("lower and upper must have the same length")
        if len(lo) not in (1, 2):
            raise ValueError(f"only 1D and 2D domains are supported, got dim={len(lo)}")
        for a, b in zip(lo, hi):
            if not a < b:
                raise ValueError(f"degenerate domain: [{a}, {b}]")

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def lengths(self) -> np.ndarray:
        return np.asarray(self.upper) - np.asarray(self.lower)

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def as_points(self, points) -> tuple[np.ndarray, bool]:
        """Normalize input to shape (P, dim); second value marks a single point."""
        arr = np.asarray(points, dtype=float)
        if self.dim == 1:
            single = arr.ndim == 0
        else:
            single = arr.ndim == 1
        return arr.reshape(-1, self.dim), single

    def contains(self, points, tol: float = _DOMAIN_TOL) -> np.ndarray:
        """Boolean mask of points inside the closed box (with tolerance)."""
        pts, _ = self.as_points(points)
        lo = np.asarray(self.lower) - tol * np.maximum(1.0, np.abs(self.lower))
        hi = np.asarray(self.upper) + tol * np.maximum(1.0, np.abs(self.upper))
        return np.all((pts >= lo) & (pts <= hi), axis=1)

    def to_reference(self, pts: np.ndarray) -> np.ndarray:
        """Map physical points (P, dim) to the reference box [-1, 1]^d."""
        lo = np.asarray(self.lower)
        return 2.0 * (pts - lo) / self.lengths - 1.0


def _multi_indices(dim: int, degree: int, truncation: str) -> list:
    """Multi-index set in graded lexicographic order."""
    if dim == 1:
        return [(k,) for k in range(degree + 1)]
    if truncation == "total_degree":
        idx = [(i, j) for i in range(degree + 1) for j in range(degree + 1 - i)]
    elif truncation == "tensor":
        idx = [(i, j) for i in range(degree + 1) for j in range(degree + 1)]
    else:
        raise ValueError(f"unknown truncation {truncation!r}")
    return sorted(idx, key=lambda m: (sum(m), m))


def _legendre_table(s: np.ndarray, degree: int, n_deriv: int) -> np.ndarray:
    """P_k(s) and derivatives for k=0..degree on reference coordinates.

    Returns shape (n_deriv + 1, degree + 1, len(s)): the polynomials, then
    first and second derivatives as requested, via the recurrences

        (k+1) P_{k+1} = (2k+1) s P_k - k P_{k-1}
        P'_{k+1}  = P'_{k-1}  + (2k+1) P_k
        P''_{k+1} = P''_{k-1} + (2k+1) P'_k
    """
    s = np.asarray(s, dtype=float)
    out = np.zeros((n_deriv + 1, degree + 1, s.size))
    out[0, 0] = 1.0
    if degree >= 1:
        out[0, 1] = s
        if n_deriv >= 1:
            out[1, 1] = 1.0
    for k in range(1, degree):
        out[0, k + 1] = ((2 * k + 1) * s * out[0, k] - k * out[0, k - 1]) / (k + 1)
        if n_deriv >= 1:
            out[1, k + 1] = out[1, k - 1] + (2 * k + 1) * out[0, k]
        if n_deriv >= 2:
            out[2, k + 1] = out[2, k - 1] + (2 * k + 1) * out[1, k]
    return out


@dataclass(frozen=True)
class BasisSet:
    """Orthonormal polynomial basis for a box domain.

    Immutable after construction; evaluation methods are pure functions and
    safe to call concurrently.
    """

    domain: BoxDomain
    degree: int
    truncation: str
    index_map: tuple = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.index_map)

    @property
    def dim(self) -> int:
        return self.domain.dim

    def _checked(self, points) -> tuple[np.ndarray, bool]:
        pts, single = self.domain.as_points(points)
        inside = self.domain.contains(pts)
        if not inside.all():
            bad = pts[~inside][0]
            raise ValueError(f"point {tuple(bad)} lies outside the domain")
        return pts, single

    def _tables(self, pts: np.ndarray, n_deriv: int) -> list:
        """Per-dimension normalized Legendre tables at the given points."""
        ref = self.domain.to_reference(pts)
        lengths = self.domain.lengths
        tabs = []
        for ell in range(self.dim):
            tab = _legendre_table(ref[:, ell], self.degree, n_deriv)
            half = lengths[ell] / 2.0
            norm = np.sqrt((2 * np.arange(self.degree + 1) + 1) / lengths[ell])
            tab = tab * norm[None, :, None]
            for der in range(1, n_deriv + 1):
                tab[der] /= half**der
            tabs.append(tab)
        return tabs

    def eval(self, points) -> np.ndarray:
        """Values of all basis functions: shape (N,) for one point, else (P, N)."""
        pts, single = self._checked(points)
        tabs = self._tables(pts, 0)
        vals = np.empty((pts.shape[0], self.size))
        for col, midx in enumerate(self.index_map):
            v = tabs[0][0, midx[0]]
            for ell in range(1, self.dim):
                v = v * tabs[ell][0, midx[ell]]
            vals[:, col] = v
        return vals[0] if single else vals

    def eval_grad(self, points) -> np.ndarray:
        """Gradients d(phi_i)/d(x_ell): shape (N, d) for one point, else (P, N, d)."""
        pts, single = self._checked(points)
        tabs = self._tables(pts, 1)
        grads = np.empty((pts.shape[0], self.size, self.dim))
        for col, midx in enumerate(self.index_map):
            for ax in range(self.dim):
                g = tabs[ax][1, midx[ax]]
                for ell in range(self.dim):
                    if ell != ax:
                        g = g * tabs[ell][0, midx[ell]]
                grads[:, col, ax] = g
        return grads[0] if single else grads

    def eval_laplacian(self, points) -> np.ndarray:
        """Laplacian of each basis function: shape (N,) for one point, else (P, N)."""
        pts, single = self._checked(points)
        tabs = self._tables(pts, 2)
        lap = np.zeros((pts.shape[0], self.size))
        for col, midx in enumerate(self.index_map):
            for ax in range(self.dim):
                term = tabs[ax][2, midx[ax]]
                for ell in range(self.dim):
                    if ell != ax:
                        term = term * tabs[ell][0, midx[ell]]
                lap[:, col] += term
        return lap[0] if single else lap

    def expand(self, coefficients):
        """Return the scalar field x -> coefficients . Phi(x)."""
        coefficients = np.asarray(coefficients, dtype=float)
        if coefficients.shape != (self.size,):
            raise ValueError(f"expected {self.size} coefficients")

        def field_fn(points):
            return self.eval(points) @ coefficients

        return field_fn


def build_basis(domain: BoxDomain, degree: int, truncation: str = "total_degree") -> BasisSet:
    """Orthonormal Legendre basis of the given per-dimension maximal degree.

    Enumeration order is graded lexicographic, so in 1D the members are the
    normalized P_0 ... P_degree.  In 2D the default spans all multi-indices of
    total degree <= degree; ``truncation="tensor"`` spans the full tensor grid.
    """
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    idx = _multi_indices(domain.dim, degree, truncation)
    return BasisSet(domain=domain, degree=degree, truncation=truncation, index_map=tuple(idx))
