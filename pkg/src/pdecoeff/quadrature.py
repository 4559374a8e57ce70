"""Gauss-Legendre quadrature on box interiors and box boundaries.

The interior rule doubles as the spatial sampling layout for snapshot data,
so the same points serve measurement and integration.  Boundary rules carry
explicit outward unit normals; in 1D the boundary is the two endpoints with
unit weight and normals -1 / +1, which lets 1D and 2D assembly share a code
path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BoxDomain

__all__ = ["QuadratureRule", "BoundaryFace", "BoundaryRule", "gauss_interior", "gauss_boundary"]


@dataclass(frozen=True)
class QuadratureRule:
    """Interior rule: points (Q, d), positive weights (Q,), and exactness degree."""

    points: np.ndarray
    weights: np.ndarray
    exactness_degree: int

    def __post_init__(self):
        object.__setattr__(self, "points", np.atleast_2d(np.asarray(self.points, dtype=float)))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        if self.points.shape[0] != self.weights.shape[0]:
            raise ValueError("points/weights length mismatch")
        if not (self.weights > 0).all():
            raise ValueError("quadrature weights must be positive")

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    def integrate(self, values: np.ndarray) -> float:
        """Weighted sum of values sampled at the rule's points."""
        return float(np.asarray(values) @ self.weights)


@dataclass(frozen=True)
class BoundaryFace:
    """Points on one face of the boundary with weights and its outward unit normal."""

    points: np.ndarray
    weights: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", np.atleast_2d(np.asarray(self.points, dtype=float)))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        object.__setattr__(self, "normal", np.asarray(self.normal, dtype=float))


@dataclass(frozen=True)
class BoundaryRule:
    """All faces of the box boundary."""

    faces: tuple

    @property
    def n_points(self) -> int:
        return sum(f.points.shape[0] for f in self.faces)

    @property
    def all_points(self) -> np.ndarray:
        return np.vstack([f.points for f in self.faces])

    def integrate(self, values_per_face) -> float:
        """Sum of per-face weighted sums; values_per_face aligns with faces."""
        return float(sum(np.asarray(v) @ f.weights for f, v in zip(self.faces, values_per_face)))


def _mapped_gauss(a: float, b: float, q: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(q)
    half = (b - a) / 2.0
    return a + half * (nodes + 1.0), half * weights


def gauss_interior(domain: BoxDomain, points_per_dim: int) -> QuadratureRule:
    """Tensor-product Gauss-Legendre rule, exact to degree 2q-1 per dimension."""
    if points_per_dim < 1:
        raise ValueError("points_per_dim must be >= 1")
    per_dim = [_mapped_gauss(a, b, points_per_dim) for a, b in zip(domain.lower, domain.upper)]
    if domain.dim == 1:
        pts = per_dim[0][0][:, None]
        wts = per_dim[0][1]
    else:
        (x, wx), (y, wy) = per_dim
        X, Y = np.meshgrid(x, y, indexing="ij")
        pts = np.column_stack([X.ravel(), Y.ravel()])
        wts = np.outer(wx, wy).ravel()
    return QuadratureRule(points=pts, weights=wts, exactness_degree=2 * points_per_dim - 1)


def gauss_boundary(domain: BoxDomain, points_per_edge: int = 1) -> BoundaryRule:
    """Per-face Gauss rules with outward unit normals.

    In 1D the boundary is zero-dimensional: two single-point faces with weight
    one and normals -1 / +1 (points_per_edge is ignored).
    """
    if domain.dim == 1:
        a, b = domain.lower[0], domain.upper[0]
        faces = (
            BoundaryFace(points=[[a]], weights=[1.0], normal=[-1.0]),
            BoundaryFace(points=[[b]], weights=[1.0], normal=[+1.0]),
        )
        return BoundaryRule(faces=faces)

    if points_per_edge < 1:
        raise ValueError("points_per_edge must be >= 1")
    (ax, bx), (ay, by) = zip(domain.lower, domain.upper)
    xs, wxs = _mapped_gauss(ax, bx, points_per_edge)
    ys, wys = _mapped_gauss(ay, by, points_per_edge)
    faces = (
        BoundaryFace(np.column_stack([np.full_like(ys, ax), ys]), wys, [-1.0, 0.0]),
        BoundaryFace(np.column_stack([np.full_like(ys, bx), ys]), wys, [+1.0, 0.0]),
        BoundaryFace(np.column_stack([xs, np.full_like(xs, ay)]), wxs, [0.0, -1.0]),
        BoundaryFace(np.column_stack([xs, np.full_like(xs, by)]), wxs, [0.0, +1.0]),
    )
    return BoundaryRule(faces=faces)
