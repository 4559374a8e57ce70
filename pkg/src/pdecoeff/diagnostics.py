"""Uniqueness diagnostics: windowed separability tests and conditioning.

A sampled bivariate field h(t_m, x_q) is numerically separable on a window
when its sample submatrix has eps-rank 1 (sigma_2/sigma_1 below tolerance) and
weakly separable when the eps-rank is at most 2.  A separable window of the
advected flux, of the state gradient, or a weakly separable window of the
state itself puts uniqueness of the velocity, the diffusivity, or the pair at
risk.  Windows are dyadic (full span, halves, quarters along each axis): the
underlying conditions quantify over all open subintervals, which is not
checkable; dyadic coverage is the documented approximation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .recovery import GalerkinSystem

__all__ = [
    "Window",
    "WindowResult",
    "SeparabilityReport",
    "ConditioningReport",
    "separability_scan",
    "conditioning_report",
    "noise_aware_tol",
]

_MIN_SAMPLES = 3


@dataclass(frozen=True)
class Window:
    """Index ranges [t_start, t_stop) x [x_start, x_stop) into the sample matrix."""

    t_start: int
    t_stop: int
    x_start: int
    x_stop: int

    @property
    def shape(self) -> tuple:
        return (self.t_stop - self.t_start, self.x_stop - self.x_start)


@dataclass(frozen=True)
class WindowResult:
    window: Window
    sigma_ratio_2: float  # sigma_2 / sigma_1
    sigma_ratio_3: float  # sigma_3 / sigma_1
    time_interval: Optional[tuple] = None
    space_interval: Optional[tuple] = None

    def is_separable(self, tol: float) -> bool:
        return self.sigma_ratio_2 <= tol

    def is_weakly_separable(self, tol: float) -> bool:
        return self.sigma_ratio_3 <= tol


@dataclass(frozen=True)
class SeparabilityReport:
    """Per-window singular-value ratios and the resulting uniqueness verdict."""

    criterion: str  # "separable" | "weakly_separable"
    tol: float
    windows: tuple
    verdict: str  # "uniqueness_supported" | "uniqueness_at_risk"
    offending: tuple

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("t_start,t_stop,x_start,x_stop,sigma2_over_sigma1,"
                     "sigma3_over_sigma1,flagged\n")
            flagged = set(id(w) for w in self.offending)
            for res in self.windows:
                w = res.window
                fh.write(f"{w.t_start},{w.t_stop},{w.x_start},{w.x_stop},"
                         f"{res.sigma_ratio_2:.17g},{res.sigma_ratio_3:.17g},"
                         f"{int(id(res) in flagged)}\n")

    def summary(self) -> str:
        lines = [f"criterion: {self.criterion}", f"tolerance: {self.tol:g}",
                 f"windows scanned: {len(self.windows)}", f"verdict: {self.verdict}"]
        for res in self.offending:
            w = res.window
            lines.append(
                f"  flagged window t[{w.t_start}:{w.t_stop}] x[{w.x_start}:{w.x_stop}]"
                f" ratios ({res.sigma_ratio_2:.2e}, {res.sigma_ratio_3:.2e})")
        return "\n".join(lines)


def dyadic_windows(n_t: int, n_x: int) -> list:
    """Full span, halves and quarters along each axis (combinations of both)."""

    def segments(n):
        segs = [(0, n)]
        for parts in (2, 4):
            size = n // parts
            if size >= _MIN_SAMPLES:
                segs += [(k * size, (k + 1) * size if k < parts - 1 else n)
                         for k in range(parts)]
        return segs

    return [Window(t0, t1, x0, x1)
            for t0, t1 in segments(n_t) for x0, x1 in segments(n_x)]


def noise_aware_tol(noise_level: float, window_shape: tuple, sigma_1: float) -> float:
    """Rank threshold inflated so i.i.d. noise does not mask separability.

    Heuristic: noise of level eps adds singular values of order
    eps * sqrt(max window extent); the factor 10 is a documented safety margin.
    """
    return 10.0 * noise_level * np.sqrt(max(window_shape)) / max(sigma_1, 1e-300)


def separability_scan(field_samples: np.ndarray, criterion: str = "separable",
                      windows: Optional[list] = None, tol: float = 1e-8,
                      noise_level: float = 0.0, times: Optional[np.ndarray] = None,
                      points: Optional[np.ndarray] = None) -> SeparabilityReport:
    """Scan windowed submatrices of h[m, q] for (weak) separability.

    ``criterion`` selects what endangers uniqueness: "separable" (rank 1, the
    advection and diffusion conditions) or "weakly_separable" (rank <= 2, the
    advection-diffusion condition).  With ``noise_level`` > 0 the tolerance is
    replaced per window by the noise-aware heuristic when that is larger.
    """
    if criterion not in ("separable", "weakly_separable"):
        raise ValueError(f"unknown criterion {criterion!r}")
    H = np.asarray(field_samples, dtype=float)
    if H.ndim != 2:
        raise ValueError("field samples must form a 2D (time x space) matrix")
    wins = dyadic_windows(*H.shape) if windows is None else windows
    results = []
    offending = []
    for win in wins:
        if win.shape[0] < _MIN_SAMPLES or win.shape[1] < _MIN_SAMPLES:
            raise ValueError(f"window {win} smaller than {_MIN_SAMPLES} samples per axis")
        sub = H[win.t_start:win.t_stop, win.x_start:win.x_stop]
        svals = scipy.linalg.svdvals(sub)
        s1 = svals[0] if svals[0] > 0 else 1e-300
        r2 = float(svals[1] / s1) if svals.size > 1 else 0.0
        r3 = float(svals[2] / s1) if svals.size > 2 else 0.0
        res = WindowResult(
            window=win, sigma_ratio_2=r2, sigma_ratio_3=r3,
            time_interval=(float(times[win.t_start]), float(times[win.t_stop - 1]))
            if times is not None else None,
            space_interval=(float(points[win.x_start]), float(points[win.x_stop - 1]))
            if points is not None else None)
        results.append(res)
        eff_tol = tol
        if noise_level > 0:
            eff_tol = max(tol, noise_aware_tol(noise_level, win.shape, svals[0]))
        flagged = res.is_separable(eff_tol) if criterion == "separable" \
            else res.is_weakly_separable(eff_tol)
        if flagged:
            offending.append(res)
    verdict = "uniqueness_at_risk" if offending else "uniqueness_supported"
    return SeparabilityReport(criterion=criterion, tol=tol, windows=tuple(results),
                              verdict=verdict, offending=tuple(offending))


@dataclass(frozen=True)
class ConditioningReport:
    """Eigenvalue summary of the accumulated normal matrix."""

    eigenvalues: np.ndarray
    lambda_min: float
    lambda_max: float
    eig_ratio: float
    rank_tol: float
    unique: bool

    def summary(self) -> str:
        return (f"normal matrix {self.eigenvalues.size}x{self.eigenvalues.size}: "
                f"lambda_min={self.lambda_min:.6e} lambda_max={self.lambda_max:.6e} "
                f"ratio={self.eig_ratio:.6e} -> "
                + ("unique solution predicted" if self.unique else "non-unique (singular)"))


def conditioning_report(system: GalerkinSystem,
                        rank_tol: Optional[float] = None) -> ConditioningReport:
    """Full symmetric eigendecomposition of Xi with the uniqueness prediction."""
    tol = system.config.rank_tol if rank_tol is None else rank_tol
    eigvals = scipy.linalg.eigvalsh(system.Xi)
    lam_max = float(eigvals[-1])
    lam_min = float(eigvals[0])
    ratio = lam_min / lam_max if lam_max > 0 else 0.0
    return ConditioningReport(
        eigenvalues=eigvals, lambda_min=lam_min, lambda_max=lam_max,
        eig_ratio=ratio, rank_tol=tol, unique=bool(lam_max > 0 and ratio >= tol))
