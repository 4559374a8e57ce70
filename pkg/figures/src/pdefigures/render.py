"""Deterministic figure rendering from the documented CSV schemas.

Four figure kinds:

    convergence  error vs polynomial degree, log-y          (sweep_degree.csv)
    overlay_1d   recovered vs true field curves             (fields.csv, 1D)
    heatmap_2d   true | recovered panels, one row per field (fields.csv, 2D)
    comparison   filtered vs unfiltered error per noise set (sweep_noise.csv)

Renders are pure functions of CSV content plus the spec: fixed style, fixed
canvas, and scrubbed image metadata, so repeated invocations are byte-stable.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import matplotlib
from matplotlib.figure import Figure

import yaml

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "pdecoeff-figures"  # deterministic SVG ids

__all__ = ["FigureSpec", "MissingColumnError", "render", "main"]

KINDS = ("convergence", "overlay_1d", "heatmap_2d", "comparison")
_DPI = 150


class MissingColumnError(KeyError):
    def __init__(self, column: str, path):
        super().__init__(f"column {column!r} not found in {path}")
        self.column = column


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    csv: str
    out: str
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    fields: Optional[list] = None  # subset of field names, default: all found

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")

    @classmethod
    def from_yaml(cls, path) -> "FigureSpec":
        with open(path) as fh:
            raw = yaml.safe_load(fh) or {}
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ValueError(f"invalid figure spec {path}: {exc}") from exc


def _read_csv(path) -> tuple[list, dict]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    cols = {name: [row[i] for row in rows] for i, name in enumerate(header)}
    return header, cols


def _floats(cols, name, path):
    if name not in cols:
        raise MissingColumnError(name, path)
    return [float(v) for v in cols[name]]


def _err_fields(header) -> list:
    return [name[4:] for name in header if name.startswith("err_")]


def _rec_fields(header) -> list:
    return [name[:-4] for name in header if name.endswith("_rec")]


def _label(name: str) -> str:
    return name.replace("_", " ")


def _new_axes(spec, n_rows=1, n_cols=1, width=6.0, height=4.0):
    fig = Figure(figsize=(width * n_cols, height * n_rows), dpi=_DPI)
    axes = fig.subplots(n_rows, n_cols, squeeze=False)
    return fig, axes


def _render_convergence(spec: FigureSpec):
    header, cols = _read_csv(spec.csv)
    degrees = _floats(cols, "degree", spec.csv)
    names = spec.fields or _err_fields(header)
    if not names:
        raise MissingColumnError("err_*", spec.csv)
    fig, axes = _new_axes(spec)
    ax = axes[0][0]
    for name, marker in zip(names, "os^dv<>"):
        ax.semilogy(degrees, _floats(cols, f"err_{name}", spec.csv),
                    marker=marker, label=_label(name))
    ax.set_xlabel(spec.xlabel or "polynomial degree")
    ax.set_ylabel(spec.ylabel or "relative l2 error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    return fig


def _render_overlay_1d(spec: FigureSpec):
    header, cols = _read_csv(spec.csv)
    names = spec.fields or _rec_fields(header)
    if not names:
        raise MissingColumnError("*_rec", spec.csv)
    x = _floats(cols, "x", spec.csv)
    fig, axes = _new_axes(spec, n_cols=len(names), width=5.0)
    for ax, name in zip(axes[0], names):
        ax.plot(x, _floats(cols, f"{name}_true", spec.csv), "k-", lw=2,
                label=f"true {_label(name)}")
        ax.plot(x, _floats(cols, f"{name}_rec", spec.csv), "r--", lw=1.5,
                label=f"recovered {_label(name)}")
        ax.set_xlabel(spec.xlabel or "x")
        ax.set_ylabel(spec.ylabel or _label(name))
        ax.grid(True, alpha=0.3)
        ax.legend()
    return fig


def _render_heatmap_2d(spec: FigureSpec):
    header, cols = _read_csv(spec.csv)
    names = spec.fields or _rec_fields(header)
    if not names:
        raise MissingColumnError("*_rec", spec.csv)
    x = _floats(cols, "x", spec.csv)
    y = _floats(cols, "y", spec.csv)
    xs = sorted(set(x))
    ys = sorted(set(y))
    nx, ny = len(xs), len(ys)
    if nx * ny != len(x):
        raise ValueError("2D field CSV is not a full tensor grid")

    def grid(values):
        # rows are written x-major
        return [[values[i * ny + j] for i in range(nx)] for j in range(ny)]

    extent = (min(xs), max(xs), min(ys), max(ys))
    fig, axes = _new_axes(spec, n_rows=len(names), n_cols=2, width=4.6, height=3.6)
    for row, name in enumerate(names):
        true_vals = _floats(cols, f"{name}_true", spec.csv)
        rec_vals = _floats(cols, f"{name}_rec", spec.csv)
        vmin = min(true_vals + rec_vals)
        vmax = max(true_vals + rec_vals)
        for col, (vals, tag) in enumerate(((true_vals, "true"), (rec_vals, "recovered"))):
            ax = axes[row][col]
            im = ax.imshow(grid(vals), origin="lower", extent=extent, aspect="auto",
                           vmin=vmin, vmax=vmax, cmap="viridis")
            ax.set_title(f"{tag} {_label(name)}")
            ax.set_xlabel(spec.xlabel or "x")
            ax.set_ylabel(spec.ylabel or "y")
            fig.colorbar(im, ax=ax)
    return fig


def _render_comparison(spec: FigureSpec):
    header, cols = _read_csv(spec.csv)
    eps = _floats(cols, "epsilon", spec.csv)
    filt = _floats(cols, "filtered", spec.csv)
    names = spec.fields or _err_fields(header)
    if not names:
        raise MissingColumnError("err_*", spec.csv)
    fig, axes = _new_axes(spec)
    ax = axes[0][0]
    for name in names:
        errs = _floats(cols, f"err_{name}", spec.csv)
        for flag, style, tag in ((1, "o-", "filtered"), (0, "s--", "unfiltered")):
            pts = sorted((e, v) for e, f, v in zip(eps, filt, errs) if f == flag)
            if pts:
                ax.loglog([p[0] for p in pts], [p[1] for p in pts], style,
                          label=f"{_label(name)} {tag}")
    ax.set_xlabel(spec.xlabel or "noise level")
    ax.set_ylabel(spec.ylabel or "relative l2 error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    return fig


_RENDERERS = {
    "convergence": _render_convergence,
    "overlay_1d": _render_overlay_1d,
    "heatmap_2d": _render_heatmap_2d,
    "comparison": _render_comparison,
}


def render(spec: FigureSpec) -> Path:
    """Render the figure described by the spec; returns the output path."""
    fig = _RENDERERS[spec.kind](spec)
    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout()
    out = Path(spec.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    suffix = out.suffix.lower().lstrip(".") or "png"
    # scrub per-run metadata so identical inputs give identical bytes
    metadata = {"Date": None} if suffix == "svg" else {"Software": None}
    fig.savefig(out, format=suffix, metadata=metadata)
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="render", description="Render pdecoeff result CSVs into figures.")
    parser.add_argument("--spec", required=True, help="YAML figure spec")
    args = parser.parse_args(argv)
    try:
        spec = FigureSpec.from_yaml(args.spec)
        out = render(spec)
    except (MissingColumnError, ValueError, FileNotFoundError) as exc:
        print(str(exc), file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
