"""Piecewise-constant densities on axis-aligned boxes.

A GridDensity stores one value per cell of a regular grid over a box
[lo_1, hi_1] x ... x [lo_d, hi_d].  Values are interpreted as the density on
the whole cell; integrals are plain cell sums times the cell volume.  This is
deliberately the simplest quadrature that makes pushforward bookkeeping
transparent.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class GridDensity:
    """Cell-centered density values on a regular grid.

    box : (d, 2) array of [lo, hi] per axis, lo < hi
    values : d-dimensional array, shape = cells per axis, C order
    """

    box: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        box = np.atleast_2d(np.asarray(self.box, dtype=float))
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "values", vals)
        if box.ndim != 2 or box.shape[1] != 2:
            raise ValidationError(f"box must be (d, 2), got {box.shape}")
        if np.any(box[:, 1] <= box[:, 0]):
            raise ValidationError("box must satisfy lo < hi on every axis")
        if vals.ndim != box.shape[0]:
            raise ValidationError(
                f"values ndim {vals.ndim} does not match box dimension {box.shape[0]}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValidationError("density values contain non-finite entries")

    @property
    def dim(self) -> int:
        return self.box.shape[0]

    @property
    def resolution(self) -> tuple:
        return self.values.shape

    @property
    def cell_widths(self) -> np.ndarray:
        return (self.box[:, 1] - self.box[:, 0]) / np.array(self.resolution)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.cell_widths))

    def axis_centers(self, axis: int) -> np.ndarray:
        lo, hi = self.box[axis]
        n = self.resolution[axis]
        h = (hi - lo) / n
        return lo + h * (np.arange(n) + 0.5)

    def centers(self) -> np.ndarray:
        """All cell centers as an (n_cells, d) array in C order."""
        axes = [self.axis_centers(a) for a in range(self.dim)]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def mass(self) -> float:
        return float(self.values.sum() * self.cell_volume)

    def normalized(self) -> "GridDensity":
        m = self.mass()
        if m <= 0.0:
            raise ValidationError("cannot normalize a density with zero mass")
        return GridDensity(self.box, self.values / m)

    def evaluate(self, points) -> np.ndarray:
        """Piecewise-constant lookup; zero outside the box."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        h = self.cell_widths
        idx = np.floor((pts - self.box[:, 0][None, :]) / h[None, :]).astype(int)
        res = np.array(self.resolution)
        inside = np.all((idx >= 0) & (idx < res[None, :]), axis=1)
        out = np.zeros(pts.shape[0])
        if inside.any():
            sel = tuple(idx[inside].T)
            out[inside] = self.values[sel]
        return out

    def lq_norm(self, q: float) -> float:
        """(integral of |density|^q)^(1/q) under the cell quadrature."""
        if q <= 0:
            raise ValidationError(f"q must be positive, got {q}")
        return float(
            (np.abs(self.values) ** q).sum() * self.cell_volume
        ) ** (1.0 / q)

    def support_box(self) -> np.ndarray:
        """Bounding box of the cells with strictly positive value."""
        mask = self.values > 0.0
        if not mask.any():
            raise ValidationError("density has empty support")
        h = self.cell_widths
        lo = np.empty(self.dim)
        hi = np.empty(self.dim)
        nz = np.argwhere(mask)
        for a in range(self.dim):
            lo[a] = self.box[a, 0] + nz[:, a].min() * h[a]
            hi[a] = self.box[a, 0] + (nz[:, a].max() + 1) * h[a]
        return np.stack([lo, hi], axis=1)

    def write_csv(self, path) -> None:
        """One row per cell: center coordinates then the value."""
        centers = self.centers()
        vals = self.values.ravel()
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x{a}" for a in range(self.dim)] + ["value"])
            for c, v in zip(centers, vals):
                writer.writerow([f"{x:.17g}" for x in c] + [f"{v:.17g}"])

    def metadata(self) -> dict:
        return {
            "box": self.box.tolist(),
            "resolution": list(self.resolution),
            "mass": self.mass(),
        }


def uniform_ball(center, radius, box=None, resolution=64) -> GridDensity:
    """Uniform probability density on a Euclidean ball, sampled at cell centers.

    Cells whose center lies in the (closed) ball get a constant value; the
    result is renormalized so its grid mass is exactly one.
    """
    center = np.asarray(center, dtype=float).ravel()
    d = center.shape[0]
    radius = float(radius)
    if radius <= 0:
        raise ValidationError("radius must be positive")
    if box is None:
        pad = 1.1 * radius
        box = np.stack([center - pad, center + pad], axis=1)
    dens = _from_indicator(
        box, resolution, d,
        lambda pts: np.linalg.norm(pts - center[None, :], axis=1) <= radius,
    )
    return dens.normalized()


def uniform_box(support_box, box=None, resolution=64) -> GridDensity:
    """Uniform probability density on a sub-box, renormalized on the grid."""
    sb = np.atleast_2d(np.asarray(support_box, dtype=float))
    d = sb.shape[0]
    if box is None:
        mid = sb.mean(axis=1)
        half = 0.55 * (sb[:, 1] - sb[:, 0])
        box = np.stack([mid - half, mid + half], axis=1)
    dens = _from_indicator(
        box, resolution, d,
        lambda pts: np.all((pts >= sb[:, 0]) & (pts <= sb[:, 1]), axis=1),
    )
    return dens.normalized()


def radial_bump(center, radius, box=None, resolution=64) -> GridDensity:
    """C^1 bump (1 - (r/R)^2)^2 on a ball, renormalized on the grid."""
    center = np.asarray(center, dtype=float).ravel()
    d = center.shape[0]
    radius = float(radius)
    if box is None:
        pad = 1.1 * radius
        box = np.stack([center - pad, center + pad], axis=1)
    box = np.atleast_2d(np.asarray(box, dtype=float))
    res = _res_tuple(resolution, d)
    dens = GridDensity(box, np.zeros(res))
    pts = dens.centers()
    r = np.linalg.norm(pts - center[None, :], axis=1) / radius
    v = np.where(r <= 1.0, (1.0 - r ** 2) ** 2, 0.0)
    return GridDensity(box, v.reshape(res)).normalized()


def _res_tuple(resolution, d) -> tuple:
    if np.isscalar(resolution):
        return (int(resolution),) * d
    res = tuple(int(r) for r in resolution)
    if len(res) != d:
        raise ValidationError(f"resolution {res} does not match dimension {d}")
    return res


def _from_indicator(box, resolution, d, indicator) -> GridDensity:
    box = np.atleast_2d(np.asarray(box, dtype=float))
    res = _res_tuple(resolution, d)
    shell = GridDensity(box, np.zeros(res))
    mask = indicator(shell.centers())
    if not mask.any():
        raise ValidationError("support does not meet any cell center")
    return GridDensity(box, mask.astype(float).reshape(res))
