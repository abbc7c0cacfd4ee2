"""Uniform tensor grids, Gaussian-weighted grid integrals and FD derivatives.

Grids are symmetric boxes [-R, R]^k sampled with an even, bit-mirrored node
set (node -y is exactly the negation of node +y) so that reflection-symmetric
initial data stays symmetric to the last bit under symmetric stencils.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RectBivariateSpline, make_interp_spline

from .errors import GridMismatchError, GridTooSmallError
from .stencils import d1_along_axis, d2_along_axis


def symmetric_axis(radius: float, nodes: int) -> np.ndarray:
    """Uniform nodes on [-radius, radius], exactly mirror-symmetric."""
    if nodes < 8:
        raise GridTooSmallError(f"need at least 8 nodes per axis, got {nodes}")
    half = nodes // 2
    if nodes % 2 == 0:
        h = 2.0 * radius / (nodes - 1)
        pos = radius - h * np.arange(half - 1, -1, -1.0)
        return np.concatenate([-pos[::-1], pos])
    pos = np.linspace(0.0, radius, half + 1)
    return np.concatenate([-pos[:0:-1], pos])


@dataclass(frozen=True)
class TensorGrid:
    """Uniform tensor-product grid over [-R, R]^k."""

    axes: tuple

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def h(self) -> float:
        return float(self.axes[0][1] - self.axes[0][0])

    @property
    def radius(self) -> float:
        return float(self.axes[0][-1])

    @property
    def shape(self) -> tuple:
        return tuple(len(a) for a in self.axes)

    def meshes(self):
        return np.meshgrid(*self.axes, indexing="ij")

    def radius_field(self) -> np.ndarray:
        """Euclidean |y| at every node."""
        ms = self.meshes()
        return np.sqrt(sum(m**2 for m in ms))

    def gaussian_weights(self) -> np.ndarray:
        """Trapezoid weights times exp(-|y|^2/4), as a full tensor."""
        parts = []
        for ax in self.axes:
            w = np.full(ax.shape, self.h)
            w[0] *= 0.5
            w[-1] *= 0.5
            parts.append(w * np.exp(-(ax**2) / 4.0))
        out = parts[0]
        for p in parts[1:]:
            out = np.multiply.outer(out, p)
        return out

    def trapezoid_weights(self) -> np.ndarray:
        parts = []
        for ax in self.axes:
            w = np.full(ax.shape, self.h)
            w[0] *= 0.5
            w[-1] *= 0.5
            parts.append(w)
        out = parts[0]
        for p in parts[1:]:
            out = np.multiply.outer(out, p)
        return out

    def d1(self, values: np.ndarray, axis: int) -> np.ndarray:
        return d1_along_axis(values, self.h, axis)

    def d2(self, values: np.ndarray, axis: int) -> np.ndarray:
        return d2_along_axis(values, self.h, axis)

    def same_as(self, other: "TensorGrid") -> bool:
        return self.shape == other.shape and all(
            np.array_equal(a, b) for a, b in zip(self.axes, other.axes)
        )


def make_grid(radius: float, nodes: int, ndim: int = 1) -> TensorGrid:
    ax = symmetric_axis(radius, nodes)
    return TensorGrid(axes=tuple(ax for _ in range(ndim)))


@dataclass
class Field:
    """Scalar samples on a tensor grid."""

    grid: TensorGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise GridMismatchError(
                f"values shape {self.values.shape} != grid shape {self.grid.shape}"
            )

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())


def field_from_callable(fn, grid: TensorGrid) -> Field:
    ms = grid.meshes()
    return Field(grid, np.asarray(fn(*ms), dtype=float))


def gauss_weighted_integral(field: Field, other: np.ndarray | None = None) -> float:
    """Integral of field (times ``other``) against exp(-|y|^2/4) dy."""
    w = field.grid.gaussian_weights()
    vals = field.values if other is None else field.values * other
    return float(np.sum(vals * w))


def resample(field: Field, new_grid: TensorGrid, fill=None) -> Field:
    """Spline-resample onto a new grid of the same dimension.

    Exterior nodes take ``fill`` (a callable of the mesh coordinates or a
    constant); with ``fill=None`` the spline's polynomial extension is used.
    """
    if field.grid.ndim != new_grid.ndim:
        raise GridMismatchError("resample requires matching dimension")
    old = field.grid
    if old.same_as(new_grid):
        return field.copy()
    if old.ndim == 1:
        spl = make_interp_spline(old.axes[0], field.values, k=5)
        vals = spl(new_grid.axes[0])
    elif old.ndim == 2:
        spl = RectBivariateSpline(old.axes[0], old.axes[1], field.values, kx=5, ky=5)
        vals = spl(new_grid.axes[0], new_grid.axes[1])
    else:
        raise GridMismatchError("only 1-D and 2-D grids are supported")

    if fill is not None:
        ms = new_grid.meshes()
        outside = np.zeros(new_grid.shape, dtype=bool)
        for ax_vals, m in zip(old.axes, ms):
            outside |= (m < ax_vals[0]) | (m > ax_vals[-1])
        if callable(fill):
            vals = np.where(outside, fill(*ms), vals)
        else:
            vals = np.where(outside, fill, vals)
    return Field(new_grid, vals)


def interp_at(field: Field, points: np.ndarray) -> np.ndarray:
    """Spline values at arbitrary points, shape (npts, ndim) or (npts,)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if field.grid.ndim == 1:
        spl = make_interp_spline(field.grid.axes[0], field.values, k=5)
        return spl(pts.reshape(-1))
    if field.grid.ndim == 2:
        spl = RectBivariateSpline(
            field.grid.axes[0], field.grid.axes[1], field.values, kx=5, ky=5
        )
        return spl(pts[:, 0], pts[:, 1], grid=False)
    raise GridMismatchError("only 1-D and 2-D grids are supported")


def smooth_cutoff(grid: TensorGrid, outer: float | None = None, width: float = 1.0) -> np.ndarray:
    """Radial cutoff: 1 inside outer-width, 0 outside outer, cos^2 ramp between."""
    R = grid.radius if outer is None else outer
    rr = grid.radius_field()
    chi = np.ones(grid.shape)
    ramp = (rr > R - width) & (rr < R)
    chi[ramp] = np.cos(0.5 * np.pi * (rr[ramp] - (R - width)) / width) ** 2
    chi[rr >= R] = 0.0
    return chi
