"""Gaussian-weighted Hermite algebra on R^k.

Everything here lives in L^2(R^k, exp(-|y|^2/4) dy).  The 1-D basis is
h_m(y) = c_m H_m(y/2) with H_m the physicists' Hermite polynomials and
c_m = 2^{-m/2} (4 pi)^{-1/4} (m!)^{-1/2}; these are orthonormal and satisfy
(Lap - y/2 d/dy + 1) h_m = (1 - m/2) h_m.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.polynomial.hermite import hermgauss

from .errors import DomainTooSmallError, UnsupportedModeError
from .grids import Field, TensorGrid, gauss_weighted_integral
from .shrinker import C0, ModeIndex, ShrinkerSpec, gaussian_sphere_factor

TWO_SQRT_PI = 2.0 * math.sqrt(math.pi)


def hermite_coefficient(m: int) -> float:
    """Normalizing constant c_m."""
    return 2.0 ** (-m / 2.0) * (4.0 * math.pi) ** -0.25 / math.sqrt(math.factorial(m))


def hermite_eval(m: int, y):
    """Normalized weighted Hermite function h_m at y (scalar or array).

    Uses the three-term recurrence in normalized form,
    h_{m+1} = y h_m / sqrt(2(m+1)) - sqrt(m/(m+1)) h_{m-1},
    which is stable for the degrees used here.
    """
    if m < 0:
        raise ValueError("degree must be nonnegative")
    y = np.asarray(y, dtype=float)
    h_prev = np.full(y.shape, C0)
    if m == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    h_cur = y * h_prev / math.sqrt(2.0)
    for mm in range(1, m):
        h_next = y * h_cur / math.sqrt(2.0 * (mm + 1)) - math.sqrt(mm / (mm + 1.0)) * h_prev
        h_prev, h_cur = h_cur, h_next
    return h_cur if h_cur.ndim else float(h_cur)


def hermite_table(max_degree: int, y: np.ndarray) -> np.ndarray:
    """h_0..h_max at the points y, shape (max_degree+1, len(y))."""
    y = np.asarray(y, dtype=float)
    out = np.empty((max_degree + 1,) + y.shape)
    out[0] = C0
    if max_degree >= 1:
        out[1] = y * out[0] / math.sqrt(2.0)
    for m in range(1, max_degree):
        out[m + 1] = y * out[m] / math.sqrt(2.0 * (m + 1)) - math.sqrt(m / (m + 1.0)) * out[m - 1]
    return out


def gauss_nodes(npoints: int):
    """Nodes and weights for integration against exp(-y^2/4) dy on R.

    Substituting y = 2x reduces to the standard Gauss-Hermite rule; the
    result integrates polynomials of degree <= 2*npoints - 1 exactly.
    """
    if npoints < 2:
        raise ValueError("need at least 2 quadrature points")
    x, w = hermgauss(npoints)
    return 2.0 * x, 2.0 * w


def weighted_inner(f, g, *, k: int = 1, spec: ShrinkerSpec | None = None, npoints: int = 64):
    """Inner product against exp(-|y|^2/4) on R^k.

    ``f`` and ``g`` are callables of k array arguments, or grid Fields
    sharing a grid.  When ``spec`` is given the fields are read as
    theta-independent functions on the cylinder and the spherical Gaussian
    mass multiplies the result.
    """
    if isinstance(f, Field) or isinstance(g, Field):
        if not (isinstance(f, Field) and isinstance(g, Field)):
            raise TypeError("mix of grid field and callable; sample both on one grid")
        if not f.grid.same_as(g.grid):
            from .errors import GridMismatchError

            raise GridMismatchError("fields on different grids")
        val = gauss_weighted_integral(f, g.values)
        k = f.grid.ndim
    else:
        y, w = gauss_nodes(npoints)
        if k == 1:
            val = float(np.sum(w * f(y) * g(y)))
        else:
            meshes = np.meshgrid(*([y] * k), indexing="ij")
            wt = w
            for _ in range(k - 1):
                wt = np.multiply.outer(wt, w)
            val = float(np.sum(wt * f(*meshes) * g(*meshes)))
    if spec is not None:
        val *= gaussian_sphere_factor(spec)
    return val


def triple_product(m: int, n: int, ell: int) -> float:
    """Closed-form integral of h_m h_n h_ell against exp(-y^2/4).

    Zero unless m+n+ell is even and the triangle inequalities hold.
    """
    if min(m, n, ell) < 0:
        raise ValueError("degrees must be nonnegative")
    if (m + n + ell) % 2:
        return 0.0
    s = (m + n + ell) // 2
    if s < m or s < n or s < ell:
        return 0.0
    num = math.sqrt(math.factorial(m) * math.factorial(n) * math.factorial(ell))
    den = math.factorial(s - ell) * math.factorial(s - m) * math.factorial(s - n)
    return (4.0 * math.pi) ** -0.25 * num / den


def normalized_mode(spec: ShrinkerSpec, mode: ModeIndex):
    """Callable for the cylinder-normalized axis eigenfunction of this mode.

    Only j = 0 modes have a pointwise axis representation; the value is
    prod_i h_{m_i}(y_i) / sqrt(G) with G the spherical Gaussian mass, which
    has unit weighted L^2 norm on the cylinder.
    """
    if mode.j != 0:
        raise UnsupportedModeError("spherical modes are bookkeeping-only")
    if len(mode.m) != spec.k:
        raise ValueError(f"mode has {len(mode.m)} axis degrees, spec has k={spec.k}")
    g = gaussian_sphere_factor(spec)

    def fn(*ys):
        out = None
        for mi, yi in zip(mode.m, ys):
            val = hermite_eval(mi, yi)
            out = val if out is None else out * val
        return out * g**-0.5

    return fn


def project_mode(v, mode: ModeIndex, spec: ShrinkerSpec, *, npoints: int = 64) -> float:
    """Coefficient of v against the cylinder-normalized eigenfunction.

    ``v`` is a theta-independent grid Field or a callable on R^k; spherical
    degrees j >= 1 are rejected for grid data.
    """
    if mode.j != 0:
        raise UnsupportedModeError("j >= 1 modes exist only in the eigenvalue table")
    g = gaussian_sphere_factor(spec)
    if isinstance(v, Field):
        grid = v.grid
        if grid.ndim != spec.k:
            raise ValueError("grid dimension != axis dimension k")
        tables = [hermite_table(max(mode.m), ax) for ax in grid.axes]
        modefn = np.ones(grid.shape)
        for axid, mi in enumerate(mode.m):
            shape = [1] * grid.ndim
            shape[axid] = -1
            modefn = modefn * tables[axid][mi].reshape(shape)
        raw = gauss_weighted_integral(v, modefn)
    else:
        def modefn_call(*ys):
            out = np.ones(np.broadcast(*[np.asarray(y) for y in ys]).shape)
            for mi, yi in zip(mode.m, ys):
                out = out * hermite_eval(mi, yi)
            return out

        raw = weighted_inner(v, modefn_call, k=spec.k, npoints=npoints)
    # <v, H_mode>_{cylinder} = G * raw_axis_integral * G^{-1/2}
    return g**0.5 * raw


def apply_L(v: Field, spec: ShrinkerSpec | None = None) -> Field:
    """Drift Laplacian plus one: Lv = Lap v - (y/2).grad v + v on the grid.

    Fourth-order stencils; the two edge layers use one-sided differences.
    """
    grid = v.grid
    if min(grid.shape) < 8:
        raise DomainTooSmallError("need at least 4 interior points per axis")
    out = v.values.copy()
    for ax in range(grid.ndim):
        shape = [1] * grid.ndim
        shape[ax] = -1
        yax = grid.axes[ax].reshape(shape)
        out = out + grid.d2(v.values, ax) - 0.5 * yax * grid.d1(v.values, ax)
    return Field(grid, out)
