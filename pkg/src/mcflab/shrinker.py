"""Model cylinders and round spheres: dimensional constants and Gaussian area.

The model hypersurface is the product of a round sphere of radius
``rho = sqrt(2(n-k))`` with a flat k-plane, embedded in (n+1)-space.  This
module holds its bookkeeping: eigenvalues of the stability operator, the
spherical Gaussian mass, the Gaussian-area functional and the quadratic
projection constant of the neutral-mode dynamics.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, QuadratureDomainWarning

# normalizing constants of the weighted Hermite functions
C0 = (4.0 * math.pi) ** -0.25
C1 = 0.5 * math.pi ** -0.25
C2 = 0.25 * math.pi ** -0.25


def sphere_area(d: int) -> float:
    """Surface area of the unit d-sphere in R^{d+1}."""
    return 2.0 * math.pi ** ((d + 1) / 2.0) / math.gamma((d + 1) / 2.0)


@dataclass(frozen=True)
class ShrinkerSpec:
    """Round cylinder S^{n-k}(rho) x R^k with rho^2 = 2(n-k)."""

    n: int
    k: int
    rho: float

    @property
    def sphere_dim(self) -> int:
        return self.n - self.k

    @property
    def mean_curvature(self) -> float:
        # (n-k)/rho == rho/2 exactly
        return self.rho / 2.0


@dataclass(frozen=True)
class ModeIndex:
    """Tensor Hermite degrees per axis direction plus a spherical degree."""

    m: tuple
    j: int = 0

    def __post_init__(self):
        if self.j < 0 or any(mi < 0 for mi in self.m):
            raise ValueError("mode degrees must be nonnegative")

    @property
    def total_degree(self) -> int:
        return int(sum(self.m))


def make_shrinker(n: int, k: int) -> ShrinkerSpec:
    """Build the model cylinder for axis dimension k in (n+1)-space."""
    if n < 2 or k < 1 or k > n - 1:
        raise DimensionError(f"need n >= 2 and 1 <= k <= n-1, got (n,k)=({n},{k})")
    return ShrinkerSpec(n=int(n), k=int(k), rho=math.sqrt(2.0 * (n - k)))


def sphere_eigenvalue(spec: ShrinkerSpec, j: int) -> float:
    """Eigenvalue mu_j of the sphere Laplacian on S^{n-k}(rho).

    The unit-sphere spectrum -j(j+d-1) scales by 1/rho^2 = 1/(2(n-k)), so
    mu_0 = 0, mu_1 = -1/2 and mu_2 = -(n-k+1)/(n-k).
    """
    d = spec.sphere_dim
    return -j * (j + d - 1) / (2.0 * d)


def mode_eigenvalue(spec: ShrinkerSpec, mode: ModeIndex) -> float:
    """Eigenvalue of the linearized operator on the cylinder: mu_j + 1 - |m|/2."""
    return sphere_eigenvalue(spec, mode.j) + 1.0 - mode.total_degree / 2.0


def spectrum_table(spec: ShrinkerSpec):
    """The four leading eigenvalue rows with their eigenfunction labels."""
    d = spec.sphere_dim
    return [
        (1.0, ["1"]),
        (0.5, [f"theta_{i}" for i in range(1, d + 2)] + [f"y_{j}" for j in range(1, spec.k + 1)]),
        (0.0, ["theta_i*y_j", "h2(y_j)", "y_j1*y_j2"]),
        (max(-1.0 / d, -0.5), ["..."]),
    ]


def gaussian_sphere_factor(spec: ShrinkerSpec) -> float:
    """Gaussian mass of the sphere factor: rho^{n-k} e^{-rho^2/4} omega_{n-k}."""
    d = spec.sphere_dim
    return spec.rho**d * math.exp(-spec.rho**2 / 4.0) * sphere_area(d)


def gamma_constant(spec: ShrinkerSpec) -> float:
    """Quadratic projection constant of the neutral-matrix ODE M' = -gamma M^2.

    This is the rate attached to the matrix of inner products taken in the
    full weighted L^2 of the cylinder.  For projections taken against the
    axis Gaussian only (no sphere factor), the rate is this value times
    ``gaussian_sphere_factor``; see :func:`axis_riccati_rate`.
    """
    return C0 ** (2 * (spec.k - 1)) / (spec.rho * gaussian_sphere_factor(spec))


def axis_riccati_rate(spec: ShrinkerSpec) -> float:
    """Riccati rate of the neutral matrix built from axis-Gaussian projections."""
    return C0 ** (2 * (spec.k - 1)) / spec.rho


def h2_coefficient_rate(spec: ShrinkerSpec) -> float:
    """Riccati rate of a bare h2(y_i) coefficient: sqrt(2) c0 / rho."""
    return math.sqrt(2.0) * C0 / spec.rho


def f_cylinder(spec: ShrinkerSpec) -> float:
    """Gaussian area of the model cylinder, closed form."""
    d = spec.sphere_dim
    return (4.0 * math.pi) ** (-d / 2.0) * spec.rho**d * math.exp(-d / 2.0) * sphere_area(d)


def f_sphere(n: int, radius: float | None = None) -> float:
    """Gaussian area of S^n(radius) in R^{n+1}; default radius sqrt(2n)."""
    r = math.sqrt(2.0 * n) if radius is None else radius
    return (4.0 * math.pi) ** (-n / 2.0) * r**n * math.exp(-r**2 / 4.0) * sphere_area(n)


def f_functional(surface, *, tail_tol: float = 1e-8) -> float:
    """Gaussian area of a surface.

    ``surface`` is an analytic tag (``"plane"``, ``("sphere", n[, R])``,
    ``("cylinder", spec)``) or a graph state over a model cylinder.  Graphs
    are integrated with the induced area element
    ``r^{n-k} sqrt(1+|grad r|^2)`` on the axis grid; a warning fires when the
    truncated Gaussian tail exceeds ``tail_tol``.
    """
    if isinstance(surface, str) and surface == "plane":
        return 1.0
    if isinstance(surface, tuple):
        tag = surface[0]
        if tag == "sphere":
            return f_sphere(*surface[1:])
        if tag == "cylinder":
            return f_cylinder(surface[1])
        raise ValueError(f"unknown analytic shape {surface!r}")

    # graph state: duck-typed on .spec/.grid/.r
    spec = surface.spec
    grid = surface.grid
    r = surface.r
    d = spec.sphere_dim
    grad2 = np.zeros_like(r)
    for ax in range(grid.ndim):
        grad2 += grid.d1(r, ax) ** 2
    w = grid.gaussian_weights()
    integrand = r**d * np.sqrt(1.0 + grad2) * np.exp(-(r**2) / 4.0)
    total = float(np.sum(integrand * w)) * sphere_area(d)

    # Gaussian tail estimate beyond the grid radius, per axis direction
    R = grid.radius
    r_edge = float(np.max(r))
    tail = (
        (4.0 * math.pi) ** (-spec.n / 2.0)
        * sphere_area(d)
        * r_edge**d
        * 2.0
        * grid.ndim
        * math.sqrt(math.pi)
        * math.erfc(R / 2.0)
    )
    if tail > tail_tol:
        warnings.warn(
            f"Gaussian tail beyond grid radius {R:.3g} contributes ~{tail:.2e}",
            QuadratureDomainWarning,
        )
    return (4.0 * math.pi) ** (-spec.n / 2.0) * total


def entropy_ordering_holds(n: int) -> bool:
    """Check F(Sigma^{n-1}) > ... > F(Sigma^1) > F(S^n) > 1 for this n."""
    vals = [f_cylinder(make_shrinker(n, k)) for k in range(n - 1, 0, -1)]
    vals.append(f_sphere(n))
    vals.append(1.0)
    return all(a > b for a, b in zip(vals, vals[1:]))
