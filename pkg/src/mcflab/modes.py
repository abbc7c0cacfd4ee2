"""Cone diagnostics, centering maps, axis rotations and the 3-mode ODE.

Spectral splittings are taken in the weighted H^1 norm: a tensor Hermite
mode of total degree m carries H^1 weight 1 + m/2, and the unstable /
neutral / stable split is degree <= 1 / degree 2 / degree >= 3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (
    DomainTooSmallError,
    FiniteTimeBlowupError,
    PivotTooSmallError,
    RegraphFailureError,
    ZeroInputError,
)
from .grids import Field, smooth_cutoff
from .hermite import hermite_table
from .normal_form import linear_mode_coefficients, quad_coeff_matrix
from .semigroup import apply_semigroup
from .shrinker import C0, ShrinkerSpec


@dataclass(frozen=True)
class ConeSpec:
    """Opening parameter and flavor of an invariant-cone membership test."""

    kappa: float
    variant: str = "geq0"  # "geq0", "0", or "1"

    def __post_init__(self):
        if not 0.0 < self.kappa < 1.0:
            raise ValueError("kappa must lie in (0,1)")


@dataclass
class ConformalTransform:
    """Dilation, axis translation and axis rotation applied to a surface."""

    lam: float = 1.0
    d: np.ndarray = field(default_factory=lambda: np.zeros(1))
    rot: np.ndarray | None = None

    def size(self) -> float:
        s = abs(self.lam - 1.0) + float(np.sum(np.abs(self.d)))
        if self.rot is not None:
            s += float(np.linalg.norm(self.rot - np.eye(self.rot.shape[0])))
        return s

    def is_identity(self, tol: float = 0.0) -> bool:
        return self.size() <= tol


def tensor_mode_coefficients(u: Field, max_degree: int = 8):
    """Coefficients of u against the orthonormal tensor Hermite modes.

    Returns (multi_indices, coefficients) for all modes of total degree
    <= max_degree.
    """
    grid = u.grid
    k = grid.ndim
    tables = [hermite_table(max_degree, ax) for ax in grid.axes]
    gw = grid.gaussian_weights()
    vals = u.values * gw
    if k == 1:
        coeffs = tables[0] @ vals
        idx = [(m,) for m in range(max_degree + 1)]
        return idx, np.array([coeffs[m] for m in range(max_degree + 1)])
    if k == 2:
        # contract axis 0 then axis 1 with the Hermite tables
        c = np.einsum("ma,ab,nb->mn", tables[0], vals, tables[1])
        idx = []
        out = []
        for m0 in range(max_degree + 1):
            for m1 in range(max_degree + 1 - m0):
                idx.append((m0, m1))
                out.append(c[m0, m1])
        return idx, np.asarray(out)
    raise ValueError("only k = 1 and k = 2 fields supported")


def h1_norm(u: Field) -> float:
    """Weighted H^1 norm by grid quadrature."""
    grid = u.grid
    grads = [grid.d1(u.values, ax) for ax in range(grid.ndim)]
    density = u.values**2 + sum(g**2 for g in grads)
    return math.sqrt(float(np.sum(density * grid.gaussian_weights())))


def cone_ratios(u: Field, spec: ShrinkerSpec, max_degree: int = 8) -> dict:
    """H^1 mass fractions of the unstable+neutral, neutral and constant parts.

    ratio_1 is signed (the constant-direction cone is one-sided); the other
    two are nonnegative.  All three are invariant under scaling of u.
    """
    if u.grid.radius < 4.0:
        raise DomainTooSmallError("cone ratios need a domain of radius >= 4")
    idx, coeffs = tensor_mode_coefficients(u, max_degree)
    h1w = np.array([1.0 + sum(m) / 2.0 for m in idx])
    total = h1_norm(u)
    if total == 0:
        raise ZeroInputError("cone ratios of the zero field")
    deg = np.array([sum(m) for m in idx])
    mass = coeffs**2 * h1w
    neutral = math.sqrt(float(np.sum(mass[deg == 2])))
    nonneg = math.sqrt(float(np.sum(mass[deg <= 2])))
    const_idx = deg == 0
    ratio_1 = float(coeffs[const_idx][0] * math.sqrt(h1w[const_idx][0])) / total
    return {
        "ratio_0": neutral / total,
        "ratio_geq0": nonneg / total,
        "ratio_1": ratio_1,
        "truncated_h1": math.sqrt(float(np.sum(mass))),
        "h1": total,
    }


def in_cone(u: Field, spec: ShrinkerSpec, cone: ConeSpec) -> bool:
    r = cone_ratios(u, spec)
    key = {"geq0": "ratio_geq0", "0": "ratio_0", "1": "ratio_1"}[cone.variant]
    return r[key] >= cone.kappa


def difference_field(state1, state2) -> Field:
    """Cutoff difference of two graphs over the same grid."""
    if not state1.grid.same_as(state2.grid):
        raise ValueError("states live on different grids; resample first")
    chi = smooth_cutoff(state1.grid)
    return Field(state1.grid, chi * (state1.r - state2.r))


def step_map_check(v_n: Field, v_np1: Field) -> dict:
    """H^1 defect of one unit-time step against the linear semigroup.

    Returns ||v(n+1) - S(1) v(n)||_{H1} / ||v(n)||_{H1}; a zero input is
    flagged and reported as ratio 0.
    """
    denom = h1_norm(v_n)
    if denom < 1e-14:
        return {"ratio": 0.0, "zero_input": True}
    sv = apply_semigroup(v_n, 1.0)
    diff = Field(v_n.grid, v_np1.values - sv.values)
    return {"ratio": h1_norm(diff) / denom, "zero_input": False}


def axis_rotate(u: Field, O: np.ndarray) -> Field:
    """Resample u along rotated axes (k = 2): new(y) = u(O y)."""
    O = np.asarray(O, dtype=float)
    if u.grid.ndim != 2 or O.shape != (2, 2):
        raise ValueError("axis rotation is implemented for k = 2 only")
    from scipy.interpolate import RectBivariateSpline

    g = u.grid
    spl = RectBivariateSpline(g.axes[0], g.axes[1], u.values, kx=3, ky=3)
    y0, y1 = g.meshes()
    p0 = O[0, 0] * y0 + O[0, 1] * y1
    p1 = O[1, 0] * y0 + O[1, 1] * y1
    R = g.radius
    vals = spl(np.clip(p0, -R, R).ravel(), np.clip(p1, -R, R).ravel(), grid=False).reshape(g.shape)
    return Field(g, vals)


def rotation_matrix(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def centering(state, kill=("const", "axis"), pivot_ratio: float = 10.0,
              floor: float = 1e-13, require_contraction: float = 10.0):
    """Kill the constant and axis-linear modes by a conformal transform.

    The dilation factor comes from the constant coefficient (lam = 1 - c/rho,
    the time-recentering of the presumed singular time); each axis
    translation solves d_i = -beta_i / (2 a_ii) using the quadratic pivot.
    Returns (transform, new_state); raises when a needed pivot is too small
    or when the targeted coefficients fail to contract 10x.
    """
    from .rmcf import apply_conformal

    spec = state.spec
    k = state.grid.ndim
    c, beta = linear_mode_coefficients(state)
    before = abs(c) * ("const" in kill) + float(np.sum(np.abs(beta))) * ("axis" in kill)
    if before <= floor:
        return ConformalTransform(lam=1.0, d=np.zeros(k)), state

    lam = 1.0
    if "const" in kill and abs(c) > floor:
        lam = 1.0 - c / spec.rho
    d = np.zeros(k)
    if "axis" in kill:
        A = quad_coeff_matrix(state).M
        for i in range(k):
            if abs(beta[i]) <= floor:
                continue
            if abs(A[i, i]) < pivot_ratio * abs(beta[i]):
                raise PivotTooSmallError(
                    f"axis {i}: quadratic pivot {A[i, i]:.3e} < {pivot_ratio} x |y-coefficient| {beta[i]:.3e}"
                )
            d[i] = -beta[i] / (2.0 * A[i, i])

    new_state = apply_conformal(state, lam=lam, d=d)
    c2, beta2 = linear_mode_coefficients(new_state)
    after = abs(c2) * ("const" in kill) + float(np.sum(np.abs(beta2))) * ("axis" in kill)
    if after > before / require_contraction and after > floor:
        raise RegraphFailureError(
            f"centering failed to contract: {before:.3e} -> {after:.3e}"
        )
    return ConformalTransform(lam=lam, d=d), new_state


def perturb_ode(a0, t0: float, t1: float, spec: ShrinkerSpec, n_samples: int = 200,
                background_rate: float = 2.0) -> dict:
    """Integrate the coupled neutral-mode system of a perturbed pinch.

    a = (a1, a2, a12) with a1 the fresh direction, a2 the already-pinching
    one (dragged by -background_rate/t) and a12 the mixed mode:

        a1'  = -g a1^2 - (c0^3/(sqrt2 rho)) a12^2
        a2'  = -(2/t) a2 - g a2^2
        a12' = -g (a1 + a2) a12,        g = sqrt(2) c0 / rho.
    """
    g = math.sqrt(2.0) * C0 / spec.rho
    cross = C0**3 / (math.sqrt(2.0) * spec.rho)
    a0 = np.asarray(a0, dtype=float)
    if a0[0] < 0:
        pole = t0 + 1.0 / (g * abs(a0[0]))
        if pole <= t1:
            raise FiniteTimeBlowupError(f"a1 < 0 hits its Riccati pole at t={pole:.6g}")

    def rhs(t, a):
        a1, a2, a12 = a
        return [
            -g * a1 * a1 - cross * a12 * a12,
            -(background_rate / t) * a2 - g * a2 * a2,
            -g * (a1 + a2) * a12,
        ]

    t_eval = np.geomspace(t0, t1, n_samples)
    sol = solve_ivp(rhs, (t0, t1), a0, method="DOP853", rtol=1e-12, atol=1e-14, t_eval=t_eval)
    if not sol.success:
        raise FiniteTimeBlowupError(f"mode ODE integration failed: {sol.message}")
    a1_closed = a0[0] / (1.0 + a0[0] * g * (sol.t - t0))
    return {
        "t": sol.t,
        "a": sol.y.T,
        "gamma_h2": g,
        "a1_closed_form": a1_closed,
        "pole_time": (t0 + 1.0 / (g * abs(a0[0]))) if a0[0] < 0 else math.inf,
    }


def subordination_holds(result: dict, eps0: float, horizon: float | None = None) -> bool:
    """Check |a2| + |a12| <= 2 eps0 |a1| along the integrated window."""
    t = result["t"]
    a = result["a"]
    sel = np.ones(len(t), dtype=bool) if horizon is None else t <= horizon
    lhs = np.abs(a[sel, 1]) + np.abs(a[sel, 2])
    return bool(np.all(lhs <= 2.0 * eps0 * np.abs(a[sel, 0]) + 1e-300))
