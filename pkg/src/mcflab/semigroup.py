"""Mehler kernel, shifted-Gaussian norms and the linear smoothing probe.

S(tau) is the semigroup of the drift Laplacian plus one on the cylinder.
Its axis kernel is an explicit Gaussian in (y e^{-tau/2} - z); the sphere
factor is the ordinary heat kernel of the round sphere (only the circle is
materialized here, by image or spectral summation).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConstraintUnsatisfiableError, ZeroInputError
from .grids import Field, TensorGrid
from .shrinker import ShrinkerSpec


@dataclass(frozen=True)
class KernelParams:
    """Semigroup time, axis dimension and optional circle factor."""

    tau: float
    k: int = 1
    circle_rho: float | None = None

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("semigroup time must be positive")


def mehler_kernel(tau: float, y, z, k: int = 1):
    """Axis kernel e^tau (4 pi (1-e^-tau))^{-k/2} exp(-|y e^{-tau/2} - z|^2 / (4(1-e^-tau))).

    ``y`` and ``z`` broadcast; for k > 1 they carry the axis components in
    the last dimension.
    """
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    om = 1.0 - math.exp(-tau)
    if k == 1:
        d2 = (y * math.exp(-tau / 2.0) - z) ** 2
    else:
        d2 = np.sum((y * math.exp(-tau / 2.0) - z) ** 2, axis=-1)
    return math.exp(tau) * (4.0 * math.pi * om) ** (-k / 2.0) * np.exp(-d2 / (4.0 * om))


def circle_heat_kernel(tau: float, theta, eta, rho: float, images: int = 10, spectral_terms: int = 200):
    """Heat kernel of the circle of radius rho at angles theta, eta.

    Image summation for tau >= 0.05 (10 images suffice at desk scales),
    spectral summation below.  Angles are measured in radians; the kernel
    integrates to 1 against rho*d(eta).
    """
    theta = np.asarray(theta, dtype=float)
    eta = np.asarray(eta, dtype=float)
    s = rho * (theta - eta)  # arclength difference
    L = 2.0 * math.pi * rho
    if tau >= 0.05:
        out = np.zeros(np.broadcast(theta, eta).shape)
        for j in range(-images, images + 1):
            out = out + np.exp(-((s + j * L) ** 2) / (4.0 * tau))
        return out / math.sqrt(4.0 * math.pi * tau)
    out = np.full(np.broadcast(theta, eta).shape, 1.0 / L)
    for m in range(1, spectral_terms + 1):
        out = out + (2.0 / L) * math.exp(-(m**2) * tau / rho**2) * np.cos(m * s / rho)
    return out


def full_kernel(params: KernelParams, y, z, theta=0.0, eta=0.0):
    """Product kernel of the cylinder semigroup (circle factor optional)."""
    out = mehler_kernel(params.tau, y, z, k=params.k)
    if params.circle_rho is not None:
        out = out * circle_heat_kernel(params.tau, theta, eta, params.circle_rho)
    return out


def _axis_kernel_matrix(tau: float, y_out: np.ndarray, z_in: np.ndarray) -> np.ndarray:
    om = 1.0 - math.exp(-tau)
    d2 = (y_out[:, None] * math.exp(-tau / 2.0) - z_in[None, :]) ** 2
    return (4.0 * math.pi * om) ** -0.5 * np.exp(-d2 / (4.0 * om))


def apply_semigroup(psi: Field, tau: float) -> Field:
    """Quadrature convolution S(tau) psi on the field's own grid.

    The kernel is separable, so each axis is convolved in turn; the e^tau
    factor multiplies once.  Warns when tau is so small that the kernel is
    unresolved by the grid.
    """
    grid = psi.grid
    h = grid.h
    width = math.sqrt(2.0 * (1.0 - math.exp(-tau)))
    if tau < 1e-3 or width < 2.0 * h:
        warnings.warn(f"kernel width {width:.3g} under-resolved by h={h:.3g}", RuntimeWarning)
    vals = psi.values
    for ax in range(grid.ndim):
        z = grid.axes[ax]
        K = _axis_kernel_matrix(tau, z, z)
        w = np.full(z.shape, h)
        w[0] *= 0.5
        w[-1] *= 0.5
        Kw = K * w[None, :]
        vals = np.moveaxis(np.moveaxis(vals, ax, -1) @ Kw.T, -1, ax)
    return Field(grid, math.exp(tau) * vals)


def shifted_gaussian_norm(psi: Field, r: float, xi_spacing: float | None = None,
                          sphere_area_factor: float = 1.0) -> float:
    """N_r: sup over |xi| <= r of the Gaussian-centered-at-xi L^2 norm.

    The sup runs over a xi-lattice with spacing at most the grid spacing.
    ``sphere_area_factor`` multiplies the squared integral when the field
    stands for a theta-independent function on the cylinder.
    """
    grid = psi.grid
    h = xi_spacing if xi_spacing is not None else grid.h
    if r < 0:
        raise ValueError("shift radius must be nonnegative")
    # multiples of the spacing: lattices nest as r grows, so N_r is monotone
    n_side = int(math.floor(r / h + 1e-12))
    ticks = h * np.arange(-n_side, n_side + 1) if n_side > 0 else np.array([0.0])
    psi2 = psi.values**2
    tw = grid.trapezoid_weights()
    best = 0.0
    if grid.ndim == 1:
        y = grid.axes[0]
        for xi in ticks:
            val = float(np.sum(psi2 * tw * np.exp(-((y - xi) ** 2) / 4.0)))
            best = max(best, val)
    elif grid.ndim == 2:
        y0, y1 = grid.meshes()
        for xi0 in ticks:
            for xi1 in ticks:
                if xi0 * xi0 + xi1 * xi1 > r * r + 1e-12:
                    continue
                val = float(np.sum(psi2 * tw * np.exp(-((y0 - xi0) ** 2 + (y1 - xi1) ** 2) / 4.0)))
                best = max(best, val)
    else:
        raise ValueError("only 1-D and 2-D fields supported")
    return math.sqrt(best * sphere_area_factor)


def smoothing_ratio(psi: Field, r: float, r_tilde: float, tau: float, spec: ShrinkerSpec) -> float:
    """N_r(S(tau) psi) divided by the smoothing bound's explicit factor.

    The factor is e^tau (4 pi (1-e^-tau))^{-n/2} exp(e^-tau
    ((r - r_tilde e^{tau/2})_+)^2 / (4(1-e^-tau))) N_{r_tilde}(psi); the
    ratio should stay below one sweep-stable constant.
    """
    base = shifted_gaussian_norm(psi, r_tilde)
    if base <= 0:
        raise ZeroInputError("N_{r_tilde}(psi) vanishes")
    lhs = shifted_gaussian_norm(apply_semigroup(psi, tau), r)
    om = 1.0 - math.exp(-tau)
    plus = max(r - r_tilde * math.exp(tau / 2.0), 0.0)
    bracket = (
        math.exp(tau)
        * (4.0 * math.pi * om) ** (-spec.n / 2.0)
        * math.exp(math.exp(-tau) * plus**2 / (4.0 * om))
    )
    return lhs / (bracket * base)


def feasible_window(t0: float, K0: float = 1.0, delta1: float = 1.0):
    """Largest s with e^{(s-t0)/2} <= K0 sqrt(s); None when infeasible.

    The other window constraints (s >= t0 + delta1, s >= K0/15) are checked
    against the returned value.
    """
    s = t0 + 1.0
    for _ in range(200):
        s_new = t0 + 2.0 * math.log(max(K0 * math.sqrt(s), 1e-300))
        if abs(s_new - s) < 1e-14:
            break
        s = s_new
    if s < t0 + delta1 or s < K0 / 15.0 or not math.isfinite(s):
        return None
    return s


def linear_evolve(v0: Field, potential, t0: float, t1: float | None = None,
                  K0: float = 1.0, delta1: float = 1.0, c_cfl: float = 0.2) -> dict:
    """Integrate dv/dt = Lv + P(t) v and report the L^2 -> C^0 amplification.

    ``potential`` is a callable t -> scalar (or an array over the grid).
    The observation time is s' = K0 + s with s the largest time satisfying
    the window constraints; passing t1 overrides s' after feasibility is
    checked.  Reports sup |v| over the ball of radius K0*sqrt(s').
    """
    s = feasible_window(t0, K0, delta1)
    if s is None:
        raise ConstraintUnsatisfiableError(f"no feasible window above t0={t0} for K0={K0}, delta1={delta1}")
    s_prime = K0 + s
    if t1 is not None:
        if t1 > K0 + s + 1e-9:
            raise ConstraintUnsatisfiableError(f"t1={t1} beyond the feasible s'={K0 + s:.6g}")
        s_prime = t1
    grid = v0.grid
    h = grid.h
    dt0 = c_cfl * h * h
    nsteps = max(1, int(math.ceil((s_prime - t0) / dt0)))
    dt = (s_prime - t0) / nsteps

    w = grid.gaussian_weights()
    l2_t0 = math.sqrt(float(np.sum(v0.values**2 * w)))
    if l2_t0 == 0:
        raise ZeroInputError("initial field vanishes")

    def rhs(vals, t):
        out = np.zeros_like(vals)
        for ax in range(grid.ndim):
            shape = [1] * grid.ndim
            shape[ax] = -1
            yax = grid.axes[ax].reshape(shape)
            out = out + grid.d2(vals, ax) - 0.5 * yax * grid.d1(vals, ax)
        p = potential(t)
        return out + vals + p * vals

    vals = v0.values.copy()
    t = t0
    for _ in range(nsteps):
        k1 = rhs(vals, t)
        k2 = rhs(vals + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = rhs(vals + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = rhs(vals + dt * k3, t + dt)
        vals = vals + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += dt

    ball = grid.radius_field() <= K0 * math.sqrt(s_prime)
    sup_c0 = float(np.max(np.abs(vals[ball])))
    return {
        "s": s,
        "s_prime": s_prime,
        "final": Field(grid, vals),
        "sup_c0": sup_c0,
        "l2_t0": l2_t0,
        "amplification": sup_c0 / l2_t0,
    }
