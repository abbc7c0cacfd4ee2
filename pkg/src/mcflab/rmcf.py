"""Time integration of the symmetric-reduction flow over a model cylinder.

The evolving surface is the radius graph r(y, t) of a rotationally symmetric
hypersurface over S^{n-k}(rho) x R^k.  In the rescaled frame the exact
equation is

    dr/dt = (delta_ij - r_i r_j / (1+|grad r|^2)) r_ij - (n-k)/r
            + (r - y.grad r)/2,

whose linearization at r = rho is the drift Laplacian plus one.  The
unrescaled (MCF) frame drops the last term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import (
    BlowupTimeNotSetError,
    BoundaryNotGraphicalError,
    CenterOutsideDomainError,
    CflViolationError,
    GridMismatchError,
    InsufficientDataError,
    NanDetectedError,
    NonpositiveRadiusError,
    NoPinchObservedError,
    PinchDetected,
)
from .grids import Field, TensorGrid, make_grid, resample, symmetric_axis
from .normal_form import c1_profile
from .shrinker import ShrinkerSpec

RMCF = "rmcf"
MCF = "mcf"

BC_CODES = {"none": _kernels.BC_NONE, "extrapolate": _kernels.BC_EXTRAPOLATE, "profile": _kernels.BC_PROFILE}


@dataclass
class GraphState:
    """Radius graph over the model cylinder at one flow time."""

    spec: ShrinkerSpec
    grid: TensorGrid
    r: np.ndarray
    t: float
    frame: str = RMCF

    def __post_init__(self):
        self.r = np.ascontiguousarray(self.r, dtype=float)
        if self.r.shape != self.grid.shape:
            raise GridMismatchError("radius field does not match grid")

    @property
    def u(self) -> np.ndarray:
        """Graph function over the unit-scale cylinder (rescaled frame)."""
        return self.r - self.spec.rho

    def u_field(self) -> Field:
        return Field(self.grid, self.u)

    def copy(self) -> "GraphState":
        return replace(self, r=self.r.copy())


@dataclass
class SolverConfig:
    """Discretization policy for one flow run."""

    c_cfl: float = 0.2
    K: float = 1.5
    eps0: float = 0.1
    nodes: int = 512
    r_min_factor: float = 1e-3
    boundary: str = "extrapolate"
    profile_active: tuple = ()
    symmetrize: bool = False
    regrid_headroom: float = 1.05
    # graphicality guard for domain expansion; the pinch profile carries
    # |grad u| ~ rho K / (2 sqrt(t)) at the boundary, so this sits above eps0
    boundary_grad_max: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.c_cfl <= 0.5:
            raise CflViolationError(f"c_cfl must lie in (0, 0.5], got {self.c_cfl}")
        if self.boundary not in BC_CODES:
            raise ValueError(f"unknown boundary policy {self.boundary!r}")

    def dt(self, h: float) -> float:
        return self.c_cfl * h * h

    def r_min_stop(self, spec: ShrinkerSpec) -> float:
        return self.r_min_factor * spec.rho


@dataclass
class FlowDiagnostics:
    """Per-snapshot scalar diagnostics."""

    t: float
    grad_radius: float
    l2: float
    c0: float
    c1: float
    min_h: float
    max_a: float
    type_i: float
    min_r: float
    cone_ratios: dict = field(default_factory=dict)

    CSV_HEADER = "t,grad_radius,l2,c0,c1,minH,maxA,typeI,minr"

    def csv_row(self) -> str:
        vals = [self.t, self.grad_radius, self.l2, self.c0, self.c1, self.min_h, self.max_a, self.type_i, self.min_r]
        return ",".join(f"{v:.17g}" for v in vals)


def initial_state(spec: ShrinkerSpec, radius: float, nodes: int, u0=None, t0: float = 0.0) -> GraphState:
    """Build an RMCF state r = rho + u0(y) on a fresh symmetric grid."""
    grid = make_grid(radius, nodes, ndim=spec.k)
    r = np.full(grid.shape, spec.rho)
    if u0 is not None:
        r = r + np.asarray(u0(*grid.meshes()), dtype=float)
    return GraphState(spec=spec, grid=grid, r=r, t=t0, frame=RMCF)


def profile_state(spec: ShrinkerSpec, active, t0: float, K: float, nodes: int, extra=None) -> GraphState:
    """RMCF state seeded with the pinch profile of the given directions."""
    grid = make_grid(K * math.sqrt(t0), nodes, ndim=spec.k)
    r = spec.rho + c1_profile(spec, active, grid.meshes(), t0)
    if extra is not None:
        r = r + extra(*grid.meshes())
    return GraphState(spec=spec, grid=grid, r=r, t=t0, frame=RMCF)


def _check_radius(state: GraphState):
    if np.any(~np.isfinite(state.r)):
        raise NanDetectedError(f"NaN in radius field at t={state.t}")
    if np.any(state.r <= 0.0):
        raise NonpositiveRadiusError(f"radius field nonpositive at t={state.t}")


def rmcf_rhs(state: GraphState) -> np.ndarray:
    """dr/dt at every node (one-sided stencils on the two edge layers)."""
    _check_radius(state)
    nmk = float(state.spec.sphere_dim)
    rescaled = state.frame == RMCF
    if state.grid.ndim == 1:
        return _kernels.rhs_field_1d(state.r, state.grid.axes[0], state.grid.h, nmk, rescaled)
    if state.grid.ndim == 2:
        return _kernels.rhs_field_2d(
            state.r, state.grid.axes[0], state.grid.axes[1], state.grid.h, nmk, rescaled
        )
    raise GridMismatchError("only k = 1 and k = 2 grids are supported")


def _advance(state: GraphState, config: SolverConfig, dt: float, nsteps: int) -> GraphState:
    r = state.r.copy()
    nmk = float(state.spec.sphere_dim)
    rescaled = state.frame == RMCF
    bc = BC_CODES[config.boundary]
    rho = state.spec.rho
    stop = config.r_min_stop(state.spec)
    if state.grid.ndim == 1:
        active = 1.0 if (config.profile_active and 0 in config.profile_active) else 0.0
        t_end, status, done = _kernels.advance_1d(
            r, state.grid.axes[0], state.grid.h, nmk, rescaled, state.t, dt, nsteps,
            stop, bc, rho, active, config.symmetrize,
        )
    elif state.grid.ndim == 2:
        a0 = 1.0 if (config.profile_active and 0 in config.profile_active) else 0.0
        a1 = 1.0 if (config.profile_active and 1 in config.profile_active) else 0.0
        t_end, status, done = _kernels.advance_2d(
            r, state.grid.axes[0], state.grid.axes[1], state.grid.h, nmk, rescaled,
            state.t, dt, nsteps, stop, bc, rho, a0, a1, config.symmetrize,
        )
    else:
        raise GridMismatchError("only k = 1 and k = 2 grids are supported")
    out = replace(state, r=r, t=t_end)
    if status == 2:
        raise NanDetectedError(f"NaN during stepping at t={t_end}")
    if status == 1:
        raise PinchDetected(f"min radius < {stop:.3g} at t={t_end}", state=out, t=t_end)
    return out


def step(state: GraphState, config: SolverConfig, dt: float | None = None) -> GraphState:
    """One RK4 step; dt defaults to the CFL value c_cfl h^2."""
    h = state.grid.h
    if dt is None:
        dt = config.dt(h)
    elif dt > config.c_cfl * h * h * (1.0 + 1e-12):
        raise CflViolationError(f"dt={dt:.3g} exceeds c_cfl*h^2={config.c_cfl * h * h:.3g}")
    _check_radius(state)
    return _advance(state, config, dt, 1)


def advance_to(state: GraphState, t_target: float, config: SolverConfig) -> GraphState:
    """Integrate to t_target (no regridding), choosing nsteps from the CFL dt."""
    span = t_target - state.t
    if span <= 0:
        return state
    dt0 = config.dt(state.grid.h)
    nsteps = max(1, int(math.ceil(span / dt0 - 1e-12)))
    return _advance(state, config, span / nsteps, nsteps)


def boundary_gradient(state: GraphState) -> float:
    """Max |grad u| over the outermost node layer."""
    grads = [state.grid.d1(state.r, ax) for ax in range(state.grid.ndim)]
    g = np.sqrt(sum(gr**2 for gr in grads))
    if state.grid.ndim == 1:
        return float(max(g[0], g[-1]))
    edge = np.zeros(state.grid.shape, dtype=bool)
    edge[0, :] = edge[-1, :] = True
    edge[:, 0] = edge[:, -1] = True
    return float(np.max(g[edge]))


def expand_domain(state: GraphState, config: SolverConfig, target_radius: float | None = None) -> GraphState:
    """Regrid to the K*sqrt(t) box, filling new exterior nodes.

    Exterior values come from the pinch profile when ``config.profile_active``
    names the active directions, else from constant (clamped-spline)
    extrapolation of the old field.
    """
    if boundary_gradient(state) > config.boundary_grad_max:
        raise BoundaryNotGraphicalError(
            f"|grad u| at the boundary exceeds {config.boundary_grad_max} at t={state.t}"
        )
    R_new = target_radius if target_radius is not None else config.K * math.sqrt(max(state.t, 1e-12))
    old = state.grid
    new_grid = make_grid(R_new, config.nodes, ndim=old.ndim)
    rho = state.spec.rho

    if config.profile_active:
        def fill(*ms):
            return rho + c1_profile(state.spec, config.profile_active, ms, state.t)
    else:
        fill = None

    fld = Field(old, state.r)
    if fill is None:
        # clamped-spline (constant along each axis) extension
        clamped_axes = tuple(np.clip(ax, old.axes[i][0], old.axes[i][-1]) for i, ax in enumerate(new_grid.axes))
        if old.ndim == 1:
            from scipy.interpolate import make_interp_spline

            spl = make_interp_spline(old.axes[0], state.r, k=5)
            vals = spl(clamped_axes[0])
        else:
            from scipy.interpolate import RectBivariateSpline

            spl = RectBivariateSpline(old.axes[0], old.axes[1], state.r, kx=5, ky=5)
            vals = spl(clamped_axes[0], clamped_axes[1])
        new = Field(new_grid, vals)
    else:
        new = resample(fld, new_grid, fill=fill)
    return replace(state, grid=new_grid, r=new.values)


def to_mcf(state: GraphState) -> GraphState:
    """Rescaled -> unrescaled frame about the same spacetime center.

    tau = -exp(-t); lengths scale by exp(-t/2).  The grid is scaled in
    place, so the round trip is exact.
    """
    if state.frame != RMCF:
        raise ValueError("state is not in the rescaled frame")
    s = math.exp(-state.t / 2.0)
    grid = TensorGrid(axes=tuple(ax * s for ax in state.grid.axes))
    return GraphState(spec=state.spec, grid=grid, r=state.r * s, t=-math.exp(-state.t), frame=MCF)


def to_rmcf(state: GraphState, center=None, resample_to: TensorGrid | None = None) -> GraphState:
    """Unrescaled -> rescaled frame about the spacetime center (x0, T).

    ``center`` is (x0, T) with x0 an axis offset (array of length k) and T
    the presumed singular time; default (0, 0).
    """
    if state.frame != MCF:
        raise ValueError("state is not in the unrescaled frame")
    x0 = np.zeros(state.grid.ndim)
    T = 0.0
    if center is not None:
        x0 = np.asarray(center[0], dtype=float).reshape(-1)
        T = float(center[1])
    if T <= state.t:
        raise CenterOutsideDomainError(f"singular time T={T} not after tau={state.t}")
    for ax, off in zip(state.grid.axes, x0):
        if off < ax[0] or off > ax[-1]:
            raise CenterOutsideDomainError(f"axis center {off} outside [{ax[0]}, {ax[-1]}]")
    s = 1.0 / math.sqrt(T - state.t)
    t_new = -math.log(T - state.t)
    grid = TensorGrid(axes=tuple((ax - off) * s for ax, off in zip(state.grid.axes, x0)))
    out = GraphState(spec=state.spec, grid=grid, r=state.r * s, t=t_new, frame=RMCF)
    if resample_to is not None:
        out = replace(out, grid=resample_to, r=resample(Field(grid, out.r), resample_to).values)
    return out


def apply_conformal(state: GraphState, lam: float = 1.0, d=None, rot=None) -> GraphState:
    """Dilate by lam (with the induced time shift) and translate the axis by d.

    The surface map is x -> lam*(x - d): in graph terms
    r'(y) = lam * r(y/lam + d), and the rescaled flow time moves to
    t + 2 log lam.  Axis rotation ``rot`` (k=2 only) is applied first.
    """
    if state.frame != RMCF:
        raise ValueError("conformal maps are applied in the rescaled frame")
    vals = Field(state.grid, state.r)
    if rot is not None:
        from .modes import axis_rotate  # local import to avoid a cycle

        vals = axis_rotate(vals, rot)
    grid = state.grid
    if d is None:
        d = np.zeros(grid.ndim)
    d = np.asarray(d, dtype=float).reshape(-1)
    if lam <= 0:
        raise ValueError("dilation factor must be positive")
    if grid.ndim == 1:
        pts = grid.axes[0] / lam + d[0]
        from scipy.interpolate import make_interp_spline

        spl = make_interp_spline(grid.axes[0], vals.values, k=5)
        new_r = lam * spl(np.clip(pts, grid.axes[0][0], grid.axes[0][-1]))
    else:
        from scipy.interpolate import RectBivariateSpline

        spl = RectBivariateSpline(grid.axes[0], grid.axes[1], vals.values, kx=5, ky=5)
        p0 = np.clip(grid.axes[0] / lam + d[0], grid.axes[0][0], grid.axes[0][-1])
        p1 = np.clip(grid.axes[1] / lam + d[1], grid.axes[1][0], grid.axes[1][-1])
        new_r = lam * spl(p0, p1)
    return replace(state, r=new_r, t=state.t + 2.0 * math.log(lam))


def graphical_radius(state: GraphState, eps0: float) -> float:
    """Largest R' with sup over the R'-ball of |u|+|grad u|+|Hess u| <= eps0."""
    grid = state.grid
    u = state.u
    grads = [grid.d1(u, ax) for ax in range(grid.ndim)]
    gnorm = np.sqrt(sum(g**2 for g in grads))
    hess2 = np.zeros(grid.shape)
    for a in range(grid.ndim):
        for b in range(grid.ndim):
            dab = grid.d1(grads[a], b) if a != b else grid.d2(u, a)
            hess2 += dab**2
    proxy = np.abs(u) + gnorm + np.sqrt(hess2)
    rr = grid.radius_field().ravel()
    order = np.argsort(rr, kind="stable")
    running = np.maximum.accumulate(proxy.ravel()[order])
    ok = running <= eps0
    if not ok[0]:
        return 0.0
    idx = np.nonzero(~ok)[0]
    if len(idx) == 0:
        return grid.radius
    return float(rr[order][idx[0] - 1]) if idx[0] > 0 else 0.0


def principal_curvatures(state: GraphState):
    """Sphere curvature and axis shape-operator eigenvalues at every node.

    Inward-positive convention: the model cylinder has sphere curvature
    1/rho and zero axis curvature.
    """
    grid = state.grid
    r = state.r
    grads = [grid.d1(r, ax) for ax in range(grid.ndim)]
    g2 = 1.0 + sum(g**2 for g in grads)
    sq = np.sqrt(g2)
    kappa_sphere = 1.0 / (r * sq)
    if grid.ndim == 1:
        h11 = grid.d2(r, 0)
        s11 = (1.0 - grads[0] ** 2 / g2) * h11 / sq
        axis_eigs = [-s11]
    else:
        h00 = grid.d2(r, 0)
        h11 = grid.d2(r, 1)
        h01 = grid.d1(grads[0], 1)
        p00 = 1.0 - grads[0] ** 2 / g2
        p11 = 1.0 - grads[1] ** 2 / g2
        p01 = -grads[0] * grads[1] / g2
        # S = P H / sqrt(g2); eigenvalues from trace and determinant
        s00 = (p00 * h00 + p01 * h01) / sq
        s01 = (p00 * h01 + p01 * h11) / sq
        s10 = (p01 * h00 + p11 * h01) / sq
        s11 = (p01 * h01 + p11 * h11) / sq
        tr = s00 + s11
        det = s00 * s11 - s01 * s10
        disc = np.sqrt(np.maximum(tr**2 / 4.0 - det, 0.0))
        axis_eigs = [-(tr / 2.0 + disc), -(tr / 2.0 - disc)]
    return kappa_sphere, axis_eigs


def curvature_diagnostics(state: GraphState, blowup_time: float | None = None, eps0: float = 0.1,
                          want_type_i: bool = False) -> FlowDiagnostics:
    """Snapshot diagnostics: graphical radius, norms, min H, max |A|, min r."""
    spec = state.spec
    d = spec.sphere_dim
    kappa_s, axis_eigs = principal_curvatures(state)
    H = d * kappa_s + sum(axis_eigs)
    a2 = d * kappa_s**2 + sum(e**2 for e in axis_eigs)
    max_a = float(np.sqrt(np.max(a2)))
    type_i = math.nan
    if want_type_i or blowup_time is not None:
        if blowup_time is None:
            raise BlowupTimeNotSetError("type-I ratio needs an estimated blow-up time")
        if state.frame != MCF:
            raise ValueError("type-I ratio is an unrescaled-frame quantity")
        type_i = max_a * math.sqrt(max(blowup_time - state.t, 0.0))

    if state.frame == RMCF:
        u = state.u
        grads = [state.grid.d1(u, ax) for ax in range(state.grid.ndim)]
        gnorm = np.sqrt(sum(g**2 for g in grads))
        grad_radius = graphical_radius(state, eps0)
        w = state.grid.gaussian_weights()
        rr = state.grid.radius_field()
        inside = rr <= max(grad_radius, 1e-12)
        l2 = float(np.sqrt(np.sum((u**2 * w)[inside])))
        c0 = float(np.max(np.abs(u)))
        c1 = float(np.max(np.abs(u) + gnorm))
    else:
        grad_radius = math.nan
        l2 = math.nan
        c0 = math.nan
        c1 = math.nan
    return FlowDiagnostics(
        t=state.t,
        grad_radius=grad_radius,
        l2=l2,
        c0=c0,
        c1=c1,
        min_h=float(np.min(H)),
        max_a=max_a,
        type_i=type_i,
        min_r=float(np.min(state.r)),
    )


def quadratic_residual_check(state0: GraphState, amplitude: float, direction: Field) -> float:
    """Sup-norm defect of rhs(rho + eps d) - eps L d + eps^2 d^2/(2 rho).

    For theta-independent directions the quadratic term of the graph
    equation is -u^2/(2 rho); the defect must scale like O(eps^3) + O(h^4).
    Evaluated away from the one-sided edge layers.
    """
    from .hermite import apply_L

    spec = state0.spec
    if amplitude == 0.0:
        return 0.0
    grid = direction.grid
    rho = spec.rho
    pert = GraphState(spec=spec, grid=grid, r=rho + amplitude * direction.values, t=state0.t, frame=RMCF)
    rhs = rmcf_rhs(pert)
    lin = apply_L(direction).values * amplitude
    quad = amplitude**2 * direction.values**2 / (2.0 * rho)
    defect = rhs - lin + quad
    sl = tuple(slice(3, -3) for _ in range(grid.ndim))
    return float(np.max(np.abs(defect[sl])))


def detect_singularity(times, min_r, pinch_state: GraphState | None = None, nfit: int = 20,
                       model: str | None = None):
    """Blow-up time by affine extrapolation of min_r^2 against time.

    ``times``/``min_r`` are the pre-pinch diagnostics series in the
    unrescaled frame; min_r^2 is asymptotically affine for a type-I neck.
    """
    times = np.asarray(times, dtype=float)
    min_r = np.asarray(min_r, dtype=float)
    if pinch_state is None and (len(times) == 0 or min_r[-1] > 0.05 * min_r[0]):
        raise NoPinchObservedError("no pinch event in this trajectory")
    if len(times) < 3:
        raise InsufficientDataError("need at least 3 snapshots to extrapolate")
    ts = times[-nfit:]
    rs2 = min_r[-nfit:] ** 2
    slope, intercept = np.polyfit(ts, rs2, 1)
    if slope >= 0:
        raise NoPinchObservedError("min radius is not decreasing")
    t_hat = -intercept / slope
    location = None
    if pinch_state is not None:
        idx = np.unravel_index(np.argmin(pinch_state.r), pinch_state.r.shape)
        location = tuple(float(pinch_state.grid.axes[a][idx[a]]) for a in range(pinch_state.grid.ndim))
    if model is None and pinch_state is not None:
        d = pinch_state.spec.sphere_dim
        model = f"S^{d}xR^{pinch_state.spec.k}"
    return {"T_hat": float(t_hat), "location": location, "model": model}


def l2_decay_probe(times, l2_norms):
    """Least-squares slope of log ||u||_L2 against log t, with a 1-sigma band."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(l2_norms, dtype=float)
    keep = (t > 0) & (v > 0)
    t, v = t[keep], v[keep]
    if len(t) < 10:
        raise InsufficientDataError("need >= 10 snapshots in the asymptotic regime")
    x = np.log(t)
    y = np.log(v)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    slope = float(coef[0])
    n = len(x)
    sigma2 = float(res[0]) / (n - 2) if len(res) else 0.0
    sx2 = float(np.sum((x - x.mean()) ** 2))
    band = math.sqrt(sigma2 / sx2) if sx2 > 0 else math.inf
    return {"slope": slope, "stderr": band}
