"""Unrescaled flows of rotational graphs, tori of revolution and arrival times.

A rotational graph is the hypersurface r = u(x) > 0 revolved around the
x-axis of (n+1)-space; its graph flow is du/dtau = u_xx/(1+u_x^2) - (n-1)/u.
Tori are handled two ways: a planar profile curve moving by the full
surface-of-revolution normal speed, and the quasi-static meridian model in
which each meridian circle shrinks by the azimuthal mean of that speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._kernels import aag_rhs_kernel, advance_aag, advance_aag_capped
from .errors import (
    AxisCollisionError,
    InsufficientDataError,
    NonpositiveRadiusError,
    NotAThinTorusError,
    NotMeanConvexError,
    SelfIntersectionError,
)

# ---------------------------------------------------------------------------
# rotational graphs


@dataclass
class RotationalGraph:
    """Radius samples u(x) > 0 of a rotational hypersurface."""

    x: np.ndarray
    u: np.ndarray
    n: int
    tau: float = 0.0
    periodic: bool = False
    capped: bool = True

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        if self.x.shape != self.u.shape:
            raise ValueError("x and u must share a shape")

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])

    def copy(self):
        return replace(self, x=self.x.copy(), u=self.u.copy())


def aag_rhs(state: RotationalGraph) -> np.ndarray:
    """du/dtau = u_xx/(1+u_x^2) - (n-1)/u on the evaluated nodes."""
    if np.any(state.u <= 0):
        raise NonpositiveRadiusError("rotational graph touched the axis")
    out = np.empty_like(state.u)
    aag_rhs_kernel(state.u, state.h, float(state.n - 1), state.periodic, out)
    return out


def strict_extrema_count(u: np.ndarray, periodic: bool) -> int:
    """Number of strict local maxima and minima of the sampled profile."""
    n = len(u)
    count = 0
    rng = range(n) if periodic else range(1, n - 1)
    for i in rng:
        a, b, c = u[(i - 1) % n], u[i], u[(i + 1) % n]
        if (b > a and b > c) or (b < a and b < c):
            count += 1
    return count


def _local_min_clusters(u: np.ndarray, thresh: float, periodic: bool):
    """Cluster nodes below thresh into candidate pinch events."""
    below = u < thresh
    if not np.any(below):
        return []
    idx = np.nonzero(below)[0]
    clusters = [[idx[0]]]
    for i in idx[1:]:
        if i == clusters[-1][-1] + 1:
            clusters[-1].append(i)
        else:
            clusters.append([i])
    if periodic and len(clusters) > 1 and clusters[0][0] == 0 and clusters[-1][-1] == len(u) - 1:
        clusters[0] = clusters.pop() + clusters[0]
    return clusters


def _fit_root(times, series):
    """Root of the affine fit of a decreasing series against time."""
    nfit = min(20, len(times))
    slope, intercept = np.polyfit(times[-nfit:], series[-nfit:], 1)
    return float(-intercept / slope)


def _evolve_periodic(state: RotationalGraph, c_cfl, u_stop_factor, t_max, snapshot_cb, snap_every):
    st = state.copy()
    u_stop = u_stop_factor * float(np.max(st.u))
    h = st.h
    dt = c_cfl * h * h
    times = [st.tau]
    minima = [float(np.min(st.u))]
    next_snap = st.tau
    status = 0
    chunk = 16
    while True:
        t_end, status, _ = advance_aag(st.u, h, float(st.n - 1), True, st.tau, dt, chunk, u_stop)
        st.tau = t_end
        times.append(st.tau)
        minima.append(float(np.min(st.u)))
        if snapshot_cb is not None and (snap_every is None or st.tau >= next_snap):
            snapshot_cb(st)
            if snap_every is not None:
                next_snap += snap_every
        if status != 0 or (t_max is not None and st.tau >= t_max):
            break
    if status != 1:
        return {"pinched": False, "status": status, "state": st,
                "times": np.asarray(times), "min_u": np.asarray(minima)}
    times = np.asarray(times)
    minima = np.asarray(minima)
    t_hat = _fit_root(times, minima**2)
    uxx = np.gradient(np.gradient(st.u, st.x), st.x)
    events = []
    for cl in _local_min_clusters(st.u, 2.0 * u_stop, True):
        i = cl[int(np.argmin(st.u[cl]))]
        events.append({"kind": "neck" if uxx[i] > 0 else "cap", "x": float(st.x[i]), "T_hat": t_hat})
    return {"pinched": True, "T_hat": t_hat, "events": events, "count": len(events),
            "state": st, "times": times, "min_u": minima}


def _evolve_capped(state: RotationalGraph, c_cfl, u_stop_factor, t_max, snapshot_cb, snap_every):
    """Capped graphs evolve in the squared-radius variable v = u^2.

    Spheres are exactly quadratic in v (dv/dtau = -2n), so the cap is a
    regular point: the active window tracks v > 0 and each cap is the root
    of the quadratic continuation, per the cap-exclusion policy.
    """
    n = len(state.x)
    h = state.h
    x = np.concatenate([[state.x[0] - 2 * h, state.x[0] - h], state.x,
                        [state.x[-1] + h, state.x[-1] + 2 * h]])
    v = np.zeros(n + 4)
    v[2:-2] = state.u**2
    i0, i1 = 2, n + 1
    while v[i0] <= 0 and i1 - i0 > 8:
        i0 += 1
    while v[i1] <= 0 and i1 - i0 > 8:
        i1 -= 1
    neck_stop2 = (u_stop_factor * float(np.max(state.u))) ** 2
    dt = c_cfl * h * h
    tau = state.tau
    times = [tau]
    vmax = [float(np.max(v))]
    vmin_int = [float(np.min(v[i0 + 4:i1 - 3])) if i1 - 7 > i0 + 4 else float(v[(i0 + i1) // 2])]
    next_snap = tau
    chunk = 16
    status = 0
    while True:
        tau, status, i0, i1 = advance_aag_capped(v, h, float(state.n - 1), tau, dt, chunk, i0, i1, neck_stop2)
        times.append(tau)
        vmax.append(float(np.max(v[i0:i1 + 1])))
        vmin_int.append(float(np.min(v[i0 + 4:i1 - 3])) if i1 - 7 > i0 + 4 else vmax[-1])
        if snapshot_cb is not None and (snap_every is None or tau >= next_snap):
            u_now = np.sqrt(np.maximum(v[2:-2], 0.0))
            snapshot_cb(RotationalGraph(x=state.x, u=u_now, n=state.n, tau=tau, capped=True))
            if snap_every is not None:
                next_snap += snap_every
        if status != 0 or (t_max is not None and tau >= t_max):
            break
    times = np.asarray(times)
    events = []
    if status == 1:  # interior neck
        t_hat = _fit_root(times, np.asarray(vmin_int))
        vxx = np.gradient(np.gradient(v, x), x)
        win = v[i0 + 4:i1 - 3]
        for cl in _local_min_clusters(win, max(2.0 * neck_stop2, 1.5 * float(np.min(win))), False):
            i = i0 + 4 + cl[int(np.argmin(win[cl]))]
            events.append({"kind": "neck" if vxx[i] > 0 else "cap", "x": float(x[i]), "T_hat": t_hat})
        if not events:
            i = i0 + 4 + int(np.argmin(win))
            events.append({"kind": "neck", "x": float(x[i]), "T_hat": t_hat})
        pinched = True
    elif status == 3:  # whole component extinct (round cap)
        t_hat = _fit_root(times, np.asarray(vmax))
        events.append({"kind": "cap", "x": float(x[(i0 + i1) // 2]), "T_hat": t_hat})
        pinched = True
    else:
        u_now = np.sqrt(np.maximum(v[2:-2], 0.0))
        return {"pinched": False, "status": status,
                "state": RotationalGraph(x=state.x, u=u_now, n=state.n, tau=tau, capped=True),
                "times": times, "min_u": np.sqrt(np.maximum(np.asarray(vmin_int), 0.0))}
    u_now = np.sqrt(np.maximum(v[2:-2], 0.0))
    return {"pinched": True, "T_hat": t_hat, "events": events, "count": len(events),
            "state": RotationalGraph(x=state.x, u=u_now, n=state.n, tau=tau, capped=True),
            "times": times, "min_u": np.sqrt(np.maximum(np.asarray(vmin_int), 0.0)),
            "max_u": np.sqrt(np.maximum(np.asarray(vmax), 0.0))}


def evolve_aag(state: RotationalGraph, c_cfl: float = 0.2, u_stop_factor: float = 0.02,
               t_max: float | None = None, snapshot_cb=None, snap_every: float | None = None):
    """Integrate a rotational graph to its first singular event.

    Periodic profiles evolve in u; capped profiles evolve in v = u^2 with a
    moving active window (caps excluded from the stencil).  The report
    carries the extrapolated singular time, per-event neck/cap tags and the
    strict-extrema bound check on the event count.
    """
    if state.periodic:
        rep = _evolve_periodic(state, c_cfl, u_stop_factor, t_max, snapshot_cb, snap_every)
    else:
        rep = _evolve_capped(state, c_cfl, u_stop_factor, t_max, snapshot_cb, snap_every)
    if rep.get("pinched"):
        bound = strict_extrema_count(state.u, state.periodic)
        rep["extrema_bound"] = bound
        rep["bound_ok"] = rep["count"] <= max(bound, 1)
    return rep


def graph_curvature(state: RotationalGraph):
    """Pointwise |A| and H of the revolved graph (inward-positive H)."""
    ux = np.gradient(state.u, state.x)
    uxx = np.gradient(ux, state.x)
    g = 1.0 + ux**2
    k_axis = -uxx / g**1.5
    k_rot = 1.0 / (state.u * np.sqrt(g))
    H = k_axis + (state.n - 1) * k_rot
    A = np.sqrt(k_axis**2 + (state.n - 1) * k_rot**2)
    return H, A


# ---------------------------------------------------------------------------
# profile curves (tori of revolution, ambient R^3)


@dataclass
class ProfileCurve:
    """Closed polyline (x_i, r_i) in the half plane r > 0."""

    points: np.ndarray  # (N, 2), not repeating the first point
    tau: float = 0.0

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise ValueError("points must be (N, 2)")

    def copy(self):
        return replace(self, points=self.points.copy())


def circle_curve(center_x: float, center_r: float, radius: float, nodes: int = 256) -> ProfileCurve:
    phi = np.linspace(0.0, 2.0 * math.pi, nodes, endpoint=False)
    pts = np.stack([center_x + radius * np.sin(phi), center_r + radius * np.cos(phi)], axis=1)
    return ProfileCurve(points=pts)


def _closed_diffs(pts):
    return np.roll(pts, -1, axis=0) - pts


def torus_rhs(curve: ProfileCurve):
    """Outward normal speed of the revolved profile: -(kappa + nu_r / r).

    kappa is the planar curvature, positive for a convex curve traversed
    so the normal points away from the enclosed region; nu_r is the radial
    normal component.  A circle far from the axis shrinks at rate 1/a.
    """
    pts = curve.points
    r = pts[:, 1]
    if np.any(r <= 0):
        raise AxisCollisionError("profile curve touched the rotation axis")
    fwd = _closed_diffs(pts)
    bwd = -np.roll(fwd, 1, axis=0)
    lf = np.linalg.norm(fwd, axis=1)
    lb = np.linalg.norm(bwd, axis=1)
    tang = fwd / lf[:, None]
    # turning angle of the tangent between consecutive segments
    tprev = np.roll(tang, 1, axis=0)
    cross = tprev[:, 0] * tang[:, 1] - tprev[:, 1] * tang[:, 0]
    dot = np.clip((tprev * tang).sum(axis=1), -1.0, 1.0)
    dphi = np.arctan2(cross, dot)
    # orientation from the signed area; outward normal is the right normal
    # for a counterclockwise curve, and kappa > 0 for a convex curve
    area2 = float(np.sum(pts[:, 0] * np.roll(pts[:, 1], -1) - np.roll(pts[:, 0], -1) * pts[:, 1]))
    orient = 1.0 if area2 > 0 else -1.0
    normal = orient * np.stack([tang[:, 1], -tang[:, 0]], axis=1)
    kappa = orient * dphi / (0.5 * (lf + lb))
    nu_r = normal[:, 1]
    speed = -(kappa + nu_r / r)
    return speed, normal


def _is_simple(pts: np.ndarray) -> bool:
    try:
        from shapely.geometry import LinearRing

        return LinearRing(pts).is_simple
    except Exception:
        return True


def remesh_closed(pts: np.ndarray, nodes: int | None = None) -> np.ndarray:
    """Resample a closed polyline to uniform arclength."""
    n = nodes or len(pts)
    seg = np.linalg.norm(_closed_diffs(pts), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    L = s[-1]
    closed = np.vstack([pts, pts[:1]])
    snew = np.linspace(0.0, L, n, endpoint=False)
    x = np.interp(snew, s, closed[:, 0])
    r = np.interp(snew, s, closed[:, 1])
    return np.stack([x, r], axis=1)


def evolve_torus(curve: ProfileCurve, t_max: float | None = None, c_cfl: float = 0.1,
                 r_stop: float = 1e-3, check_simple: bool = True, track=None):
    """Flow a closed profile curve to its first event, remeshing each step.

    Stops on axis approach (pinch) or self-intersection; returns the last
    curve, the event tag and the min-radius history.
    """
    cur = curve.copy()
    times = [cur.tau]
    minr = [float(np.min(cur.points[:, 1]))]
    event = None
    while True:
        pts = cur.points
        seg = np.linalg.norm(_closed_diffs(pts), axis=1)
        ds = float(np.min(seg))
        rmin = float(np.min(pts[:, 1]))
        dt = c_cfl * min(ds * ds, rmin * rmin)
        speed, normal = torus_rhs(cur)
        newpts = pts + dt * speed[:, None] * normal
        newpts = remesh_closed(newpts, len(pts))
        cur = ProfileCurve(points=newpts, tau=cur.tau + dt)
        times.append(cur.tau)
        minr.append(float(np.min(newpts[:, 1])))
        if track is not None:
            track(cur)
        if minr[-1] < r_stop:
            event = "axis"
            break
        if check_simple and not _is_simple(newpts):
            event = "self-intersection"
            break
        if t_max is not None and cur.tau >= t_max:
            break
    if event == "self-intersection":
        raise SelfIntersectionError(f"profile curve self-intersected at tau={cur.tau}")
    return {"curve": cur, "event": event, "times": np.asarray(times), "min_r": np.asarray(minr)}


# ---------------------------------------------------------------------------
# quasi-static meridian model of a thin torus


@dataclass
class TorusState:
    """Ring of meridian circles: ring radius R, tube radii a(phi)."""

    R: float
    phi: np.ndarray
    a: np.ndarray
    tau: float = 0.0

    def copy(self):
        return replace(self, phi=self.phi.copy(), a=self.a.copy())


def make_torus(R: float, a: float, nodes: int = 256) -> TorusState:
    phi = np.linspace(0.0, 2.0 * math.pi, nodes, endpoint=False)
    return TorusState(R=R, phi=phi, a=np.full(nodes, float(a)))


def smooth_bump(s: np.ndarray, width: float) -> np.ndarray:
    """Compactly supported C^inf bump, 1 at 0, 0 outside |s| >= width."""
    out = np.zeros_like(s)
    inside = np.abs(s) < width
    z = s[inside] / width
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - z**2))
    return out


def squeeze_perturbation(torus: TorusState, p: float, eps: float, width: float = 0.6) -> TorusState:
    """Modulate the tube radius: a(phi) -> a(phi) (1 - eps bump(phi - p))."""
    ratio = float(np.max(torus.a)) / torus.R
    if ratio >= 0.2:
        raise NotAThinTorusError(f"a/R = {ratio:.3f} is not thin (< 0.2 required)")
    s = np.angle(np.exp(1j * (torus.phi - p)))
    out = torus.copy()
    out.a = torus.a * (1.0 - eps * smooth_bump(s, width))
    return out


def meridian_rate(a: np.ndarray, R: float) -> np.ndarray:
    """Azimuthal mean of the tube normal speed: da/dtau = -(1/a)(2 - R/sqrt(R^2-a^2))."""
    return -(1.0 / a) * (2.0 - R / np.sqrt(R * R - a * a))


def evolve_meridians(torus: TorusState, tie_window_steps: float = 2.0, dt_factor: float = 5e-4) -> dict:
    """Shrink each meridian by the quasi-static law; report first-pinch data.

    Meridian extinction times are found per angle; pinches within
    ``tie_window_steps`` time steps of the earliest are reported as
    simultaneous (ties are flagged).
    """
    a = torus.a.copy()
    R = torus.R
    a2 = a**2
    dt = dt_factor * float(np.min(a2))
    # a^2 evolves by 2 a da/dtau = -2(2 - R/sqrt(R^2-a^2)); integrate per meridian
    tau = 0.0
    alive = a2 > 0
    T = np.full(a.shape, np.nan)
    amin_floor = (1e-3 * float(np.min(a))) ** 2
    while np.any(alive):
        rate = -2.0 * (2.0 - R / np.sqrt(np.maximum(R * R - a2, 1e-300)))
        a2 = a2 + dt * np.where(alive, rate, 0.0)
        tau += dt
        newly = alive & (a2 <= amin_floor)
        T[newly] = tau
        alive &= ~newly
    t0 = float(np.nanmin(T))
    tie = np.abs(T - t0) <= tie_window_steps * dt
    first = np.nonzero(tie)[0]
    return {
        "T": T,
        "T_first": t0,
        "first_angles": torus.phi[first],
        "tie": len(first) > 1,
        "spread": float(np.nanmax(T) - np.nanmin(T)),
        "dt": dt,
    }


# ---------------------------------------------------------------------------
# arrival time


@dataclass
class ArrivalTimeField:
    """First-crossing times of a monotone front on an (x, r) grid."""

    x: np.ndarray
    r: np.ndarray
    g: np.ndarray  # (len(x), len(r)); NaN where never swept
    reached: np.ndarray


def arrival_time_from_graph_flow(state: RotationalGraph, r_grid: np.ndarray,
                                 c_cfl: float = 0.2, u_stop_factor: float = 0.02,
                                 mean_convex_check: bool = True) -> ArrivalTimeField:
    """Arrival time of the front of a shrinking rotational graph.

    For each grid column the crossing time of the front through each r
    level is interpolated between steps; the flow must be mean convex
    (checked on snapshots) so each node is swept at most once.  Capped
    graphs run in the squared-radius variable, where the crossing levels
    are r^2 (this also records the axis sweep at the receding caps).
    """
    st = state.copy()
    h = st.h
    dt = c_cfl * h * h
    nx = len(st.x)
    r_grid = np.asarray(r_grid, dtype=float)
    g = np.full((nx, len(r_grid)), np.nan)
    t_prev = st.tau
    check_counter = 0

    if state.periodic:
        u_stop = u_stop_factor * float(np.max(st.u))
        u_prev = st.u.copy()
        while True:
            t_end, status, _ = advance_aag(st.u, h, float(st.n - 1), True, st.tau, dt, 8, u_stop)
            st.tau = t_end
            if mean_convex_check and check_counter % 50 == 0:
                H, _ = graph_curvature(st)
                if np.min(H) < -1e-6:
                    raise NotMeanConvexError(f"mean convexity lost at tau={st.tau}")
            check_counter += 1
            for j, rv in enumerate(r_grid):
                newly = (u_prev > rv) & (st.u <= rv) & np.isnan(g[:, j])
                if np.any(newly):
                    frac = (u_prev[newly] - rv) / np.maximum(u_prev[newly] - st.u[newly], 1e-300)
                    g[newly, j] = t_prev + frac * (t_end - t_prev)
            u_prev = st.u.copy()
            t_prev = t_end
            if status != 0:
                break
        return ArrivalTimeField(x=st.x.copy(), r=r_grid, g=g, reached=~np.isnan(g))

    # capped: evolve v = u^2, record crossings of each r^2 level
    v = np.zeros(nx + 4)
    v[2:-2] = st.u**2
    i0, i1 = 2, nx + 1
    while v[i0] <= 0 and i1 - i0 > 8:
        i0 += 1
    while v[i1] <= 0 and i1 - i0 > 8:
        i1 -= 1
    neck_stop2 = (u_stop_factor * float(np.max(st.u))) ** 2
    lev2 = r_grid**2
    v_prev = v.copy()
    tau = st.tau
    while True:
        tau, status, i0, i1 = advance_aag_capped(v, h, float(st.n - 1), tau, dt, 8, i0, i1, neck_stop2)
        if mean_convex_check and check_counter % 100 == 0:
            sl = slice(i0 + 2, i1 - 1)
            u_now = np.sqrt(np.maximum(v[sl], 1e-300))
            sub = RotationalGraph(x=np.arange(v[sl].shape[0]) * h, u=u_now, n=st.n, capped=True)
            H, _ = graph_curvature(sub)
            if np.min(H[2:-2]) < -1e-6:
                raise NotMeanConvexError(f"mean convexity lost at tau={tau}")
        check_counter += 1
        for j, l2 in enumerate(lev2):
            newly = (v_prev[2:-2] > l2) & (v[2:-2] <= l2) & np.isnan(g[:, j])
            if np.any(newly):
                num = v_prev[2:-2][newly] - l2
                den = np.maximum(v_prev[2:-2][newly] - v[2:-2][newly], 1e-300)
                g[newly, j] = t_prev + (num / den) * (tau - t_prev)
        v_prev = v.copy()
        t_prev = tau
        if status != 0:
            break
    return ArrivalTimeField(x=st.x.copy(), r=r_grid, g=g, reached=~np.isnan(g))


def second_difference_probe(values: np.ndarray, coords: np.ndarray, center: float,
                            spacings: np.ndarray) -> dict:
    """Dyadic second differences of a 1-D sampled function through a point.

    Interpolates g along the line, returns D2(h) = (g(c+h)-2g(c)+g(c-h))/h^2
    for each h, plus the relative dyadic variation used to separate
    stabilizing (C^2-like) from bounded-oscillatory (C^{1,1}-like) behavior.
    """
    good = np.isfinite(values)
    if np.count_nonzero(good) < 5:
        raise InsufficientDataError("probe line has too few finite samples")
    c = np.interp(center, coords[good], values[good])
    d2 = []
    for h in spacings:
        gp = np.interp(center + h, coords[good], values[good])
        gm = np.interp(center - h, coords[good], values[good])
        d2.append((gp - 2.0 * c + gm) / (h * h))
    d2 = np.asarray(d2)
    scale = max(float(np.max(np.abs(d2))), 1e-300)
    var = np.abs(np.diff(d2)) / scale
    return {"spacings": np.asarray(spacings), "d2": d2, "dyadic_variation": var,
            "max_variation": float(np.max(var)) if len(var) else 0.0}
