"""Neutral-mode extraction, Riccati dynamics and pinch classification.

The late-time shape of a cylindrical pinch is carried by the quadratic axis
modes.  Their coefficient matrix obeys a matrix Riccati equation whose decay
branches are 1/(gamma t) and 0; a direction is active when its coefficient
of (y_i^2 - 2) locks onto rho/(4t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (
    DomainTooSmallError,
    FiniteTimeBlowupError,
    InsufficientSpanError,
    ProfileDomainError,
    WindowTooShortError,
)
from .grids import smooth_cutoff
from .hermite import TWO_SQRT_PI, hermite_eval
from .shrinker import C0, C1, C2, ShrinkerSpec

SQRT2_C0 = math.sqrt(2.0) * C0


# ---------------------------------------------------------------------------
# pinch profile and its exact identities


def _profile_pieces(spec: ShrinkerSpec, active, meshes, t):
    q = None
    q2 = None
    for i in active:
        yi2 = np.asarray(meshes[i]) ** 2
        q = yi2 - 2.0 if q is None else q + (yi2 - 2.0)
        q2 = yi2 if q2 is None else q2 + yi2
    if q is None:
        shape = np.broadcast(*[np.asarray(m) for m in meshes]).shape
        q = np.zeros(shape)
        q2 = np.zeros(shape)
    arg = 1.0 + q / (2.0 * t)
    return q, q2, arg


def c1_profile(spec: ShrinkerSpec, active, meshes, t: float):
    """Pinch profile rho*sqrt(1 + sum_active(y_i^2-2)/(2t)) - rho."""
    _, _, arg = _profile_pieces(spec, active, meshes, t)
    if np.any(arg <= 0.0):
        raise ProfileDomainError(f"profile square root nonpositive at t={t}")
    return spec.rho * (np.sqrt(arg) - 1.0)


def profile_gap_identity(spec: ShrinkerSpec, active, meshes, t: float):
    """Exact gap between the profile and its quadratic leading term.

    f - (rho/4t) sum(y_i^2-2) = -(rho/8t^2) (sum(y_i^2-2))^2 (sqrt(arg)+1)^{-2};
    returns (lhs, rhs) evaluated analytically.
    """
    q, _, arg = _profile_pieces(spec, active, meshes, t)
    rho = spec.rho
    f = rho * (np.sqrt(arg) - 1.0)
    lhs = f - rho * q / (4.0 * t)
    rhs = -rho * q**2 / (8.0 * t**2 * (np.sqrt(arg) + 1.0) ** 2)
    return lhs, rhs


def profile_residual(spec: ShrinkerSpec, active, meshes, t: float) -> dict:
    """Analytic check of the profile against the quasilinear radial operator.

    Assembles L f = Lap f - (y/2).grad f + (rho+f)/2 - rho^2/(2(rho+f))
    term by term and compares with the closed form
    -(n-k)^2 (sum y_i^2) / (t^2 (rho^2 + (rho^2/2t) sum(y_i^2-2))^{3/2});
    the two agree identically.  The time derivative of the profile (the
    genuine evolution defect, O(1/t^2) uniformly) is reported alongside.
    """
    rho = spec.rho
    d = spec.sphere_dim
    q, q2, arg = _profile_pieces(spec, active, meshes, t)
    if np.any(arg <= 0.0):
        raise ProfileDomainError("profile square root nonpositive")
    S = np.sqrt(arg)
    ell = len(tuple(active))
    f = rho * (S - 1.0)

    dtf = -rho * q / (4.0 * t**2 * S)
    lap = rho * ell / (2.0 * t * S) - rho * q2 / (4.0 * t**2 * S**3)
    drift = -rho * q2 / (4.0 * t * S)
    potential = (rho + f) / 2.0 - rho**2 / (2.0 * (rho + f))
    lf = lap + drift + potential

    closed = -(d**2) * q2 / (t**2 * (rho**2 + (rho**2 / (2.0 * t)) * q) ** 1.5)
    return {
        "quasilinear": lf,
        "closed_form": closed,
        "identity_gap": lf - closed,
        "dt_profile": dtf,
        "evolution_residual": dtf - lf,
    }


# ---------------------------------------------------------------------------
# neutral matrix from grid states


@dataclass(frozen=True)
class NeutralMatrix:
    """Symmetric neutral-mode matrix at one time."""

    M: np.ndarray
    t: float


def _axis_projection(state, poly_values) -> float:
    w = state.grid.gaussian_weights()
    return float(np.sum(w * poly_values))


def _cutoff_u(state):
    chi = smooth_cutoff(state.grid)
    return chi * state.u


def neutral_matrix(state, cutoff: bool = True) -> NeutralMatrix:
    """Project the graph onto the quadratic axis modes.

    Diagonal entries are sqrt(2) c0 <v, h2(y_i)>, off-diagonal entries
    <v, h1(y_i) h1(y_j)>, with v the cutoff graph function and the inner
    product taken against the axis Gaussian exp(-|y|^2/4).
    """
    grid = state.grid
    if grid.radius < 4.0:
        raise DomainTooSmallError(f"neutral projections need R >= 4, got {grid.radius:.2f}")
    k = grid.ndim
    v = _cutoff_u(state) if cutoff else state.u
    w = grid.gaussian_weights()
    h1s = [hermite_eval(1, ax) for ax in grid.axes]
    h2s = [hermite_eval(2, ax) for ax in grid.axes]
    M = np.zeros((k, k))
    for i in range(k):
        shape = [1] * k
        shape[i] = -1
        M[i, i] = SQRT2_C0 * float(np.sum(w * v * h2s[i].reshape(shape)))
        for j in range(i + 1, k):
            shp_j = [1] * k
            shp_j[j] = -1
            prod = h1s[i].reshape(shape) * h1s[j].reshape(shp_j)
            M[i, j] = M[j, i] = float(np.sum(w * v * prod))
    return NeutralMatrix(M=M, t=state.t)


def quad_coeff_matrix(state, cutoff: bool = True) -> NeutralMatrix:
    """Matrix A with u ~ sum_ij A_ij (y_i y_j - 2 delta_ij).

    A_ii is the raw coefficient of (y_i^2 - 2); off-diagonal entries are
    half the coefficient of y_i y_j, so A conjugates as O^T A O under axis
    rotations.
    """
    grid = state.grid
    k = grid.ndim
    v = _cutoff_u(state) if cutoff else state.u
    w = grid.gaussian_weights()
    M = np.zeros((k, k))
    for i in range(k):
        shape = [1] * k
        shape[i] = -1
        h2i = hermite_eval(2, grid.axes[i]).reshape(shape)
        M[i, i] = C2 * float(np.sum(w * v * h2i)) / TWO_SQRT_PI ** (k - 1)
        for j in range(i + 1, k):
            shp_j = [1] * k
            shp_j[j] = -1
            prod = hermite_eval(1, grid.axes[i]).reshape(shape) * hermite_eval(1, grid.axes[j]).reshape(shp_j)
            b = C1**2 * float(np.sum(w * v * prod)) / TWO_SQRT_PI ** (k - 2)
            M[i, j] = M[j, i] = 0.5 * b
    return NeutralMatrix(M=M, t=state.t)


def linear_mode_coefficients(state, cutoff: bool = True):
    """Raw coefficients of 1 and of each y_i in the (cutoff) graph function."""
    grid = state.grid
    k = grid.ndim
    v = _cutoff_u(state) if cutoff else state.u
    w = grid.gaussian_weights()
    const = float(np.sum(w * v)) / TWO_SQRT_PI**k
    ys = []
    for i in range(k):
        shape = [1] * k
        shape[i] = -1
        yi = grid.axes[i].reshape(shape)
        ys.append(float(np.sum(w * v * yi)) / (2.0 * TWO_SQRT_PI ** (k - 1) * TWO_SQRT_PI))
    # <y, y> against exp(-y^2/4) is 4 sqrt(pi) = 2 * TWO_SQRT_PI
    return const, np.asarray(ys)


# ---------------------------------------------------------------------------
# Riccati dynamics


def riccati_closed_form(M0: np.ndarray, t0: float, t: float, gamma: float) -> np.ndarray:
    """M0 (I + gamma (t-t0) M0)^{-1}."""
    M0 = np.atleast_2d(np.asarray(M0, dtype=float))
    k = M0.shape[0]
    A = np.eye(k) + gamma * (t - t0) * M0
    return np.linalg.solve(A.T, M0.T).T


def riccati_pole_time(M0: np.ndarray, t0: float, gamma: float) -> float:
    """First time a negative eigenvalue of M0 blows the flow up (inf if none)."""
    eigs = np.linalg.eigvalsh(np.atleast_2d(M0))
    neg = eigs[eigs < 0]
    if len(neg) == 0:
        return math.inf
    return t0 - 1.0 / (gamma * float(np.min(neg)))


def riccati_flow(M0, t0: float, t1: float, gamma: float, n_samples: int = 0):
    """Integrate M' = -gamma M^2 from t0 to t1.

    Returns the endpoint NeutralMatrix, or a list of samples at
    ``n_samples`` log-spaced times when requested.  Raises on a pole
    crossing inside the window.
    """
    M0 = np.atleast_2d(np.asarray(M0, dtype=float))
    if t1 <= t0:
        raise ValueError("need t1 > t0")
    pole = riccati_pole_time(M0, t0, gamma)
    if pole <= t1:
        raise FiniteTimeBlowupError(f"Riccati pole at t={pole:.6g} inside [{t0}, {t1}]")
    k = M0.shape[0]

    def rhs(t, y):
        M = y.reshape(k, k)
        return (-gamma * (M @ M)).ravel()

    t_eval = None
    if n_samples:
        t_eval = np.geomspace(t0, t1, n_samples)
    sol = solve_ivp(rhs, (t0, t1), M0.ravel(), method="DOP853", rtol=1e-12, atol=1e-13, t_eval=t_eval)
    if not sol.success:
        raise FiniteTimeBlowupError(f"Riccati integration failed: {sol.message}")
    if n_samples:
        return [NeutralMatrix(M=0.5 * (m + m.T), t=float(tt))
                for tt, m in zip(sol.t, (sol.y[:, i].reshape(k, k) for i in range(sol.y.shape[1])))]
    M = sol.y[:, -1].reshape(k, k)
    return NeutralMatrix(M=0.5 * (M + M.T), t=t1)


def eigen_track(times, mats, gamma: float):
    """Continuity-matched eigenvalues with asymptotic branch labels.

    Each tracked eigenvalue lambda_i(t) is labeled ``one_over_gamma_t``,
    ``zero`` or ``other`` by fitting t*lambda_i against {1/gamma, 0}.
    """
    times = np.asarray(times, dtype=float)
    if len(times) < 10 or times[-1] < 4.0 * times[0]:
        raise InsufficientSpanError("need >= 10 samples spanning a time factor >= 4")
    mats = [np.atleast_2d(np.asarray(m, dtype=float)) for m in mats]
    k = mats[0].shape[0]
    lam = np.zeros((len(mats), k))
    vecs_prev = None
    for s, M in enumerate(mats):
        w, V = np.linalg.eigh(M)
        if vecs_prev is None:
            order = np.argsort(w)[::-1]
        else:
            overlap = np.abs(vecs_prev.T @ V)
            order = np.full(k, -1)
            used = set()
            for i in range(k):
                cand = np.argsort(overlap[i])[::-1]
                for c in cand:
                    if c not in used:
                        order[i] = c
                        used.add(c)
                        break
        lam[s] = w[order]
        vecs_prev = V[:, order]
    tail = slice(len(times) // 2, None)
    labels = []
    residuals = []
    for i in range(k):
        z = times * lam[:, i]
        z_tail = float(np.mean(z[tail]))
        res_branch = float(np.sqrt(np.mean((z[tail] - 1.0 / gamma) ** 2))) * gamma
        res_zero = float(np.sqrt(np.mean(z[tail] ** 2))) * gamma
        if abs(z_tail - 1.0 / gamma) * gamma <= 0.25:
            labels.append("one_over_gamma_t")
            residuals.append(res_branch)
        elif abs(z_tail) * gamma <= 0.2:
            labels.append("zero")
            residuals.append(res_zero)
        else:
            labels.append("other")
            residuals.append(min(res_branch, res_zero))
    return {"eigenvalues": lam, "labels": labels, "fit_residuals": residuals}


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class Classification:
    """Active-direction set and per-direction asymptotic coefficients."""

    active: tuple
    b: tuple
    verdict: str
    window: tuple
    rotation: np.ndarray = field(default=None, repr=False)

    def to_dict(self):
        return {
            "I": [i + 1 for i in self.active],
            "b": list(self.b),
            "verdict": self.verdict,
            "window": list(self.window),
        }


def mode_series_from_states(states):
    """(times, quad coefficient matrices) sampled along a trajectory."""
    times = np.array([s.t for s in states])
    mats = [quad_coeff_matrix(s).M for s in states]
    return times, mats


def classify(trajectory, spec: ShrinkerSpec | None = None, window=None) -> Classification:
    """Nondegeneracy verdict from the late-time quadratic coefficients.

    ``trajectory`` is either a list of graph states or a pair
    (times, matrices).  After rotating to the late-time eigenbasis, each
    direction's b_i = mean of t * a_i(t) over the window is compared with
    the midpoint threshold rho/8; values lingering in [rho/16, rho/8) on
    the tail leave the verdict inconclusive.
    """
    if isinstance(trajectory, tuple):
        times, mats = trajectory
        times = np.asarray(times, dtype=float)
        mats = [np.atleast_2d(np.asarray(m)) for m in mats]
        if spec is None:
            raise ValueError("spec required when passing raw mode series")
    else:
        states = list(trajectory)
        spec = states[0].spec
        times, mats = mode_series_from_states(states)

    if window is None:
        window = (times[-1] / 4.0, times[-1])
    t_lo, t_hi = window
    if t_hi < 4.0 * t_lo - 1e-9:
        raise WindowTooShortError(f"window [{t_lo}, {t_hi}] spans less than a factor 4")
    sel = (times >= t_lo) & (times <= t_hi)
    if np.count_nonzero(sel) < 5:
        raise WindowTooShortError("fewer than 5 samples inside the window")
    ts = times[sel]
    Ms = [m for m, s in zip(mats, sel) if s]

    k = Ms[0].shape[0]
    ntail = max(2, len(Ms) // 4)
    M_late = np.mean(np.stack(Ms[-ntail:]), axis=0)
    _, O = np.linalg.eigh(M_late)
    a = np.array([np.diag(O.T @ M @ O) for M in Ms])  # (nt, k)

    tb = ts[:, None] * a
    b = tb.mean(axis=0)
    b_tail = tb[-ntail:].mean(axis=0)
    rho = spec.rho
    active = tuple(int(i) for i in range(k) if b[i] >= rho / 8.0)
    inconclusive = any(rho / 16.0 <= bt < rho / 8.0 for bt in b_tail)
    if inconclusive:
        verdict = "inconclusive"
    elif len(active) == k:
        verdict = "nondegenerate"
    else:
        verdict = "degenerate"
    return Classification(active=active, b=tuple(float(x) for x in b), verdict=verdict,
                          window=(float(t_lo), float(t_hi)), rotation=O)


def remainder_decay(states, classification: Classification, ball_radius: float = 4.0) -> dict:
    """Sup of t^2 * H^1-distance to the normal-form leading term on a fixed ball.

    Also integrates the scalar comparison law w' = -(2/t) w from the first
    measured value; its closed form is w0 (t0/t)^2.
    """
    spec = states[0].spec
    rho = spec.rho
    norms = []
    times = []
    for s in states:
        grid = s.grid
        lead = np.zeros(grid.shape)
        for i in classification.active:
            shape = [1] * grid.ndim
            shape[i] = -1
            lead = lead + (rho / (4.0 * s.t)) * (grid.axes[i] ** 2 - 2.0).reshape(shape)
        w = s.u - lead
        grads = [grid.d1(w, ax) for ax in range(grid.ndim)]
        density = w**2 + sum(g**2 for g in grads)
        inside = grid.radius_field() <= ball_radius
        gw = grid.gaussian_weights()
        norms.append(float(np.sqrt(np.sum((density * gw)[inside]))))
        times.append(s.t)
    times = np.asarray(times)
    norms = np.asarray(norms)
    scaled = times**2 * norms
    model = norms[0] * (times[0] / times) ** 2
    return {
        "times": times,
        "h1_remainder": norms,
        "t2_remainder": scaled,
        "sup_t2_remainder": float(np.max(scaled)),
        "model_overlay": model,
    }
