"""Hot time-stepping loops, jitted with numba.

The kernels advance the radius field of the symmetric-reduction flow with
classical RK4.  Derivatives are 4th order: 5-point central stencils inside,
6-point one-sided stencils on the two edge layers.  Boundary handling after
each full step is selected by ``bc``:

  0  none (one-sided stencils only)
  1  quadratic extrapolation of the outermost two layers (outflow)
  2  relax the outer three layers toward the pinch profile

Status codes returned by the advance loops: 0 ok, 1 pinch, 2 nan.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .stencils import D1_EDGE, D2_EDGE

_D1E = np.ascontiguousarray(D1_EDGE)
_D2E = np.ascontiguousarray(D2_EDGE)

BC_NONE = 0
BC_EXTRAPOLATE = 1
BC_PROFILE = 2


@njit(cache=True, fastmath=True)
def _profile_value(y2sum_active, nactive, rho, t):
    # rho*sqrt(1 + (sum_active (y_i^2) - 2*nactive)/(2t)) - rho, clipped below
    arg = 1.0 + (y2sum_active - 2.0 * nactive) / (2.0 * t)
    if arg < 1e-12:
        arg = 1e-12
    return rho * (np.sqrt(arg) - 1.0)


@njit(cache=True, fastmath=True)
def _rhs_1d(r, y, h, nmk, rescaled, out):
    n = r.shape[0]
    inv12h = 1.0 / (12.0 * h)
    inv12h2 = 1.0 / (12.0 * h * h)
    for i in range(2, n - 2):
        rx = (r[i - 2] - 8.0 * r[i - 1] + 8.0 * r[i + 1] - r[i + 2]) * inv12h
        rxx = (-r[i - 2] + 16.0 * r[i - 1] - 30.0 * r[i] + 16.0 * r[i + 1] - r[i + 2]) * inv12h2
        v = rxx / (1.0 + rx * rx) - nmk / r[i]
        if rescaled:
            v += 0.5 * (r[i] - y[i] * rx)
        out[i] = v
    # one-sided 6-point edges
    for row in range(2):
        rx = 0.0
        rxx = 0.0
        rxm = 0.0
        rxxm = 0.0
        for s in range(6):
            rx += _D1E[row, s] * r[s]
            rxx += _D2E[row, s] * r[s]
            rxm -= _D1E[row, s] * r[n - 1 - s]
            rxxm += _D2E[row, s] * r[n - 1 - s]
        rx /= h
        rxx /= h * h
        rxm /= h
        rxxm /= h * h
        i = row
        v = rxx / (1.0 + rx * rx) - nmk / r[i]
        if rescaled:
            v += 0.5 * (r[i] - y[i] * rx)
        out[i] = v
        i = n - 1 - row
        v = rxxm / (1.0 + rxm * rxm) - nmk / r[i]
        if rescaled:
            v += 0.5 * (r[i] - y[i] * rxm)
        out[i] = v


@njit(cache=True, fastmath=True)
def _d1_1d(r, h, out):
    n = r.shape[0]
    inv12h = 1.0 / (12.0 * h)
    for i in range(2, n - 2):
        out[i] = (r[i - 2] - 8.0 * r[i - 1] + 8.0 * r[i + 1] - r[i + 2]) * inv12h
    for row in range(2):
        a = 0.0
        b = 0.0
        for s in range(6):
            a += _D1E[row, s] * r[s]
            b -= _D1E[row, s] * r[n - 1 - s]
        out[row] = a / h
        out[n - 1 - row] = b / h


@njit(cache=True, fastmath=True)
def _apply_bc_1d(r, y, t, rho, bc, nactive):
    n = r.shape[0]
    if bc == 1:
        for i in range(1, -1, -1):
            r[i] = 3.0 * r[i + 1] - 3.0 * r[i + 2] + r[i + 3]
            r[n - 1 - i] = 3.0 * r[n - 2 - i] - 3.0 * r[n - 3 - i] + r[n - 4 - i]
    elif bc == 2:
        for layer in range(3):
            w = 1.0 if layer == 0 else (0.5 if layer == 1 else 0.1)
            for i in (layer, n - 1 - layer):
                target = rho + _profile_value(y[i] * y[i] * nactive, nactive, rho, t)
                r[i] = (1.0 - w) * r[i] + w * target


@njit(cache=True, fastmath=True)
def advance_1d(r, y, h, nmk, rescaled, t0, dt, nsteps, rmin_stop, bc, rho, nactive, symmetrize):
    """RK4 loop; mutates r. Returns (t_end, status, steps_done)."""
    n = r.shape[0]
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    t = t0
    for step in range(nsteps):
        _rhs_1d(r, y, h, nmk, rescaled, k1)
        for i in range(n):
            tmp[i] = r[i] + 0.5 * dt * k1[i]
        _rhs_1d(tmp, y, h, nmk, rescaled, k2)
        for i in range(n):
            tmp[i] = r[i] + 0.5 * dt * k2[i]
        _rhs_1d(tmp, y, h, nmk, rescaled, k3)
        for i in range(n):
            tmp[i] = r[i] + dt * k3[i]
        _rhs_1d(tmp, y, h, nmk, rescaled, k4)
        for i in range(n):
            r[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        t = t0 + (step + 1) * dt
        _apply_bc_1d(r, y, t, rho, bc, nactive)
        if symmetrize:
            for i in range(n // 2):
                avg = 0.5 * (r[i] + r[n - 1 - i])
                r[i] = avg
                r[n - 1 - i] = avg
        rmin = r[0]
        bad = False
        for i in range(n):
            if r[i] < rmin:
                rmin = r[i]
            if not np.isfinite(r[i]):
                bad = True
        if bad:
            return t, 2, step + 1
        if rmin < rmin_stop:
            return t, 1, step + 1
    return t, 0, nsteps


@njit(cache=True, fastmath=True)
def _d1_axis0(r, h, out):
    n0, n1 = r.shape
    inv12h = 1.0 / (12.0 * h)
    for j in range(n1):
        for row in range(2):
            a = 0.0
            b = 0.0
            for s in range(6):
                a += _D1E[row, s] * r[s, j]
                b -= _D1E[row, s] * r[n0 - 1 - s, j]
            out[row, j] = a / h
            out[n0 - 1 - row, j] = b / h
    for i in range(2, n0 - 2):
        for j in range(n1):
            out[i, j] = (r[i - 2, j] - 8.0 * r[i - 1, j] + 8.0 * r[i + 1, j] - r[i + 2, j]) * inv12h


@njit(cache=True, fastmath=True)
def _rhs_2d(r, y0, y1, h, nmk, rescaled, out, rx_buf):
    n0, n1 = r.shape
    inv12h = 1.0 / (12.0 * h)
    inv12h2 = 1.0 / (12.0 * h * h)
    _d1_axis0(r, h, rx_buf)
    for i in range(n0):
        onesided_i = i < 2 or i >= n0 - 2
        for j in range(n1):
            if onesided_i:
                row = i if i < 2 else n0 - 1 - i
                rx = 0.0
                rxx = 0.0
                if i < 2:
                    for s in range(6):
                        rx += _D1E[row, s] * r[s, j]
                        rxx += _D2E[row, s] * r[s, j]
                else:
                    for s in range(6):
                        rx -= _D1E[row, s] * r[n0 - 1 - s, j]
                        rxx += _D2E[row, s] * r[n0 - 1 - s, j]
                rx /= h
                rxx /= h * h
            else:
                rx = (r[i - 2, j] - 8.0 * r[i - 1, j] + 8.0 * r[i + 1, j] - r[i + 2, j]) * inv12h
                rxx = (
                    -r[i - 2, j] + 16.0 * r[i - 1, j] - 30.0 * r[i, j] + 16.0 * r[i + 1, j] - r[i + 2, j]
                ) * inv12h2
            if j < 2 or j >= n1 - 2:
                row = j if j < 2 else n1 - 1 - j
                ry = 0.0
                ryy = 0.0
                rxy = 0.0
                if j < 2:
                    for s in range(6):
                        ry += _D1E[row, s] * r[i, s]
                        ryy += _D2E[row, s] * r[i, s]
                        rxy += _D1E[row, s] * rx_buf[i, s]
                else:
                    for s in range(6):
                        ry -= _D1E[row, s] * r[i, n1 - 1 - s]
                        ryy += _D2E[row, s] * r[i, n1 - 1 - s]
                        rxy -= _D1E[row, s] * rx_buf[i, n1 - 1 - s]
                ry /= h
                ryy /= h * h
                rxy /= h
            else:
                ry = (r[i, j - 2] - 8.0 * r[i, j - 1] + 8.0 * r[i, j + 1] - r[i, j + 2]) * inv12h
                ryy = (
                    -r[i, j - 2] + 16.0 * r[i, j - 1] - 30.0 * r[i, j] + 16.0 * r[i, j + 1] - r[i, j + 2]
                ) * inv12h2
                rxy = (
                    rx_buf[i, j - 2] - 8.0 * rx_buf[i, j - 1] + 8.0 * rx_buf[i, j + 1] - rx_buf[i, j + 2]
                ) * inv12h
            g2 = 1.0 + rx * rx + ry * ry
            quad = (rx * rx * rxx + 2.0 * rx * ry * rxy + ry * ry * ryy) / g2
            v = rxx + ryy - quad - nmk / r[i, j]
            if rescaled:
                v += 0.5 * (r[i, j] - y0[i] * rx - y1[j] * ry)
            out[i, j] = v


@njit(cache=True, fastmath=True)
def _apply_bc_2d(r, y0, y1, t, rho, bc, active0, active1):
    n0, n1 = r.shape
    if bc == 1:
        for i in range(1, -1, -1):
            for j in range(n1):
                r[i, j] = 3.0 * r[i + 1, j] - 3.0 * r[i + 2, j] + r[i + 3, j]
                r[n0 - 1 - i, j] = 3.0 * r[n0 - 2 - i, j] - 3.0 * r[n0 - 3 - i, j] + r[n0 - 4 - i, j]
        for j in range(1, -1, -1):
            for i in range(n0):
                r[i, j] = 3.0 * r[i, j + 1] - 3.0 * r[i, j + 2] + r[i, j + 3]
                r[i, n1 - 1 - j] = 3.0 * r[i, n1 - 2 - j] - 3.0 * r[i, n1 - 3 - j] + r[i, n1 - 4 - j]
    elif bc == 2:
        nact = active0 + active1
        for layer in range(3):
            w = 1.0 if layer == 0 else (0.5 if layer == 1 else 0.1)
            for j in range(n1):
                for i in (layer, n0 - 1 - layer):
                    q = active0 * y0[i] * y0[i] + active1 * y1[j] * y1[j]
                    r[i, j] = (1.0 - w) * r[i, j] + w * (rho + _profile_value(q, nact, rho, t))
            for i in range(n0):
                for j in (layer, n1 - 1 - layer):
                    q = active0 * y0[i] * y0[i] + active1 * y1[j] * y1[j]
                    r[i, j] = (1.0 - w) * r[i, j] + w * (rho + _profile_value(q, nact, rho, t))


@njit(cache=True, fastmath=True)
def advance_2d(
    r, y0, y1, h, nmk, rescaled, t0, dt, nsteps, rmin_stop, bc, rho, active0, active1, symmetrize
):
    """RK4 loop for k=2; mutates r. Returns (t_end, status, steps_done)."""
    n0, n1 = r.shape
    k1 = np.empty((n0, n1))
    k2 = np.empty((n0, n1))
    k3 = np.empty((n0, n1))
    k4 = np.empty((n0, n1))
    tmp = np.empty((n0, n1))
    buf = np.empty((n0, n1))
    t = t0
    for step in range(nsteps):
        _rhs_2d(r, y0, y1, h, nmk, rescaled, k1, buf)
        for i in range(n0):
            for j in range(n1):
                tmp[i, j] = r[i, j] + 0.5 * dt * k1[i, j]
        _rhs_2d(tmp, y0, y1, h, nmk, rescaled, k2, buf)
        for i in range(n0):
            for j in range(n1):
                tmp[i, j] = r[i, j] + 0.5 * dt * k2[i, j]
        _rhs_2d(tmp, y0, y1, h, nmk, rescaled, k3, buf)
        for i in range(n0):
            for j in range(n1):
                tmp[i, j] = r[i, j] + dt * k3[i, j]
        _rhs_2d(tmp, y0, y1, h, nmk, rescaled, k4, buf)
        for i in range(n0):
            for j in range(n1):
                r[i, j] += dt / 6.0 * (k1[i, j] + 2.0 * k2[i, j] + 2.0 * k3[i, j] + k4[i, j])
        t = t0 + (step + 1) * dt
        _apply_bc_2d(r, y0, y1, t, rho, bc, active0, active1)
        if symmetrize:
            for i in range(n0 // 2):
                for j in range(n1):
                    avg = 0.5 * (r[i, j] + r[n0 - 1 - i, j])
                    r[i, j] = avg
                    r[n0 - 1 - i, j] = avg
            for i in range(n0):
                for j in range(n1 // 2):
                    avg = 0.5 * (r[i, j] + r[i, n1 - 1 - j])
                    r[i, j] = avg
                    r[i, n1 - 1 - j] = avg
        rmin = r[0, 0]
        bad = False
        for i in range(n0):
            for j in range(n1):
                v = r[i, j]
                if v < rmin:
                    rmin = v
                if not np.isfinite(v):
                    bad = True
        if bad:
            return t, 2, step + 1
        if rmin < rmin_stop:
            return t, 1, step + 1
    return t, 0, nsteps


@njit(cache=True, fastmath=True)
def rhs_field_1d(r, y, h, nmk, rescaled):
    out = np.empty_like(r)
    _rhs_1d(r, y, h, nmk, rescaled, out)
    return out


@njit(cache=True, fastmath=True)
def rhs_field_2d(r, y0, y1, h, nmk, rescaled):
    out = np.empty_like(r)
    buf = np.empty_like(r)
    _rhs_2d(r, y0, y1, h, nmk, rescaled, out, buf)
    return out


@njit(cache=True, fastmath=True)
def aag_rhs_kernel(u, h, nm1, periodic, out):
    """Rotational-graph speed: u_xx/(1+u_x^2) - (n-1)/u.

    Periodic wraps the stencil; otherwise the edge layers use one-sided
    stencils (caps are handled by the caller's active window).
    """
    n = u.shape[0]
    inv12h = 1.0 / (12.0 * h)
    inv12h2 = 1.0 / (12.0 * h * h)
    if periodic:
        for i in range(n):
            im2 = (i - 2) % n
            im1 = (i - 1) % n
            ip1 = (i + 1) % n
            ip2 = (i + 2) % n
            ux = (u[im2] - 8.0 * u[im1] + 8.0 * u[ip1] - u[ip2]) * inv12h
            uxx = (-u[im2] + 16.0 * u[im1] - 30.0 * u[i] + 16.0 * u[ip1] - u[ip2]) * inv12h2
            out[i] = uxx / (1.0 + ux * ux) - nm1 / u[i]
    else:
        for i in range(2, n - 2):
            ux = (u[i - 2] - 8.0 * u[i - 1] + 8.0 * u[i + 1] - u[i + 2]) * inv12h
            uxx = (-u[i - 2] + 16.0 * u[i - 1] - 30.0 * u[i] + 16.0 * u[i + 1] - u[i + 2]) * inv12h2
            out[i] = uxx / (1.0 + ux * ux) - nm1 / u[i]
        for row in range(2):
            a = 0.0
            b = 0.0
            am = 0.0
            bm = 0.0
            for s in range(6):
                a += _D1E[row, s] * u[s]
                b += _D2E[row, s] * u[s]
                am -= _D1E[row, s] * u[n - 1 - s]
                bm += _D2E[row, s] * u[n - 1 - s]
            a /= h
            b /= h * h
            am /= h
            bm /= h * h
            out[row] = b / (1.0 + a * a) - nm1 / u[row]
            out[n - 1 - row] = bm / (1.0 + am * am) - nm1 / u[n - 1 - row]


@njit(cache=True, fastmath=True)
def _vform_rhs(v, h, nm1, i0, i1, out):
    """Squared-radius form: dv/dtau = (4 v v_xx - 2 v_x^2)/(4 v + v_x^2) - 2(n-1).

    Regular at caps (v -> 0 with v_x != 0); evaluated on [i0, i1] using
    2nd-order central stencils on ghost-extended data (the caller fills
    v[i0-2..i0-1] and v[i1+1..i1+2] by quadratic extrapolation).
    """
    inv2h = 1.0 / (2.0 * h)
    invh2 = 1.0 / (h * h)
    for i in range(i0, i1 + 1):
        vx = (v[i + 1] - v[i - 1]) * inv2h
        vxx = (v[i + 1] - 2.0 * v[i] + v[i - 1]) * invh2
        den = 4.0 * v[i] + vx * vx
        if den < 1e-14:
            den = 1e-14
        out[i] = (4.0 * v[i] * vxx - 2.0 * vx * vx) / den - 2.0 * nm1


@njit(cache=True, fastmath=True)
def _vform_ghosts(v, i0, i1):
    v[i0 - 1] = 3.0 * v[i0] - 3.0 * v[i0 + 1] + v[i0 + 2]
    v[i0 - 2] = 3.0 * v[i0 - 1] - 3.0 * v[i0] + v[i0 + 1]
    v[i1 + 1] = 3.0 * v[i1] - 3.0 * v[i1 - 1] + v[i1 - 2]
    v[i1 + 2] = 3.0 * v[i1 + 1] - 3.0 * v[i1] + v[i1 - 1]


@njit(cache=True, fastmath=True)
def advance_aag_capped(v, h, nm1, t0, dt, nsteps, i0, i1, neck_stop2):
    """RK4 on the squared-radius equation with a moving active window.

    v holds u^2 on the full grid; [i0, i1] is the active window (v > 0).
    Returns (t_end, status, i0, i1): status 0 ok, 1 interior neck pinch,
    3 extinction (window shrank below 8 nodes), 2 nan.
    """
    n = v.shape[0]
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    t = t0
    for step in range(nsteps):
        # keep the window strictly inside the positive region before staging
        while i1 - i0 >= 8 and v[i0] <= 0.0:
            i0 += 1
        while i1 - i0 >= 8 and v[i1] <= 0.0:
            i1 -= 1
        if i1 - i0 < 8:
            return t, 3, i0, i1
        _vform_ghosts(v, i0, i1)
        _vform_rhs(v, h, nm1, i0, i1, k1)
        for i in range(i0, i1 + 1):
            tmp[i] = v[i] + 0.5 * dt * k1[i]
        _vform_ghosts(tmp, i0, i1)
        _vform_rhs(tmp, h, nm1, i0, i1, k2)
        for i in range(i0, i1 + 1):
            tmp[i] = v[i] + 0.5 * dt * k2[i]
        _vform_ghosts(tmp, i0, i1)
        _vform_rhs(tmp, h, nm1, i0, i1, k3)
        for i in range(i0, i1 + 1):
            tmp[i] = v[i] + dt * k3[i]
        _vform_ghosts(tmp, i0, i1)
        _vform_rhs(tmp, h, nm1, i0, i1, k4)
        for i in range(i0, i1 + 1):
            v[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        t = t0 + (step + 1) * dt
        # shrink the window where v fell through zero
        while i1 - i0 >= 8 and v[i0] <= 0.0:
            i0 += 1
        while i1 - i0 >= 8 and v[i1] <= 0.0:
            i1 -= 1
        if i1 - i0 < 8:
            return t, 3, i0, i1
        bad = False
        vmin_int = v[i0 + 4]
        for i in range(i0 + 4, i1 - 3):
            if v[i] < vmin_int:
                vmin_int = v[i]
            if not np.isfinite(v[i]):
                bad = True
        if bad:
            return t, 2, i0, i1
        if vmin_int < neck_stop2:
            return t, 1, i0, i1
    return t, 0, i0, i1


@njit(cache=True, fastmath=True)
def advance_aag(u, h, nm1, periodic, t0, dt, nsteps, u_stop):
    """RK4 loop for the rotational graph; returns (t_end, status, steps)."""
    n = u.shape[0]
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    t = t0
    for step in range(nsteps):
        aag_rhs_kernel(u, h, nm1, periodic, k1)
        for i in range(n):
            tmp[i] = u[i] + 0.5 * dt * k1[i]
        aag_rhs_kernel(tmp, h, nm1, periodic, k2)
        for i in range(n):
            tmp[i] = u[i] + 0.5 * dt * k2[i]
        aag_rhs_kernel(tmp, h, nm1, periodic, k3)
        for i in range(n):
            tmp[i] = u[i] + dt * k3[i]
        aag_rhs_kernel(tmp, h, nm1, periodic, k4)
        for i in range(n):
            u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        t = t0 + (step + 1) * dt
        umin = u[0]
        bad = False
        for i in range(n):
            if u[i] < umin:
                umin = u[i]
            if not np.isfinite(u[i]):
                bad = True
        if bad:
            return t, 2, step + 1
        if umin < u_stop:
            return t, 1, step + 1
    return t, 0, nsteps
