"""Fourth-order finite-difference stencils on uniform grids.

Interior nodes use 5-point central stencils; the two layers at each edge use
6-point one-sided stencils generated with Fornberg's algorithm, so every node
carries a formally 4th-order derivative.
"""

from __future__ import annotations

import numpy as np


def fd_weights(x0: float, xs, order: int) -> np.ndarray:
    """Fornberg weights for the ``order``-th derivative at x0 from nodes xs."""
    xs = np.asarray(xs, dtype=float)
    n = len(xs)
    m = order
    c = np.zeros((n, m + 1))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = xs[0] - x0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = xs[i] - x0
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for s in range(mn, 0, -1):
                    c[i, s] = c1 * (s * c[i - 1, s - 1] - c5 * c[i - 1, s]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for s in range(mn, 0, -1):
                c[j, s] = (c4 * c[j, s] - s * c[j, s - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


# 6-point one-sided weights for the first two nodes (unit spacing)
_NODES6 = np.arange(6.0)
D1_EDGE = np.array([fd_weights(0.0, _NODES6, 1), fd_weights(1.0, _NODES6, 1)])
D2_EDGE = np.array([fd_weights(0.0, _NODES6, 2), fd_weights(1.0, _NODES6, 2)])

# 5-point central weights (unit spacing)
D1_CENTRAL = fd_weights(0.0, np.arange(-2.0, 3.0), 1)  # (1/12, -2/3, 0, 2/3, -1/12)
D2_CENTRAL = fd_weights(0.0, np.arange(-2.0, 3.0), 2)


def _apply_1d(values: np.ndarray, h: float, edge_w: np.ndarray, cen_w: np.ndarray, power: int):
    n = values.shape[-1]
    if n < 8:
        from .errors import GridTooSmallError

        raise GridTooSmallError(f"need >= 8 nodes along the axis, got {n}")
    out = np.empty_like(values)
    scale = h**power
    # interior, vectorized over the trailing axis
    acc = cen_w[2] * values[..., 2:-2]
    acc = acc + cen_w[0] * values[..., :-4] + cen_w[1] * values[..., 1:-3]
    acc = acc + cen_w[3] * values[..., 3:-1] + cen_w[4] * values[..., 4:]
    out[..., 2:-2] = acc / scale
    # one-sided edges
    head = values[..., :6]
    tail = values[..., -6:][..., ::-1]
    sign = -1.0 if power % 2 else 1.0
    for row in range(2):
        out[..., row] = head @ edge_w[row] / scale
        out[..., n - 1 - row] = sign * (tail @ edge_w[row]) / scale
    return out


def d1_along_axis(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    v = np.moveaxis(values, axis, -1)
    out = _apply_1d(v, h, D1_EDGE, D1_CENTRAL, 1)
    return np.moveaxis(out, -1, axis)


def d2_along_axis(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    v = np.moveaxis(values, axis, -1)
    out = _apply_1d(v, h, D2_EDGE, D2_CENTRAL, 2)
    return np.moveaxis(out, -1, axis)
