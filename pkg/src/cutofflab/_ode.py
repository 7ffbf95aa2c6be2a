"""Dormand-Prince 5(4) stepping that lands exactly on prescribed nodes."""

from __future__ import annotations

import numpy as np

__all__ = ["IntegrationError", "integrate_on_nodes"]


class IntegrationError(RuntimeError):
    """Step-size underflow or non-finite state."""


# Butcher tableau of the Dormand-Prince pair.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_E = _B5 - _B4


def _step(rhs, s, y, k1, h):
    a = _A
    k2 = rhs(s + _C[1] * h, y + h * (a[1][0] * k1))
    k3 = rhs(s + _C[2] * h, y + h * (a[2][0] * k1 + a[2][1] * k2))
    k4 = rhs(s + _C[3] * h, y + h * (a[3][0] * k1 + a[3][1] * k2 + a[3][2] * k3))
    k5 = rhs(s + _C[4] * h, y + h * (a[4][0] * k1 + a[4][1] * k2 + a[4][2] * k3 + a[4][3] * k4))
    k6 = rhs(
        s + h,
        y + h * (a[5][0] * k1 + a[5][1] * k2 + a[5][2] * k3 + a[5][3] * k4 + a[5][4] * k5),
    )
    y_new = y + h * (a[6][0] * k1 + a[6][2] * k3 + a[6][3] * k4 + a[6][4] * k5 + a[6][5] * k6)
    k7 = rhs(s + h, y_new)
    err = h * (_E[0] * k1 + _E[2] * k3 + _E[3] * k4 + _E[4] * k5 + _E[5] * k6 + _E[6] * k7)
    return y_new, err, k7


def integrate_on_nodes(
    rhs,
    y0,
    nodes,
    *,
    rtol: float = 1e-10,
    atol: float = 1e-300,
    adaptive: bool = True,
    max_steps: int = 5_000_000,
):
    """Integrate ``y' = rhs(s, y)`` from ``nodes[0]`` and sample at every node.

    In adaptive mode each interval is covered by error-controlled sub-steps
    and the final sub-step is clipped to end on the node.  In fixed mode a
    single fifth-order step spans each interval, which is what refinement
    studies need.

    Returns an array of shape ``(len(nodes), len(y0))``.
    """
    nodes = np.asarray(nodes, dtype=float)
    y = np.array(y0, dtype=float)
    out = np.empty((nodes.size, y.size))
    out[0] = y
    s = nodes[0]
    k1 = rhs(s, y)
    h = None
    steps = 0
    for i in range(1, nodes.size):
        b = nodes[i]
        if not adaptive:
            y, _, k1 = _step(rhs, s, y, k1, b - s)
            s = b
        else:
            if h is None:
                h = b - s
            while s < b:
                last = h >= b - s
                h_try = b - s if last else h
                y_new, err, k7 = _step(rhs, s, y, k1, h_try)
                scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
                en = float(np.max(np.abs(err) / scale))
                if not np.isfinite(en):
                    en = np.inf
                if en <= 1.0:
                    s = b if last else s + h_try
                    y, k1 = y_new, k7
                    fac = 5.0 if en == 0 else min(5.0, 0.9 * en ** -0.2)
                    # a clipped final step says little about the natural size
                    if not (last and h_try < h):
                        h = h_try * fac
                else:
                    h = h_try * max(0.2, 0.9 * en ** -0.2)
                steps += 1
                if h < 1e-14 * max(1.0, abs(s)) or steps > max_steps:
                    raise IntegrationError(f"step size underflow near s={s:.6g}")
        if not np.all(np.isfinite(y)):
            raise IntegrationError(f"non-finite state at s={s:.6g}")
        out[i] = y
    return out
