"""Two-point boundary problems ``y'' + b y' - q y = s`` by central differences."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

__all__ = [
    "DirichletSolution",
    "solve_dirichlet",
    "difference_weights",
    "derivative_on_nodes",
    "uniform_first_derivative",
    "uniform_second_derivative",
]


def difference_weights(nodes: np.ndarray):
    """Three-point weights for ``y'`` and ``y''`` at interior nodes.

    Returns ``(w1, w2)``, each of shape ``(n-2, 3)`` acting on
    ``(y[i-1], y[i], y[i+1])``; both are second order on graded grids for
    ``y'`` and first order (second on uniform grids) for ``y''``.
    """
    hm = nodes[1:-1] - nodes[:-2]
    hp = nodes[2:] - nodes[1:-1]
    s = hm + hp
    w1 = np.column_stack([-hp / (hm * s), (hp - hm) / (hm * hp), hm / (hp * s)])
    w2 = np.column_stack([2.0 / (hm * s), -2.0 / (hm * hp), 2.0 / (hp * s)])
    return w1, w2


def derivative_on_nodes(nodes: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Second-order first derivative at every node (one-sided at the ends)."""
    nodes = np.asarray(nodes, dtype=float)
    return np.gradient(y, nodes, edge_order=2)


def uniform_first_derivative(y, dx):
    """Fourth-order first derivative on a uniform grid (one-sided near the ends)."""
    out = np.empty_like(y)
    out[2:-2] = (y[:-4] - 8 * y[1:-3] + 8 * y[3:-1] - y[4:]) / (12 * dx)
    out[0] = (-25 * y[0] + 48 * y[1] - 36 * y[2] + 16 * y[3] - 3 * y[4]) / (12 * dx)
    out[1] = (-3 * y[0] - 10 * y[1] + 18 * y[2] - 6 * y[3] + y[4]) / (12 * dx)
    out[-1] = (25 * y[-1] - 48 * y[-2] + 36 * y[-3] - 16 * y[-4] + 3 * y[-5]) / (12 * dx)
    out[-2] = (3 * y[-1] + 10 * y[-2] - 18 * y[-3] + 6 * y[-4] - y[-5]) / (12 * dx)
    return out


def uniform_second_derivative(y, dx):
    """Fourth-order second derivative inside, second order at the two end nodes on each side."""
    out = np.empty_like(y)
    out[2:-2] = (-y[:-4] + 16 * y[1:-3] - 30 * y[2:-2] + 16 * y[3:-1] - y[4:]) / (12 * dx * dx)
    for i in (0, 1):
        out[i] = (2 * y[i] - 5 * y[i + 1] + 4 * y[i + 2] - y[i + 3]) / (dx * dx)
        j = -1 - i
        out[j] = (2 * y[j] - 5 * y[j - 1] + 4 * y[j - 2] - y[j - 3]) / (dx * dx)
    return out


@dataclass(frozen=True, eq=False)
class DirichletSolution:
    nodes: np.ndarray
    values: np.ndarray
    m_matrix: bool

    @property
    def derivative(self) -> np.ndarray:
        return derivative_on_nodes(self.nodes, self.values)


def solve_dirichlet(
    nodes, drift, reaction, source, left: float, right: float = 0.0, *, robin: float | None = None
) -> DirichletSolution:
    """Solve ``y'' + drift y' - reaction y = source`` with ``y`` given at the left end.

    At the right end either ``y = right`` or, when ``robin`` is given,
    ``y' = robin * y`` (imposed through a reflected ghost node, second
    order).  ``drift``, ``reaction`` and ``source`` are sampled on ``nodes``
    (scalars broadcast).  The tridiagonal system is solved with a banded LU.
    ``m_matrix`` reports whether the discrete operator has the sign pattern
    that guarantees a discrete maximum principle (nonnegative off-diagonals,
    ``reaction >= 0``).
    """
    x = np.asarray(nodes, dtype=float)
    n = x.size
    if n < 3 or np.any(np.diff(x) <= 0):
        raise ValueError("need at least 3 strictly increasing nodes")
    b_all = np.broadcast_to(np.asarray(drift, dtype=float), x.shape)
    q_all = np.broadcast_to(np.asarray(reaction, dtype=float), x.shape)
    s_all = np.broadcast_to(np.asarray(source, dtype=float), x.shape)
    b, q = b_all[1:-1], q_all[1:-1]
    s = s_all[1:-1].copy()
    w1, w2 = difference_weights(x)
    lower = w2[:, 0] + b * w1[:, 0]
    diag = w2[:, 1] + b * w1[:, 1] - q
    upper = w2[:, 2] + b * w1[:, 2]
    s[0] -= lower[0] * left
    if robin is None:
        s[-1] -= upper[-1] * right
    else:
        dx = x[-1] - x[-2]
        lower = np.append(lower, 2.0 / dx**2)
        diag = np.append(diag, -2.0 / dx**2 + robin * (2.0 / dx + b_all[-1]) - q_all[-1])
        upper = np.append(upper, 0.0)
        s = np.append(s, s_all[-1])
    m = diag.size
    ab = np.zeros((3, m))
    ab[0, 1:] = upper[:-1]
    ab[1, :] = diag
    ab[2, :-1] = lower[1:]
    inner = solve_banded((1, 1), ab, s)
    tail = [] if robin is not None else [right]
    y = np.concatenate(([left], inner, tail))
    m_ok = bool(np.all(lower >= 0) and np.all(upper >= 0) and np.all(q >= 0))
    return DirichletSolution(x, y, m_ok)
