"""Pure numpy implementations of the hot kernels.

These are the reference versions; ``_kernels.pyx`` mirrors them loop for loop.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "python"

# columns within this relative distance of the ball count as inside, which
# keeps the projection idempotent under rounding
INSIDE_SLACK = 1e-12


def project_l1_columns(x: np.ndarray, radius: float = 1.0) -> np.ndarray:
    """Project every column of ``x`` onto the L1 ball of the given radius."""
    x = np.asarray(x, dtype=np.float64)
    a = np.abs(x)
    out = x.copy()
    over = np.flatnonzero(a.sum(axis=0) > radius * (1.0 + INSIDE_SLACK))
    if over.size == 0:
        return out
    a_over = a[:, over]
    u = -np.sort(-a_over, axis=0)
    css = np.cumsum(u, axis=0)
    j = np.arange(1, u.shape[0] + 1, dtype=np.float64)[:, None]
    positive = u - (css - radius) / j > 0
    # largest index satisfying the prefix condition (always >= 1)
    k = u.shape[0] - np.argmax(positive[::-1], axis=0)
    theta = (css[k - 1, np.arange(over.size)] - radius) / k
    out[:, over] = np.sign(x[:, over]) * np.maximum(a_over - theta, 0.0)
    return out


def quad_objective(gram: np.ndarray, lin: np.ndarray, beta: float, l: np.ndarray) -> float:
    """``beta/2 <L, gram L> - <lin, L>``."""
    return float(0.5 * beta * np.vdot(l, gram @ l) - np.vdot(lin, l))


def nesterov_l(
    gram: np.ndarray,
    lin: np.ndarray,
    beta: float,
    l0: np.ndarray,
    chi: float,
    omega0: float = 1.0,
    max_iter: int = 1000,
    max_backtracks: int = 60,
) -> tuple[np.ndarray, float, int, bool]:
    """Accelerated projected gradient on ``beta/2 <L, gram L> - <lin, L>``.

    The feasible set is every column inside the unit L1 ball. Returns the best
    iterate seen (never worse than ``l0``), its objective, the iteration count
    and whether the step-size stop rule fired before ``max_iter``.
    """
    l_prev = np.array(l0, dtype=np.float64)
    l_cur = l_prev.copy()
    best = l_cur
    best_g = quad_objective(gram, lin, beta, l_cur)
    d_prev2, d_prev = 0.0, 1.0
    omega = omega0
    converged = False
    t = 0
    for t in range(1, max_iter + 1):
        alpha = (d_prev2 - 1.0) / d_prev
        s = l_cur + alpha * (l_cur - l_prev)
        gs_mat = gram @ s
        g_s = 0.5 * beta * np.vdot(s, gs_mat) - np.vdot(lin, s)
        grad = beta * gs_mat - lin
        for j in range(max_backtracks + 1):
            w = omega * 2.0 ** j
            l_new = project_l1_columns(s - grad / w)
            diff = l_new - s
            dn2 = np.vdot(diff, diff)
            if math.sqrt(dn2) < chi:
                converged = True
                break
            g_new = quad_objective(gram, lin, beta, l_new)
            if g_new <= g_s + np.vdot(grad, diff) + 0.5 * w * dn2:
                omega = w
                break
        if converged:
            g_new = quad_objective(gram, lin, beta, l_new)
        if g_new < best_g:
            best, best_g = l_new, g_new
        if converged:
            break
        l_prev, l_cur = l_cur, l_new
        d_prev2, d_prev = d_prev, 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * d_prev * d_prev))
    return best, float(best_g), t, converged
