"""Independent reference solvers used only by the tests."""

import numpy as np


def project_l1_bisect(v, radius=1.0, iters=200):
    """L1-ball projection by bisection on the soft threshold."""
    v = np.asarray(v, dtype=np.float64)
    a = np.abs(v)
    if a.sum() <= radius:
        return v.copy()
    lo, hi = 0.0, a.max()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if np.maximum(a - mid, 0.0).sum() > radius:
            lo = mid
        else:
            hi = mid
    return np.sign(v) * np.maximum(a - hi, 0.0)


def project_l1_grid(v, radius=1.0, resolution=1e-3):
    """Coarse-to-fine grid search for argmin ||u - v|| over the L1 ball (3-vectors)."""
    v = np.asarray(v, dtype=np.float64)
    center = np.zeros(3)
    step = 0.1
    half = radius
    while True:
        ticks = [np.arange(c - half, c + half + step / 2, step) for c in center]
        grid = np.stack(np.meshgrid(*ticks, indexing="ij"), axis=-1).reshape(-1, 3)
        grid = grid[np.abs(grid).sum(axis=1) <= radius + 1e-12]
        center = grid[np.argmin(np.sum((grid - v) ** 2, axis=1))]
        if step <= resolution * (1 + 1e-9):
            return center
        half = 5 * step
        step /= 10


def naive_projected_gradient(gram, lin, beta, l0, max_iter=10**6, tol=1e-15):
    """Fixed-step projected gradient on beta/2 <L, gram L> - <lin, L>, columns in the unit L1 ball."""
    lipschitz = beta * np.linalg.eigvalsh(gram)[-1]
    step = 1.0 / lipschitz
    l = np.array(l0, dtype=np.float64)
    for _ in range(max_iter):
        grad = beta * gram @ l - lin
        nxt = np.column_stack([project_l1_bisect(c) for c in (l - step * grad).T])
        if np.max(np.abs(nxt - l)) < tol:
            return nxt
        l = nxt
    return l


def objective(gram, lin, beta, l):
    return 0.5 * beta * np.vdot(l, gram @ l) - np.vdot(lin, l)


def central_gradient(f, x, h):
    """Central finite-difference gradient of scalar ``f`` at array ``x``."""
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[idx] = h
        g[idx] = (f(x + e) - f(x - e)) / (2 * h)
    return g
