"""Workload decomposition by an inexact augmented Lagrangian method.

Solves::

    minimize    tr(B^T B)
    subject to  ||W - B L||_F <= gamma
                sum_i |L_ij| <= 1   for every column j

The outer loop updates the multiplier ``pi`` and grows the penalty ``beta``;
the inner loop alternates the closed-form ``B`` step with an accelerated
projected-gradient ``L`` step (:func:`lrm.kernels.nesterov_l`).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .linalg import as_matrix, frobenius_norm, solve_spd, svd
from .mechanisms import Decomposition, PrivacyBudget, _budget

log = logging.getLogger(__name__)

CONVERGED = "converged"
BUDGET_EXHAUSTED = "budget-exhausted"


def default_r(w, multiplier: float = 1.2) -> int:
    """``ceil(multiplier * rank(W))``, at least 1."""
    if not multiplier > 0:
        raise ValueError(f"multiplier must be positive, got {multiplier}")
    return max(1, math.ceil(multiplier * svd(w).rank - 1e-9))


@dataclass(frozen=True)
class SolverConfig:
    """Tuning knobs for :func:`decompose`.

    ``r=None`` means :func:`default_r` with multiplier 1.2. ``max_beta=None``
    means ``2**30 * beta0``; ``nesterov_chi=None`` means ``r * n * 1e-12``.
    """

    r: int | None = None
    gamma: float = 0.01
    beta0: float = 1.0
    beta_growth: float = 2.0
    growth_period: int = 10
    max_outer: int = 200
    max_beta: float | None = None
    inner_tol: float = 1e-6
    max_inner: int = 50
    nesterov_chi: float | None = None
    nesterov_max_iter: int = 500
    omega0: float = 1.0
    max_backtracks: int = 60
    init_jitter: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.r is not None and self.r < 1:
            raise ValueError(f"r must be >= 1, got {self.r}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if not self.beta0 > 0:
            raise ValueError(f"beta0 must be positive, got {self.beta0}")
        if not self.beta_growth > 1:
            raise ValueError(f"beta_growth must exceed 1, got {self.beta_growth}")
        if self.growth_period < 1 or self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("growth_period, max_outer and max_inner must be positive")

    def resolved(self, w: np.ndarray) -> "SolverConfig":
        r = self.r if self.r is not None else default_r(w)
        chi = self.nesterov_chi if self.nesterov_chi is not None else r * w.shape[1] * 1e-12
        max_beta = self.max_beta if self.max_beta is not None else 2.0**30 * self.beta0
        return replace(self, r=r, nesterov_chi=chi, max_beta=max_beta)


@dataclass(frozen=True)
class OuterRecord:
    objective: float  # 0.5 * tr(B^T B)
    residual: float
    beta: float
    sweeps: int
    nesterov_iterations: int


@dataclass
class SolveTrace:
    records: list[OuterRecord] = field(default_factory=list)
    termination: str = ""

    @property
    def outer_iterations(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class BoundReport:
    """Spectral diagnostics on the trace scale ``tr(B^T B)``.

    ``upper`` is ``rank * sum(sigma^2)`` (achieved by the SVD construction),
    ``lower`` is the lower-bound shape ``(2^r / r! * prod(sigma))^(2/r) * r^3``
    without its unknown constant, ``c_ratio`` is ``sigma_1 / sigma_r`` and
    ``approx_factor`` is ``(c_ratio / 4)^2 * r``. ``*_error`` divide by eps^2.
    """

    rank: int
    sigma: np.ndarray
    upper: float
    lower: float
    c_ratio: float
    approx_factor: float
    epsilon: float

    @property
    def upper_error(self) -> float:
        return self.upper / self.epsilon**2

    @property
    def lower_error(self) -> float:
        return self.lower / self.epsilon**2


def bound_report(w, eps) -> BoundReport:
    budget = _budget(eps)
    res = svd(w)
    r = res.rank
    if r == 0:
        raise ValueError("bound_report needs a non-zero workload")
    lam = res.sigma[:r]
    upper = r * float(np.sum(lam**2))
    # (2^r / r! * prod(lam))^(2/r) evaluated in log space
    log_vol = r * math.log(2.0) - math.lgamma(r + 1) + float(np.sum(np.log(lam)))
    lower = math.exp(2.0 * log_vol / r) * r**3
    c = float(lam[0] / lam[-1])
    return BoundReport(r, lam.copy(), upper, lower, c, (c / 4.0) ** 2 * r, budget.epsilon)


def project_l1_ball(v, radius: float = 1.0) -> np.ndarray:
    """Euclidean projection of a vector onto ``{u : ||u||_1 <= radius}``."""
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    v = np.asarray(v, dtype=np.float64)
    return kernels.project_l1_columns(v.reshape(-1, 1), float(radius))[:, 0]


def augmented_lagrangian(b, l, w, pi, beta) -> float:
    resid = w - b @ l
    return float(0.5 * np.vdot(b, b) + np.vdot(pi, resid) + 0.5 * beta * np.vdot(resid, resid))


def update_b(l, w, pi, beta) -> np.ndarray:
    """Minimizer over ``B`` of the augmented Lagrangian for fixed ``L``.

    ``B = (beta W + pi) L^T (beta L L^T + I)^{-1}``.
    """
    l = np.asarray(l, dtype=np.float64)
    rhs = l @ (beta * np.asarray(w) + np.asarray(pi)).T
    lhs = beta * (l @ l.T) + np.eye(l.shape[0])
    return solve_spd(lhs, rhs).T


def _l_terms(b, w, pi, beta) -> tuple[np.ndarray, np.ndarray]:
    b = np.asarray(b, dtype=np.float64)
    return b.T @ b, b.T @ (beta * np.asarray(w) + np.asarray(pi))


def inner_objective_l(l, b, w, pi, beta) -> tuple[float, np.ndarray]:
    """``G(L) = beta/2 tr(L^T B^T B L) - tr((beta W + pi)^T B L)`` and its gradient."""
    gram, lin = _l_terms(b, w, pi, beta)
    l = np.asarray(l, dtype=np.float64)
    return kernels.quad_objective(gram, lin, beta, l), beta * gram @ l - lin


@dataclass(frozen=True)
class LStep:
    l: np.ndarray
    objective: float
    iterations: int
    converged: bool


def nesterov_solve_l(b, w, pi, beta, l0, cfg: SolverConfig) -> LStep:
    """Minimize ``G`` over column-wise unit-L1 ``L`` from the feasible start ``l0``."""
    l0 = np.asarray(l0, dtype=np.float64)
    chi = cfg.nesterov_chi if cfg.nesterov_chi is not None else l0.size * 1e-12
    gram, lin = _l_terms(b, w, pi, beta)
    l, g, its, ok = kernels.nesterov_l(
        np.ascontiguousarray(gram),
        np.ascontiguousarray(lin),
        float(beta),
        np.ascontiguousarray(l0),
        float(chi),
        float(cfg.omega0),
        int(cfg.nesterov_max_iter),
        int(cfg.max_backtracks),
    )
    return LStep(l, g, its, ok)


def init_decomposition(w, cfg: SolverConfig) -> tuple[np.ndarray, np.ndarray]:
    """Feasible start built from the top ``r`` right singular vectors.

    ``L0 = V_r / sqrt(r)`` satisfies every column constraint because a column
    of ``V_r`` has unit-bounded L2 norm. A small seeded jitter breaks the
    symmetry of rows that ``W`` does not excite (r above the rank); the result
    is re-projected, so ``L0`` stays feasible.
    """
    w = as_matrix(w, "W")
    cfg = cfg.resolved(w)
    r, n = cfg.r, w.shape[1]
    _, _, vt = np.linalg.svd(w, full_matrices=True)
    l0 = np.zeros((r, n))
    q = min(r, n)
    l0[:q] = vt[:q] / math.sqrt(r)
    if cfg.init_jitter > 0:
        rng = np.random.Generator(np.random.PCG64(cfg.seed))
        l0 += cfg.init_jitter / math.sqrt(r * n) * rng.standard_normal((r, n))
    l0 = kernels.project_l1_columns(l0, 1.0)
    b0 = update_b(l0, w, np.zeros_like(w), cfg.beta0)
    return b0, l0


def revive_dead_rows(b, l, w, pi, beta, scale: float = 0.1) -> tuple[np.ndarray, np.ndarray, int]:
    """Re-seed rows of ``L`` that projection has driven to exactly zero.

    A zero row of ``L`` with its zero column of ``B`` is a stationary pair of
    the alternation, so once dead it never recovers. Dead rows are restarted
    along the leading right singular vectors of the current residual and
    ``B`` is recomputed.
    """
    row_mass = np.sum(np.abs(l), axis=1)
    dead = np.flatnonzero(row_mass <= 1e-12 * max(1.0, float(row_mass.max(initial=0.0))))
    if dead.size == 0:
        return b, l, 0
    resid = w - b @ l
    _, sig, vt = np.linalg.svd(resid, full_matrices=False)
    live = int(np.count_nonzero(sig > 1e-12 * max(1.0, float(sig[0]))))
    count = min(dead.size, live)
    if count == 0:
        return b, l, 0
    l = l.copy()
    l[dead[:count]] = scale * vt[:count]
    l = kernels.project_l1_columns(l, 1.0)
    return update_b(l, w, pi, beta), l, count


def decompose(w, cfg: SolverConfig | None = None) -> tuple[Decomposition, SolveTrace]:
    """Run the augmented Lagrangian decomposition of ``w``.

    Stops when the residual ``||W - BL||_F`` is at most ``gamma`` (absolute),
    when ``beta`` exceeds ``max_beta``, or after ``max_outer`` outer iterations.
    In the last two cases the iterate with the smallest residual is returned
    and the trace records ``budget-exhausted``.
    """
    w = as_matrix(w, "W")
    cfg = (cfg or SolverConfig()).resolved(w)
    b, l = init_decomposition(w, cfg)
    pi = np.zeros_like(w)
    beta = cfg.beta0
    trace = SolveTrace()
    best = None

    for k in range(1, cfg.max_outer + 1):
        j_prev = augmented_lagrangian(b, l, w, pi, beta)
        sweeps = nest_its = 0
        for sweeps in range(1, cfg.max_inner + 1):
            b = update_b(l, w, pi, beta)
            step = nesterov_solve_l(b, w, pi, beta, l, cfg)
            l = step.l
            nest_its += step.iterations
            j_cur = augmented_lagrangian(b, l, w, pi, beta)
            if abs(j_prev - j_cur) <= cfg.inner_tol * max(1.0, abs(j_cur)):
                break
            j_prev = j_cur

        resid = w - b @ l
        tau = float(np.sqrt(np.vdot(resid, resid)))
        trace.records.append(OuterRecord(0.5 * float(np.vdot(b, b)), tau, beta, sweeps, nest_its))
        if best is None or tau < best[0]:
            best = (tau, b, l)
        if tau <= cfg.gamma:
            trace.termination = CONVERGED
            break
        b, l, revived = revive_dead_rows(b, l, w, pi, beta)
        if revived:
            log.debug("outer %d: revived %d dead rows of L", k, revived)
            resid = w - b @ l
        if beta > cfg.max_beta or k == cfg.max_outer:
            log.info("decompose stopped at k=%d, beta=%g, residual %g > gamma %g", k, beta, tau, cfg.gamma)
            trace.termination = BUDGET_EXHAUSTED
            _, b, l = best
            break
        if k % cfg.growth_period == 0:
            beta *= cfg.beta_growth
        pi = pi + beta * resid

    dec = Decomposition.from_factors(
        b, l, w, gamma=repr(cfg.gamma), seed=cfg.seed, termination=trace.termination
    )
    return dec, trace


__all__ = [
    "BoundReport",
    "LStep",
    "OuterRecord",
    "PrivacyBudget",
    "SolveTrace",
    "SolverConfig",
    "augmented_lagrangian",
    "bound_report",
    "decompose",
    "default_r",
    "init_decomposition",
    "inner_objective_l",
    "nesterov_solve_l",
    "project_l1_ball",
    "revive_dead_rows",
    "update_b",
]
