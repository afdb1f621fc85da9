"""Approximate matrix mechanism (L2 strategy optimisation).

Finds a square strategy ``A`` minimising ``max(diag(A^T A)) * tr(W^T W (A^T A)^{-1})``
by optimising ``M = A^T A`` directly over the positive definite cone. The
non-smooth ``max`` is replaced by the log-sum-exp smoothing ``f_mu`` and the
problem is solved with a non-monotone spectral projected gradient method
(Birgin, Martinez & Raydan, 2000). The strategy is answered with Laplace noise
calibrated to its L1 column sensitivity and mapped back through ``W A^+``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from os import PathLike
from pathlib import Path

import numpy as np
import scipy.linalg

from .linalg import LinAlgFailure, as_matrix, load_matrix, pinv, save_matrix, svd
from .mechanisms import (
    NoisyAnswer,
    UNIT_SENSITIVITY,
    _budget,
    _counts,
    _laplace_from,
    _rng,
    query_sensitivity,
    read_meta,
    write_meta,
)


class RankDeficientWorkload(ValueError):
    pass


def smoothed_max(v, mu: float) -> float:
    """``max(v) + mu * log(sum(exp((v - max(v)) / mu)))``."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("smoothed_max of an empty vector")
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    top = float(v.max())
    return top + mu * math.log(float(np.sum(np.exp((v - top) / mu))))


def smoothed_max_grad(v, mu: float) -> np.ndarray:
    """Gradient of :func:`smoothed_max`: the softmax of ``v / mu``."""
    v = np.asarray(v, dtype=np.float64)
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    e = np.exp((v - v.max()) / mu)
    return e / e.sum()


def _cholesky(m: np.ndarray):
    try:
        return scipy.linalg.cho_factor(m, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise LinAlgFailure(f"M is not positive definite: {exc}") from exc


def _objective(m: np.ndarray, gram_w: np.ndarray, mu: float) -> tuple[float, np.ndarray]:
    factor = _cholesky(m)
    s = scipy.linalg.cho_solve(factor, gram_w, check_finite=False)  # M^-1 Q
    t = float(np.trace(s))
    x = scipy.linalg.cho_solve(factor, s.T, check_finite=False)  # M^-1 Q M^-1
    x = 0.5 * (x + x.T)
    d = np.diag(m)
    f = smoothed_max(d, mu)
    grad = -f * x
    grad[np.diag_indices_from(grad)] += t * smoothed_max_grad(d, mu)
    return f * t, grad


def amm_objective(m, w, mu: float) -> tuple[float, np.ndarray]:
    """Smoothed objective ``f_mu(diag(M)) * tr(W^T W M^{-1})`` and its gradient."""
    m = as_matrix(m, "M")
    w = as_matrix(w, "W")
    return _objective(m, w.T @ w, mu)


def exact_objective(m, w) -> float:
    """``max(diag(M)) * tr(W^T W M^{-1})``, i.e. the unsmoothed strategy cost."""
    m = as_matrix(m, "M")
    w = as_matrix(w, "W")
    factor = _cholesky(m)
    return float(np.max(np.diag(m))) * float(np.trace(scipy.linalg.cho_solve(factor, w.T @ w)))


def project_pd(m: np.ndarray, floor: float) -> np.ndarray:
    """Clip the eigenvalues of symmetric ``m`` at ``floor``."""
    vals, vecs = np.linalg.eigh(0.5 * (m + m.T))
    out = (vecs * np.maximum(vals, floor)) @ vecs.T
    return 0.5 * (out + out.T)


def strategy_from_gram(m: np.ndarray) -> np.ndarray:
    """Symmetric square root ``A = sum_i sqrt(lambda_i) v_i v_i^T``."""
    vals, vecs = np.linalg.eigh(0.5 * (m + m.T))
    a = (vecs * np.sqrt(np.maximum(vals, 0.0))) @ vecs.T
    return 0.5 * (a + a.T)


@dataclass(frozen=True)
class AmmConfig:
    """Settings for :func:`amm_solve`.

    ``mu=None`` means ``smoothing / log(n)``; ``eig_floor=None`` means
    ``1e-8 * trace(M0) / n`` for the identity start, i.e. ``1e-8``.
    """

    mu: float | None = None
    smoothing: float = 1e-2
    eig_floor: float | None = None
    max_iters: int = 300
    nonmonotone_memory: int = 10
    step_bounds: tuple[float, float] = (1e-10, 1e10)
    armijo: float = 1e-4
    max_backtracks: int = 40
    tol: float = 1e-9
    allow_rank_deficient: bool = False

    def __post_init__(self):
        if self.mu is not None and not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.eig_floor is not None and not self.eig_floor > 0:
            raise ValueError("eig_floor must be positive")
        if self.nonmonotone_memory < 1:
            raise ValueError("nonmonotone_memory must be >= 1")
        lo, hi = self.step_bounds
        if not 0 < lo < hi:
            raise ValueError("step_bounds must satisfy 0 < min < max")


@dataclass(frozen=True)
class AmmIterate:
    objective: float
    reference: float
    min_eig: float
    step: float


@dataclass
class AmmSolution:
    m_matrix: np.ndarray
    strategy: np.ndarray
    objective: float
    mu: float
    eig_floor: float
    history: list[AmmIterate] = field(default_factory=list)

    @property
    def sensitivity(self) -> float:
        return UNIT_SENSITIVITY * query_sensitivity(self.strategy)

    def save(self, directory: str | PathLike) -> None:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        save_matrix(self.m_matrix, out / "M.mat")
        save_matrix(self.strategy, out / "A.mat")
        write_meta(
            {
                "n": self.m_matrix.shape[0],
                "objective": repr(self.objective),
                "mu": repr(self.mu),
                "eig_floor": repr(self.eig_floor),
                "iterations": len(self.history),
            },
            out / "meta",
        )

    @classmethod
    def load(cls, directory: str | PathLike) -> "AmmSolution":
        src = Path(directory)
        meta = read_meta(src / "meta")
        return cls(
            load_matrix(src / "M.mat"),
            load_matrix(src / "A.mat"),
            float(meta["objective"]),
            float(meta["mu"]),
            float(meta["eig_floor"]),
        )


def _inner(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.vdot(a, b))


def amm_solve(w, cfg: AmmConfig | None = None) -> AmmSolution:
    """Minimise the smoothed strategy cost from ``M0 = I``.

    Each step moves along ``D = P(M - alpha G) - M`` with ``P`` the eigenvalue
    clip at ``eig_floor`` and ``alpha`` the clamped Barzilai-Borwein step. A
    trial ``M + lam D`` is accepted once its value is at most the maximum of the
    last ``nonmonotone_memory`` accepted values plus ``armijo * lam * <G, D>``;
    otherwise ``lam`` is halved. The best iterate seen is returned.
    """
    cfg = cfg or AmmConfig()
    w = as_matrix(w, "W")
    n = w.shape[1]
    if not cfg.allow_rank_deficient and svd(w).rank < n:
        raise RankDeficientWorkload(
            f"workload has column rank {svd(w).rank} < n = {n}; reduce the domain "
            "(merge counts) or pass allow_rank_deficient=True"
        )
    mu = cfg.mu if cfg.mu is not None else cfg.smoothing / max(math.log(n), 1.0)
    m = np.eye(n)
    floor = cfg.eig_floor if cfg.eig_floor is not None else 1e-8 * np.trace(m) / n
    gram_w = w.T @ w
    lo, hi = cfg.step_bounds

    f, g = _objective(m, gram_w, mu)
    values = [f]
    history = [AmmIterate(f, f, 1.0, 0.0)]
    best_f, best_m = f, m
    alpha = min(hi, max(lo, 1.0 / max(np.linalg.norm(g), 1e-300)))

    for _ in range(cfg.max_iters):
        d = project_pd(m - alpha * g, floor) - m
        if np.linalg.norm(d) <= cfg.tol * (1.0 + np.linalg.norm(m)):
            break
        slope = _inner(g, d)
        reference = max(values[-cfg.nonmonotone_memory:])
        lam = 1.0
        accepted = False
        for _ in range(cfg.max_backtracks):
            trial = m + lam * d
            trial = 0.5 * (trial + trial.T)
            try:
                f_new, g_new = _objective(trial, gram_w, mu)
            except LinAlgFailure:
                lam *= 0.5
                continue
            if f_new <= reference + cfg.armijo * lam * slope:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            break
        s = trial - m
        y = g_new - g
        sy = _inner(s, y)
        alpha = hi if sy <= 0 else min(hi, max(lo, _inner(s, s) / sy))
        m, f, g = trial, f_new, g_new
        values.append(f)
        history.append(AmmIterate(f, reference, float(np.linalg.eigvalsh(m)[0]), lam))
        if f < best_f:
            best_f, best_m = f, m

    a = strategy_from_gram(best_m)
    return AmmSolution(best_m, a, exact_objective(best_m, w), mu, float(floor), history)


def noise_amm(sol: AmmSolution, w, eps, rng: np.random.Generator, size: int = 1) -> np.ndarray:
    recon = np.asarray(w, dtype=np.float64) @ pinv(sol.strategy)
    scale = sol.sensitivity / _budget(eps).epsilon
    return _laplace_from(rng, scale, (size, sol.strategy.shape[0])) @ recon.T


def answer_amm(sol: AmmSolution, w, d, eps, seed: int) -> NoisyAnswer:
    """Answer the strategy with Laplace noise, then reconstruct ``W A^+ y``."""
    w = as_matrix(w, "W")
    a = sol.strategy
    if svd(a).rank < a.shape[1]:
        raise RankDeficientWorkload("strategy matrix does not have full column rank")
    x = _counts(w, d)
    return NoisyAnswer(w @ x + noise_amm(sol, w, eps, _rng(seed))[0], "AMM", seed)


def expected_error_amm(sol: AmmSolution, w, eps) -> float:
    """``2 sens(A)^2 / eps^2 * ||W A^+||_F^2``."""
    recon = np.asarray(w, dtype=np.float64) @ pinv(sol.strategy)
    return 2.0 * sol.sensitivity**2 / _budget(eps).epsilon ** 2 * float(np.sum(recon**2))
