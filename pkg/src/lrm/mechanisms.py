"""Laplace noise, the two baseline mechanisms and the low-rank mechanism.

Unit sensitivity (a neighbouring database changes one count by at most 1) is
fixed throughout; see :data:`UNIT_SENSITIVITY`.

Noise is drawn from numpy's PCG64 generator. A seed is always an explicit
non-negative integer, so every ``answer_*`` call is a pure function of its
inputs and seed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from os import PathLike
from pathlib import Path

import numpy as np

from .linalg import as_matrix, frobenius_norm, load_matrix, save_matrix
from .workload import Dataset

log = logging.getLogger(__name__)

UNIT_SENSITIVITY = 1.0
MECHANISM_TAGS = ("NOD", "NOR", "LRM", "AMM")


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValueError(f"epsilon must be positive and finite, got {self.epsilon}")


def _budget(eps) -> PrivacyBudget:
    return eps if isinstance(eps, PrivacyBudget) else PrivacyBudget(float(eps))


@dataclass(frozen=True)
class NoisyAnswer:
    values: np.ndarray
    mechanism_tag: str
    seed: int


def derive_seed(base_seed: int, index: int) -> int:
    """Seed for trial ``index`` of a run seeded with ``base_seed``.

    ``base_seed XOR index`` is spread through numpy's SeedSequence hash so
    neighbouring indices give unrelated streams.
    """
    mixed = np.random.SeedSequence(int(base_seed) ^ int(index))
    return int(mixed.generate_state(1, np.uint64)[0] >> np.uint64(1))


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


_LOW = np.nextafter(-0.5, 0.0)


def _laplace_from(rng: np.random.Generator, scale: float, size) -> np.ndarray:
    # u in (-1/2, 1/2) so the logarithm stays finite
    u = rng.uniform(_LOW, 0.5, size=size)
    return -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def sample_laplace(scale: float, count: int, seed: int) -> np.ndarray:
    """``count`` i.i.d. zero-mean Laplace(scale) draws via the inverse CDF."""
    if not scale > 0:
        raise ValueError(f"Laplace scale must be positive, got {scale}")
    return _laplace_from(_rng(seed), float(scale), int(count))


def query_scale(b) -> float:
    """Squared sum of the entries of ``b``."""
    return float(np.sum(np.square(np.asarray(b, dtype=np.float64))))


def query_sensitivity(l) -> float:
    """Maximal column absolute sum of ``l``."""
    l = np.asarray(l, dtype=np.float64)
    return float(np.max(np.sum(np.abs(l), axis=0)))


def workload_sensitivity(w) -> float:
    return UNIT_SENSITIVITY * query_sensitivity(w)


@dataclass
class Decomposition:
    """Factors ``b`` (m x r) and ``l`` (r x n) with ``b @ l`` close to a workload."""

    b: np.ndarray
    l: np.ndarray
    residual: float
    max_col_l1: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.b = as_matrix(self.b, "B")
        self.l = as_matrix(self.l, "L")
        if self.b.shape[1] != self.l.shape[0]:
            raise ValueError(f"inner dimensions differ: B {self.b.shape}, L {self.l.shape}")

    @classmethod
    def from_factors(cls, b, l, w, **meta) -> "Decomposition":
        b = as_matrix(b, "B")
        l = as_matrix(l, "L")
        w = as_matrix(w, "W")
        if w.shape != (b.shape[0], l.shape[1]):
            raise ValueError(f"B @ L has shape {(b.shape[0], l.shape[1])}, W has {w.shape}")
        return cls(b, l, frobenius_norm(w - b @ l), query_sensitivity(l), dict(meta))

    @property
    def r(self) -> int:
        return self.b.shape[1]

    def check(self, w, tol: float = 1e-10) -> None:
        """Raise if the stored residual or column norm disagree with the factors."""
        fresh = Decomposition.from_factors(self.b, self.l, w)
        scale = max(1.0, fresh.residual)
        if abs(fresh.residual - self.residual) > tol * scale:
            raise ValueError("stored residual does not match the factors")
        if abs(fresh.max_col_l1 - self.max_col_l1) > tol * max(1.0, fresh.max_col_l1):
            raise ValueError("stored max column L1 norm does not match the factors")

    def save(self, directory: str | PathLike) -> None:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        save_matrix(self.b, out / "B.mat")
        save_matrix(self.l, out / "L.mat")
        meta = {"r": self.r, "residual": repr(self.residual), "max_col_l1": repr(self.max_col_l1)}
        meta.update({k: v for k, v in self.meta.items() if k not in meta})
        write_meta(meta, out / "meta")

    @classmethod
    def load(cls, directory: str | PathLike) -> "Decomposition":
        src = Path(directory)
        meta = read_meta(src / "meta")
        b = load_matrix(src / "B.mat")
        l = load_matrix(src / "L.mat")
        residual = float(meta.pop("residual"))
        max_col = float(meta.pop("max_col_l1"))
        meta.pop("r", None)
        return cls(b, l, residual, max_col, meta)


def write_meta(meta: dict, path: str | PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in meta.items():
            fh.write(f"{key} = {value}\n")


def read_meta(path: str | PathLike) -> dict:
    meta = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}: line {lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            meta[key.strip()] = value.strip()
    return meta


def _counts(w: np.ndarray, d) -> np.ndarray:
    x = d.counts if isinstance(d, Dataset) else np.asarray(d, dtype=np.float64)
    if x.ndim != 1 or x.size != w.shape[1]:
        raise ValueError(f"dataset length {x.size} does not match workload with {w.shape[1]} columns")
    return x


# Each noise_* helper returns the additive error for ``size`` independent runs
# (shape (size, m)). The answer_* functions use size=1; Monte Carlo
# estimates use the same helpers with a large size so both share one code path.

def noise_nod(w, eps, rng: np.random.Generator, size: int = 1) -> np.ndarray:
    scale = UNIT_SENSITIVITY / _budget(eps).epsilon
    return _laplace_from(rng, scale, (size, w.shape[1])) @ w.T


def noise_nor(w, eps, rng: np.random.Generator, size: int = 1) -> np.ndarray:
    sens = workload_sensitivity(w)
    if sens == 0.0:
        return np.zeros((size, w.shape[0]))
    return _laplace_from(rng, sens / _budget(eps).epsilon, (size, w.shape[0]))


def noise_lrm(dec: Decomposition, eps, rng: np.random.Generator, size: int = 1) -> np.ndarray:
    sens = UNIT_SENSITIVITY * dec.max_col_l1
    if sens == 0.0:
        return np.zeros((size, dec.b.shape[0]))
    return _laplace_from(rng, sens / _budget(eps).epsilon, (size, dec.r)) @ dec.b.T


def answer_nod(w, d, eps, seed: int) -> NoisyAnswer:
    """Answer ``w @ x`` after perturbing every count with Laplace noise."""
    w = as_matrix(w, "W")
    x = _counts(w, d)
    return NoisyAnswer(w @ x + noise_nod(w, eps, _rng(seed))[0], "NOD", seed)


def answer_nor(w, d, eps, seed: int) -> NoisyAnswer:
    """Answer ``w @ x`` and perturb every result, calibrated to the workload sensitivity."""
    w = as_matrix(w, "W")
    x = _counts(w, d)
    if workload_sensitivity(w) == 0.0:
        log.warning("workload has zero sensitivity; NOR returns exact answers")
    return NoisyAnswer(w @ x + noise_nor(w, eps, _rng(seed))[0], "NOR", seed)


def answer_lrm(dec: Decomposition, d, eps, seed: int) -> NoisyAnswer:
    """``B (L x + Lap(sens/eps)^r)`` with sens the max column L1 norm of ``L``."""
    x = _counts(dec.l, d)
    exact = dec.b @ (dec.l @ x)
    return NoisyAnswer(exact + noise_lrm(dec, eps, _rng(seed))[0], "LRM", seed)


def expected_error_nod(w, eps) -> float:
    e = _budget(eps).epsilon
    return 2.0 * UNIT_SENSITIVITY**2 / e**2 * query_scale(w)


def expected_error_nor(w, eps) -> float:
    w = as_matrix(w, "W")
    e = _budget(eps).epsilon
    return 2.0 * w.shape[0] * workload_sensitivity(w) ** 2 / e**2


def expected_error_lrm(dec: Decomposition, eps) -> float:
    e = _budget(eps).epsilon
    return 2.0 * query_scale(dec.b) * (UNIT_SENSITIVITY * dec.max_col_l1) ** 2 / e**2


def expected_error_lrm_relaxed(dec: Decomposition, eps, d) -> float:
    """Upper bound on the error of a decomposition with sensitivity at most 1.

    Noise term ``2 tr(B^T B) / eps^2`` plus the stored residual times the sum of
    squared counts.
    """
    e = _budget(eps).epsilon
    x = d.counts if isinstance(d, Dataset) else np.asarray(d, dtype=np.float64)
    return 2.0 * query_scale(dec.b) / e**2 + dec.residual * float(np.dot(x, x))


def nor_beats_nod(w) -> bool:
    """True when NOR has lower expected error than NOD.

    Equivalent to ``m * max_j (sum_i |W_ij|)^2 < sum_ij W_ij^2``. That implies
    the weaker ``m * max_j sum_i W_ij^2 < sum_ij W_ij^2``, and the two coincide
    when every column has at most one non-zero entry.
    """
    w = as_matrix(w, "W")
    return w.shape[0] * workload_sensitivity(w) ** 2 < query_scale(w)
