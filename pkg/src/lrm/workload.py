"""Workload generators, count datasets and domain merging.

Three synthetic query families are provided:

``wdiscrete``
    every coefficient is +1 with probability 0.02 and -1 otherwise.
``wrange``
    each query sums a contiguous range ``[a, b]`` of counts; ``a`` and ``b``
    are the min and max of two independent uniform draws on ``1..n``.
``wrelated``
    ``W = C @ A`` with ``C`` (m x s) and ``A`` (s x n) standard normal, so
    ``rank(W) <= s``.

All generators use numpy's PCG64. Row-wise generators seed row ``i`` with
``SeedSequence([seed, i])``, so any row can be regenerated on its own.
"""

from __future__ import annotations

from dataclasses import dataclass
from os import PathLike

import numpy as np

FAMILIES = ("wdiscrete", "wrange", "wrelated")
WDISCRETE_PLUS_PROB = 0.02

# synthetic stand-in data: floor(LogNormal(mean, sigma))
SYNTHETIC_LOG_MEAN = 2.0
SYNTHETIC_LOG_SIGMA = 1.5


@dataclass(frozen=True)
class WorkloadSpec:
    family: str
    m: int
    n: int
    s: int | None = None
    seed: int = 0

    def __post_init__(self):
        family = self.family.lower()
        object.__setattr__(self, "family", family)
        if family not in FAMILIES:
            raise ValueError(f"unknown workload family {self.family!r}; expected one of {FAMILIES}")
        if self.m < 1 or self.n < 1:
            raise ValueError(f"m and n must be positive, got m={self.m}, n={self.n}")
        if family == "wrelated":
            if self.s is None or not 1 <= self.s <= min(self.m, self.n):
                raise ValueError(f"wrelated needs 1 <= s <= min(m, n), got s={self.s}")


@dataclass(frozen=True)
class Dataset:
    counts: np.ndarray
    unit_sensitivity: float = 1.0

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.float64)
        if counts.ndim != 1 or counts.size == 0:
            raise ValueError("counts must be a non-empty vector")
        if not np.all(np.isfinite(counts)) or np.any(counts < 0):
            raise ValueError("counts must be finite and non-negative")
        if self.unit_sensitivity != 1.0:
            raise ValueError("only unit sensitivity is supported")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return self.counts.size


def _row_rng(seed: int, row: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, row])))


def gen_wdiscrete(spec: WorkloadSpec) -> np.ndarray:
    if spec.family != "wdiscrete":
        raise ValueError(f"expected a wdiscrete spec, got {spec.family}")
    w = np.empty((spec.m, spec.n))
    for i in range(spec.m):
        plus = _row_rng(spec.seed, i).random(spec.n) < WDISCRETE_PLUS_PROB
        w[i] = np.where(plus, 1.0, -1.0)
    return w


def range_rows(intervals, n: int) -> np.ndarray:
    """Rows of ones over the 1-based inclusive ``(a, b)`` intervals."""
    intervals = list(intervals)
    w = np.zeros((len(intervals), n))
    for i, (a, b) in enumerate(intervals):
        if not 1 <= a <= b <= n:
            raise ValueError(f"interval {(a, b)} is not inside [1, {n}]")
        w[i, a - 1 : b] = 1.0
    return w


def gen_wrange(spec: WorkloadSpec) -> np.ndarray:
    if spec.family != "wrange":
        raise ValueError(f"expected a wrange spec, got {spec.family}")
    intervals = []
    for i in range(spec.m):
        p, q = _row_rng(spec.seed, i).integers(1, spec.n + 1, size=2)
        intervals.append((int(min(p, q)), int(max(p, q))))
    return range_rows(intervals, spec.n)


def gen_wrelated(spec: WorkloadSpec) -> np.ndarray:
    if spec.family != "wrelated":
        raise ValueError(f"expected a wrelated spec, got {spec.family}")
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    base = rng.standard_normal((spec.s, spec.n))
    mix = rng.standard_normal((spec.m, spec.s))
    return mix @ base


_GENERATORS = {"wdiscrete": gen_wdiscrete, "wrange": gen_wrange, "wrelated": gen_wrelated}


def generate(spec: WorkloadSpec) -> np.ndarray:
    return _GENERATORS[spec.family](spec)


def merge_domain(counts, target_n: int) -> Dataset:
    """Sum consecutive counts into ``target_n`` buckets.

    When the length is not a multiple of ``target_n`` the first
    ``len % target_n`` buckets take one extra element.
    """
    counts = np.asarray(counts, dtype=np.float64)
    size = counts.size
    if target_n < 1 or target_n > size:
        raise ValueError(f"target_n must be in [1, {size}], got {target_n}")
    base, extra = divmod(size, target_n)
    widths = np.full(target_n, base)
    widths[:extra] += 1
    starts = np.concatenate(([0], np.cumsum(widths)[:-1]))
    return Dataset(np.add.reduceat(counts, starts))


def synthetic_counts(n: int, seed: int) -> Dataset:
    """Integer counts drawn as ``floor(LogNormal(2.0, 1.5))``."""
    rng = np.random.Generator(np.random.PCG64(seed))
    return Dataset(np.floor(rng.lognormal(SYNTHETIC_LOG_MEAN, SYNTHETIC_LOG_SIGMA, size=n)))


def load_counts(path: str | PathLike) -> np.ndarray:
    """Read one decimal per line; blank lines and ``#`` comments are skipped."""
    values = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            try:
                values.append(float(text))
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: cannot parse {text!r} as a number") from None
    if not values:
        raise ValueError(f"{path}: no counts found")
    return np.array(values)


def write_counts(counts, path: str | PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for value in np.asarray(counts, dtype=np.float64):
            fh.write(f"{value:.17g}\n")
