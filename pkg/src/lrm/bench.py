"""Parameter-sweep experiments over the NOD, NOR, LRM and AMM mechanisms.

A plan is a text file of ``key = value`` lines (lists comma-separated)::

    family = wrelated
    m = 64
    n = 128
    s = 13
    mechanisms = NOD, NOR, LRM
    epsilon = 1
    repetitions = 20
    sweep = epsilon
    values = 1, 0.1, 0.01

Sweep axes and the meaning of their values:

``epsilon``  privacy budget
``gamma``    absolute residual tolerance of the decomposition
``r``        decomposition rank as a multiple of ``rank(W)``
``n``, ``m`` workload shape
``s``        base-query count of ``wrelated`` as a fraction of ``min(m, n)``

Every point gets the seed ``derive_seed(master, point_index)`` and trial ``t``
at that point uses ``derive_seed(point_seed, t)``, so results are a pure
function of the plan and the master seed. Decompositions do not depend on the
privacy budget and are cached per workload.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field, replace
from os import PathLike
from pathlib import Path

import numpy as np

from .amm import AmmConfig, amm_solve, expected_error_amm, noise_amm
from .linalg import svd
from .mechanisms import (
    MECHANISM_TAGS,
    _rng,
    derive_seed,
    expected_error_lrm,
    expected_error_nod,
    expected_error_nor,
    noise_lrm,
    noise_nod,
    noise_nor,
)
from .solver import SolverConfig, decompose, default_r
from .workload import (
    FAMILIES,
    WorkloadSpec,
    generate,
    load_counts,
    merge_domain,
    synthetic_counts,
)

log = logging.getLogger(__name__)

SWEEP_AXES = ("epsilon", "gamma", "r", "n", "m", "s")
DESK_GRID = {"n": (128, 256, 512, 1024), "m": (64, 128, 256)}
FULL_GRID = {"n": (128, 256, 512, 1024, 2048, 4096, 8192), "m": (64, 128, 256, 512, 1024)}
AMM_MAX_N = 256
SYNTHETIC_DOMAIN = 8192
CSV_HEADER = ("sweep", "mechanism", "mse", "analytic", "seconds", "r", "residual", "seed")

__all__ = [
    "CSV_HEADER",
    "ExperimentPlan",
    "PlanError",
    "ResultRow",
    "default_r",
    "emit_csv",
    "parse_plan",
    "run_plan",
]


class PlanError(ValueError):
    """The plan file is malformed or describes an invalid experiment."""


@dataclass(frozen=True)
class ExperimentPlan:
    family: str
    m: int
    n: int
    s: int | None = None
    mechanisms: tuple[str, ...] = ("NOD", "NOR", "LRM")
    epsilon: float = 1.0
    repetitions: int = 20
    sweep: str = "epsilon"
    values: tuple[float, ...] = (1.0,)
    gamma: float = 0.01
    r_multiplier: float = 1.2
    dataset: str = "synthetic"
    data_seed: int = 0
    workload_seed: int = 0
    seed: int = 0
    full: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise PlanError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.repetitions < 1:
            raise PlanError("repetitions must be >= 1")
        if not self.mechanisms:
            raise PlanError("mechanisms must not be empty")
        unknown = [t for t in self.mechanisms if t not in MECHANISM_TAGS]
        if unknown:
            raise PlanError(f"unknown mechanisms {unknown}; expected a subset of {MECHANISM_TAGS}")
        if self.sweep not in SWEEP_AXES:
            raise PlanError(f"sweep must be one of {SWEEP_AXES}, got {self.sweep!r}")
        if not self.values:
            raise PlanError("sweep values must not be empty")
        if self.m < 1 or self.n < 1:
            raise PlanError("m and n must be positive")
        if not self.epsilon > 0 or self.gamma < 0 or not self.r_multiplier > 0:
            raise PlanError("epsilon and r_multiplier must be positive, gamma non-negative")
        if self.family == "wrelated" and self.s is None and self.sweep != "s":
            raise PlanError("wrelated needs s")
        grid = FULL_GRID if self.full else DESK_GRID
        for axis in ("n", "m"):
            sizes = self.values if self.sweep == axis else (getattr(self, axis),)
            if max(sizes) > max(grid[axis]):
                raise PlanError(f"{axis} = {max(sizes):g} is beyond the desk-scale grid; pass --full")
        for v in self.values:
            if self.sweep in ("epsilon", "r") and not v > 0:
                raise PlanError(f"{self.sweep} values must be positive")
            if self.sweep == "gamma" and v < 0:
                raise PlanError("gamma values must be non-negative")
            if self.sweep in ("n", "m") and (v < 1 or v != int(v)):
                raise PlanError(f"{self.sweep} values must be positive integers")
            if self.sweep == "s" and not 0 < v <= 1:
                raise PlanError("s values are fractions of min(m, n) in (0, 1]")

    def point(self, value: float) -> "ExperimentPlan":
        """Plan with the sweep axis pinned to ``value``."""
        if self.sweep == "epsilon":
            return replace(self, epsilon=float(value))
        if self.sweep == "gamma":
            return replace(self, gamma=float(value))
        if self.sweep == "r":
            return replace(self, r_multiplier=float(value))
        if self.sweep in ("n", "m"):
            return replace(self, **{self.sweep: int(value)})
        return replace(self, s=max(1, round(value * min(self.m, self.n))))

    @property
    def workload_spec(self) -> WorkloadSpec:
        s = self.s if self.family == "wrelated" else None
        return WorkloadSpec(self.family, self.m, self.n, s, self.workload_seed)


_INT_KEYS = ("m", "n", "s", "repetitions", "data_seed", "workload_seed", "seed")
_FLOAT_KEYS = ("epsilon", "gamma", "r_multiplier")


def parse_plan(text: str, *, full: bool = False, source: str = "<plan>") -> ExperimentPlan:
    """Parse plan text. Raises :class:`PlanError` naming the offending line."""
    raw: dict[str, tuple[int, str]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise PlanError(f"{source}: line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in raw:
            raise PlanError(f"{source}: line {lineno}: duplicate key {key!r}")
        raw[key] = (lineno, value)

    kwargs: dict = {"full": full}
    for key, (lineno, value) in raw.items():
        try:
            if key in _INT_KEYS:
                kwargs[key] = int(value)
            elif key in _FLOAT_KEYS:
                kwargs[key] = float(value)
            elif key == "family":
                kwargs[key] = value.lower()
            elif key == "sweep":
                kwargs[key] = value.lower()
            elif key == "dataset":
                kwargs[key] = value
            elif key == "mechanisms":
                kwargs[key] = tuple(v.strip().upper() for v in value.split(",") if v.strip())
            elif key == "values":
                kwargs[key] = tuple(float(v) for v in value.split(",") if v.strip())
            else:
                raise PlanError(f"{source}: line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, PlanError):
                raise
            raise PlanError(f"{source}: line {lineno}: bad value for {key!r}: {value!r}") from None

    sweep = kwargs.get("sweep", "epsilon")
    if "values" not in kwargs:
        if sweep in DESK_GRID:
            kwargs["values"] = tuple(float(v) for v in (FULL_GRID if full else DESK_GRID)[sweep])
        elif sweep == "epsilon":
            kwargs["values"] = (kwargs.get("epsilon", 1.0),)
        else:
            raise PlanError(f"{source}: sweep {sweep!r} needs 'values'")
    if sweep in DESK_GRID and sweep not in kwargs:
        kwargs[sweep] = int(kwargs["values"][0])
    for key in ("family", "m", "n"):
        if key not in kwargs:
            raise PlanError(f"{source}: missing required key {key!r}")
    return ExperimentPlan(**kwargs)


def load_plan(path: str | PathLike, *, full: bool = False) -> ExperimentPlan:
    with open(path, encoding="utf-8") as fh:
        return parse_plan(fh.read(), full=full, source=str(path))


@dataclass(frozen=True)
class ResultRow:
    sweep: float
    mechanism: str
    mse: float
    analytic: float | None
    seconds: float
    r: int | None
    residual: float | None
    seed: int
    termination: str = ""


@dataclass
class _Cache:
    counts: np.ndarray | None = None
    workloads: dict = field(default_factory=dict)
    decompositions: dict = field(default_factory=dict)
    strategies: dict = field(default_factory=dict)


def _dataset(plan: ExperimentPlan, cache: _Cache) -> np.ndarray:
    if cache.counts is None:
        if plan.dataset == "synthetic":
            cache.counts = synthetic_counts(SYNTHETIC_DOMAIN, plan.data_seed).counts
        else:
            try:
                cache.counts = load_counts(plan.dataset)
            except OSError as exc:
                raise OSError(f"cannot read dataset {plan.dataset!r}: {exc}") from exc
    if plan.n > cache.counts.size:
        raise PlanError(f"n = {plan.n} exceeds the dataset length {cache.counts.size}")
    return merge_domain(cache.counts, plan.n).counts


def _workload(plan: ExperimentPlan, cache: _Cache) -> np.ndarray:
    spec = plan.workload_spec
    if spec not in cache.workloads:
        cache.workloads[spec] = generate(spec)
    return cache.workloads[spec]


def _mean_sq(noise: np.ndarray) -> float:
    return float(np.mean(np.sum(noise**2, axis=1)) / noise.shape[1])


def _trial_noise(draw, point_seed: int, repetitions: int) -> np.ndarray:
    return np.vstack([draw(_rng(derive_seed(point_seed, t))) for t in range(repetitions)])


def _run_point(plan: ExperimentPlan, value: float, point_seed: int, cache: _Cache) -> list[ResultRow]:
    x = _dataset(plan, cache)
    w = _workload(plan, cache)
    exact = w @ x
    m = w.shape[0]
    eps = plan.epsilon
    reps = plan.repetitions
    rows = []

    for tag in sorted(plan.mechanisms):
        start = time.perf_counter()
        r = residual = None
        termination = ""
        if tag == "NOD":
            err = _mean_sq(_trial_noise(lambda g: noise_nod(w, eps, g), point_seed, reps))
            analytic = expected_error_nod(w, eps) / m
        elif tag == "NOR":
            err = _mean_sq(_trial_noise(lambda g: noise_nor(w, eps, g), point_seed, reps))
            analytic = expected_error_nor(w, eps) / m
        elif tag == "LRM":
            r_target = default_r(w, plan.r_multiplier)
            key = (plan.workload_spec, r_target, plan.gamma)
            if key not in cache.decompositions:
                t0 = time.perf_counter()
                dec, trace = decompose(w, SolverConfig(r=r_target, gamma=plan.gamma))
                cache.decompositions[key] = (dec, trace.termination, time.perf_counter() - t0)
            dec, termination, solve_seconds = cache.decompositions[key]
            start -= solve_seconds
            bias = dec.b @ (dec.l @ x) - exact
            err = _mean_sq(bias + _trial_noise(lambda g: noise_lrm(dec, eps, g), point_seed, reps))
            analytic = expected_error_lrm(dec, eps) / m
            r, residual = dec.r, dec.residual
        else:
            if plan.n > AMM_MAX_N:
                log.info("skipping AMM at n = %d (> %d)", plan.n, AMM_MAX_N)
                continue
            key = plan.workload_spec
            if key not in cache.strategies:
                t0 = time.perf_counter()
                sol = amm_solve(w, AmmConfig(allow_rank_deficient=True))
                cache.strategies[key] = (sol, time.perf_counter() - t0)
            sol, solve_seconds = cache.strategies[key]
            start -= solve_seconds
            err = _mean_sq(_trial_noise(lambda g: noise_amm(sol, w, eps, g), point_seed, reps))
            analytic = expected_error_amm(sol, w, eps) / m
            r = svd(sol.strategy).rank
        if termination and termination != "converged":
            log.warning("LRM at %s = %g: decomposition %s", plan.sweep, value, termination)
        rows.append(
            ResultRow(float(value), tag, err, analytic, time.perf_counter() - start, r, residual,
                      point_seed, termination)
        )
    return rows


def run_plan(plan: ExperimentPlan) -> list[ResultRow]:
    """Run every sweep point of ``plan`` and return rows sorted by (sweep, mechanism)."""
    if plan.full:
        log.warning("full-scale grid requested: points up to n = 8192 can take hours")
    cache = _Cache()
    rows: list[ResultRow] = []
    for idx, value in enumerate(plan.values):
        point = plan.point(value)
        if point.family == "wrelated" and not 1 <= point.s <= min(point.m, point.n):
            raise PlanError(f"s = {point.s} must lie in [1, min(m, n)] at {plan.sweep} = {value:g}")
        rows.extend(_run_point(point, value, derive_seed(plan.seed, idx), cache))
    return sorted(rows, key=lambda row: (row.sweep, row.mechanism))


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if math.isnan(value):
        return "nan"
    return f"{value:.10g}"


def emit_csv(rows, path: str | PathLike, *, stable: bool = False) -> None:
    """Write ``rows`` in (sweep, mechanism) order; ``stable`` zeroes the timing column."""
    rows = list(rows)
    if not rows:
        raise ValueError("no result rows to write")
    ordered = sorted(rows, key=lambda row: (row.sweep, row.mechanism))
    with open(Path(path), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in ordered:
            writer.writerow(
                [
                    _fmt(row.sweep),
                    row.mechanism,
                    _fmt(row.mse),
                    _fmt(row.analytic),
                    _fmt(0.0 if stable else row.seconds),
                    _fmt(row.r),
                    _fmt(row.residual),
                    str(row.seed),
                ]
            )
