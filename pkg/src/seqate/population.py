"""Finite populations of potential outcomes.

A population is a fixed pair of outcome vectors ``(y0, y1)``; all randomness
in the analysis comes from the assignment mechanism.  This module builds the
three simulation populations (non-additive, additive, log-additive), reads
and writes user populations, and summarises their moments.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAX_ATTEMPTS_PER_DRAW = 1000

NONADDITIVE_MEAN = (0.0, 1.0)
NONADDITIVE_COV = ((1.0, 0.3), (0.3, 1.0))
NONADDITIVE_BOX = (-3.0, 3.0)


class PopulationError(ValueError):
    pass


@dataclass(frozen=True)
class PotentialOutcomes:
    """Control and treatment outcomes for ``N`` units.

    ``bound`` is the declared uniform bound M on ``|y|``; when omitted it is
    taken as the observed maximum absolute value (or 1 for an all-zero
    population).
    """

    y0: np.ndarray
    y1: np.ndarray
    bound: float | None = None

    def __post_init__(self):
        y0 = np.asarray(self.y0, dtype=np.float64).copy()
        y1 = np.asarray(self.y1, dtype=np.float64).copy()
        if y0.ndim != 1 or y1.ndim != 1:
            raise PopulationError("y0 and y1 must be one-dimensional")
        if y0.size == 0:
            raise PopulationError("population is empty")
        if y0.size != y1.size:
            raise PopulationError(f"length mismatch: y0 has {y0.size}, y1 has {y1.size}")
        if not (np.all(np.isfinite(y0)) and np.all(np.isfinite(y1))):
            raise PopulationError("potential outcomes must be finite")
        observed = float(max(np.max(np.abs(y0)), np.max(np.abs(y1))))
        bound = self.bound
        if bound is None:
            bound = observed if observed > 0 else 1.0
        if not bound > 0:
            raise PopulationError("bound M must be positive")
        if observed > bound:
            raise PopulationError(f"outcome {observed!r} exceeds declared bound {bound!r}")
        y0.setflags(write=False)
        y1.setflags(write=False)
        object.__setattr__(self, "y0", y0)
        object.__setattr__(self, "y1", y1)
        object.__setattr__(self, "bound", float(bound))

    def __len__(self):
        return self.y0.size

    @property
    def n(self) -> int:
        return self.y0.size

    def scaled(self, s: float) -> "PotentialOutcomes":
        return PotentialOutcomes(self.y0 * s, self.y1 * s)


@dataclass(frozen=True)
class PopulationMoments:
    m0_sq: float
    m1_sq: float
    m01: float
    ybar0: float
    ybar1: float
    sigma0_sq: float
    sigma1_sq: float
    gamma: float

    @property
    def m0(self) -> float:
        return math.sqrt(self.m0_sq)

    @property
    def m1(self) -> float:
        return math.sqrt(self.m1_sq)

    @property
    def sigma0(self) -> float:
        return math.sqrt(self.sigma0_sq)

    @property
    def sigma1(self) -> float:
        return math.sqrt(self.sigma1_sq)


@dataclass(frozen=True)
class HomogeneityClass:
    """Result of :func:`classify_homogeneity`.

    ``kind`` is one of ``"additive"``, ``"logadditive"``, ``"generalized"``,
    ``"none"`` or ``"indeterminate"``; ``value`` carries tau, c, or the
    proportionality slope respectively.
    """

    kind: str
    value: float | None
    tolerance: float

    @property
    def is_generalized(self) -> bool:
        return self.kind in ("additive", "logadditive", "generalized")


def true_ate(pop: PotentialOutcomes) -> float:
    return float(np.mean(pop.y1 - pop.y0))


def population_moments(pop: PotentialOutcomes) -> PopulationMoments:
    y0, y1 = pop.y0, pop.y1
    m0_sq = float(np.mean(y0 * y0))
    m1_sq = float(np.mean(y1 * y1))
    m01 = float(np.mean(y0 * y1))
    ybar0 = float(np.mean(y0))
    ybar1 = float(np.mean(y1))
    # centered sums are computed directly rather than as m - ybar^2, which
    # cancels catastrophically for the log-additive population
    c0 = y0 - ybar0
    c1 = y1 - ybar1
    return PopulationMoments(
        m0_sq=m0_sq,
        m1_sq=m1_sq,
        m01=m01,
        ybar0=ybar0,
        ybar1=ybar1,
        sigma0_sq=float(np.mean(c0 * c0)),
        sigma1_sq=float(np.mean(c1 * c1)),
        gamma=float(np.mean(c0 * c1)),
    )


def _check_n(n):
    if int(n) != n or n < 1:
        raise PopulationError(f"n must be a positive integer, got {n!r}")
    return int(n)


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def truncated_normal(rng: np.random.Generator, n: int, mean: float, sd: float,
                     lo: float, hi: float) -> np.ndarray:
    """Draw ``n`` values from N(mean, sd^2) restricted to ``[lo, hi]`` by rejection."""
    out = np.empty(n)
    filled = 0
    attempts = 0
    cap = MAX_ATTEMPTS_PER_DRAW * n
    while filled < n:
        batch = max(16, int((n - filled) * 1.05) + 8)
        z = mean + sd * rng.standard_normal(batch)
        attempts += batch
        z = z[(z >= lo) & (z <= hi)]
        take = min(z.size, n - filled)
        out[filled:filled + take] = z[:take]
        filled += take
        if filled < n and attempts >= cap:
            raise PopulationError("truncated-normal rejection sampler exceeded its draw cap")
    return out


def make_nonadditive_population(n: int, seed) -> PotentialOutcomes:
    """Bivariate normal outcomes, mean (0, 1), correlation 0.3, both coordinates in [-3, 3]."""
    n = _check_n(n)
    rng = _as_rng(seed)
    chol = np.linalg.cholesky(np.array(NONADDITIVE_COV))
    mean = np.array(NONADDITIVE_MEAN)
    lo, hi = NONADDITIVE_BOX
    out = np.empty((n, 2))
    filled = 0
    attempts = 0
    while filled < n:
        batch = max(16, int((n - filled) * 1.05) + 8)
        z = rng.standard_normal((batch, 2)) @ chol.T + mean
        attempts += batch
        z = z[np.all((z >= lo) & (z <= hi), axis=1)]
        take = min(z.shape[0], n - filled)
        out[filled:filled + take] = z[:take]
        filled += take
        if filled < n and attempts >= MAX_ATTEMPTS_PER_DRAW * n:
            raise PopulationError("bivariate rejection sampler exceeded its draw cap")
    return PotentialOutcomes(out[:, 0], out[:, 1], bound=3.0)


def make_additive_population(n: int, tau: float = 10.0, seed=None) -> PotentialOutcomes:
    n = _check_n(n)
    y0 = truncated_normal(_as_rng(seed), n, 0.0, 1.0, -3.0, 3.0)
    return PotentialOutcomes(y0, y0 + tau, bound=max(3.0, 3.0 + abs(tau)))


def make_logadditive_population(n: int, c: float = 2.0, seed=None) -> PotentialOutcomes:
    n = _check_n(n)
    y0 = truncated_normal(_as_rng(seed), n, 10.0, 1.0, 7.0, 13.0)
    return PotentialOutcomes(y0, c * y0, bound=13.0 * max(1.0, abs(c)))


def classify_homogeneity(pop: PotentialOutcomes, tol: float = 1e-9) -> HomogeneityClass:
    """Most specific treatment-effect homogeneity class satisfied within ``tol``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    y0, y1 = pop.y0, pop.y1
    tau_i = y1 - y0
    tau = float(np.mean(tau_i))
    if np.max(np.abs(tau_i - tau)) <= tol:
        return HomogeneityClass("additive", tau, tol)

    ss0 = float(np.dot(y0, y0))
    if ss0 > 0:
        c = float(np.dot(y0, y1)) / ss0
        if np.max(np.abs(y1 - c * y0)) <= tol:
            return HomogeneityClass("logadditive", c, tol)

    c0 = y0 - np.mean(y0)
    c1 = y1 - np.mean(y1)
    css0 = float(np.dot(c0, c0))
    if np.max(np.abs(c0)) <= tol:
        return HomogeneityClass("indeterminate", None, tol)
    slope = float(np.dot(c0, c1)) / css0
    if np.max(np.abs(c1 - slope * c0)) <= tol:
        return HomogeneityClass("generalized", slope, tol)
    return HomogeneityClass("none", None, tol)


def write_population(pop: PotentialOutcomes, path) -> None:
    """Write ``y0,y1`` rows with shortest round-trip float formatting."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["y0", "y1"])
        for a, b in zip(pop.y0.tolist(), pop.y1.tolist()):
            w.writerow([repr(a), repr(b)])


def read_population(path, bound: float | None = None) -> PotentialOutcomes:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["y0", "y1"]:
            raise PopulationError(f"{path}: expected header 'y0,y1', got {header!r}")
        y0, y1 = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 2:
                raise PopulationError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                y0.append(float(row[0]))
                y1.append(float(row[1]))
            except ValueError as exc:
                raise PopulationError(f"{path}:{lineno}: {exc}") from None
    return PotentialOutcomes(np.array(y0), np.array(y1), bound=bound)
