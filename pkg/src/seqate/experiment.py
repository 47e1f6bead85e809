"""Run one sequential experiment and record its trace."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .designs import DesignState, next_probability
from .population import PotentialOutcomes


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class AssignmentTrace:
    """Inclusion probabilities, assignments, and observed outcomes, in unit order."""

    p: np.ndarray
    k: np.ndarray
    y_obs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=np.float64)
        k = np.asarray(self.k)
        y = np.asarray(self.y_obs, dtype=np.float64)
        if not (p.ndim == k.ndim == y.ndim == 1):
            raise TraceError("trace arrays must be one-dimensional")
        if not (p.size == k.size == y.size):
            raise TraceError(f"trace length mismatch: p={p.size}, k={k.size}, y_obs={y.size}")
        if p.size == 0:
            raise TraceError("empty trace")
        if not np.all((k == 0) | (k == 1)):
            raise TraceError("assignments must be 0 or 1")
        if not np.all((p > 0.0) & (p < 1.0)):
            raise TraceError("inclusion probabilities must lie strictly inside (0, 1)")
        if not np.all(np.isfinite(y)):
            raise TraceError("observed outcomes must be finite")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "k", k.astype(np.int8))
        object.__setattr__(self, "y_obs", y)

    def __len__(self):
        return self.p.size

    @property
    def n(self) -> int:
        return self.p.size

    @property
    def n1(self) -> int:
        return int(self.k.sum())

    @property
    def n0(self) -> int:
        return self.n - self.n1

    def check_against(self, pop: PotentialOutcomes) -> None:
        """Raise unless the observed outcomes are the realised potential outcomes."""
        if pop.n != self.n:
            raise TraceError(f"trace has {self.n} units but population has {pop.n}")
        expected = np.where(self.k == 1, pop.y1, pop.y0)
        if not np.array_equal(expected, self.y_obs):
            bad = int(np.argmax(expected != self.y_obs))
            raise TraceError(f"unit {bad + 1}: observed outcome does not match population")


def assignment_uniforms(seed, n: int) -> np.ndarray:
    """The uniform stream driving assignment draws for ``seed``."""
    return np.random.Generator(np.random.PCG64(seed)).random(n)


def run_experiment(pop: PotentialOutcomes, design, seed=None, *, uniforms=None,
                   backend=None) -> AssignmentTrace:
    """Assign units 1..N in order; unit i is treated iff ``u_i < p_i``."""
    n = pop.n
    if uniforms is None:
        u = assignment_uniforms(seed, n)
    else:
        u = np.asarray(uniforms, dtype=np.float64)
        if u.shape != (n,):
            raise TraceError(f"need {n} uniforms, got shape {u.shape}")

    spec = getattr(design, "kernel_spec", lambda: None)()
    if spec is not None:
        kind, param, delta = spec
        p, k = _kernels.assign_batch(kind, param, delta, u[None, :], backend=backend)
        p, k = p[0], k[0]
        y = np.where(k == 1, pop.y1, pop.y0)
        return AssignmentTrace(p, k, y)

    p = np.empty(n)
    k = np.empty(n, dtype=np.int8)
    y = np.empty(n)
    state = DesignState()
    y0, y1 = pop.y0, pop.y1
    for i in range(n):
        pi = next_probability(design, state)
        ki = 1 if u[i] < pi else 0
        yi = y1[i] if ki else y0[i]
        p[i], k[i], y[i] = pi, ki, yi
        state = state.update(ki, yi)
    return AssignmentTrace(p, k, y)


def write_trace(trace: AssignmentTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "p", "k", "y_obs"])
        for i, (p, k, y) in enumerate(zip(trace.p.tolist(), trace.k.tolist(),
                                          trace.y_obs.tolist()), start=1):
            w.writerow([i, repr(p), k, repr(y)])


def read_trace(path) -> AssignmentTrace:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["i", "p", "k", "y_obs"]:
            raise TraceError(f"{path}: expected header 'i,p,k,y_obs', got {header!r}")
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    try:
        idx = [int(r[0]) for r in rows]
        p = [float(r[1]) for r in rows]
        k = [int(r[2]) for r in rows]
        y = [float(r[3]) for r in rows]
    except (ValueError, IndexError) as exc:
        raise TraceError(f"{path}: malformed row ({exc})") from None
    if idx != list(range(1, len(rows) + 1)):
        raise TraceError(f"{path}: unit indices must run 1..N in order")
    return AssignmentTrace(np.array(p), np.array(k), np.array(y))
