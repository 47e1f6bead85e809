"""Sequential Bernoulli assignment designs.

A design maps the assignment history to the probability that the next unit
is treated.  ``DesignState`` carries the imbalance ``D`` (treated minus
control), the step count, and the full ``(k, y)`` history for designs that
need it.  Wei's adaptive coin and Efron's biased coin only look at ``D``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Protocol

from . import _kernels


class DesignError(ValueError):
    pass


@dataclass(frozen=True)
class DesignState:
    """Assignment state before unit ``step + 1`` is assigned.

    The history is stored as nested ``(previous, k, y)`` cells so updates are
    O(1) and states stay immutable; :meth:`history` unrolls it.
    """

    step: int = 0
    imbalance: int = 0
    _cells: tuple | None = None

    @classmethod
    def from_history(cls, ks, ys=None) -> "DesignState":
        state = cls()
        ys = [0.0] * len(ks) if ys is None else ys
        for k, y in zip(ks, ys):
            state = state.update(k, y)
        return state

    def update(self, k: int, y: float = 0.0) -> "DesignState":
        if k not in (0, 1):
            raise DesignError(f"assignment must be 0 or 1, got {k!r}")
        return DesignState(self.step + 1, self.imbalance + (2 * k - 1), (self._cells, k, y))

    def history(self) -> list[tuple[int, float]]:
        out = []
        cell = self._cells
        while cell is not None:
            cell, k, y = cell
            out.append((k, y))
        out.reverse()
        return out

    @property
    def normalized_imbalance(self) -> float:
        """R = D / step, with R = 0 before the first assignment."""
        return 0.0 if self.step == 0 else self.imbalance / self.step

    def validate(self) -> None:
        if self.step < 0:
            raise DesignError("negative step")
        if abs(self.imbalance) > self.step or (self.imbalance - self.step) % 2:
            raise DesignError(
                f"inconsistent state: imbalance {self.imbalance} after {self.step} steps")


def update_state(state: DesignState, k: int, y: float = 0.0) -> DesignState:
    return state.update(k, y)


class Design(Protocol):
    def next_probability(self, state: DesignState) -> float: ...


def _linear_wei_rule(r: float) -> float:
    return (1.0 - r) / 2.0


@dataclass(frozen=True)
class WeiDesign:
    """Wei's adaptive coin: ``p = clip(f(R), delta, 1 - delta)``.

    ``f`` must be non-increasing on [-1, 1] with ``f(0) = 1/2``; the default
    is ``f(R) = (1 - R) / 2``.  Monotonicity is checked on a grid at
    construction.
    """

    delta: float = 0.01
    f: Callable[[float], float] | None = None

    def __post_init__(self):
        if not 0.0 < self.delta <= 0.5:
            raise DesignError(f"delta must lie in (0, 1/2], got {self.delta!r}")
        f = self.rule
        if abs(f(0.0) - 0.5) > 1e-12:
            raise DesignError(f"f(0) must equal 1/2, got {f(0.0)!r}")
        grid = [-1.0 + j / 100.0 for j in range(201)]
        vals = [f(r) for r in grid]
        if any(b > a + 1e-12 for a, b in zip(vals, vals[1:])):
            raise DesignError("f must be non-increasing on [-1, 1]")

    @property
    def rule(self) -> Callable[[float], float]:
        return _linear_wei_rule if self.f is None else self.f

    @property
    def lower_bound(self) -> float:
        return self.delta

    def next_probability(self, state: DesignState) -> float:
        state.validate()
        p = self.rule(state.normalized_imbalance)
        return min(max(p, self.delta), 1.0 - self.delta)

    def kernel_spec(self):
        if self.f is None:
            return _kernels.WEI_LINEAR, 0.0, self.delta
        return None

    def describe(self) -> dict:
        return {"design": "wei", "delta": self.delta,
                "f": "linear" if self.f is None else getattr(self.f, "__name__", "custom")}


@dataclass(frozen=True)
class EfronDesign:
    """Efron's biased coin: eta below balance, 1/2 at balance, 1 - eta above."""

    eta: float = 0.7

    def __post_init__(self):
        if not 0.5 <= self.eta < 1.0:
            raise DesignError(f"eta must lie in [1/2, 1), got {self.eta!r}")

    @property
    def lower_bound(self) -> float:
        return 1.0 - self.eta

    def next_probability(self, state: DesignState) -> float:
        state.validate()
        if state.imbalance < 0:
            return self.eta
        if state.imbalance > 0:
            return 1.0 - self.eta
        return 0.5

    def kernel_spec(self):
        return _kernels.EFRON, self.eta, 0.0

    def describe(self) -> dict:
        return {"design": "efron", "eta": self.eta}


@dataclass(frozen=True)
class BernoulliDesign:
    """Constant inclusion probability; the non-adaptive baseline."""

    p: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise DesignError(f"p must lie in (0, 1), got {self.p!r}")

    @property
    def lower_bound(self) -> float:
        return min(self.p, 1.0 - self.p)

    def next_probability(self, state: DesignState) -> float:
        state.validate()
        return self.p

    def kernel_spec(self):
        return _kernels.CONSTANT, self.p, 0.0

    def describe(self) -> dict:
        return {"design": "bernoulli", "p": self.p}


def next_probability(design, state: DesignState) -> float:
    p = design.next_probability(state)
    if not (0.0 < p < 1.0) or math.isnan(p):
        raise DesignError(f"design emitted probability {p!r} outside (0, 1)")
    return p


def make_design(name: str, *, eta: float | None = None, delta: float | None = None,
                p: float | None = None):
    """Build one of the built-in designs from its CLI/config name."""
    if name == "wei":
        return WeiDesign(delta=0.01 if delta is None else delta)
    if name == "efron":
        eta = 0.7 if eta is None else eta
        if eta == 0.5:
            return BernoulliDesign(0.5)
        return EfronDesign(eta)
    if name == "bernoulli":
        return BernoulliDesign(0.5 if p is None else p)
    raise DesignError(f"unknown design {name!r}")
