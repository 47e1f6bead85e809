"""Independent oracles for the test suite.

* exact expectations by enumerating all 2**N assignment paths;
* the proxy AIPW estimator built from the true running means (it needs both
  potential outcomes, so it is only usable in simulation);
* asymptotic variances evaluated with the full-population moments.
"""
from __future__ import annotations

import numpy as np

from . import analytics
from .designs import BernoulliDesign, DesignState, EfronDesign, WeiDesign, next_probability
from .estimators import aipw_arrays, ipw_arrays
from .experiment import AssignmentTrace
from .population import PotentialOutcomes, population_moments

MAX_ENUMERATION_UNITS = 20


def enumerate_paths(pop: PotentialOutcomes, design):
    """Yield ``(probability, p, k, y_obs)`` for every assignment path.

    Depth-first over an explicit stack; each frame carries the design state
    so path-dependent probabilities are exact.
    """
    n = pop.n
    if n > MAX_ENUMERATION_UNITS:
        raise ValueError(f"enumeration is capped at N = {MAX_ENUMERATION_UNITS}, got {n}")
    y0 = pop.y0.tolist()
    y1 = pop.y1.tolist()
    stack = [(DesignState(), 1.0, (), ())]
    while stack:
        state, prob, ps, ks = stack.pop()
        i = state.step
        if i == n:
            k = np.array(ks, dtype=np.int8)
            yield prob, np.array(ps), k, np.where(k == 1, pop.y1, pop.y0)
            continue
        pi = next_probability(design, state)
        # control branch pushed first so treatment paths are visited first
        stack.append((state.update(0, y0[i]), prob * (1.0 - pi), ps + (pi,), ks + (0,)))
        stack.append((state.update(1, y1[i]), prob * pi, ps + (pi,), ks + (1,)))


def enumerate_expectation(pop: PotentialOutcomes, design, statistic="ipw") -> float:
    """Exact design expectation of ``statistic`` ('ipw', 'aipw' or a callable on traces)."""
    if statistic == "ipw":
        stat = lambda p, k, y: float(ipw_arrays(p, k, y))  # noqa: E731
    elif statistic == "aipw":
        stat = lambda p, k, y: float(aipw_arrays(p, k, y))  # noqa: E731
    elif callable(statistic):
        stat = lambda p, k, y: float(statistic(AssignmentTrace(p, k, y)))  # noqa: E731
    else:
        raise ValueError(f"unknown statistic {statistic!r}")
    total = 0.0
    for prob, p, k, y in enumerate_paths(pop, design):
        total += prob * stat(p, k, y)
    return total


def proxy_running_means(pop: PotentialOutcomes):
    """True means of the first ``i - 1`` units, zero for the first unit."""
    n = pop.n
    out = []
    for y in (pop.y0, pop.y1):
        bar = np.zeros(n)
        if n > 1:
            bar[1:] = np.cumsum(y)[:-1] / np.arange(1, n)
        out.append(bar)
    return out[0], out[1]


def aipw_proxy_estimate(pop: PotentialOutcomes, trace: AssignmentTrace) -> float:
    trace.check_against(pop)
    bar0, bar1 = proxy_running_means(pop)
    k = trace.k.astype(np.float64)
    p = trace.p
    treated = k * (pop.y1 - bar1) / p + bar1
    control = (1.0 - k) * (pop.y0 - bar0) / (1.0 - p) + bar0
    return float(np.mean(treated - control))


def asymptotic_variance(moments, estimator: str, p1star: float, p2star: float) -> float:
    """Weak-form limit variance; the strong form is ``p1star = p2star = pstar``."""
    if estimator == "ipw":
        a0, a1, cross = moments.m0_sq, moments.m1_sq, moments.m01
    elif estimator == "aipw":
        a0, a1, cross = moments.sigma0_sq, moments.sigma1_sq, moments.gamma
    else:
        raise ValueError(f"unknown estimator {estimator!r}")
    return a0 * p2star / (1.0 - p2star) + a1 * (1.0 - p1star) / p1star + 2.0 * cross


def design_limits(design) -> tuple[float, float]:
    """Limiting ``(p1star, p2star)`` of a built-in design."""
    if isinstance(design, WeiDesign):
        return 0.5, 0.5
    if isinstance(design, EfronDesign):
        if design.eta == 0.5:
            return 0.5, 0.5
        lim = analytics.efron_limits(design.eta)
        return lim.p1star, lim.p2star
    if isinstance(design, BernoulliDesign):
        return design.p, design.p
    raise TypeError(f"no closed-form limits for {design!r}")


def oracle_variance(pop: PotentialOutcomes, design, estimator: str) -> float:
    p1, p2 = design_limits(design)
    return asymptotic_variance(population_moments(pop), estimator, p1, p2)
