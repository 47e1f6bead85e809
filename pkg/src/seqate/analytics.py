"""Closed-form design analytics for Wei's and Efron's designs.

Efron's imbalance chain ``D_k`` is a birth-death chain on the integers whose
stationary law has an atom ``(2 eta - 1) / (2 eta)`` at zero and geometric
tails with ratio ``(1 - eta) / eta``.  Averaging ``1/p`` and ``1/(1 - p)``
against it gives the weak-stability limits ``p1star`` and ``p2star``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .population import PopulationMoments


def _check_eta(eta):
    if not 0.5 < eta < 1.0:
        raise ValueError(f"eta must lie in (1/2, 1), got {eta!r}")


def _limit_denominator(eta):
    return 1.0 - 4.0 * eta + 12.0 * eta ** 2 - 8.0 * eta ** 3


@dataclass(frozen=True)
class EfronLimits:
    eta: float
    p1star: float
    p2star: float
    ptilde: float = 0.5


@dataclass(frozen=True)
class StationaryPmf:
    """Symmetric pmf of the imbalance chain, truncated at ``|d| <= n_max``.

    ``pi[n]`` is the mass at ``d = n`` (equivalently ``d = -n``) for
    ``n = 0..n_max``; ``tail_mass`` is the mass beyond ``n_max`` on both sides.
    """

    eta: float
    n_max: int
    pi: np.ndarray
    tail_mass: float

    @property
    def pi0(self) -> float:
        return float(self.pi[0])

    def prob(self, d: int) -> float:
        d = abs(int(d))
        return float(self.pi[d]) if d <= self.n_max else 0.0

    def total_mass(self) -> float:
        return float(self.pi[0] + 2.0 * self.pi[1:].sum())

    def support(self) -> np.ndarray:
        return np.arange(-self.n_max, self.n_max + 1)

    def as_full(self) -> np.ndarray:
        """Masses for ``d = -n_max..n_max``."""
        return np.concatenate([self.pi[:0:-1], self.pi])


def efron_limits(eta: float) -> EfronLimits:
    _check_eta(eta)
    den = _limit_denominator(eta)
    p1 = 4.0 * eta ** 2 * (1.0 - eta) / den
    p2 = (1.0 - 4.0 * eta + 8.0 * eta ** 2 - 4.0 * eta ** 3) / den
    return EfronLimits(eta, p1, p2, 0.5)


def efron_variance_factor(eta: float) -> float:
    """``p2star / (1 - p2star)``, which equals ``(1 - p1star) / p1star``.

    At ``eta = 1/2`` the closed form reduces to 1, the fair-coin value.
    """
    if not 0.5 <= eta < 1.0:
        raise ValueError(f"eta must lie in [1/2, 1), got {eta!r}")
    return (1.0 - 4.0 * eta + 8.0 * eta ** 2 - 4.0 * eta ** 3) / (4.0 * eta ** 2 * (1.0 - eta))


def stationary_pmf(eta: float, tail_tol: float = 1e-12) -> StationaryPmf:
    _check_eta(eta)
    if not tail_tol > 0:
        raise ValueError("tail_tol must be positive")
    ratio = (1.0 - eta) / eta
    pi0 = (2.0 * eta - 1.0) / (2.0 * eta)
    c = (2.0 * eta - 1.0) / (4.0 * eta * (1.0 - eta))
    # mass strictly beyond |d| = n on both sides: 2 c r^(n+1) / (1 - r)
    n = 0
    tail = 2.0 * c * ratio / (1.0 - ratio)
    while tail >= tail_tol:
        n += 1
        tail *= ratio
    pi = np.empty(n + 1)
    pi[0] = pi0
    pi[1:] = c * ratio ** np.arange(1, n + 1)
    return StationaryPmf(eta, n, pi, tail)


def expected_inverse_probs(pmf: StationaryPmf) -> tuple[float, float, float]:
    """Stationary means of ``1/p``, ``1/(1 - p)`` and ``p`` under Efron's coin."""
    eta = pmf.eta
    side = pmf.pi[1:].sum()
    e_inv_p = pmf.pi[0] * 2.0 + side * (1.0 / (1.0 - eta) + 1.0 / eta)
    e_inv_1mp = pmf.pi[0] * 2.0 + side * (1.0 / eta + 1.0 / (1.0 - eta))
    e_p = pmf.pi[0] * 0.5 + side * ((1.0 - eta) + eta)
    # the truncated tail carries mass off both sides symmetrically
    e_inv_p += pmf.tail_mass / 2.0 * (1.0 / (1.0 - eta) + 1.0 / eta)
    e_inv_1mp += pmf.tail_mass / 2.0 * (1.0 / eta + 1.0 / (1.0 - eta))
    e_p += pmf.tail_mass / 2.0
    return float(e_inv_p), float(e_inv_1mp), float(e_p)


def _cross_terms(moments: PopulationMoments, cross: str):
    if cross == "oracle":
        return moments.m01, moments.gamma
    if cross == "cauchy-schwarz":
        return moments.m0 * moments.m1, moments.sigma0 * moments.sigma1
    raise ValueError(f"cross must be 'oracle' or 'cauchy-schwarz', got {cross!r}")


def wei_variances(moments: PopulationMoments, cross: str = "oracle") -> tuple[float, float]:
    m01, gamma = _cross_terms(moments, cross)
    v_ipw = moments.m0_sq + moments.m1_sq + 2.0 * m01
    v_aipw = moments.sigma0_sq + moments.sigma1_sq + 2.0 * gamma
    return v_ipw, v_aipw


def efron_variances(moments: PopulationMoments, eta: float,
                    cross: str = "oracle") -> tuple[float, float]:
    _check_eta(eta)
    factor = efron_variance_factor(eta)
    m01, gamma = _cross_terms(moments, cross)
    v_ipw = (moments.m0_sq + moments.m1_sq) * factor + 2.0 * m01
    v_aipw = (moments.sigma0_sq + moments.sigma1_sq) * factor + 2.0 * gamma
    return v_ipw, v_aipw


def efron_trace_probs(eta: float, n: int, seed) -> np.ndarray:
    """Inclusion probabilities of an ``n``-unit Efron experiment (outcome free)."""
    u = np.random.Generator(np.random.PCG64(seed)).random(n)
    d = _kernels.efron_chain(eta, u)
    prev = np.concatenate([[0], d[:-1]])
    return np.where(prev < 0, eta, np.where(prev > 0, 1.0 - eta, 0.5))


def empirical_chain_distribution(eta: float, steps: int, seed) -> StationaryPmf:
    """Visit frequencies of ``|D_k|`` after a burn-in of ``min(10**4, steps // 10)``.

    The result is symmetrised into the same shape as :func:`stationary_pmf`;
    use :func:`empirical_chain_counts` for the signed table.
    """
    values, counts = empirical_chain_counts(eta, steps, seed)
    total = counts.sum()
    n_max = int(np.max(np.abs(values)))
    pi = np.zeros(n_max + 1)
    for v, c in zip(values.tolist(), counts.tolist()):
        if v == 0:
            pi[0] += c / total
        else:
            pi[abs(v)] += c / (2.0 * total)
    return StationaryPmf(eta, n_max, pi, 0.0)


def empirical_chain_counts(eta: float, steps: int, seed):
    if steps < 1:
        raise ValueError("steps must be at least 1")
    if not 0.5 <= eta < 1.0:
        raise ValueError(f"eta must lie in [1/2, 1), got {eta!r}")
    u = np.random.Generator(np.random.PCG64(seed)).random(steps)
    d = _kernels.efron_chain(eta, u)
    burn = min(10_000, steps // 10)
    return np.unique(d[burn:], return_counts=True)


def total_variation(pmf: StationaryPmf, values, counts) -> float:
    """TV distance between signed visit counts and the (truncated) closed form."""
    counts = np.asarray(counts, dtype=np.float64)
    freq = dict(zip(np.asarray(values).tolist(), (counts / counts.sum()).tolist()))
    support = set(freq) | set(pmf.support().tolist())
    diff = sum(abs(freq.get(d, 0.0) - pmf.prob(d)) for d in support)
    return 0.5 * (diff + pmf.tail_mass)


def write_pmf(pmf: StationaryPmf, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["d", "probability"])
        for d, prob in zip(pmf.support().tolist(), pmf.as_full().tolist()):
            w.writerow([d, repr(prob)])
