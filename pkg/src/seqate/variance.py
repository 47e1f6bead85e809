"""Conservative variance estimators and confidence intervals.

Every estimator targets the asymptotic variance ``V`` of
``sqrt(N) * (estimate - ate)``.  The unidentifiable cross-moment is replaced
by its Cauchy-Schwarz bound, so each ``vhat`` is conservative, and exact when
the potential outcomes are homogeneous in the appropriate sense (log-additive
for IPW, generalized homogeneity for AIPW).

Regimes select which limiting inclusion probabilities enter the formula:

* ``StrongKnown(pstar)`` / ``StrongEstimated()`` for strongly stable designs;
* ``WeakKnown(p1star, p2star, ptilde)`` / ``WeakEstimated()`` for weakly
  stable ones.

Array helpers reduce along the last axis and are shared with the Monte Carlo
engine.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .estimators import aipw_arrays, ipw_arrays, running_means_arrays
from .experiment import AssignmentTrace


@dataclass(frozen=True)
class StrongKnown:
    pstar: float

    def __post_init__(self):
        _check_prob("pstar", self.pstar)


@dataclass(frozen=True)
class StrongEstimated:
    pass


@dataclass(frozen=True)
class WeakKnown:
    p1star: float
    p2star: float
    ptilde: float

    def __post_init__(self):
        for name in ("p1star", "p2star", "ptilde"):
            _check_prob(name, getattr(self, name))


@dataclass(frozen=True)
class WeakEstimated:
    pass


def _check_prob(name, value):
    if not 0.0 < value < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {value!r}")


def is_strong(regime) -> bool:
    return isinstance(regime, (StrongKnown, StrongEstimated))


def regime_label(regime) -> str:
    return {
        StrongKnown: "strong-known",
        StrongEstimated: "strong-estimated",
        WeakKnown: "weak-known",
        WeakEstimated: "weak-estimated",
    }[type(regime)]


def _sqrt0(x):
    return np.sqrt(np.maximum(x, 0.0))


def _require_open_unit(p):
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise ValueError("inclusion probabilities must lie strictly inside (0, 1)")


# -- second-moment ingredients ----------------------------------------------

def _group_means(k, sq):
    """Per-arm averages of ``sq`` with the max{N_l, 1} guard."""
    k = np.asarray(k, dtype=np.float64)
    n1 = k.sum(axis=-1)
    n0 = k.shape[-1] - n1
    a1 = (k * sq).sum(axis=-1) / np.maximum(n1, 1.0)
    a0 = ((1.0 - k) * sq).sum(axis=-1) / np.maximum(n0, 1.0)
    return a0, a1


def _weak_means(p, k, sq, ptilde):
    """Per-arm sums of ``sq`` scaled by the expected arm sizes."""
    k = np.asarray(k, dtype=np.float64)
    n = k.shape[-1]
    if ptilde is None:
        d1 = p.sum(axis=-1)
        d0 = (1.0 - p).sum(axis=-1)
    else:
        d1 = n * ptilde
        d0 = n * (1.0 - ptilde)
    if np.any(np.asarray(d1) <= 0) or np.any(np.asarray(d0) <= 0):
        raise ValueError("zero denominator in weak-stability moment estimator")
    return ((1.0 - k) * sq).sum(axis=-1) / d0, (k * sq).sum(axis=-1) / d1


def _aipw_residual_sq(p, k, y, means=None):
    yhat0, yhat1 = running_means_arrays(p, k, y) if means is None else means
    k = np.asarray(k, dtype=np.float64)
    # one array holds both arms' residuals; the arm masks in the reductions pick
    # the right one
    return np.where(k == 1.0, (y - yhat1) ** 2, (y - yhat0) ** 2)


def _strong_combine(a0_sq, a1_sq, p):
    return (_sqrt0(a0_sq) * np.sqrt(p / (1.0 - p)) + _sqrt0(a1_sq) * np.sqrt((1.0 - p) / p)) ** 2


def _weak_known_combine(a0_sq, a1_sq, p1star, p2star):
    return (a0_sq * (p2star / (1.0 - p2star)) + a1_sq * ((1.0 - p1star) / p1star)
            + 2.0 * _sqrt0(a0_sq) * _sqrt0(a1_sq))


def _weak_estimated_combine(a0_sq, a1_sq, p):
    inv1mp = np.mean(1.0 / (1.0 - p), axis=-1) - 1.0
    invp = np.mean(1.0 / p, axis=-1) - 1.0
    return a0_sq * inv1mp + a1_sq * invp + 2.0 * _sqrt0(a0_sq) * _sqrt0(a1_sq)


def variance_arrays(p, k, y, estimator: str, regime, means=None):
    """``vhat`` for one trace or a batch, dispatching on estimator and regime."""
    if estimator == "ipw":
        sq = y * y
    elif estimator == "aipw":
        sq = _aipw_residual_sq(p, k, y, means)
    else:
        raise ValueError(f"unknown estimator {estimator!r}")

    if isinstance(regime, StrongKnown):
        a0, a1 = _group_means(k, sq)
        return _strong_combine(a0, a1, regime.pstar)
    if isinstance(regime, StrongEstimated):
        a0, a1 = _group_means(k, sq)
        return _strong_combine(a0, a1, np.mean(p, axis=-1))
    if isinstance(regime, WeakKnown):
        a0, a1 = _weak_means(p, k, sq, regime.ptilde)
        return _weak_known_combine(a0, a1, regime.p1star, regime.p2star)
    if isinstance(regime, WeakEstimated):
        a0, a1 = _weak_means(p, k, sq, None)
        return _weak_estimated_combine(a0, a1, p)
    raise TypeError(f"unknown stability regime {regime!r}")


# -- public trace-level API -------------------------------------------------

def mhat_strong(trace: AssignmentTrace) -> tuple[float, float]:
    a0, a1 = _group_means(trace.k, trace.y_obs ** 2)
    return float(a0), float(a1)


def pstar_hat(trace: AssignmentTrace) -> float:
    return float(np.mean(trace.p))


def var_ipw_strong(trace: AssignmentTrace, regime=StrongEstimated()) -> float:
    if not is_strong(regime):
        raise TypeError("var_ipw_strong needs a strong-stability regime")
    return float(variance_arrays(trace.p, trace.k, trace.y_obs, "ipw", regime))


def weak_limits_hat(trace: AssignmentTrace) -> tuple[float, float, float]:
    """Harmonic-mean estimates of p1*, p2* and the arithmetic mean of p."""
    p = trace.p
    _require_open_unit(p)
    p1hat = 1.0 / np.mean(1.0 / p)
    p2hat = 1.0 - 1.0 / np.mean(1.0 / (1.0 - p))
    return float(p1hat), float(p2hat), float(np.mean(p))


def mtilde_weak(trace: AssignmentTrace, ptilde: float | None = None) -> tuple[float, float]:
    """Weak-stability second moments; ``ptilde=None`` uses the sum(p) denominators."""
    if ptilde is not None:
        _check_prob("ptilde", ptilde)
    a0, a1 = _weak_means(trace.p, trace.k, trace.y_obs ** 2, ptilde)
    return float(a0), float(a1)


def var_ipw_weak(trace: AssignmentTrace, regime=WeakEstimated()) -> float:
    if is_strong(regime):
        raise TypeError("var_ipw_weak needs a weak-stability regime")
    _require_open_unit(trace.p)
    return float(variance_arrays(trace.p, trace.k, trace.y_obs, "ipw", regime))


def sigmahat_strong(trace: AssignmentTrace) -> tuple[float, float]:
    _require_open_unit(trace.p)
    sq = _aipw_residual_sq(trace.p, trace.k, trace.y_obs)
    a0, a1 = _group_means(trace.k, sq)
    return float(a0), float(a1)


def var_aipw_strong(trace: AssignmentTrace, regime=StrongEstimated()) -> float:
    if not is_strong(regime):
        raise TypeError("var_aipw_strong needs a strong-stability regime")
    _require_open_unit(trace.p)
    return float(variance_arrays(trace.p, trace.k, trace.y_obs, "aipw", regime))


def sigmatilde_weak(trace: AssignmentTrace, ptilde: float | None = None) -> tuple[float, float]:
    _require_open_unit(trace.p)
    if ptilde is not None:
        _check_prob("ptilde", ptilde)
    sq = _aipw_residual_sq(trace.p, trace.k, trace.y_obs)
    a0, a1 = _weak_means(trace.p, trace.k, sq, ptilde)
    return float(a0), float(a1)


def var_aipw_weak(trace: AssignmentTrace, regime=WeakEstimated()) -> float:
    if is_strong(regime):
        raise TypeError("var_aipw_weak needs a weak-stability regime")
    _require_open_unit(trace.p)
    return float(variance_arrays(trace.p, trace.k, trace.y_obs, "aipw", regime))


# -- normal quantile and intervals --------------------------------------------

# Acklam's rational approximation to the inverse normal CDF
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def _acklam(q):
    if q < _P_LOW:
        t = math.sqrt(-2.0 * math.log(q))
        return ((((((_C[0] * t + _C[1]) * t + _C[2]) * t + _C[3]) * t + _C[4]) * t + _C[5])
                / ((((_D[0] * t + _D[1]) * t + _D[2]) * t + _D[3]) * t + 1.0))
    if q > 1.0 - _P_LOW:
        return -_acklam(1.0 - q)
    s = q - 0.5
    r = s * s
    return ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * s
            / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0))


def normal_quantile(q: float) -> float:
    """Standard normal quantile: rational approximation plus one Newton step."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {q!r}")
    if q > 0.5:
        return -normal_quantile(1.0 - q)
    if q == 0.5:
        return 0.0
    z = _acklam(q)
    dens = math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    return z - (normal_cdf(z) - q) / dens


def z_for_level(level: float) -> float:
    if not 0.0 < level < 1.0:
        raise ValueError(f"confidence level must lie in (0, 1), got {level!r}")
    return normal_quantile(1.0 - (1.0 - level) / 2.0)


def confidence_interval(point: float, vhat: float, n: int, level: float) -> tuple[float, float]:
    if not vhat >= 0.0:
        raise ValueError(f"vhat must be nonnegative, got {vhat!r}")
    if n < 1:
        raise ValueError("n must be at least 1")
    half = z_for_level(level) * math.sqrt(vhat / n)
    return point - half, point + half


# -- reports --------------------------------------------------------------------

@dataclass(frozen=True)
class InferenceReport:
    estimator: str
    point: float
    vhat: float
    n: int
    intervals: dict = field(default_factory=dict)

    def record(self) -> dict:
        row = {"estimator": self.estimator, "point": self.point, "vhat": self.vhat}
        for level, (lo, hi) in self.intervals.items():
            row[f"lo_{level!r}"] = lo
            row[f"hi_{level!r}"] = hi
        return row

    def to_json(self) -> str:
        doc = {
            "estimator": self.estimator,
            "n": self.n,
            "point": self.point,
            "vhat": self.vhat,
            "intervals": [{"level": lv, "lo": lo, "hi": hi}
                          for lv, (lo, hi) in self.intervals.items()],
        }
        return json.dumps(doc, indent=2)

    def to_csv(self) -> str:
        row = self.record()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(row))
        w.writerow([v if isinstance(v, str) else repr(float(v)) for v in row.values()])
        return buf.getvalue()


def infer(trace: AssignmentTrace, estimator: str, regime, levels=(0.95,)) -> InferenceReport:
    """Point estimate, conservative variance, and intervals at each level."""
    _require_open_unit(trace.p)
    p, k, y = trace.p, trace.k, trace.y_obs
    if estimator == "ipw":
        point = float(ipw_arrays(p, k, y))
        means = None
    elif estimator == "aipw":
        means = running_means_arrays(p, k, y)
        point = float(aipw_arrays(p, k, y, means))
    else:
        raise ValueError(f"unknown estimator {estimator!r}")
    vhat = float(variance_arrays(p, k, y, estimator, regime, means))
    intervals = {float(lv): confidence_interval(point, vhat, trace.n, lv) for lv in levels}
    return InferenceReport(estimator, point, vhat, trace.n, intervals)
