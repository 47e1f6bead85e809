"""IPW and finite-population AIPW point estimators.

The array-level helpers (``*_arrays``) reduce along the last axis, so they
accept a single trace or a ``(reps, N)`` batch; the public functions take an
:class:`~seqate.experiment.AssignmentTrace`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .experiment import AssignmentTrace


@dataclass(frozen=True)
class RunningMeans:
    """``yhat0[t]``, ``yhat1[t]`` are the weighted means used for unit ``t + 1``.

    The first two entries are zero by convention; from the third unit on they
    average the inverse-propensity-weighted observations of all earlier units.
    """

    yhat0: np.ndarray
    yhat1: np.ndarray


def _check_probs(p):
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise ValueError("inclusion probabilities must lie strictly inside (0, 1)")


def weighted_terms(p, k, y):
    k = np.asarray(k, dtype=np.float64)
    w1 = k * y / p
    w0 = (1.0 - k) * y / (1.0 - p)
    return w0, w1


def running_means_arrays(p, k, y):
    w0, w1 = weighted_terms(p, k, y)
    n = w0.shape[-1]
    yhat0 = np.zeros_like(w0)
    yhat1 = np.zeros_like(w1)
    if n > 2:
        denom = np.arange(2, n, dtype=np.float64)
        yhat0[..., 2:] = np.cumsum(w0, axis=-1)[..., 1:-1] / denom
        yhat1[..., 2:] = np.cumsum(w1, axis=-1)[..., 1:-1] / denom
    return yhat0, yhat1


def ipw_arrays(p, k, y):
    w0, w1 = weighted_terms(p, k, y)
    return np.mean(w1 - w0, axis=-1)


def aipw_arrays(p, k, y, means=None):
    k = np.asarray(k, dtype=np.float64)
    yhat0, yhat1 = running_means_arrays(p, k, y) if means is None else means
    treated = k * (y - yhat1) / p + yhat1
    control = (1.0 - k) * (y - yhat0) / (1.0 - p) + yhat0
    return np.mean(treated - control, axis=-1)


def running_means(trace: AssignmentTrace) -> RunningMeans:
    _check_probs(trace.p)
    yhat0, yhat1 = running_means_arrays(trace.p, trace.k, trace.y_obs)
    return RunningMeans(yhat0, yhat1)


def ipw_estimate(trace: AssignmentTrace) -> float:
    """Horvitz-Thompson estimate: mean of ``k y / p - (1 - k) y / (1 - p)``."""
    _check_probs(trace.p)
    return float(ipw_arrays(trace.p, trace.k, trace.y_obs))


def aipw_estimate(trace: AssignmentTrace) -> float:
    """IPW augmented with the running weighted means of earlier units."""
    _check_probs(trace.p)
    return float(aipw_arrays(trace.p, trace.k, trace.y_obs))
