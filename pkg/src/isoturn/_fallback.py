"""Pure-Python (numpy) implementation of the p-value sweep.

Same contract as the compiled ``_kernels`` module.
"""
from __future__ import annotations

import math

import numpy as np

from .special import log_incomplete_beta, log_incomplete_beta_array

__all__ = ["log_incomplete_beta", "log_terms", "sweep"]


def log_terms(k, s, tau: float) -> np.ndarray:
    k = np.asarray(k, dtype=np.int64)
    s = np.asarray(s, dtype=np.int64)
    a = (k - s + 1).astype(float)
    b = (s + 1).astype(float)
    return s * math.log(tau) + a * math.log1p(-tau) - log_incomplete_beta_array(1.0 - tau, a, b)


def sweep(profiles, outcomes, centers, tau: float):
    profiles = np.asarray(profiles, dtype=np.uint32)
    outcomes = np.asarray(outcomes, dtype=np.int64)
    centers = np.asarray(centers, dtype=np.uint32)
    counts = np.zeros(len(centers), dtype=np.int64)
    best = np.zeros(len(centers), dtype=float)
    for c, centre in enumerate(centers):
        inside = (profiles & ~centre) == 0
        y = outcomes[inside]
        if y.size == 0:
            continue
        s = np.cumsum(y)
        k = np.arange(1, y.size + 1)
        counts[c] = y.size
        best[c] = log_terms(k, s, tau).min()
    return counts, best
