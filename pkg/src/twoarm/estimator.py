"""Potential outcomes, the mean-difference estimand, and its estimator.

The estimand is the sample average treatment effect; the estimator is the
difference in observed group means, which has an equivalent linear form in the
allocation vector.  Averaged over a design, the estimator's MSE is an explicit
quadratic form in the design covariance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .designs import Allocation, CovMatrix, DesignError, quadratic_form


def _entries(w) -> np.ndarray:
    return np.asarray(getattr(w, "entries", w), dtype=float)


def _check_lengths(y_T, y_C, m=None):
    y_T = np.asarray(y_T, dtype=float)
    y_C = np.asarray(y_C, dtype=float)
    if y_T.shape != y_C.shape or y_T.ndim != 1:
        raise DesignError(f"response vectors must share one length, got {y_T.shape}, {y_C.shape}")
    if m is not None and y_T.size != m:
        raise DesignError(f"response vectors have length {y_T.size}, expected {m}")
    if y_T.size % 2 != 0:
        raise DesignError("need an even number of subjects")
    return y_T, y_C


@dataclass(frozen=True)
class PotentialOutcomes:
    """Paired treated/control response vectors under a fixed allocation ratio."""

    y_T: np.ndarray
    y_C: np.ndarray
    n_T: int

    def __post_init__(self):
        y_T, y_C = _check_lengths(self.y_T, self.y_C)
        y_T.setflags(write=False)
        y_C.setflags(write=False)
        object.__setattr__(self, "y_T", y_T)
        object.__setattr__(self, "y_C", y_C)

    @property
    def n(self) -> int:
        return self.y_T.size // 2

    @property
    def v(self) -> np.ndarray:
        """Combined vector y_T/r + y_C/r~, recomputed on access."""
        r = self.n_T / self.n
        return self.y_T / r + self.y_C / (2.0 - r)


def observed_responses(y_T, y_C, w) -> np.ndarray:
    """Observed vector: entry i is y_T[i] when w_i = +1, else y_C[i]."""
    y_T, y_C = _check_lengths(y_T, y_C)
    wv = _entries(w)
    if wv.shape != y_T.shape:
        raise DesignError(f"allocation has shape {wv.shape}, expected {y_T.shape}")
    return 0.5 * (y_T + y_C + wv * (y_T - y_C))


def estimand_tau(y_T, y_C) -> float:
    """Sample average treatment effect (1/2n) 1'(y_T - y_C)."""
    y_T, y_C = _check_lengths(y_T, y_C)
    return float(np.mean(y_T - y_C))


def tau_hat(y_T, y_C, w, n_T: int) -> float:
    """Difference-in-means estimate in its linear closed form.

    Equals the naive group-mean difference (tau_hat_group_means) for every
    valid allocation.
    """
    y_T, y_C = _check_lengths(y_T, y_C)
    m = y_T.size
    n = m // 2
    wv = _entries(w)
    if wv.shape != y_T.shape:
        raise DesignError(f"allocation has shape {wv.shape}, expected {y_T.shape}")
    if int(wv.sum()) != 2 * n_T - m:
        raise DesignError(f"allocation does not have n_T={n_T} treated subjects")
    r = n_T / n
    rt = 2.0 - r
    return float((np.sum(y_T / r - y_C / rt) + wv @ (y_T / r + y_C / rt)) / m)


def tau_hat_group_means(y_T, y_C, w) -> float:
    """Naive path: mean of observed treated responses minus mean of controls."""
    y = observed_responses(y_T, y_C, w)
    wv = _entries(w)
    return float(y[wv > 0].mean() - y[wv < 0].mean())


def mse_over_design(y_T, y_C, cov: CovMatrix) -> float:
    """Design MSE (1/4n^2) v' Sigma_W v with v = y_T/r + y_C/r~."""
    y_T, y_C = _check_lengths(y_T, y_C, cov.n_units)
    v = y_T / cov.r + y_C / cov.r_tilde
    value = quadratic_form(v, cov) / (4.0 * cov.n ** 2)
    return max(value, 0.0)
