"""Design performance criteria: worst-case, mean, and tail MSE.

The worst-case criterion maximizes the MSE quadratic form over a bounded
noise space; the mean criterion averages it over the noise law; the tail
criterion adds a fixed multiple of the MSE's standard deviation over the
noise.  All three reduce to closed forms in the design covariance and the
noise moment profile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .designs import CovMatrix, DesignError, apply_cov, quadratic_form
from .responses import MomentProfile

DENSE_CORNER_LIMIT = 20  # dense corner search enumerates 2^(2n) sign patterns


class CriteriaError(ValueError):
    """Inconsistent inputs to a criterion computation."""


@dataclass(frozen=True)
class TailTerms:
    """The four design-dependent terms of the tail criterion.

    b1: observed-imbalance quadratic form mu' S_W mu.
    b2: variance-weighted imbalance mu' S_W S_Z S_W mu.
    s:  skewness-weighted imbalance r r~ mu' S_W gamma (signed).
    r:  randomness term tr((S_W S_Z)^2).
    """

    b1: float
    b2: float
    s: float
    r: float

    def __post_init__(self):
        for name in ("b1", "b2", "r"):
            value = getattr(self, name)
            if value < -1e-9:
                raise CriteriaError(f"term {name} must be nonnegative, got {value}")
            object.__setattr__(self, name, max(value, 0.0))


def _check_profile(profile: MomentProfile, cov: CovMatrix):
    if profile.n_units != cov.n_units or profile.n_T != cov.n_T:
        raise DesignError("moment profile and covariance describe different experiments")


def worst_case_continuous(cov: CovMatrix) -> float:
    """Largest eigenvalue of Sigma_W (continuous response, unit-ball noise)."""
    return float(np.linalg.eigvalsh(cov.dense)[-1])


def worst_case_block_closed(n: int, n_T: int, B: int, M: float) -> float:
    """Closed-form worst case r r~ M^2 n^2 / (2n - B) for block designs.

    Strictly increasing in B at fixed n, so B = 1 (complete randomization)
    minimizes it.  Exact for even block sizes, where the maximizing corner
    fills half of each block with M.
    """
    if M < 0:
        raise CriteriaError("bound M must be nonnegative")
    if not (1 <= B < 2 * n) or (2 * n) % B != 0:
        raise DesignError(f"B={B} does not split 2n={2*n} into equal blocks")
    r = n_T / n
    return r * (2.0 - r) * M * M * n * n / (2.0 * n - B)


def _corner_brute_dense(dense: np.ndarray, M: float):
    m = dense.shape[0]
    best_val = -np.inf
    best_corner = None
    chunk = 1 << 16
    total = 1 << m
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.uint64)
        bits = ((codes[:, None] >> np.arange(m, dtype=np.uint64)) & 1).astype(float)
        V = bits * M
        vals = np.einsum("ij,jk,ik->i", V, dense, V)
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val = float(vals[k])
            best_corner = V[k].copy()
    return best_val, best_corner


def worst_case_corner_brute(cov: CovMatrix, M: float):
    """Exact max of v' Sigma_W v over the box corners v in {0, M}^(2n).

    Convexity of the quadratic form puts the maximizer at a corner, so the
    search is exhaustive over corners: per block for block-tagged matrices
    (any size), else over all 2^(2n) patterns (2n <= 20).
    Returns (max value, an argmax vector).
    """
    if M < 0:
        raise CriteriaError("bound M must be nonnegative")
    if cov.structure is not None:
        n_B = cov.structure.block_size
        ks = np.arange(n_B + 1)
        vals = cov.scale * M * M * (n_B * ks - ks ** 2) / (n_B - 1)
        k_best = int(np.argmax(vals))
        corner = np.zeros(cov.n_units)
        for block in cov.structure.blocks:
            corner[list(block[:k_best])] = M
        return float(cov.structure.n_blocks * vals[k_best]), corner
    if cov.n_units > DENSE_CORNER_LIMIT:
        raise DesignError(
            f"dense corner search is capped at 2n <= {DENSE_CORNER_LIMIT}, got {cov.n_units}"
        )
    return _corner_brute_dense(cov.dense, M)


def mean_mse(profile: MomentProfile, cov: CovMatrix) -> float:
    """Noise-averaged MSE (1/4n^2)(mu' Sigma_W mu + c_z)."""
    _check_profile(profile, cov)
    b1 = quadratic_form(profile.mu, cov)
    return (b1 + profile.c_z) / (4.0 * cov.n ** 2)


def _randomness_term(profile: MomentProfile, cov: CovMatrix) -> float:
    rho = profile.rho
    if cov.structure is not None:
        # tr((S_W S_Z)^2) for block designs collapses to norms of rho.
        m = cov.n_units
        B = cov.structure.n_blocks
        rr = cov.scale
        rho_quad = quadratic_form(rho, cov)
        return (rr * rr * m * float(rho @ rho) - rr * B * rho_quad) / (m - B)
    # tr((S_W diag(rho))^2) = rho' (S_W o S_W) rho, o = entrywise product.
    return float(rho @ (cov.dense * cov.dense) @ rho)


def tail_terms(profile: MomentProfile, cov: CovMatrix) -> TailTerms:
    """Compute (B1, B2, S, R); O(2n) per term for block-tagged covariances."""
    _check_profile(profile, cov)
    sig_mu = apply_cov(cov, profile.mu)
    b1 = float(profile.mu @ sig_mu)
    b2 = float(np.sum(profile.rho * sig_mu ** 2))
    rr = cov.scale
    s = rr * float(sig_mu @ profile.gamma)
    r_term = _randomness_term(profile, cov)
    return TailTerms(b1=b1, b2=b2, s=s, r=r_term)


def _radicand(terms: TailTerms, kappa_z: float, r: float, r_tilde: float) -> float:
    value = r * r * r_tilde * r_tilde * kappa_z + 4.0 * (terms.b2 + terms.s) + 2.0 * terms.r
    scale = abs(r * r * r_tilde * r_tilde * kappa_z) + 4.0 * (terms.b2 + abs(terms.s)) + 2.0 * terms.r
    if value < -1e-9 * max(scale, 1.0):
        raise CriteriaError(
            "negative variance radicand from inconsistent moment inputs: "
            f"terms={terms}, kappa_z={kappa_z}, r={r}, r_tilde={r_tilde}"
        )
    return max(value, 0.0)


def q_tilde(terms: TailTerms, kappa_z: float, r: float, r_tilde: float, c_q: float) -> float:
    """Shifted, 4n^2-scaled tail criterion B1 + c_q sqrt(r^2 r~^2 kappa + 4(B2+S) + 2R)."""
    return terms.b1 + c_q * math.sqrt(_radicand(terms, kappa_z, r, r_tilde))


def q_q(terms: TailTerms, kappa_z: float, c_z: float, r: float, r_tilde: float,
        c_q: float, n: int) -> float:
    """Approximate tail criterion: mean MSE plus c_q standard deviations."""
    return (c_z + q_tilde(terms, kappa_z, r, r_tilde, c_q)) / (4.0 * n ** 2)


def var_mse_analytic(profile: MomentProfile, cov: CovMatrix) -> float:
    """Variance of the MSE over the noise law.

    (1/16n^4)(4(B2 + S) + r^2 r~^2 kappa_z + 2R), nonnegative by construction.
    """
    _check_profile(profile, cov)
    terms = tail_terms(profile, cov)
    return _radicand(terms, profile.kappa_z, profile.r, profile.r_tilde) / (16.0 * cov.n ** 4)


def lower_bound_rate(profile: MomentProfile, c_q: float) -> float:
    """Finite-n plug-in of the asymptotic tail-criterion floor, in Q-tilde units.

    sqrt(n) c_q r r~ sqrt(2 (kappa_z/2n + 2 ||rho||^2 / 2n)); an asymptotic
    diagnostic, not a finite-sample guarantee.
    """
    m = profile.n_units
    inner = 2.0 * (profile.kappa_z / m + 2.0 * float(profile.rho @ profile.rho) / m)
    inner = max(inner, 0.0)
    return math.sqrt(profile.n) * c_q * profile.r * profile.r_tilde * math.sqrt(inner)


def criteria_row(profile: MomentProfile, cov: CovMatrix, c_q: float) -> dict:
    """One table row of all criteria for a single design."""
    terms = tail_terms(profile, cov)
    return {
        "B1": terms.b1,
        "B2": terms.b2,
        "S": terms.s,
        "R": terms.r,
        "mean_mse": mean_mse(profile, cov),
        "var_mse": var_mse_analytic(profile, cov),
        "Q_q": q_q(terms, profile.kappa_z, profile.c_z, profile.r, profile.r_tilde, c_q, cov.n),
        "worst_case": worst_case_continuous(cov),
    }
