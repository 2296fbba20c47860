"""Response models: covariate generation, GLM means, noisy draws, noise moments.

Five endpoint kinds are supported (continuous, incidence, proportion, count,
survival).  Each kind pairs a GLM mean model with a sampling law whose mean is
the model mean, so the noise Z = Y - mu has mean zero.  The module also
supplies exact central moments of the noise and aggregates them into the
moment profile consumed by the design criteria.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

CONTINUOUS = "continuous"
INCIDENCE = "incidence"
PROPORTION = "proportion"
COUNT = "count"
SURVIVAL = "survival"
KINDS = (CONTINUOUS, INCIDENCE, PROPORTION, COUNT, SURVIVAL)

UNIFORM = "uniform"
EXPONENTIAL = "exponential"

# Logistic-link means are kept strictly inside (0, 1) so Beta parameters and
# Bernoulli variances stay positive.
MEAN_EPS = 1e-9

_DEFAULT_BETA = (0.2, -0.2, 0.2, -0.2, 0.2)
_DEFAULT_DISPERSION = {CONTINUOUS: 1.0, PROPORTION: 2.0, SURVIVAL: 4.0}


class ResponseError(ValueError):
    """Invalid model, covariate spec, or mean value for a response kind."""


def _needs_dispersion(kind: str) -> bool:
    return kind in (CONTINUOUS, PROPORTION, SURVIVAL)


@dataclass(frozen=True)
class ResponseModel:
    """GLM coefficients plus the kind's dispersion parameter.

    dispersion is sigma for continuous, phi for proportion, the Weibull shape
    k for survival, and None for incidence and count.
    """

    kind: str
    beta0: float
    beta: np.ndarray
    beta_T: float
    dispersion: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ResponseError(f"unknown response kind {self.kind!r}")
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        if _needs_dispersion(self.kind):
            if self.dispersion is None or self.dispersion <= 0:
                raise ResponseError(f"{self.kind} needs a strictly positive dispersion")
        elif self.dispersion is not None:
            raise ResponseError(f"{self.kind} takes no dispersion parameter")

    @property
    def p(self) -> int:
        return self.beta.size


def default_model(kind: str, p: int) -> ResponseModel:
    """Simulation-grid coefficients: alternating +/-1/5 slopes, beta0=-1/5, beta_T=1."""
    if not (1 <= p <= len(_DEFAULT_BETA)):
        raise ResponseError(f"default coefficients cover 1 <= p <= {len(_DEFAULT_BETA)}")
    return ResponseModel(
        kind=kind,
        beta0=-0.2,
        beta=np.array(_DEFAULT_BETA[:p]),
        beta_T=1.0,
        dispersion=_DEFAULT_DISPERSION.get(kind),
    )


@dataclass(frozen=True)
class CovariateSpec:
    """IID covariate family: symmetric uniform or mean-centered exponential."""

    distribution: str
    param: float  # half-width a for uniform, rate for exponential
    p: int
    n: int

    def __post_init__(self):
        if self.distribution not in (UNIFORM, EXPONENTIAL):
            raise ResponseError(f"unknown covariate distribution {self.distribution!r}")
        if self.param <= 0:
            raise ResponseError("covariate parameter must be positive")
        if self.p < 1 or self.n < 1:
            raise ResponseError("need p >= 1 and n >= 1")


def default_covariates(kind: str, p: int, n: int, family: str = UNIFORM) -> CovariateSpec:
    """Per-kind covariate spec used by the simulation grids.

    Uniform: half-width 3 for incidence, 1 otherwise.  Exponential: rates are
    chosen so each kind keeps the variance of its uniform counterpart
    (incidence rate 1/sqrt(3) -> variance 3, others rate sqrt(3) -> 1/3).
    """
    if kind not in KINDS:
        raise ResponseError(f"unknown response kind {kind!r}")
    if family == UNIFORM:
        return CovariateSpec(UNIFORM, 3.0 if kind == INCIDENCE else 1.0, p, n)
    if family == EXPONENTIAL:
        rate = 1.0 / math.sqrt(3.0) if kind == INCIDENCE else math.sqrt(3.0)
        return CovariateSpec(EXPONENTIAL, rate, p, n)
    raise ResponseError(f"unknown covariate family {family!r}")


def draw_covariates(spec: CovariateSpec, rng: np.random.Generator) -> np.ndarray:
    """IID 2n x p covariate matrix for the requested family."""
    shape = (2 * spec.n, spec.p)
    if spec.distribution == UNIFORM:
        return rng.uniform(-spec.param, spec.param, size=shape)
    return rng.exponential(1.0 / spec.param, size=shape) - 1.0 / spec.param


def inverse_link(kind: str, eta):
    """Identity / logistic / exp inverse link, matching the kind's mean space."""
    eta = np.asarray(eta, dtype=float)
    if not np.all(np.isfinite(eta)):
        raise ResponseError("non-finite linear predictor")
    if kind == CONTINUOUS:
        return eta
    if kind in (INCIDENCE, PROPORTION):
        return np.clip(1.0 / (1.0 + np.exp(-eta)), MEAN_EPS, 1.0 - MEAN_EPS)
    return np.exp(eta)


def mean_pair(X, model: ResponseModel):
    """Per-subject treated and control means (mu_T, mu_C) under the model."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.p:
        raise ResponseError(f"covariates have shape {X.shape}, expected (2n, {model.p})")
    eta = model.beta0 + X @ model.beta
    return inverse_link(model.kind, eta + model.beta_T), inverse_link(model.kind, eta - model.beta_T)


def validate_means(kind: str, mu) -> None:
    """Raise (naming the first offending subject) if a mean leaves the kind's space."""
    mu = np.asarray(mu, dtype=float)
    if kind in (INCIDENCE, PROPORTION):
        bad = ~((mu > 0.0) & (mu < 1.0))
    elif kind in (COUNT, SURVIVAL):
        bad = ~(mu > 0.0)
    else:
        bad = ~np.isfinite(mu)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise ResponseError(f"mean {mu.flat[i]} invalid for kind {kind!r} at subject {i}")


def draw_response(kind: str, mu, dispersion, rng: np.random.Generator, size=None):
    """Draw responses with expectation mu from the kind's sampling law.

    ``mu`` broadcasts against ``size`` so one call can fill a draws x subjects
    matrix.
    """
    mu = np.asarray(mu, dtype=float)
    validate_means(kind, mu)
    if kind == CONTINUOUS:
        return rng.normal(mu, dispersion, size=size)
    if kind == INCIDENCE:
        shape = size if size is not None else mu.shape
        return (rng.random(size=shape) < mu).astype(float)
    if kind == PROPORTION:
        phi = dispersion
        return rng.beta(phi * mu, phi * (1.0 - mu), size=size)
    if kind == COUNT:
        return rng.poisson(mu, size=size).astype(float)
    if kind == SURVIVAL:
        k = dispersion
        scale = mu / math.gamma(1.0 + 1.0 / k)
        shape = size if size is not None else mu.shape
        return rng.weibull(k, size=shape) * scale
    raise ResponseError(f"unknown response kind {kind!r}")


def _beta_central(mu, phi):
    # Raw moments r_j = prod_{i<j} (a+i)/(a+b+i) with a = phi mu, b = phi(1-mu).
    a = phi * mu
    s = phi
    r1 = a / s
    r2 = r1 * (a + 1) / (s + 1)
    r3 = r2 * (a + 2) / (s + 2)
    r4 = r3 * (a + 3) / (s + 3)
    m2 = r2 - r1 ** 2
    m3 = r3 - 3 * r1 * r2 + 2 * r1 ** 3
    m4 = r4 - 4 * r1 * r3 + 6 * r1 ** 2 * r2 - 3 * r1 ** 4
    return m2, m3, m4


def _weibull_central(mu, k):
    scale = mu / math.gamma(1.0 + 1.0 / k)
    g = [math.gamma(1.0 + j / k) for j in range(1, 5)]
    r1 = scale * g[0]
    r2 = scale ** 2 * g[1]
    r3 = scale ** 3 * g[2]
    r4 = scale ** 4 * g[3]
    m2 = r2 - r1 ** 2
    m3 = r3 - 3 * r1 * r2 + 2 * r1 ** 3
    m4 = r4 - 4 * r1 * r3 + 6 * r1 ** 2 * r2 - 3 * r1 ** 4
    return m2, m3, m4


def central_moments(kind: str, mu, dispersion=None):
    """Exact (variance, third, fourth) central moments of the sampling law at mean mu."""
    mu = np.asarray(mu, dtype=float)
    validate_means(kind, mu)
    one = np.ones_like(mu)
    if kind == CONTINUOUS:
        s2 = dispersion ** 2
        return s2 * one, 0.0 * one, 3.0 * s2 ** 2 * one
    if kind == INCIDENCE:
        q = 1.0 - mu
        v = mu * q
        return v, v * (1.0 - 2.0 * mu), v * (1.0 - 3.0 * v)
    if kind == PROPORTION:
        return _beta_central(mu, dispersion)
    if kind == COUNT:
        return mu.copy(), mu.copy(), mu + 3.0 * mu ** 2
    if kind == SURVIVAL:
        return _weibull_central(mu, dispersion)
    raise ResponseError(f"unknown response kind {kind!r}")


COMBINED = "combined"    # moments of z_T/r + z_C/r~ (weights 1/r^2, 1/r^3, ...)
PER_ARM = "per_arm"      # arm moments weighted 1/r, 1/r~ directly


@dataclass(frozen=True)
class MomentProfile:
    """Noise-moment aggregates for a fixed covariate matrix and model.

    mu is the combined mean vector mu_T/r + mu_C/r~; rho and gamma are the
    per-subject variance and third central moment of the combined noise;
    kappa_z sums the excess-kurtosis-like terms E[Z^4] - 3 rho^2; c_z is the
    design-independent constant r r~ tr(Sigma_Z).
    """

    mu: np.ndarray
    rho: np.ndarray
    gamma: np.ndarray
    kappa_z: float
    c_z: float
    n: int
    n_T: int

    def __post_init__(self):
        for name in ("mu", "rho", "gamma"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.rho <= 0):
            raise ResponseError("noise variances must be strictly positive")
        if not np.isfinite(self.kappa_z) or self.c_z <= 0:
            raise ResponseError("kappa_z must be finite and c_z positive")

    @property
    def n_units(self) -> int:
        return 2 * self.n

    @property
    def r(self) -> float:
        return self.n_T / self.n

    @property
    def r_tilde(self) -> float:
        return 2.0 - self.n_T / self.n


def moment_profile(X, model: ResponseModel, n_T: int, weighting: str = COMBINED) -> MomentProfile:
    """Assemble the moment profile of the combined noise for a fixed design ratio.

    The default weighting uses exact moments of z_T/r + z_C/r~ (so variances
    scale with 1/r^2, third moments with 1/r^3); ``per_arm`` divides the arm
    moments by 1/r, 1/r~ instead, for comparison.  Both coincide under equal
    allocation.
    """
    X = np.asarray(X, dtype=float)
    m = X.shape[0]
    if m % 2 != 0:
        raise ResponseError("need an even number of subjects")
    n = m // 2
    r = n_T / n
    rt = 2.0 - r
    mu_T, mu_C = mean_pair(X, model)
    m2t, m3t, m4t = central_moments(model.kind, mu_T, model.dispersion)
    m2c, m3c, m4c = central_moments(model.kind, mu_C, model.dispersion)
    mu = mu_T / r + mu_C / rt
    # Fourth moment of the combined noise, by independence of the two arms.
    ez4 = m4t / r ** 4 + 6.0 * m2t * m2c / (r ** 2 * rt ** 2) + m4c / rt ** 4
    if weighting == COMBINED:
        rho = m2t / r ** 2 + m2c / rt ** 2
        gamma = m3t / r ** 3 + m3c / rt ** 3
    elif weighting == PER_ARM:
        rho = m2t / r + m2c / rt
        gamma = m3t / r + m3c / rt
    else:
        raise ResponseError(f"unknown moment weighting {weighting!r}")
    kappa_z = float(np.sum(ez4 - 3.0 * rho ** 2))
    c_z = float(r * rt * rho.sum())
    return MomentProfile(mu=mu, rho=rho, gamma=gamma, kappa_z=kappa_z, c_z=c_z, n=n, n_T=n_T)
