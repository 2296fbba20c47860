"""Self-contained oracle suites for the verify CLI subcommand.

Each suite checks one family of closed forms against an independent brute
path: enumeration against the covariance closed forms, the estimator's
unbiasedness and exhaustive MSE identity, sampling-law moments against Monte
Carlo, and the corner brute force against the block worst-case law.  A suite
reports its first counterexample on failure.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import criteria, designs, estimator, responses


@dataclass
class SuiteResult:
    name: str
    passed: bool
    checks: int
    detail: str = ""

    def line(self) -> str:
        status = "ok" if self.passed else "FAIL"
        msg = f" -- {self.detail}" if self.detail and not self.passed else ""
        return f"[{status}] {self.name}: {self.checks} checks{msg}"


def _admissible_blocks(m: int, n_T: int):
    out = []
    for B in range(1, m):
        if m % B:
            continue
        n_B = m // B
        if n_B >= 2 and (n_B * n_T) % m == 0 and (n_B * (m - n_T)) % m == 0:
            out.append(B)
    return out


def suite_closed_forms() -> SuiteResult:
    """Enumeration vs closed-form covariance and design mean, 2n <= 8."""
    checks = 0
    for n in (1, 2, 3, 4):
        m = 2 * n
        for n_T in range(1, m):
            specs = [(designs.DesignSpec.crd(n, n_T), designs.cov_crd_closed(n, n_T))]
            for B in _admissible_blocks(m, n_T):
                structure = designs.contiguous_blocks(m, B)
                specs.append((designs.DesignSpec.block(structure, n_T),
                              designs.cov_block_closed(structure, n_T)))
            for spec, closed in specs:
                emp = designs.cov_empirical(spec)
                checks += 1
                if np.max(np.abs(emp.dense - closed.dense)) > 1e-12:
                    return SuiteResult("closed_forms", False, checks,
                                       f"covariance mismatch at n={n}, n_T={n_T}, {spec.family}")
                mean = designs.design_mean(designs.enumerate_design(spec))
                ideal = (spec.r - spec.r_tilde) / 2.0
                if np.max(np.abs(mean - ideal)) > 1e-12:
                    return SuiteResult("closed_forms", False, checks,
                                       f"design mean mismatch at n={n}, n_T={n_T}, {spec.family}")
    return SuiteResult("closed_forms", True, checks)


def suite_unbiasedness() -> SuiteResult:
    """Sum_k p_k tau_hat = tau and exhaustive MSE = quadratic form, 2n <= 8."""
    rng = np.random.default_rng(20240311)
    checks = 0
    for n in (1, 2, 3, 4):
        m = 2 * n
        for n_T in range(1, m):
            specs = [designs.DesignSpec.crd(n, n_T)]
            for B in _admissible_blocks(m, n_T):
                specs.append(designs.DesignSpec.block(designs.contiguous_blocks(m, B), n_T))
            for spec in specs:
                explicit = designs.enumerate_design(spec)
                cov = designs.cov_empirical(explicit)
                for _ in range(20):
                    y_T = rng.normal(size=m)
                    y_C = rng.normal(size=m)
                    tau = estimator.estimand_tau(y_T, y_C)
                    tau_hats = np.array([
                        estimator.tau_hat(y_T, y_C, w, n_T) for w in explicit.support
                    ])
                    checks += 1
                    if abs(float(explicit.probs @ tau_hats) - tau) > 1e-12:
                        return SuiteResult("unbiasedness", False, checks,
                                           f"biased at n={n}, n_T={n_T}, {spec.family}")
                    exhaustive = float(explicit.probs @ (tau_hats - tau) ** 2)
                    quad = estimator.mse_over_design(y_T, y_C, cov)
                    if abs(exhaustive - quad) > 1e-12:
                        return SuiteResult("unbiasedness", False, checks,
                                           f"MSE identity fails at n={n}, n_T={n_T}, {spec.family}")
    return SuiteResult("unbiasedness", True, checks)


def suite_moments(n_draws: int = 10**6) -> SuiteResult:
    """Sampling-law means and raw moments vs Monte Carlo, 4 SE gates."""
    rng = np.random.default_rng(20240312)
    cases = {
        "continuous": ([-0.5, 0.8], 1.0),
        "incidence": ([0.2, 0.6], None),
        "proportion": ([0.25, 0.7], 2.0),
        "count": ([0.4, 2.0], None),
        "survival": ([0.5, 2.0], 4.0),
    }
    checks = 0
    for kind, (mus, dispersion) in cases.items():
        for mu in mus:
            draws = responses.draw_response(kind, mu, dispersion, rng, size=n_draws)
            m2, m3, m4 = (float(x) for x in responses.central_moments(kind, mu, dispersion))
            se_mean = math.sqrt(m2 / n_draws)
            checks += 1
            if abs(draws.mean() - mu) > 4 * se_mean:
                return SuiteResult("moments", False, checks, f"{kind} mu={mu}: mean off")
            # raw moments have clean SEs (sample means of powers)
            raw_analytic = {
                2: m2 + mu ** 2,
                3: m3 + 3 * mu * m2 + mu ** 3,
                4: m4 + 4 * mu * m3 + 6 * mu ** 2 * m2 + mu ** 4,
            }
            for j, target in raw_analytic.items():
                powers = draws ** j
                se = powers.std() / math.sqrt(n_draws)
                checks += 1
                if abs(powers.mean() - target) > 4 * se:
                    return SuiteResult("moments", False, checks,
                                       f"{kind} mu={mu}: raw moment {j} off "
                                       f"({powers.mean():.6g} vs {target:.6g}, se={se:.2g})")
    return SuiteResult("moments", True, checks)


def suite_corner() -> SuiteResult:
    """Corner brute force equals the block worst-case law (even block sizes)."""
    checks = 0
    M = 1.5
    for n in (2, 3, 4, 5, 6):
        m = 2 * n
        for n_T in range(1, m):
            for B in _admissible_blocks(m, n_T):
                n_B = m // B
                if n_B % 2:
                    continue
                cov = designs.cov_block_closed(designs.contiguous_blocks(m, B), n_T)
                brute, corner = criteria.worst_case_corner_brute(cov, M)
                closed = criteria.worst_case_block_closed(n, n_T, B, M)
                checks += 1
                if abs(brute - closed) > 1e-9 * max(closed, 1.0):
                    return SuiteResult("corner", False, checks,
                                       f"corner vs closed mismatch at n={n}, n_T={n_T}, B={B}")
                if m <= 12:
                    dense = designs.CovMatrix(cov.dense, n, n_T)
                    dense_val, _ = criteria.worst_case_corner_brute(dense, M)
                    checks += 1
                    if abs(dense_val - brute) > 1e-9 * max(brute, 1.0):
                        return SuiteResult("corner", False, checks,
                                           f"dense corner disagrees at n={n}, n_T={n_T}, B={B}")
    return SuiteResult("corner", True, checks)


SUITES = {
    "closed_forms": suite_closed_forms,
    "unbiasedness": suite_unbiasedness,
    "moments": suite_moments,
    "corner": suite_corner,
}


def run_suites(names=None) -> list:
    names = list(names) if names else list(SUITES)
    unknown = [name for name in names if name not in SUITES]
    if unknown:
        raise KeyError(f"unknown verify suites {unknown}; available: {sorted(SUITES)}")
    results = []
    for name in names:
        start = time.perf_counter()
        result = SUITES[name]()
        elapsed = time.perf_counter() - start
        result.detail = result.detail or ""
        print(f"{result.line()} ({elapsed:.1f}s)")
        results.append(result)
    return results
