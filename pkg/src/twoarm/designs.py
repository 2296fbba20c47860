"""Two-arm designs: allocations, design families, and their covariance matrices.

An allocation assigns each of the 2n subjects to treatment (+1) or control
(-1) with a fixed number n_T of treated subjects.  A design is a probability
distribution over such allocations.  This module builds the supported design
families (complete randomization, block designs, the deterministic
perfect-balance pair, and explicit finite-support designs), computes their
mean vector and variance-covariance matrix both by enumeration and in closed
form, and constructs block structures from covariates.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

ENUMERATION_CAP = 10**6
# Largest 2n for which the exact balance search enumerates all vectors.
EXHAUSTIVE_BALANCE_LIMIT = 22

CRD = "crd"
BLOCK = "block"
PB_PAIR = "pb_pair"
EXPLICIT = "explicit"
FAMILIES = (CRD, BLOCK, PB_PAIR, EXPLICIT)


class DesignError(ValueError):
    """Structurally invalid allocation, block structure, or design spec."""


class EnumerationTooLarge(DesignError):
    """Design support exceeds the enumeration cap."""


class AssumptionViolation(DesignError):
    """Design violates the equal-assignment-probability requirement."""


class UnsupportedConfiguration(DesignError):
    """Requested configuration has no implemented construction."""


def _as_sign_vector(w) -> np.ndarray:
    entries = np.asarray(getattr(w, "entries", w))
    if entries.ndim != 1:
        raise DesignError(f"allocation must be a vector, got shape {entries.shape}")
    return entries


@dataclass(frozen=True)
class Allocation:
    """A +/-1 assignment vector over 2n subjects."""

    entries: np.ndarray
    n_treated: int = field(init=False)

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=np.int64)
        if entries.ndim != 1 or entries.size == 0 or entries.size % 2 != 0:
            raise DesignError(f"allocation length must be a positive even number, got {entries.shape}")
        if not np.all(np.abs(entries) == 1):
            raise DesignError("allocation entries must be +1 or -1")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "n_treated", int(np.sum(entries == 1)))

    def __len__(self):
        return self.entries.size

    def mirror(self) -> "Allocation":
        return Allocation(-self.entries)


def validate_allocation(w, n: int, n_T: int) -> bool:
    """Check that ``w`` is a +/-1 vector of length 2n summing to n_T - n_C.

    Raises DesignError on a length mismatch; sign or count violations just
    return False.
    """
    entries = _as_sign_vector(w)
    if entries.size != 2 * n:
        raise DesignError(f"allocation has length {entries.size}, expected {2 * n}")
    if not np.all(np.abs(entries) == 1):
        return False
    n_C = 2 * n - n_T
    return int(entries.sum()) == n_T - n_C


@dataclass(frozen=True)
class BlockStructure:
    """An ordered partition of subjects 0..2n-1 into equally sized blocks."""

    blocks: tuple

    def __post_init__(self):
        blocks = tuple(tuple(int(i) for i in b) for b in self.blocks)
        if not blocks:
            raise DesignError("block structure needs at least one block")
        sizes = {len(b) for b in blocks}
        if len(sizes) != 1:
            raise DesignError(f"blocks must share one size, got sizes {sorted(sizes)}")
        flat = [i for b in blocks for i in b]
        if sorted(flat) != list(range(len(flat))):
            raise DesignError("blocks must partition the subject indices 0..2n-1")
        object.__setattr__(self, "blocks", blocks)

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def block_size(self) -> int:
        return len(self.blocks[0])

    @property
    def n_units(self) -> int:
        return self.n_blocks * self.block_size

    def per_block_treated(self, n_T: int) -> int:
        """Treated count per block; raises if the allocation does not divide."""
        n_units = self.n_units
        t = self.block_size * n_T
        c = self.block_size * (n_units - n_T)
        if t % n_units != 0 or c % n_units != 0:
            raise DesignError(
                f"allocation n_T={n_T} does not split evenly over blocks of size {self.block_size}"
            )
        return t // n_units

    def order(self) -> np.ndarray:
        """Subject indices concatenated block by block."""
        return np.fromiter((i for b in self.blocks for i in b), dtype=np.int64, count=self.n_units)


def contiguous_blocks(n_units: int, n_blocks: int) -> BlockStructure:
    """Blocks of consecutive indices: {0..n_B-1}, {n_B..2n_B-1}, ..."""
    if n_units % n_blocks != 0:
        raise DesignError(f"{n_units} subjects do not split into {n_blocks} equal blocks")
    size = n_units // n_blocks
    return BlockStructure(tuple(tuple(range(b * size, (b + 1) * size)) for b in range(n_blocks)))


@dataclass(frozen=True)
class DesignSpec:
    """A design family plus allocation counts; induces a distribution over allocations."""

    family: str
    n: int
    n_T: int
    structure: Optional[BlockStructure] = None
    support: Optional[tuple] = None
    probs: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DesignError(f"unknown design family {self.family!r}")
        if not (1 <= self.n_T <= 2 * self.n - 1):
            raise DesignError(f"need 1 <= n_T <= 2n-1, got n_T={self.n_T}, n={self.n}")
        if self.family == BLOCK:
            if self.structure is None:
                raise DesignError("block design needs a block structure")
            if self.structure.n_units != 2 * self.n:
                raise DesignError("block structure size does not match 2n")
            self.structure.per_block_treated(self.n_T)
        if self.family == PB_PAIR:
            if self.n_T != self.n:
                raise UnsupportedConfiguration(
                    "perfect-balance pair designs exist only under equal allocation"
                )
            if self.support is None or len(self.support) != 2:
                raise DesignError("perfect-balance pair needs support {w*, -w*}")
            w, wm = self.support
            if not np.array_equal(wm.entries, -w.entries):
                raise DesignError("perfect-balance support must be a mirrored pair")
        if self.family == EXPLICIT:
            if self.support is None or self.probs is None:
                raise DesignError("explicit design needs support and probabilities")
            probs = np.asarray(self.probs, dtype=float)
            if probs.shape != (len(self.support),):
                raise DesignError("one probability per support allocation required")
            if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
                raise DesignError("probabilities must be nonnegative and sum to 1 within 1e-12")
            for w in self.support:
                if not validate_allocation(w, self.n, self.n_T):
                    raise DesignError("support allocation violates the allocation constraint")
            probs.setflags(write=False)
            object.__setattr__(self, "probs", probs)

    @property
    def n_units(self) -> int:
        return 2 * self.n

    @property
    def n_C(self) -> int:
        return 2 * self.n - self.n_T

    @property
    def r(self) -> float:
        return self.n_T / self.n

    @property
    def r_tilde(self) -> float:
        return self.n_C / self.n

    @classmethod
    def crd(cls, n: int, n_T: int) -> "DesignSpec":
        """Complete randomization: uniform over all vectors with n_T treated."""
        return cls(CRD, n, n_T)

    @classmethod
    def block(cls, structure: BlockStructure, n_T: int) -> "DesignSpec":
        if structure.n_units % 2 != 0:
            raise DesignError("block structure must cover an even number of subjects")
        return cls(BLOCK, structure.n_units // 2, n_T, structure=structure)

    @classmethod
    def pb_pair(cls, w_star: Allocation) -> "DesignSpec":
        n = len(w_star) // 2
        if w_star.n_treated != n:
            raise UnsupportedConfiguration(
                "perfect-balance pair designs exist only under equal allocation"
            )
        return cls(PB_PAIR, n, n, support=(w_star, w_star.mirror()))

    @classmethod
    def explicit(cls, allocations: Sequence[Allocation], probs, n: int, n_T: int) -> "DesignSpec":
        return cls(EXPLICIT, n, n_T, support=tuple(allocations), probs=np.asarray(probs, float))


def _support_matrix(spec: DesignSpec) -> np.ndarray:
    return np.stack([w.entries for w in spec.support]).astype(float)


def _treated_sets_to_allocations(index_sets: Iterable, n_units: int):
    out = []
    for idx in index_sets:
        w = -np.ones(n_units, dtype=np.int64)
        w[list(idx)] = 1
        out.append(Allocation(w))
    return out


def enumerate_design(spec: DesignSpec) -> DesignSpec:
    """List the full support with probabilities as an explicit design.

    Raises EnumerationTooLarge when the support would exceed ENUMERATION_CAP.
    """
    n_units = spec.n_units
    if spec.family == EXPLICIT:
        return spec
    if spec.family == PB_PAIR:
        return DesignSpec.explicit(spec.support, [0.5, 0.5], spec.n, spec.n_T)
    if spec.family == CRD:
        count = math.comb(n_units, spec.n_T)
        if count > ENUMERATION_CAP:
            raise EnumerationTooLarge(
                f"complete randomization support has {count} allocations (cap {ENUMERATION_CAP})"
            )
        allocations = _treated_sets_to_allocations(
            itertools.combinations(range(n_units), spec.n_T), n_units
        )
        return DesignSpec.explicit(allocations, np.full(count, 1.0 / count), spec.n, spec.n_T)
    # Block: product of independent per-block enumerations, uniform probability.
    structure = spec.structure
    t_b = structure.per_block_treated(spec.n_T)
    per_block = math.comb(structure.block_size, t_b)
    count = per_block ** structure.n_blocks
    if count > ENUMERATION_CAP:
        raise EnumerationTooLarge(
            f"block design support has {count} allocations (cap {ENUMERATION_CAP})"
        )
    block_choices = [
        [tuple(block[i] for i in comb) for comb in itertools.combinations(range(structure.block_size), t_b)]
        for block in structure.blocks
    ]
    treated_sets = (
        tuple(itertools.chain.from_iterable(pick)) for pick in itertools.product(*block_choices)
    )
    allocations = _treated_sets_to_allocations(treated_sets, n_units)
    return DesignSpec.explicit(allocations, np.full(count, 1.0 / count), spec.n, spec.n_T)


def design_mean(spec: DesignSpec) -> np.ndarray:
    """E[W]; equals ((r - r_tilde)/2) * 1 for every supported family."""
    ideal = np.full(spec.n_units, (spec.r - spec.r_tilde) / 2.0)
    if spec.family == EXPLICIT:
        mean = spec.probs @ _support_matrix(spec)
        if np.max(np.abs(mean - ideal)) > 1e-12:
            raise AssumptionViolation(
                "explicit design assigns unequal treatment probabilities across subjects"
            )
        return mean
    return ideal


@dataclass(frozen=True)
class CovMatrix:
    """Variance-covariance matrix of a design's assignment vector.

    ``structure`` tags matrices that are block diagonal over the given cells
    with the closed-form within-block pattern, enabling O(2n) quadratic forms.
    """

    dense: np.ndarray
    n: int
    n_T: int
    structure: Optional[BlockStructure] = None

    def __post_init__(self):
        dense = np.asarray(self.dense, dtype=float)
        if dense.shape != (2 * self.n, 2 * self.n):
            raise DesignError(f"covariance must be {2*self.n}x{2*self.n}, got {dense.shape}")
        dense.setflags(write=False)
        object.__setattr__(self, "dense", dense)

    @property
    def n_units(self) -> int:
        return 2 * self.n

    @property
    def r(self) -> float:
        return self.n_T / self.n

    @property
    def r_tilde(self) -> float:
        return 2.0 - self.n_T / self.n

    @property
    def scale(self) -> float:
        """Common diagonal value r * r_tilde."""
        return self.r * self.r_tilde

    @property
    def block_tag(self):
        """(B, n_B, r*r_tilde) when the block-diagonal closed form applies."""
        if self.structure is None:
            return None
        return (self.structure.n_blocks, self.structure.block_size, self.scale)


def cov_crd_closed(n: int, n_T: int) -> CovMatrix:
    """Closed-form covariance of complete randomization.

    The matrix is (r r~ / (2n-1)) (2n I - J): one zero eigenvalue and 2n-1
    eigenvalues equal to 2n r r~ / (2n-1).
    """
    if not (1 <= n_T <= 2 * n - 1):
        raise DesignError(f"need 1 <= n_T <= 2n-1, got n_T={n_T}")
    m = 2 * n
    r = n_T / n
    scale = r * (2.0 - r)
    dense = (scale / (m - 1)) * (m * np.eye(m) - np.ones((m, m)))
    return CovMatrix(dense, n, n_T, structure=contiguous_blocks(m, 1))


def cov_block_closed(structure: BlockStructure, n_T: int) -> CovMatrix:
    """Block-diagonal covariance: each block is r r~ (n_B I - J) / (n_B - 1)."""
    structure.per_block_treated(n_T)
    m = structure.n_units
    n = m // 2
    n_B = structure.block_size
    if n_B < 2:
        raise DesignError("blocks of size 1 admit no randomization")
    r = n_T / n
    scale = r * (2.0 - r)
    pattern = (scale / (n_B - 1)) * (n_B * np.eye(n_B) - np.ones((n_B, n_B)))
    dense = np.zeros((m, m))
    for block in structure.blocks:
        idx = np.asarray(block)
        dense[np.ix_(idx, idx)] = pattern
    return CovMatrix(dense, n, n_T, structure=structure)


def cov_empirical(spec: DesignSpec) -> CovMatrix:
    """Sum_k p_k w_k w_k' - E[W] E[W]' from an explicit support."""
    explicit = enumerate_design(spec)
    W = _support_matrix(explicit)
    mean = design_mean(explicit)
    second = (W * explicit.probs[:, None]).T @ W
    dense = second - np.outer(mean, mean)
    dense = 0.5 * (dense + dense.T)
    if np.linalg.eigvalsh(dense)[0] < -1e-10:
        raise DesignError("empirical covariance is not positive semidefinite")
    return CovMatrix(dense, explicit.n, explicit.n_T)


def design_cov(spec: DesignSpec) -> CovMatrix:
    """Covariance of any supported family, closed form where available."""
    if spec.family == CRD:
        return cov_crd_closed(spec.n, spec.n_T)
    if spec.family == BLOCK:
        return cov_block_closed(spec.structure, spec.n_T)
    return cov_empirical(spec)


def sample_allocation(spec: DesignSpec, rng: np.random.Generator) -> Allocation:
    """Draw one allocation from the design's distribution."""
    m = spec.n_units
    if spec.family == CRD:
        w = -np.ones(m, dtype=np.int64)
        w[rng.choice(m, size=spec.n_T, replace=False)] = 1
        return Allocation(w)
    if spec.family == BLOCK:
        structure = spec.structure
        t_b = structure.per_block_treated(spec.n_T)
        w = -np.ones(m, dtype=np.int64)
        for block in structure.blocks:
            idx = np.asarray(block)
            w[rng.choice(idx, size=t_b, replace=False)] = 1
        return Allocation(w)
    if spec.family == PB_PAIR:
        return spec.support[0] if rng.random() < 0.5 else spec.support[1]
    k = rng.choice(len(spec.support), p=spec.probs)
    return spec.support[k]


def build_blocks_univariate(x, n_blocks: int) -> BlockStructure:
    """Blocks = consecutive runs of the sort order of one covariate.

    Ties are broken by original index (stable sort) so block construction is
    deterministic.
    """
    x = np.asarray(x, dtype=float)
    m = x.size
    if m % n_blocks != 0:
        raise DesignError(f"{m} subjects do not split into {n_blocks} equal blocks")
    size = m // n_blocks
    order = np.argsort(x, kind="stable")
    return BlockStructure(tuple(tuple(order[b * size:(b + 1) * size]) for b in range(n_blocks)))


def build_blocks_bivariate(X, n_blocks: int) -> BlockStructure:
    """Two-stage blocking on the first two covariates.

    Subjects are sorted by the first covariate; within consecutive groups of
    2 n_B subjects they are re-sorted by the second covariate; the final
    partition is into consecutive cells of size n_B.  A trailing group shorter
    than 2 n_B (odd number of blocks) is re-sorted as its own group.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] < 2:
        raise DesignError("two-stage blocking needs at least two covariate columns")
    m = X.shape[0]
    if m % n_blocks != 0:
        raise DesignError(f"{m} subjects do not split into {n_blocks} equal blocks")
    size = m // n_blocks
    order = np.argsort(X[:, 0], kind="stable")
    group = 2 * size
    pieces = []
    for start in range(0, m, group):
        chunk = order[start:start + group]
        pieces.append(chunk[np.argsort(X[chunk, 1], kind="stable")])
    order2 = np.concatenate(pieces)
    return BlockStructure(tuple(tuple(order2[b * size:(b + 1) * size]) for b in range(n_blocks)))


def _balance_scores(mu: np.ndarray, treated_sets: np.ndarray) -> np.ndarray:
    # |mu' w| with w = +1 on the treated set: mu' w = 2 * sum_T mu - sum mu.
    return np.abs(2.0 * mu[treated_sets].sum(axis=1) - mu.sum())


def find_perfect_balance(mu, budget: int = 20, rng: Optional[np.random.Generator] = None,
                         n_T: Optional[int] = None) -> Allocation:
    """Find a balanced +/-1 vector minimizing the arm imbalance |mu' w|.

    Exact by exhaustive search for 2n <= 22 (first entry pinned to +1 to kill
    the mirror symmetry); otherwise greedy single-swap descent with up to
    ``budget`` random restarts.  Equal allocation only.
    """
    mu = np.asarray(mu, dtype=float)
    m = mu.size
    if m % 2 != 0:
        raise DesignError("need an even number of subjects")
    n = m // 2
    if n_T is not None and n_T != n:
        raise UnsupportedConfiguration(
            "perfect-balance search is only defined for equal allocation"
        )
    if m <= EXHAUSTIVE_BALANCE_LIMIT:
        sets = np.array(list(itertools.combinations(range(1, m), n - 1)), dtype=np.int64)
        sets = np.hstack([np.zeros((sets.shape[0], 1), dtype=np.int64), sets])
        scores = _balance_scores(mu, sets)
        best = sets[int(np.argmin(scores))]
        w = -np.ones(m, dtype=np.int64)
        w[best] = 1
        return Allocation(w)
    if rng is None:
        rng = np.random.default_rng(0)
    best_w = None
    best_score = np.inf
    for _ in range(max(1, budget)):
        w = np.concatenate([np.ones(n, dtype=np.int64), -np.ones(n, dtype=np.int64)])
        rng.shuffle(w)
        d = float(mu @ w)
        while True:
            t_idx = np.flatnonzero(w == 1)
            c_idx = np.flatnonzero(w == -1)
            # Swapping treated i with control j moves mu'w by -2(mu_i - mu_j).
            cand = d - 2.0 * (mu[t_idx][:, None] - mu[c_idx][None, :])
            k = int(np.argmin(np.abs(cand)))
            if abs(cand.flat[k]) >= abs(d) - 1e-15:
                break
            i, j = divmod(k, c_idx.size)
            w[t_idx[i]] = -1
            w[c_idx[j]] = 1
            d = float(cand.flat[k])
        if abs(d) < best_score:
            best_score = abs(d)
            best_w = w.copy()
            if best_score == 0.0:
                break
    return Allocation(best_w)


def _block_views(v: np.ndarray, structure: BlockStructure) -> np.ndarray:
    order = structure.order()
    return v[..., order].reshape(v.shape[:-1] + (structure.n_blocks, structure.block_size))


def quadratic_form(v, cov: CovMatrix) -> float:
    """v' Sigma_W v, using the O(2n) per-block identity when tagged."""
    v = np.asarray(v, dtype=float)
    if v.shape != (cov.n_units,):
        raise DesignError(f"vector has shape {v.shape}, expected ({cov.n_units},)")
    if cov.structure is None:
        return float(v @ cov.dense @ v)
    return float(quadratic_form_batch(v[None, :], cov)[0])


def quadratic_form_batch(V: np.ndarray, cov: CovMatrix) -> np.ndarray:
    """Row-wise v' Sigma_W v for a stack of vectors (fast path for block tags)."""
    V = np.asarray(V, dtype=float)
    if V.ndim != 2 or V.shape[1] != cov.n_units:
        raise DesignError(f"batch has shape {V.shape}, expected (*, {cov.n_units})")
    if cov.structure is None:
        return np.einsum("ij,jk,ik->i", V, cov.dense, V)
    n_B = cov.structure.block_size
    blocks = _block_views(V, cov.structure)
    sq = (blocks ** 2).sum(axis=-1)
    tot = blocks.sum(axis=-1)
    return cov.scale * ((n_B * sq - tot ** 2) / (n_B - 1)).sum(axis=-1)


def apply_cov(cov: CovMatrix, v: np.ndarray) -> np.ndarray:
    """Sigma_W v, using the per-block pattern when tagged."""
    v = np.asarray(v, dtype=float)
    if v.shape != (cov.n_units,):
        raise DesignError(f"vector has shape {v.shape}, expected ({cov.n_units},)")
    if cov.structure is None:
        return cov.dense @ v
    n_B = cov.structure.block_size
    out = np.empty_like(v)
    for block in cov.structure.blocks:
        idx = np.asarray(block)
        vb = v[idx]
        out[idx] = cov.scale * (n_B * vb - vb.sum()) / (n_B - 1)
    return out
