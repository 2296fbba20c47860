"""Monte Carlo harness for the tail-criterion simulation grids.

For each grid cell (response kind, covariate count p, allocation ratio, block
count B) the harness fixes one covariate matrix per (kind, p), draws N_y
independent potential-outcome pairs, computes the exact design MSE of each
draw via the block-diagonal quadratic form, and reports the empirical tail
quantile next to the moment approximation and the fully analytic criterion.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import criteria, responses
from .designs import (
    BlockStructure,
    DesignError,
    build_blocks_bivariate,
    build_blocks_univariate,
    cov_block_closed,
    quadratic_form_batch,
)
from .responses import KINDS, default_covariates, default_model

EQUAL_B_LIST = (1, 2, 3, 4, 6, 8, 12, 16, 24, 48)
TWO_TO_ONE_B_LIST = (1, 2, 4, 8, 16, 32)

KIND_CODE = {kind: i + 1 for i, kind in enumerate(KINDS)}
FAMILY_CODE = {responses.UNIFORM: 0, responses.EXPONENTIAL: 1}

CSV_COLUMNS = (
    "kind", "p", "ratio", "B", "n", "N_y", "q", "c_q", "seed",
    "empirical_q", "approx_q_mc", "analytic_Q", "mean_mse_mc", "var_mse_mc",
    "B1", "B2", "S", "R", "kappa_Z", "c_Z",
)

DRAW_CHUNK = 20_000


def parse_ratio(ratio: str):
    """'c:t' control:treated integers, e.g. '1:1' or '2:1'."""
    try:
        c, t = (int(part) for part in ratio.split(":"))
    except (ValueError, AttributeError):
        raise DesignError(f"allocation ratio must look like '2:1', got {ratio!r}")
    if c < 1 or t < 1 or c < t:
        raise DesignError(f"allocation ratio needs integers with c >= t >= 1, got {ratio!r}")
    return c, t


def ratio_counts(ratio: str, n: int):
    """(n_T, n_C) for a 'c:t' ratio over 2n subjects."""
    c, t = parse_ratio(ratio)
    if (2 * n * t) % (c + t) != 0:
        raise DesignError(f"ratio {ratio} does not split 2n={2*n} into whole groups")
    n_T = 2 * n * t // (c + t)
    return n_T, 2 * n - n_T


def admissible_block_counts(n: int, n_T: int):
    """All B with equal block sizes and whole per-block group counts."""
    m = 2 * n
    out = []
    for B in range(1, m):
        if m % B:
            continue
        n_B = m // B
        if (n_B * n_T) % m == 0 and (n_B * (m - n_T)) % m == 0 and n_B >= 2:
            out.append(B)
    return tuple(out)


@dataclass(frozen=True)
class SimConfig:
    """Grid settings; defaults reproduce the 2n = 96 experiment."""

    n: int = 48
    allocation: str = "1:1"
    B_list: Optional[tuple] = None
    p_list: tuple = (1, 2, 5)
    kinds: tuple = KINDS
    N_y: int = 100_000
    q: float = 0.95
    c_q: float = 1.645
    covariates: str = responses.UNIFORM
    seed: int = 4

    def __post_init__(self):
        if self.N_y < 1000:
            raise DesignError("need N_y >= 1000")
        if not (0.0 < self.q < 1.0):
            raise DesignError("need q in (0, 1)")
        n_T, _ = ratio_counts(self.allocation, self.n)
        if self.B_list is None:
            if self.n == 48 and self.allocation == "1:1":
                b_list = EQUAL_B_LIST
            elif self.n == 48 and self.allocation == "2:1":
                b_list = TWO_TO_ONE_B_LIST
            else:
                b_list = admissible_block_counts(self.n, n_T)
            object.__setattr__(self, "B_list", tuple(b_list))
        else:
            object.__setattr__(self, "B_list", tuple(int(b) for b in self.B_list))
        admissible = set(admissible_block_counts(self.n, n_T))
        bad = [b for b in self.B_list if b not in admissible]
        if bad:
            raise DesignError(
                f"block counts {bad} do not split 2n={2*self.n} under allocation {self.allocation}"
            )
        object.__setattr__(self, "p_list", tuple(int(p) for p in self.p_list))
        object.__setattr__(self, "kinds", tuple(self.kinds))
        unknown = [k for k in self.kinds if k not in KINDS]
        if unknown:
            raise DesignError(f"unknown response kinds {unknown}")
        if self.covariates not in FAMILY_CODE:
            raise DesignError(f"unknown covariate family {self.covariates!r}")

    @property
    def n_T(self) -> int:
        return ratio_counts(self.allocation, self.n)[0]


@dataclass(frozen=True)
class SimResultRow:
    """One grid cell's summary statistics."""

    kind: str
    p: int
    ratio: str
    B: int
    n: int
    N_y: int
    q: float
    c_q: float
    seed: int
    empirical_q: float
    approx_q_mc: float
    analytic_Q: float
    mean_mse_mc: float
    var_mse_mc: float
    B1: float
    B2: float
    S: float
    R: float
    kappa_Z: float
    c_Z: float

    def as_tuple(self):
        return tuple(getattr(self, col) for col in CSV_COLUMNS)


def cell_seed(master: int, kind: str, p: int, n_T: int, B: int) -> int:
    """Stable per-cell seed so cells are independently reproducible."""
    ss = np.random.SeedSequence(entropy=master, spawn_key=(KIND_CODE[kind], p, n_T, B))
    return int(ss.generate_state(1, np.uint64)[0])


def covariate_matrix(config: SimConfig, kind: str, p: int) -> np.ndarray:
    """The one fixed covariate draw per (kind, p) pair, shared across ratios and B."""
    spec = default_covariates(kind, p, config.n, config.covariates)
    ss = np.random.SeedSequence(
        entropy=config.seed,
        spawn_key=(977, KIND_CODE[kind], p, FAMILY_CODE[config.covariates]),
    )
    return responses.draw_covariates(spec, np.random.default_rng(ss))


def _blocks_for(X: np.ndarray, p: int, B: int) -> BlockStructure:
    if p == 1:
        return build_blocks_univariate(X[:, 0], B)
    return build_blocks_bivariate(X, B)


def empirical_quantile(values: np.ndarray, q: float) -> float:
    """Upper order statistic at 1-based index ceil(q * N) (no interpolation)."""
    N = values.size
    k = int(np.ceil(q * N))
    k = min(max(k, 1), N)
    return float(np.partition(values, k - 1)[k - 1])


def run_cell(config: SimConfig, kind: str, p: int, B: int,
             X: Optional[np.ndarray] = None, model=None) -> SimResultRow:
    """Simulate one grid cell and summarize its MSE distribution."""
    n = config.n
    n_T = config.n_T
    if X is None:
        X = covariate_matrix(config, kind, p)
    if model is None:
        model = default_model(kind, p)
    structure = _blocks_for(X, p, B)
    cov = cov_block_closed(structure, n_T)
    mu_T, mu_C = responses.mean_pair(X, model)
    responses.validate_means(kind, mu_T)
    responses.validate_means(kind, mu_C)
    profile = responses.moment_profile(X, model, n_T)
    terms = criteria.tail_terms(profile, cov)
    analytic_Q = criteria.q_q(terms, profile.kappa_z, profile.c_z,
                              profile.r, profile.r_tilde, config.c_q, n)

    seed = cell_seed(config.seed, kind, p, n_T, B)
    rng = np.random.default_rng(seed)
    r, rt = profile.r, profile.r_tilde
    scale = 4.0 * n * n
    mse = np.empty(config.N_y)
    done = 0
    while done < config.N_y:
        size = min(DRAW_CHUNK, config.N_y - done)
        y_T = responses.draw_response(kind, mu_T, model.dispersion, rng, size=(size, 2 * n))
        y_C = responses.draw_response(kind, mu_C, model.dispersion, rng, size=(size, 2 * n))
        V = y_T / r + y_C / rt
        mse[done:done + size] = quadratic_form_batch(V, cov) / scale
        done += size
    sd = float(np.std(mse, ddof=1))
    return SimResultRow(
        kind=kind, p=p, ratio=config.allocation, B=B, n=n, N_y=config.N_y,
        q=config.q, c_q=config.c_q, seed=seed,
        empirical_q=empirical_quantile(mse, config.q),
        approx_q_mc=float(np.mean(mse)) + config.c_q * sd,
        analytic_Q=analytic_Q,
        mean_mse_mc=float(np.mean(mse)),
        var_mse_mc=sd * sd,
        B1=terms.b1, B2=terms.b2, S=terms.s, R=terms.r,
        kappa_Z=profile.kappa_z, c_Z=profile.c_z,
    )


def _run_cell_task(args):
    config, kind, p, B = args
    return run_cell(config, kind, p, B)


def grid_cells(config: SimConfig):
    return [(kind, p, B) for kind in config.kinds for p in config.p_list for B in config.B_list]


def run_grid(config: SimConfig, out_path: Optional[str] = None,
             threads: Optional[int] = None) -> list:
    """Run every grid cell; deterministic for a fixed master seed.

    Cells are independent (each derives its own seed), so worker count does
    not change any row.  Rows come back in grid order and are optionally
    written as CSV.
    """
    cells = grid_cells(config)
    threads = threads or os.cpu_count() or 1
    if threads > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_run_cell_task, [(config, k, p, B) for k, p, B in cells]))
    else:
        rows = []
        cache = {}
        for kind, p, B in cells:
            key = (kind, p)
            if key not in cache:
                cache[key] = covariate_matrix(config, kind, p)
            rows.append(run_cell(config, kind, p, B, X=cache[key]))
    if out_path is not None:
        write_csv(rows, out_path)
    return rows


def write_csv(rows: Sequence[SimResultRow], path: str) -> None:
    """Write rows in the fixed column order; reruns are byte-identical."""
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for row in rows:
                writer.writerow([_format(value) for value in row.as_tuple()])
    except OSError as exc:
        raise OSError(f"cannot write results CSV at {path}: {exc}") from exc


def _format(value):
    if isinstance(value, float):
        return repr(value)
    return value


def read_csv(path: str) -> list:
    """Read a harness CSV back into SimResultRow records."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise DesignError(f"unexpected CSV columns in {path}: {reader.fieldnames}")
        rows = []
        for rec in reader:
            rows.append(SimResultRow(
                kind=rec["kind"], p=int(rec["p"]), ratio=rec["ratio"], B=int(rec["B"]),
                n=int(rec["n"]), N_y=int(rec["N_y"]), q=float(rec["q"]), c_q=float(rec["c_q"]),
                seed=int(rec["seed"]), empirical_q=float(rec["empirical_q"]),
                approx_q_mc=float(rec["approx_q_mc"]), analytic_Q=float(rec["analytic_Q"]),
                mean_mse_mc=float(rec["mean_mse_mc"]), var_mse_mc=float(rec["var_mse_mc"]),
                B1=float(rec["B1"]), B2=float(rec["B2"]), S=float(rec["S"]), R=float(rec["R"]),
                kappa_Z=float(rec["kappa_Z"]), c_Z=float(rec["c_Z"]),
            ))
    return rows


def argmin_b(rows: Sequence[SimResultRow], kind: str, p: int,
             column: str = "empirical_q") -> int:
    """The B minimizing one column within a (kind, p) slice of rows."""
    slice_rows = [row for row in rows if row.kind == kind and row.p == p]
    if not slice_rows:
        raise DesignError(f"no rows for kind={kind!r}, p={p}")
    best = min(slice_rows, key=lambda row: getattr(row, column))
    return best.B
