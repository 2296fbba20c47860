"""Command-line entry point: design construction, criteria tables, simulation
grids, and the verification oracles.

Exit codes: 0 ok, 1 usage, 2 validation, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from . import config as cfg
from . import criteria, designs, responses, simulate, verify


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(1)


def _int_list(text: str):
    return tuple(int(part) for part in text.split(",") if part)


def build_parser() -> _Parser:
    parser = _Parser(prog="twoarm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its keys")
    common.add_argument("--out", help="output path (CSV or image depending on command)")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--threads", type=int, help="worker cap for parallel cells")

    p_design = sub.add_parser("design", parents=[common], help="construct and inspect designs")
    p_design.add_argument("--family", choices=["crd", "block", "pb"], default="crd")
    p_design.add_argument("--n", type=int, help="half sample size (2n subjects)")
    p_design.add_argument("--nT", type=int, help="number of treated subjects")
    p_design.add_argument("--B", type=int, default=1, help="block count for --family block")
    p_design.add_argument("--enumerate", action="store_true", dest="enumerate_support",
                          help="list the full support")
    p_design.add_argument("--samples", type=int, default=3, help="allocations to sample")
    p_design.add_argument("--covariates", choices=["uniform", "exponential"], default="uniform",
                          help="covariate family used to sort subjects into blocks")

    p_crit = sub.add_parser("criteria", parents=[common], help="criteria table per block design")
    p_crit.add_argument("--kind", choices=list(responses.KINDS), default="continuous")
    p_crit.add_argument("--p", type=int, default=1)
    p_crit.add_argument("--n", type=int, default=48)
    p_crit.add_argument("--ratio", default="1:1", help="allocation ratio n_C:n_T")
    p_crit.add_argument("--B", type=_int_list, help="comma-separated block counts")
    p_crit.add_argument("--cq", type=float, default=1.645)
    p_crit.add_argument("--covariates", choices=["uniform", "exponential"], default="uniform")
    p_crit.add_argument("--format", choices=["text", "csv"], default="text")

    p_sim = sub.add_parser("simulate", parents=[common], help="run the simulation grid")
    p_sim.add_argument("--n", type=int)
    p_sim.add_argument("--ratio", help="allocation ratio n_C:n_T, e.g. 1:1 or 2:1")
    p_sim.add_argument("--B", type=_int_list, help="comma-separated block counts")
    p_sim.add_argument("--kind", action="append", choices=list(responses.KINDS),
                       help="repeatable; defaults to all five kinds")
    p_sim.add_argument("--p", type=_int_list, help="comma-separated covariate counts")
    p_sim.add_argument("--Ny", type=int, help="potential-outcome pairs per cell")
    p_sim.add_argument("--q", type=float, help="tail quantile")
    p_sim.add_argument("--cq", type=float, help="quantile multiplier c_q")
    p_sim.add_argument("--covariates", choices=["uniform", "exponential"])

    p_verify = sub.add_parser("verify", parents=[common], help="run the oracle suites")
    p_verify.add_argument("--suite", action="append", choices=sorted(verify.SUITES),
                          help="repeatable; defaults to all suites")
    return parser


def _print_alloc(w: designs.Allocation) -> str:
    return "".join("+" if e > 0 else "-" for e in w.entries)


def cmd_design(args) -> int:
    if args.n is None or args.nT is None:
        print("error: design needs --n and --nT", file=sys.stderr)
        return 1
    n, n_T = args.n, args.nT
    seed = args.seed if args.seed is not None else 0
    rng = np.random.default_rng(seed)
    x = responses.draw_covariates(responses.CovariateSpec(args.covariates, 1.0, 1, n), rng)
    if args.family == "crd":
        spec = designs.DesignSpec.crd(n, n_T)
    elif args.family == "block":
        structure = designs.build_blocks_univariate(x[:, 0], args.B)
        spec = designs.DesignSpec.block(structure, n_T)
        print(f"block structure: B={structure.n_blocks} blocks of size {structure.block_size}")
        for b, block in enumerate(structure.blocks):
            print(f"  block {b}: subjects {list(block)}")
    else:
        profile_mu = x[:, 0]
        w_star = designs.find_perfect_balance(profile_mu, rng=rng, n_T=n_T)
        spec = designs.DesignSpec.pb_pair(w_star)
        print(f"balance |mu'w*| = {abs(profile_mu @ w_star.entries):.6g}")
    mean = designs.design_mean(spec)
    print(f"E[W] = {mean[0]:+.6g} (constant across subjects)")
    cov = designs.design_cov(spec)
    eigs = np.linalg.eigvalsh(cov.dense)
    print(f"Sigma_W: diag={cov.dense[0, 0]:.6g} lambda_max={eigs[-1]:.6g} "
          f"frobenius={np.linalg.norm(cov.dense):.6g}")
    sampled = [designs.sample_allocation(spec, rng) for _ in range(args.samples)]
    for w in sampled:
        print(f"sample: {_print_alloc(w)}")
    if args.enumerate_support:
        explicit = designs.enumerate_design(spec)
        print(f"support: {len(explicit.support)} allocations")
        for w, prob in zip(explicit.support, explicit.probs):
            print(f"  {_print_alloc(w)}  p={prob:.6g}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            for w in sampled:
                writer.writerow([int(e) for e in w.entries])
        print(f"wrote {len(sampled)} allocations to {args.out}")
    return 0


def cmd_criteria(args) -> int:
    n = args.n
    n_T, _ = simulate.ratio_counts(args.ratio, n)
    seed = args.seed if args.seed is not None else 3
    sim = simulate.SimConfig(n=n, allocation=args.ratio, B_list=args.B, p_list=(args.p,),
                             kinds=(args.kind,), covariates=args.covariates or "uniform",
                             seed=seed)
    X = simulate.covariate_matrix(sim, args.kind, args.p)
    model = responses.default_model(args.kind, args.p)
    profile = responses.moment_profile(X, model, n_T)
    columns = ["B", "B1", "B2", "S", "R", "mean_mse", "var_mse", "Q_q", "worst_case"]
    rows = []
    for B in sim.B_list:
        structure = (designs.build_blocks_univariate(X[:, 0], B) if args.p == 1
                     else designs.build_blocks_bivariate(X, B))
        cov = designs.cov_block_closed(structure, n_T)
        row = criteria.criteria_row(profile, cov, args.cq)
        rows.append([B] + [row[c] for c in columns[1:]])
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        if args.format == "csv":
            writer = csv.writer(out)
            writer.writerow(columns)
            for row in rows:
                writer.writerow(row)
        else:
            print(" ".join(f"{c:>12s}" for c in columns), file=out)
            for row in rows:
                print(f"{row[0]:>12d} " + " ".join(f"{v:12.5g}" for v in row[1:]), file=out)
    finally:
        if args.out:
            out.close()
    return 0


def cmd_simulate(args) -> int:
    data = cfg.load_json(args.config) if args.config else {}
    overrides = {
        "n": args.n,
        "allocation": args.ratio,
        "B_list": args.B,
        "kinds": tuple(args.kind) if args.kind else None,
        "p_list": args.p,
        "N_y": args.Ny,
        "q": args.q,
        "c_q": args.cq,
        "covariates": args.covariates,
        "seed": args.seed,
    }
    sim = cfg.sim_config_from_dict(data, overrides)
    rows = simulate.run_grid(sim, out_path=args.out, threads=args.threads)
    for kind in sim.kinds:
        for p in sim.p_list:
            best = simulate.argmin_b(rows, kind, p)
            print(f"{kind} p={p}: argmin-B (empirical q{int(100 * sim.q)}) = {best}")
    if args.out:
        meta = cfg.sim_config_to_dict(sim)
        meta["covariate_params"] = {
            kind: responses.default_covariates(kind, 1, sim.n, sim.covariates).param
            for kind in responses.KINDS
        }
        cfg.save_json(meta, f"{args.out}.config.json")
        print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def cmd_verify(args) -> int:
    results = verify.run_suites(args.suite)
    return 0 if all(res.passed for res in results) else 2


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "design": cmd_design,
        "criteria": cmd_criteria,
        "simulate": cmd_simulate,
        "verify": cmd_verify,
    }
    try:
        return handlers[args.command](args)
    except (designs.DesignError, responses.ResponseError, criteria.CriteriaError,
            cfg.ConfigError, KeyError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
