"""Command-line entry point ``knightlq``.

Exit codes: 0 success (and, for ``verify``, every criterion passed), 1 a
verification criterion failed, 2 bad input or an ill-posed problem.
"""

from __future__ import annotations

import argparse
import itertools
import logging
import sys

import numpy as np

from .config import load_config
from .estimation import BatchedSamples, estimate_bounds
from .exceptions import KnightLQError
from .harness import MODES, run_mode
from .lq import FORMS, optimal_policy, solve_hjb, well_posedness_margin
from .simulation import SimConfig, VolatilityScenario, simulate_classical, simulate_exploratory
from .stability import exploration_cost

log = logging.getLogger("knightlq")


def _read_samples(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    tokens = text.replace(",", " ").split()
    try:
        return np.array([float(t) for t in tokens])
    except ValueError as exc:
        raise KnightLQError(f"{path}: non-numeric sample ({exc})") from exc


def _root(value):
    return int(value) if value.lstrip("-").isdigit() else value


def cmd_estimate_bounds(args):
    data = _read_samples(args.datafile)
    est = estimate_bounds(BatchedSamples.from_batch_count(data, args.batches))
    print(f"sigma_lower_sq = {est.lower!r}")
    print(f"sigma_upper_sq = {est.upper!r}")
    print(f"discarded = {est.n_discarded}")
    if est.degenerate:
        print("degenerate = true")
    return 0


def _grid(cfg):
    m = cfg.model_params()
    for su2, lam, rho in itertools.product(cfg.sigma_upper_sq_grid, cfg.lambda_grid, cfg.rho_grid):
        b = cfg.bounds(su2)
        agent = cfg.agent(lam, rho)
        yield m, b, agent


def cmd_solve(args):
    cfg = load_config(args.config)
    print("sigma_upper_sq,lambda,rho,k2,k1,k0,margin")
    for m, b, agent in _grid(cfg):
        c = solve_hjb(m, b, agent, form=args.form, root=_root(args.root))
        margin = well_posedness_margin(c.k2, m, b)
        print(",".join(repr(float(v)) for v in
                       (b.sigma_upper_sq, agent.lam, agent.rho, c.k2, c.k1, c.k0, margin)))
    return 0


def cmd_policy(args):
    cfg = load_config(args.config)
    x = cfg.x_test if args.x is None else args.x
    print("sigma_upper_sq,lambda,rho,x,mean,variance,std")
    for m, b, agent in _grid(cfg):
        c = solve_hjb(m, b, agent, form=args.form, root=_root(args.root))
        p = optimal_policy(x, c, m, b, agent.lam)
        print(",".join(repr(float(v)) for v in
                       (b.sigma_upper_sq, agent.lam, agent.rho, x, p.mean, p.variance, p.std)))
    return 0


def cmd_simulate(args):
    cfg = load_config(args.config)
    m = cfg.model_params()
    b = cfg.bounds(cfg.sigma_upper_sq_grid[0])
    agent = cfg.agent()
    coeffs = solve_hjb(m, b, agent, form=args.form)
    sim = SimConfig(dt=args.dt, horizon=args.horizon, n_paths=args.paths, seed=args.seed,
                    record_every=args.record_every)
    if args.scenario == "constant":
        scen = VolatilityScenario.lower(b) if args.level == "lower" else VolatilityScenario.upper(b)
    else:
        rng = np.random.default_rng(np.random.SeedSequence(args.seed, spawn_key=(0x5CE,)))
        scen = VolatilityScenario.random_piecewise(b, args.horizon, args.dt, args.pieces, rng)
    x0 = cfg.x_test if args.x0 is None else args.x0
    if args.classical:
        ens = simulate_classical(x0, coeffs, m, b, scen, sim)
    else:
        ens = simulate_exploratory(x0, coeffs, m, b, agent, scen, sim)
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            ens.to_csv(fh)
    else:
        ens.to_csv(sys.stdout)
    return 0


def cmd_verify(args):
    cfg = load_config(args.config)
    report = run_mode(args.mode, cfg, seed=args.seed, form=args.form, out_dir=args.out)
    print("\n".join(report.summary_lines()))
    return report.exit_code


def cmd_cost(args):
    print(repr(exploration_cost(args.lam, args.rho)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="knightlq", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def solver_opts(sp):
        sp.add_argument("--form", choices=FORMS, default="printed",
                        help="coefficient equations to solve (default: printed)")
        sp.add_argument("--root", default="smallest",
                        help="'smallest', 'unique' or an integer index into the admissible roots")

    sp = sub.add_parser("estimate-bounds", help="estimate [sigma_lower^2, sigma_upper^2] from data")
    sp.add_argument("datafile")
    sp.add_argument("--batches", type=int, required=True, help="number of batches m")
    sp.set_defaults(func=cmd_estimate_bounds)

    sp = sub.add_parser("solve", help="solve for (k2, k1, k0) on the config grid")
    sp.add_argument("--config", required=True)
    solver_opts(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("policy", help="optimal Gaussian policy at a state")
    sp.add_argument("--config", required=True)
    sp.add_argument("--x", type=float, default=None, help="state (default: x_test)")
    solver_opts(sp)
    sp.set_defaults(func=cmd_policy)

    sp = sub.add_parser("simulate", help="simulate the closed loop and write paths as CSV")
    sp.add_argument("--config", required=True)
    sp.add_argument("--scenario", choices=("constant", "piecewise"), required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--level", choices=("lower", "upper"), default="upper",
                    help="volatility level of a constant scenario")
    sp.add_argument("--pieces", type=int, default=4, help="pieces of a piecewise scenario")
    sp.add_argument("--dt", type=float, default=1e-2)
    sp.add_argument("--horizon", type=float, default=1.0)
    sp.add_argument("--paths", type=int, default=10)
    sp.add_argument("--record-every", type=int, default=1)
    sp.add_argument("--x0", type=float, default=None)
    sp.add_argument("--classical", action="store_true", help="deterministic feedback u*(x)")
    sp.add_argument("--out", default=None, help="CSV path (default: stdout)")
    sp.add_argument("--form", choices=FORMS, default="printed")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("verify", help="run verification mode A, B, C or D")
    sp.add_argument("--mode", required=True, type=str.upper, choices=MODES)
    sp.add_argument("--config", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default=None, help="directory for CSV reports and summary.txt")
    sp.add_argument("--form", choices=FORMS, default="printed")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("cost", help="exploration cost lam / (2 rho)")
    sp.add_argument("--lambda", dest="lam", type=float, required=True)
    sp.add_argument("--rho", type=float, required=True)
    sp.set_defaults(func=cmd_cost)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (KnightLQError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
