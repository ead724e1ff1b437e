import argparse
import json
import logging
import sys
import time

from certificates import KIND_GROUPS, CertificateKind, DegreeSpec
from errors import ReachError, SolverFailure
from model import load_model_file, model_to_dict, validate
from oracle import SimConfig, dump_trajectories, estimate_probability, fd_solve_1d, refinement_study
from report import RunReport
from solver import SolveConfig, Solver

logger = logging.getLogger(__name__)

EXIT_USAGE = 2
EXIT_SOLVER = 3


def parse_kinds(text: str, query) -> list[CertificateKind]:
    if text == "all":
        return list(KIND_GROUPS[query.kind])
    try:
        return [CertificateKind(item.strip().upper()) for item in text.split(",") if item.strip()]
    except ValueError as error:
        raise ReachError(f"unknown certificate kind: {error}") from None


def parse_alpha_grid(text: str | None) -> list[float] | None:
    if text is None:
        return None
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise ReachError(f"alpha grid must be a comma-separated list of reals, got '{text}'") from None


def add_certify_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--kind", type=str, default="all",
                        help="Comma-separated certificate kinds (HU1..IL3) or `all` for the query's kinds. (default = `all`)")
    parser.add_argument("--deg-v", type=int, default=4, help="Degree of the barrier v. (default = `4`)")
    parser.add_argument("--deg-w", type=int, default=4,
                        help="Degree of the auxiliary w; 0 forces w = 0. (default = `4`)")
    parser.add_argument("--deg-mult", type=int, default=None,
                        help="Degree of every region multiplier. (default = largest even degree within the budget)")
    parser.add_argument("--force-w-zero", type=str, default="disable", choices=["enable", "disable"],
                        help="Enable or disable forcing the auxiliary w to zero. (default = `disable`)")
    parser.add_argument("--alpha-grid", type=str, default=None,
                        help="Comma-separated alpha values. (default = `0, +-2^j/T for j = -6..3`)")
    parser.add_argument("--backend", type=str, default="inprocess",
                        help="`inprocess` (cvxpy), `dsos` (HiGHS LP) or `sdpa:<dir>`. (default = `inprocess`)")
    parser.add_argument("--solver", type=str, default=None,
                        help="cvxpy solver name, or the SDPA executable for `sdpa:<dir>`. (default = automatic)")
    parser.add_argument("--margin", type=float, default=1e-6,
                        help="Tightening of every SOS inequality. (default = `1e-6`)")
    parser.add_argument("--residual-samples", type=int, default=2000,
                        help="Sample points per region for the residual check. (default = `2000`)")
    parser.add_argument("--residual-margin", type=float, default=1e-5,
                        help="Largest accepted violation in the residual check. (default = `1e-5`)")


def add_oracle_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--paths", type=int, default=10000, help="Number of Monte-Carlo paths. (default = `10000`)")
    parser.add_argument("--step", type=float, default=1e-3, help="Euler-Maruyama step. (default = `1e-3`)")
    parser.add_argument("--seed", type=int, default=0, help="Random seed. (default = `0`)")
    parser.add_argument("--boundary-tol", type=float, default=0.0,
                        help="A path exits X once g_X <= this value. (default = `0`)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Certified bounds on reachability probabilities of polynomial SDEs.")
    subparsers = parser.add_subparsers(dest="command", required=True)

    def command(name: str, help_text: str) -> argparse.ArgumentParser:
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument("model", type=str, help="Path to the JSON model file.")
        sub.add_argument("--silent", type=str, default="enable", choices=["enable", "disable"],
                         help="Enable or disable progress output. (default = `enable`)")
        sub.add_argument("--workers", type=int, default=1, help="Number of worker threads. (default = `1`)")
        sub.add_argument("--out", type=str, default=None, help="Write the JSON report here. (default = none)")
        return sub

    certify = command("certify", "Search for barrier certificates and report the bounds.")
    add_certify_arguments(certify)

    estimate = command("estimate", "Estimate the probability by Monte-Carlo simulation.")
    add_oracle_arguments(estimate)

    compare = command("compare", "Certify, simulate and check the bounds against the estimate.")
    add_certify_arguments(compare)
    add_oracle_arguments(compare)
    compare.add_argument("--fd-grid", type=int, default=2001, help="Finite-difference nodes for 1-D models. (default = `2001`)")
    compare.add_argument("--fd-steps", type=int, default=2000, help="Finite-difference time steps. (default = `2000`)")
    compare.add_argument("--refine", type=int, default=0, help="Number of step halvings to study. (default = `0`)")

    check = command("validate", "Check the standing assumptions of the model file.")
    check.add_argument("--samples", type=int, default=10000, help="Sample points in the bounding box. (default = `10000`)")
    check.add_argument("--seed", type=int, default=0, help="Random seed. (default = `0`)")

    simulate = command("simulate", "Write sample trajectories as CSV files.")
    add_oracle_arguments(simulate)
    simulate.add_argument("--dir", type=str, default="trajectories", help="Output directory. (default = `trajectories`)")
    return parser


def run_certify(args, model, query, report: RunReport) -> None:
    kinds = parse_kinds(args.kind, query)
    degrees = DegreeSpec(deg_v=args.deg_v, deg_w=0 if args.force_w_zero == "enable" else args.deg_w,
                         deg_mult=args.deg_mult)
    config = SolveConfig(margin=args.margin, backend=args.backend, solver_name=args.solver,
                         residual_samples=args.residual_samples, residual_margin=args.residual_margin)
    validate(model, query, lower_bound_requested=any(not kind.upper for kind in kinds))

    started = time.perf_counter()
    solver = Solver(model, query, kinds, degrees, parse_alpha_grid(args.alpha_grid), config,
                    silent=args.silent == "enable", workers=args.workers)
    report.certificates = solver.solve()
    report.timings["certify"] = time.perf_counter() - started
    report.settings.update({
        "kinds": [kind.value for kind in kinds],
        "degrees": {"deg_v": degrees.deg_v, "deg_w": degrees.deg_w, "deg_mult": degrees.deg_mult},
        "alpha_grid": solver.alpha_grid,
        "grid_restricted": solver.grid_restricted,
        "backend": config.backend,
        "margin": config.margin,
    })
    if solver.grid_restricted:
        report.warnings.append("grid-restricted alpha search")
    if CertificateKind.HU2 in kinds:
        report.competing = solver.competing(CertificateKind.HU2)


def sim_config(args) -> SimConfig:
    return SimConfig(step_h=args.step, n_paths=args.paths, seed=args.seed, boundary_tol=args.boundary_tol,
                     workers=args.workers)


def run_estimate(args, model, query, report: RunReport) -> None:
    cfg = sim_config(args)
    started = time.perf_counter()
    report.estimate = estimate_probability(model, query, cfg)
    report.timings["estimate"] = time.perf_counter() - started
    report.warnings.extend(report.estimate.warnings)
    report.settings.update({"paths": cfg.n_paths, "step": cfg.step_h, "seed": cfg.seed,
                            "boundary_tol": cfg.boundary_tol,
                            "exit_handling": "frozen at the first sampled point with g_X <= boundary_tol"})


def run(args) -> int:
    model, query = load_model_file(args.model)
    report = RunReport(query=model_to_dict(model, query))

    if args.command == "validate":
        result = validate(model, query, samples=args.samples, seed=args.seed)
        print(json.dumps(result.to_dict(), sort_keys=True, indent=2))
        return 0
    if args.command in ("estimate", "simulate"):
        report.warnings.extend(validate(model, query).warnings)

    if args.command == "simulate":
        files = dump_trajectories(model, query, sim_config(args), args.dir, count=args.paths)
        print(f"wrote {len(files)} trajectories to {args.dir}")
        return 0

    if args.command in ("certify", "compare"):
        run_certify(args, model, query, report)
    if args.command in ("estimate", "compare"):
        run_estimate(args, model, query, report)
    if args.command == "compare":
        if model.n == 1:
            report.fd_value = fd_solve_1d(model, query, args.fd_grid, args.fd_steps)
        if args.refine > 0:
            report.refinement = refinement_study(model, query, sim_config(args), args.refine)

    print(report.summary())
    if args.out is not None:
        report.write(args.out)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.silent == "enable" else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except SolverFailure as error:
        logger.error("%s", error)
        return EXIT_SOLVER
    except ReachError as error:
        logger.error("%s", error)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
