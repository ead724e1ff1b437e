import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from certificates import (BoundReport, CertificateKind, DegreeSpec, build_condition, competing_bounds,
                          default_alpha_grid, extract_report)
from certify_state import CertifyState, Outcome
from helpers.solution import SolveStatus
from model import ReachQuery, SdeModel
from residual import residual_check
from sos import compile_problem, reconstruction_residual, solve

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolveConfig:
    margin: float = 1e-6
    backend: str = "inprocess"
    solver_name: str | None = None
    residual_samples: int = 2000
    residual_margin: float = 1e-5
    boundary_tol: float = 1e-8
    reconstruction_tol: float = 1e-6
    seed: int = 0


class Solver:
    def __init__(self,
                 model: SdeModel,
                 query: ReachQuery,
                 kinds: list[CertificateKind],
                 degrees: DegreeSpec = DegreeSpec(),
                 alpha_grid: list[float] | None = None,
                 config: SolveConfig = SolveConfig(),
                 silent: bool = True,
                 workers: int = 1) -> None:

        self.__model = model
        self.__query = query
        self.__kinds = kinds
        self.__degrees = degrees
        self.__config = config
        self.__silent = silent
        self.__workers = workers

        default_grid = default_alpha_grid(query.horizon_T)
        self.alpha_grid = sorted(set(alpha_grid if alpha_grid is not None else default_grid), key=lambda a: (abs(a), a))
        self.grid_restricted = set(self.alpha_grid) != set(default_grid)
        if self.grid_restricted:
            logger.warning("alpha search restricted to %s", self.alpha_grid)

        self.__states: dict[CertificateKind, CertifyState] = {kind: CertifyState(kind) for kind in kinds}

    def __solve_point(self, kind: CertificateKind, alpha: float) -> tuple[BoundReport, Outcome]:
        cfg = self.__config
        problem = build_condition(kind, self.__model, self.__query, self.__degrees, alpha)
        instance = compile_problem(problem, cfg.margin, self.__degrees.deg_mult)
        solution = solve(instance, cfg.backend, cfg.solver_name)

        if solution.status == SolveStatus.Infeasible:
            return BoundReport.no_certificate(kind, problem.alpha, solution.status.label,
                                              Outcome.NoCertificate.label), Outcome.NoCertificate
        if not solution.is_feasible():
            return BoundReport.no_certificate(kind, problem.alpha, solution.status.label,
                                              Outcome.NumericalTrouble.label), Outcome.NumericalTrouble

        report = extract_report(problem, solution.free_values[:instance.n_decision], solution.status.label)
        report.reconstruction_residual = reconstruction_residual(instance, solution)
        report.residual_summary = residual_check(report, problem, cfg.residual_samples, cfg.residual_margin,
                                                 cfg.seed, cfg.boundary_tol)
        if report.reconstruction_residual > cfg.reconstruction_tol or not report.residual_summary.checked:
            report.outcome = Outcome.Rejected.label
            return report, Outcome.Rejected
        return report, Outcome.Certified

    def __points(self) -> list[tuple[CertificateKind, float]]:
        points = []
        for kind in self.__kinds:
            for alpha in (self.alpha_grid if kind.uses_alpha else [0.0]):
                points.append((kind, alpha))
        return points

    def solve(self) -> dict[CertificateKind, CertifyState]:
        points = self.__points()
        if self.__workers > 1:
            with ThreadPoolExecutor(max_workers=self.__workers) as pool:
                results = list(pool.map(lambda point: self.__solve_point(*point), points))
        else:
            results = [self.__solve_point(*point) for point in points]

        # merged in grid order so the chosen report does not depend on scheduling
        for (kind, alpha), (report, outcome) in zip(points, results):
            self.__states[kind].update(report, outcome)
            if not self.__silent:
                self.printing_info(kind, alpha, outcome)

        for state in self.__states.values():
            state.on_end()
        return self.__states

    def printing_info(self, kind: CertificateKind, alpha: float, outcome: Outcome) -> None:
        state = self.__states[kind]
        best = state.best.bound if state.best is not None else None
        logger.info(f"kind: {kind.value}\talpha: {alpha:.6g}\toutcome: {outcome.label}\tbest bound: {best}")

    def competing(self, kind: CertificateKind = CertificateKind.HU2, eta: float | None = None):
        state = self.__states.get(kind)
        if state is None or state.best is None:
            return None
        best = state.best
        return competing_bounds(best.v0, best.alpha, best.beta, self.__query.horizon_T, eta)

    def result(self) -> dict[CertificateKind, CertifyState]:
        return self.__states
