"""Barrier-certificate conditions for both reachability probabilities.

Every condition line is normalized to ``expression >= 0`` over a union of
regions; each region is a list of ``(g, relation)`` pairs meaning
``g >= 0`` or ``g == 0``. Time quantification over [0, T] is the extra
region polynomial ``t (T - t) >= 0``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum, auto
from typing import TYPE_CHECKING

import numpy as np
from scipy.special import exprel

from errors import DegreeError, KindMismatchError, ReachError
from generator import apply_generator
from helpers.affine import AffinePolynomial, AffineScalar
from helpers.var import Var, VarRole, VarsInfo
from model import QueryKind, ReachQuery, SdeModel
from poly import TIME, Polynomial, evaluate, evaluate_many, monomials_up_to, substitute_time

if TYPE_CHECKING:
    from residual import ResidualSummary

logger = logging.getLogger(__name__)

ALPHA_ZERO_TOL = 1e-8


class CertificateKind(Enum):
    HU1 = "HU1"
    HU2 = "HU2"
    HU3 = "HU3"
    HL1 = "HL1"
    HL2 = "HL2"
    HL3 = "HL3"
    IU1 = "IU1"
    IU2 = "IU2"
    IU3 = "IU3"
    IL1 = "IL1"
    IL2 = "IL2"
    IL3 = "IL3"

    @property
    def horizon(self) -> bool:
        return self.value[0] == "H"

    @property
    def upper(self) -> bool:
        return self.value[1] == "U"

    @property
    def uses_alpha(self) -> bool:
        return self.value[2] != "1"

    @property
    def time_dependent(self) -> bool:
        return self.value[2] != "3"

    @property
    def uses_w(self) -> bool:
        return self.horizon and not self.upper

    @property
    def query_kind(self) -> QueryKind:
        return QueryKind.Horizon if self.horizon else QueryKind.Instant


class Relation(Enum):
    Ge = auto()
    Eq = auto()


@dataclass(frozen=True)
class Region:
    name: str
    parts: tuple[tuple[Polynomial, Relation], ...]

    def inequalities(self) -> list[Polynomial]:
        return [g for g, rel in self.parts if rel == Relation.Ge]

    def equalities(self) -> list[Polynomial]:
        return [g for g, rel in self.parts if rel == Relation.Eq]

    @property
    def has_time(self) -> bool:
        return any(g.has_time for g, _ in self.parts)

    def __repr__(self):
        rel = {Relation.Ge: ">= 0", Relation.Eq: "= 0"}
        return f"Region [{self.name}] {{ " + ", ".join(f"{g.to_text()} {rel[r]}" for g, r in self.parts) + " }"


@dataclass
class Condition:
    label: str
    expression: AffinePolynomial
    regions: list[Region]


@dataclass(frozen=True)
class DegreeSpec:
    deg_v: int = 4
    deg_w: int = 4
    deg_mult: int | None = None

    def check(self, uses_w: bool) -> None:
        if self.deg_v < 2 or self.deg_v % 2:
            raise DegreeError(f"degree of v must be even and >= 2, got {self.deg_v}")
        if uses_w and self.deg_w != 0 and (self.deg_w < 2 or self.deg_w % 2):
            raise DegreeError(f"degree of w must be even and >= 2 (or 0 to force w = 0), got {self.deg_w}")
        if self.deg_mult is not None and self.deg_mult < 0:
            raise DegreeError(f"multiplier degree must be >= 0, got {self.deg_mult}")


@dataclass
class Template:
    name: str
    degree: int
    has_time: bool
    basis: list
    vars: list[Var]
    expr: AffinePolynomial

    def substitute(self, values) -> Polynomial:
        p = self.expr.substitute(values)
        return p.with_time() if self.has_time else p


@dataclass
class CertificateProblem:
    kind: CertificateKind
    model: SdeModel
    query: ReachQuery
    alpha: float
    degrees: DegreeSpec
    vars: VarsInfo
    unknowns: dict[str, Template]
    beta: Var | None
    M: Var | None
    constraints: list[Condition]
    v0: AffineScalar
    objective: AffineScalar
    maximize: bool
    notes: list[str] = field(default_factory=list)

    @property
    def has_time(self) -> bool:
        return self.kind.time_dependent

    def pin(self, var: Var, value: float) -> CertificateProblem:
        """Fix one decision variable, folding it into the constants."""
        def fold(expr: AffinePolynomial) -> AffinePolynomial:
            if var.index not in expr.parts:
                return expr
            parts = dict(expr.parts)
            part = parts.pop(var.index)
            return AffinePolynomial(expr.constant + part.scale(value), parts)

        def fold_scalar(s: AffineScalar) -> AffineScalar:
            coeffs = dict(s.coeffs)
            c = coeffs.pop(var.index, 0.0)
            return AffineScalar(s.constant + c * value, coeffs)

        constraints = [Condition(c.label, fold(c.expression), c.regions) for c in self.constraints]
        return CertificateProblem(
            kind=self.kind, model=self.model, query=self.query, alpha=self.alpha, degrees=self.degrees,
            vars=self.vars, unknowns=self.unknowns,
            beta=None if self.beta is var else self.beta,
            M=None if self.M is var else self.M,
            constraints=constraints, v0=fold_scalar(self.v0), objective=fold_scalar(self.objective),
            maximize=self.maximize, notes=list(self.notes))

    def __repr__(self):
        text = f"CertificateProblem [{self.kind.value}, alpha={self.alpha}] {{\n"
        for name, template in self.unknowns.items():
            text += f"\t{name}: degree {template.degree}, {len(template.vars)} coefficients\n"
        for cond in self.constraints:
            text += f"\t{cond.label}: over " + ", ".join(r.name for r in cond.regions) + "\n"
        text += f"\t{'maximize' if self.maximize else 'minimize'}: {self.objective}\n"
        return text + "}"


class _Regions:
    def __init__(self, query: ReachQuery, time_dependent: bool):
        n = query.n
        g_X, g_S = query.g_X, query.g_S
        t = Polynomial.variable(TIME, n)
        self.time_box = (t * (Polynomial.constant(query.horizon_T, n) - t), Relation.Ge)
        self.time_dependent = time_dependent
        self.interior_h = Region("cl(X\\Xs)", ((g_X, Relation.Ge), (-g_S, Relation.Ge)))
        self.boundary_X = Region("dX", ((g_X, Relation.Eq),))
        self.boundary_S = Region("dXs", ((g_S, Relation.Eq), (g_X, Relation.Ge)))
        self.closure_X = Region("cl(X)", ((g_X, Relation.Ge),))
        self.target = Region("Xs", ((g_S, Relation.Ge), (g_X, Relation.Ge)))

    def timed(self, region: Region) -> Region:
        if not self.time_dependent:
            return region
        return Region(f"[0,T]x{region.name}", region.parts + (self.time_box,))


def _new_template(name: str, degree: int, has_time: bool, nvars: int, vars_info: VarsInfo) -> Template:
    basis = monomials_up_to(nvars, degree, has_time) if degree > 0 else []
    tvars = [vars_info.new(f"{name}[{m!r}]", VarRole.TemplateCoefficient, owner=name, monomial=m) for m in basis]
    expr = AffinePolynomial.template([v.index for v in tvars], basis, nvars)
    if has_time:
        expr = AffinePolynomial(expr.constant.with_time(), expr.parts)
    return Template(name, degree, has_time, basis, tvars, expr)


def _generator(expr: AffinePolynomial, model: SdeModel) -> tuple[AffinePolynomial, AffinePolynomial]:
    full = expr.map(lambda p: apply_generator(p, model).full)
    time_only = expr.map(lambda p: apply_generator(p, model).time_only)
    return full, time_only


def build_condition(kind: CertificateKind,
                    model: SdeModel,
                    query: ReachQuery,
                    degrees: DegreeSpec = DegreeSpec(),
                    alpha: float = 0.0) -> CertificateProblem:
    if kind.query_kind != query.kind:
        raise KindMismatchError(f"{kind.value} certifies a {kind.query_kind.name.lower()} query, "
                                f"the query is {query.kind.name.lower()}")
    if query.n != model.n:
        raise ReachError("query and model dimensions differ")
    degrees.check(kind.uses_w)
    if not kind.uses_alpha:
        alpha = 0.0

    n, T = model.n, query.horizon_T
    timed = kind.time_dependent
    regions = _Regions(query, timed)
    vars_info = VarsInfo()
    v = _new_template("v", degrees.deg_v, timed, n, vars_info)
    unknowns = {"v": v}
    w = None
    if kind.uses_w:
        w = _new_template("w", degrees.deg_w, timed, n, vars_info)
        unknowns["w"] = w
    beta = vars_info.new("beta", VarRole.Beta) if kind.uses_alpha else None
    M = vars_info.new("M", VarRole.M) if kind.uses_w else None

    V = v.expr
    LV, VT = _generator(V, model)
    B = AffinePolynomial.variable(beta.index, n) if beta else AffinePolynomial.of(Polynomial.zero(n))
    rate = V.scale(alpha) + B   # alpha v + beta
    VT_T = V.at_time(T) if timed else V
    R = regions

    conditions: list[Condition] = []
    notes: list[str] = []
    if kind.horizon and kind.upper:
        conditions.append(Condition("generator: Lv <= alpha v + beta", rate - LV, [R.timed(R.interior_h)]))
        if timed:
            conditions.append(Condition("boundary: dv/dt <= alpha v + beta", rate - VT,
                                        [R.timed(R.boundary_X), R.timed(R.boundary_S)]))
        else:
            conditions.append(Condition("boundary: 0 <= alpha v + beta", rate, [R.boundary_X, R.boundary_S]))
        conditions.append(Condition("terminal: v(T) >= 1 on dXs", VT_T - 1.0, [R.boundary_S]))
        conditions.append(Condition("terminal: v(T) >= 0 on cl(X\\Xs)", VT_T, [R.interior_h]))
    elif kind.horizon:
        W = w.expr
        LW, WT = _generator(W, model)
        Mv = AffinePolynomial.variable(M.index, n)
        conditions.append(Condition("generator: Lv >= alpha v + beta", LV - rate, [R.timed(R.interior_h)]))
        if timed:
            conditions.append(Condition("boundary: dv/dt >= alpha v + beta", VT - rate,
                                        [R.timed(R.boundary_X), R.timed(R.boundary_S)]))
            conditions.append(Condition("target boundary: v <= 1 + dw/dt", WT + 1.0 - V, [R.timed(R.boundary_S)]))
            conditions.append(Condition("auxiliary: v <= Lw", LW - V, [R.timed(R.interior_h)]))
            conditions.append(Condition("domain boundary: v <= dw/dt", WT - V, [R.timed(R.boundary_X)]))
        else:
            conditions.append(Condition("boundary: 0 >= alpha v + beta", -rate, [R.boundary_X, R.boundary_S]))
            conditions.append(Condition("target boundary: v <= 1", 1.0 - V, [R.boundary_S]))
            conditions.append(Condition("auxiliary: v <= Lw", LW - V, [R.interior_h]))
            conditions.append(Condition("domain boundary: v <= 0", -V, [R.boundary_X]))
        # w = 0 leaves the constant M, which needs no region multiplier
        bound_region = Region("R^n", ()) if degrees.deg_w == 0 else R.timed(R.closure_X)
        conditions.append(Condition("bound: M - w >= 0", Mv - W, [bound_region]))
        conditions.append(Condition("bound: M + w >= 0", Mv + W, [bound_region]))
    elif kind.upper:
        conditions.append(Condition("generator: Lv <= alpha v + beta", rate - LV, [R.timed(R.closure_X)]))
        if timed:
            conditions.append(Condition("boundary: dv/dt <= alpha v + beta", rate - VT, [R.timed(R.boundary_X)]))
        else:
            conditions.append(Condition("boundary: 0 <= alpha v + beta", rate, [R.boundary_X]))
        conditions.append(Condition("terminal: v(T) >= 1 on Xs", VT_T - 1.0, [R.target]))
        conditions.append(Condition("terminal: v(T) >= 0 on cl(X)", VT_T, [R.closure_X]))
    else:
        conditions.append(Condition("generator: Lv >= alpha v + beta", LV - rate, [R.timed(R.closure_X)]))
        if timed:
            conditions.append(Condition("boundary: dv/dt >= alpha v + beta", VT - rate, [R.timed(R.boundary_X)]))
        else:
            conditions.append(Condition("boundary: 0 >= alpha v + beta", -rate, [R.boundary_X]))
        conditions.append(Condition("terminal: v(T) <= 0 on cl(X\\Xs)", -VT_T, [R.interior_h]))
        conditions.append(Condition("terminal: v(T) <= 1 on Xs", 1.0 - VT_T, [R.target]))
        notes.append("terminal indicator tightened: v(T) <= 0 is imposed on the target boundary as well")

    V0 = V.at_time(0.0) if timed else V
    v0 = V0.at_point(query.x0)
    c_v, c_beta, c_M = bound_coefficients(kind, alpha, T)
    objective = v0.scale(c_v)
    if beta is not None:
        objective = objective + AffineScalar(0.0, {beta.index: c_beta})
    if M is not None:
        objective = objective + AffineScalar(0.0, {M.index: c_M})

    problem = CertificateProblem(kind=kind, model=model, query=query, alpha=alpha, degrees=degrees,
                                 vars=vars_info, unknowns=unknowns, beta=beta, M=M,
                                 constraints=conditions, v0=v0, objective=objective,
                                 maximize=not kind.upper, notes=notes)
    if w is not None and degrees.deg_w == 0:
        problem.notes.append("auxiliary function w forced to zero")
    logger.debug("built %s", problem)
    return problem


def _phi2(x: float) -> float:
    # (e^x - 1 - x) / x^2
    if abs(x) < 1e-4:
        return 0.5 + x / 6.0 + x * x / 24.0
    return (math.expm1(x) - x) / (x * x)


def bound_coefficients(kind: CertificateKind, alpha: float, T: float) -> tuple[float, float, float]:
    """Coefficients (c_v, c_beta, c_M) with bound = c_v v0 + c_beta beta + c_M M."""
    if not kind.uses_alpha:
        return 1.0, 0.0, (-2.0 / T if kind.uses_w else 0.0)
    x = alpha * T
    zero = abs(alpha) < ALPHA_ZERO_TOL
    if kind.uses_w:
        if zero:
            return 1.0, 0.5 * T, -2.0 / T
        return float(exprel(x)), T * _phi2(x), -2.0 / T
    if zero:
        return 1.0, T, 0.0
    return math.exp(x), T * float(exprel(x)), 0.0


def bound_formula(kind: CertificateKind, v0: float, alpha: float, beta: float, M: float, T: float) -> float:
    c_v, c_beta, c_M = bound_coefficients(kind, alpha, T)
    return c_v * v0 + c_beta * beta + c_M * M


@dataclass
class CompetingBounds:
    santoyo: float | None
    gronwall: float
    feng: float | None = None

    def to_dict(self) -> dict:
        return {"santoyo": self.santoyo, "gronwall": self.gronwall, "feng": self.feng}


def santoyo_bound(v0: float, alpha: float, beta: float, T: float) -> float | None:
    if alpha < 0 and alpha + beta > 0:
        return (v0 - math.expm1(beta * T) * beta / alpha) * math.exp(-beta * T)
    if alpha == 0 and beta >= 0:
        return v0 + beta * T
    if alpha < 0 and alpha + beta <= 0 and beta >= 0:
        return math.exp(-beta * T) * (v0 - 1.0) + 1.0
    return None


def feng_bound(v0: float, eta: float) -> float:
    if eta <= 0:
        raise ValueError("eta must be positive")
    return v0 / eta


def competing_bounds(v0: float, alpha: float, beta: float, T: float, eta: float | None = None) -> CompetingBounds:
    return CompetingBounds(
        santoyo=santoyo_bound(v0, alpha, beta, T),
        gronwall=bound_formula(CertificateKind.HU2, v0, alpha, beta, 0.0, T),
        feng=feng_bound(v0, eta) if eta is not None else None)


@dataclass
class BoundReport:
    kind: CertificateKind
    bound: float | None
    raw_bound: float | None
    v: Polynomial | None
    w: Polynomial | None
    alpha: float
    beta: float
    M: float
    solver_status: str
    residual_summary: ResidualSummary | None = None
    vacuous: bool = False
    v0: float | None = None
    values: list[float] | None = None
    reconstruction_residual: float | None = None
    outcome: str = "certified"
    notes: list[str] = field(default_factory=list)

    @property
    def certified(self) -> bool:
        return self.bound is not None

    @staticmethod
    def no_certificate(kind: CertificateKind, alpha: float, status: str, outcome: str) -> BoundReport:
        return BoundReport(kind=kind, bound=None, raw_bound=None, v=None, w=None, alpha=alpha,
                           beta=0.0, M=0.0, solver_status=status, outcome=outcome)

    def __repr__(self):
        if self.bound is None:
            return f"BoundReport [{self.kind.value}] {{ {self.outcome} (alpha={self.alpha}, status={self.solver_status})" + " }"
        side = "upper" if self.kind.upper else "lower"
        return (f"BoundReport [{self.kind.value}] {{\n\t{side} bound: {self.bound}\n\traw bound: {self.raw_bound}"
                f"\n\talpha: {self.alpha}, beta: {self.beta}, M: {self.M}\n\tvacuous: {self.vacuous}\n}}")


def clamp_bound(kind: CertificateKind, raw: float) -> tuple[float, bool]:
    """Clamp to [0, 1]; a vacuous bound carries no information."""
    vacuous = raw >= 1.0 if kind.upper else raw <= 0.0
    return min(1.0, max(0.0, raw)), vacuous


def extract_report(problem: CertificateProblem, values, status: str) -> BoundReport:
    values = [float(x) for x in values]
    v = problem.unknowns["v"].substitute(values)
    w = problem.unknowns["w"].substitute(values) if "w" in problem.unknowns else None
    beta = values[problem.beta.index] if problem.beta is not None else 0.0
    M = values[problem.M.index] if problem.M is not None else 0.0
    v0 = problem.v0.value(values)
    raw = bound_formula(problem.kind, v0, problem.alpha, beta, M, problem.query.horizon_T)
    bound, vacuous = clamp_bound(problem.kind, raw)
    report = BoundReport(kind=problem.kind, bound=bound, raw_bound=raw, v=v, w=w, alpha=problem.alpha,
                         beta=beta, M=M, solver_status=status, vacuous=vacuous, v0=v0, values=values,
                         notes=list(problem.notes))
    if vacuous:
        report.notes.append("vacuous bound clamped to [0, 1]")
        logger.warning("%s bound %.6g at alpha=%g is vacuous", problem.kind.value, raw, problem.alpha)
    return report


@dataclass
class ReachAvoidSet:
    """{x : g_X(x) > 0, g_S(x) < 0, level(x) > 0} for the deterministic flow."""
    domain: Polynomial
    target: Polynomial
    level: Polynomial
    horizon: bool

    def contains(self, point) -> bool:
        return (evaluate(self.domain, point) > 0 and evaluate(self.target, point) < 0
                and evaluate(self.level, point) > 0)

    def mask(self, points) -> np.ndarray:
        return ((evaluate_many(self.domain, points) > 0) & (evaluate_many(self.target, points) < 0)
                & (evaluate_many(self.level, points) > 0))

    def to_dict(self) -> dict:
        return {"domain_g": self.domain.to_text(), "target_g": self.target.to_text(),
                "level": self.level.to_text(), "kind": "horizon" if self.horizon else "instant"}


def retrieve_deterministic_reach_set(report: BoundReport, query: ReachQuery, model: SdeModel) -> ReachAvoidSet:
    if not model.has_zero_diffusion():
        raise ReachError("reach-avoid sets are only retrieved for zero diffusion")
    if report.kind.upper or report.v is None:
        raise KindMismatchError("a certified lower-bound report is required")
    v0 = substitute_time(report.v, 0.0) if report.kind.time_dependent else report.v
    c_v, c_beta, c_M = bound_coefficients(report.kind, report.alpha, query.horizon_T)
    level = v0.scale(c_v) + (c_beta * report.beta + c_M * report.M)
    return ReachAvoidSet(domain=query.g_X, target=query.g_S, level=level, horizon=report.kind.horizon)


def default_alpha_grid(T: float) -> list[float]:
    grid = [0.0]
    for j in range(-6, 4):
        grid += [2.0 ** j / T, -(2.0 ** j) / T]
    return grid


KIND_GROUPS = {
    QueryKind.Horizon: [CertificateKind.HU1, CertificateKind.HU2, CertificateKind.HU3,
                        CertificateKind.HL1, CertificateKind.HL2, CertificateKind.HL3],
    QueryKind.Instant: [CertificateKind.IU1, CertificateKind.IU2, CertificateKind.IU3,
                        CertificateKind.IL1, CertificateKind.IL2, CertificateKind.IL3],
}


def is_affine(problem: CertificateProblem) -> bool:
    """Every constraint and the objective only reference declared decision variables, linearly."""
    known = {var.index for var in problem.vars}
    for cond in problem.constraints:
        if not set(cond.expression.parts) <= known:
            return False
    return set(problem.objective.coeffs) <= known
