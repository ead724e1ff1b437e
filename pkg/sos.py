"""Sum-of-squares compilation of set-constrained polynomial inequalities.

A constraint ``target >= 0`` on ``{g_i >= 0, h_j = 0}`` is encoded as the
identity ``target - margin = s0 + sum s_i g_i + sum lambda_j h_j`` with
Gram-matrix SOS polynomials ``s`` and free polynomials ``lambda``. Each
monomial of the identity becomes one equality row over the decision
variables, the free multiplier coefficients and the upper triangle of the
Gram blocks.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np
from scipy import sparse

from certificates import CertificateProblem, Relation
from errors import DegreeError, SolverFailure
from helpers.affine import AffinePolynomial
from helpers.solution import SolveStatus, Solution
from poly import Monomial, Polynomial, monomials_up_to

logger = logging.getLogger(__name__)


@dataclass
class SosConstraint:
    label: str
    target: AffinePolynomial
    region: list[tuple[Polynomial, Relation]] = field(default_factory=list)
    multiplier_degrees: list[int] | None = None
    margin: float = 0.0


@dataclass
class SdpRow:
    free: dict[int, float]
    entries: dict[tuple[int, int, int], float]
    rhs: float


@dataclass
class SosPiece:
    """One SOS polynomial of an identity: ``z^T X_block z`` times ``multiplier``."""
    block: int
    basis: list[Monomial]
    multiplier: Polynomial | None


@dataclass
class FreePiece:
    start: int
    basis: list[Monomial]
    multiplier: Polynomial


@dataclass
class Fragment:
    label: str
    target: AffinePolynomial
    margin: float
    nvars: int
    has_time: bool
    sos: list[SosPiece] = field(default_factory=list)
    free: list[FreePiece] = field(default_factory=list)
    first_row: int = 0
    row_count: int = 0


@dataclass
class SdpInstance:
    n_free: int = 0
    psd_blocks: list[int] = field(default_factory=list)
    rows: list[SdpRow] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    objective_constant: float = 0.0
    n_decision: int = 0
    fragments: list[Fragment] = field(default_factory=list)

    def __eq__(self, other) -> bool:
        # fragments are bookkeeping, not part of the program
        return (isinstance(other, SdpInstance) and self.n_free == other.n_free
                and self.psd_blocks == other.psd_blocks and self.rows == other.rows
                and self.objective == other.objective and self.objective_constant == other.objective_constant)

    __hash__ = None

    def new_free(self, count: int) -> int:
        start = self.n_free
        self.n_free += count
        return start

    def new_block(self, size: int) -> int:
        self.psd_blocks.append(size)
        return len(self.psd_blocks) - 1

    def __repr__(self):
        return (f"SdpInstance {{\n\tfree scalars: {self.n_free}\n\tpsd blocks: {self.psd_blocks}\n"
                f"\trows: {len(self.rows)}\n\tfragments: {len(self.fragments)}\n}}")


def _even_floor(value: int) -> int:
    return value - (value % 2)


def _budget(constraint: SosConstraint) -> tuple[int, list[int]]:
    target_degree = constraint.target.degree
    budget = target_degree + (target_degree % 2)
    region = constraint.region
    if constraint.multiplier_degrees is not None:
        if len(constraint.multiplier_degrees) != len(region):
            raise DegreeError(f"{constraint.label}: one multiplier degree per region polynomial is required")
        degrees = list(constraint.multiplier_degrees)
        for (g, rel), d in zip(region, degrees):
            if rel == Relation.Ge and d % 2:
                raise DegreeError(f"{constraint.label}: SOS multiplier degree must be even, got {d}")
            budget = max(budget, d + g.degree + (d + g.degree) % 2)
        return budget, degrees
    degrees = []
    for g, rel in region:
        d = _even_floor(budget - g.degree) if rel == Relation.Ge else budget - g.degree
        if d < 0:
            raise DegreeError(f"{constraint.label}: region polynomial of degree {g.degree} exceeds the degree "
                              f"budget {budget}; raise the certificate degrees or set --deg-mult")
        degrees.append(d)
    return budget, degrees


def _gram_terms(basis: list[Monomial]):
    for i in range(len(basis)):
        for j in range(i, len(basis)):
            yield i, j, basis[i] * basis[j], (1.0 if i == j else 2.0)


def compile_constraint(constraint: SosConstraint, instance: SdpInstance | None = None) -> SdpInstance:
    """Append the rows of one constraint to ``instance`` (a fresh one by default)."""
    target = constraint.target
    if instance is None:
        instance = SdpInstance()
        instance.n_decision = max(target.parts, default=-1) + 1
        instance.new_free(instance.n_decision)
    nvars = target.nvars
    has_time = target.has_time or any(g.has_time for g, _ in constraint.region)
    budget, degrees = _budget(constraint)
    fragment = Fragment(constraint.label, target, constraint.margin, nvars, has_time)

    # monomial -> (free coefficients, block coefficients, constant)
    rows: dict[Monomial, list] = {}

    def row(mono: Monomial) -> list:
        if mono not in rows:
            rows[mono] = [{}, {}, 0.0]
        return rows[mono]

    for index, part in target.parts.items():
        for mono, coeff in part.items():
            free = row(mono)[0]
            free[index] = free.get(index, 0.0) + coeff
    for mono, coeff in target.constant.items():
        row(mono)[2] += coeff
    if constraint.margin:
        row(Monomial())[2] -= constraint.margin

    def add_sos(multiplier: Polynomial | None, degree: int) -> None:
        basis = monomials_up_to(nvars, degree // 2, has_time)
        block = instance.new_block(len(basis))
        fragment.sos.append(SosPiece(block, basis, multiplier))
        mult_terms = list(multiplier.items()) if multiplier is not None else [(Monomial(), 1.0)]
        for i, j, mono, weight in _gram_terms(basis):
            for mg, cg in mult_terms:
                entries = row(mono * mg)[1]
                key = (block, i, j)
                entries[key] = entries.get(key, 0.0) - weight * cg

    add_sos(None, budget)
    for (g, rel), degree in zip(constraint.region, degrees):
        if rel == Relation.Ge:
            add_sos(g, degree)
            continue
        basis = monomials_up_to(nvars, degree, has_time)
        start = instance.new_free(len(basis))
        fragment.free.append(FreePiece(start, basis, g))
        for offset, mono in enumerate(basis):
            for mg, cg in g.items():
                free = row(mono * mg)[0]
                free[start + offset] = free.get(start + offset, 0.0) - cg

    fragment.first_row = len(instance.rows)
    for mono in sorted(rows, key=lambda m: m.sort_key(nvars)):
        free, entries, constant = rows[mono]
        free = {k: c for k, c in free.items() if c != 0.0}
        entries = {k: c for k, c in entries.items() if c != 0.0}
        if not free and not entries and constant == 0.0:
            continue
        instance.rows.append(SdpRow(dict(sorted(free.items())), dict(sorted(entries.items())), -constant))
    fragment.row_count = len(instance.rows) - fragment.first_row
    instance.fragments.append(fragment)
    return instance


def compile_problem(problem: CertificateProblem,
                    margin: float = 1e-6,
                    deg_mult: int | None = None) -> SdpInstance:
    instance = SdpInstance()
    instance.n_decision = len(problem.vars)
    instance.new_free(instance.n_decision)
    for condition in problem.constraints:
        for region in condition.regions:
            degrees = None if deg_mult is None else [deg_mult for _ in region.parts]
            compile_constraint(SosConstraint(f"{condition.label} over {region.name}", condition.expression,
                                             list(region.parts), degrees, margin), instance)
    objective = -problem.objective if problem.maximize else problem.objective
    instance.objective = {k: c for k, c in sorted(objective.coeffs.items()) if c != 0.0}
    instance.objective_constant = objective.constant
    logger.debug("compiled %s %s", problem.kind.value, instance)
    return instance


def _row_matrices(instance: SdpInstance):
    m = len(instance.rows)
    rows, cols, vals = [], [], []
    block_parts = [([], [], []) for _ in instance.psd_blocks]
    for r, sdp_row in enumerate(instance.rows):
        for k, c in sdp_row.free.items():
            rows.append(r)
            cols.append(k)
            vals.append(c)
        for (b, i, j), c in sdp_row.entries.items():
            size = instance.psd_blocks[b]
            block_parts[b][0].append(r)
            block_parts[b][1].append(j * size + i)
            block_parts[b][2].append(c)
    a_free = sparse.csr_matrix((vals, (rows, cols)), shape=(m, instance.n_free))
    a_blocks = [sparse.csr_matrix((v, (r, c)), shape=(m, size * size))
                for (r, c, v), size in zip(block_parts, instance.psd_blocks)]
    rhs = np.array([sdp_row.rhs for sdp_row in instance.rows])
    return a_free, a_blocks, rhs


_CVXPY_STATUS = {
    cp.OPTIMAL: SolveStatus.Optimal,
    cp.INFEASIBLE: SolveStatus.Infeasible,
}


def solve_cvxpy(instance: SdpInstance, solver: str | None = None, verbose: bool = False) -> Solution:
    a_free, a_blocks, rhs = _row_matrices(instance)
    y = cp.Variable(instance.n_free) if instance.n_free else None
    blocks = [cp.Variable((size, size), symmetric=True) for size in instance.psd_blocks]

    lhs = 0
    if y is not None:
        lhs = a_free @ y
    for a_block, X, size in zip(a_blocks, blocks, instance.psd_blocks):
        lhs = lhs + a_block @ cp.reshape(X, (size * size,), order="F")
    constraints = [X >> 0 for X in blocks]
    if len(instance.rows):
        constraints.append(lhs == rhs)

    cost = np.zeros(instance.n_free)
    for k, c in instance.objective.items():
        cost[k] = c
    objective = cp.Minimize(cost @ y) if y is not None and instance.objective else cp.Minimize(0)
    program = cp.Problem(objective, constraints)
    try:
        program.solve(solver=solver, verbose=verbose)
    except cp.error.SolverError as error:
        logger.warning("conic solver failed: %s", error)
        return Solution(SolveStatus.NumericalTrouble, backend="inprocess", message=str(error))

    status = _CVXPY_STATUS.get(program.status, SolveStatus.NumericalTrouble)
    if status != SolveStatus.Optimal:
        return Solution(status, backend="inprocess", message=str(program.status))
    free_values = np.asarray(y.value, dtype=float) if y is not None else np.zeros(0)
    return Solution(status,
                    objective=float(cost @ free_values) + instance.objective_constant,
                    free_values=free_values,
                    blocks=[np.asarray(X.value, dtype=float) for X in blocks],
                    backend="inprocess")


def solve(instance: SdpInstance, backend: str = "inprocess", solver: str | None = None) -> Solution:
    """Solve with ``inprocess`` (cvxpy), ``dsos`` (HiGHS LP) or ``sdpa:<dir>`` (file exchange)."""
    if backend == "inprocess":
        return solve_cvxpy(instance, solver=solver)
    if backend == "dsos":
        from highs_dsos_model import HighsDsosModel
        return HighsDsosModel(instance).solve()
    if backend.startswith("sdpa:"):
        from sdpa import solve_sdpa
        return solve_sdpa(instance, backend[len("sdpa:"):], command=solver or "sdpa")
    raise SolverFailure(f"unknown backend '{backend}'")


def assemble_fragment(fragment: Fragment, solution: Solution) -> Polynomial:
    """s0 + sum s_i g_i + sum lambda_j h_j for one fragment."""
    total = Polynomial.zero(fragment.nvars, fragment.has_time)
    for piece in fragment.sos:
        X = solution.blocks[piece.block]
        terms: dict[Monomial, float] = {}
        for i, j, mono, weight in _gram_terms(piece.basis):
            terms[mono] = terms.get(mono, 0.0) + weight * X[i, j]
        s = Polynomial(terms, fragment.nvars, fragment.has_time)
        total = total + (s * piece.multiplier if piece.multiplier is not None else s)
    for piece in fragment.free:
        coeffs = solution.free_values[piece.start:piece.start + len(piece.basis)]
        lam = Polynomial(dict(zip(piece.basis, coeffs)), fragment.nvars, fragment.has_time)
        total = total + lam * piece.multiplier
    return total


def reconstruction_residual(instance: SdpInstance, solution: Solution) -> float:
    """Max coefficient mismatch of every encoded identity."""
    if not solution.is_feasible():
        raise SolverFailure("no solution to reconstruct")
    worst = 0.0
    for fragment in instance.fragments:
        target = fragment.target.substitute(solution.free_values) - fragment.margin
        mismatch = target - assemble_fragment(fragment, solution)
        worst = max(worst, mismatch.max_abs_coefficient())
    return worst
