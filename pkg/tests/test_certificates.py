import math

import numpy as np
import pytest

from bound import Bound
from certificates import (BoundReport, CertificateKind, DegreeSpec, KIND_GROUPS, bound_formula, build_condition,
                          clamp_bound, competing_bounds, default_alpha_grid, is_affine, retrieve_deterministic_reach_set,
                          santoyo_bound)
from errors import DegreeError, KindMismatchError, ReachError
from model import QueryKind, ReachQuery, SdeModel, SemialgebraicSet, SetSense
from poly import evaluate, parse

HU1, HU2, HU3 = CertificateKind.HU1, CertificateKind.HU2, CertificateKind.HU3
HL1, HL2, HL3 = CertificateKind.HL1, CertificateKind.HL2, CertificateKind.HL3
IU1, IL1 = CertificateKind.IU1, CertificateKind.IL1


def brownian_query(kind: QueryKind = QueryKind.Horizon, T: float = 1.0) -> ReachQuery:
    return ReachQuery(domain=SemialgebraicSet(parse("(x1 + 2)*(1 - x1)", 1), SetSense.Open),
                      target=SemialgebraicSet(parse("(x1 - 0.9)*(1 - x1)", 1), SetSense.Closed),
                      horizon_T=T, x0=(0.0,), kind=kind, bounding_box=(Bound(-2.5, 1.5),))


def ou_model(sigma: str = "0.5") -> SdeModel:
    return SdeModel(n=1, k=1, drift=(parse("-x1", 1),), diffusion=((parse(sigma, 1),),))


class TestCertificateKind:
    def test_properties(self):
        assert HU2.horizon and HU2.upper and HU2.uses_alpha and HU2.time_dependent and not HU2.uses_w
        assert HL1.uses_w and not HL1.uses_alpha
        assert not HL3.time_dependent and HL3.uses_w
        assert not IL1.horizon and not IL1.upper and not IL1.uses_w

    def test_groups_follow_query_kind(self):
        assert all(kind.horizon for kind in KIND_GROUPS[QueryKind.Horizon])
        assert not any(kind.horizon for kind in KIND_GROUPS[QueryKind.Instant])
        assert len(KIND_GROUPS[QueryKind.Horizon]) == len(KIND_GROUPS[QueryKind.Instant]) == 6


class TestBuildCondition:
    @pytest.mark.parametrize("kind, count", [(HU1, 4), (HU2, 4), (HU3, 4), (HL1, 7), (HL2, 7), (HL3, 7)])
    def test_horizon_constraint_counts(self, kind, count):
        problem = build_condition(kind, ou_model(), brownian_query(), DegreeSpec(4, 4), alpha=-0.5)
        assert len(problem.constraints) == count

    @pytest.mark.parametrize("kind", KIND_GROUPS[QueryKind.Instant])
    def test_instant_constraint_counts(self, kind):
        problem = build_condition(kind, ou_model(), brownian_query(QueryKind.Instant), DegreeSpec(4, 4), alpha=0.5)
        assert len(problem.constraints) == 4

    def test_boundary_condition_spans_both_boundaries(self):
        problem = build_condition(HU1, ou_model(), brownian_query())
        boundary = problem.constraints[1]
        assert len(boundary.regions) == 2
        assert all(region.has_time for region in boundary.regions)
        terminal = problem.constraints[2]
        assert not terminal.expression.has_time
        assert not any(region.has_time for region in terminal.regions)

    def test_instant_kind_on_horizon_query(self):
        with pytest.raises(KindMismatchError):
            build_condition(IU1, ou_model(), brownian_query())

    def test_odd_degree_rejected(self):
        with pytest.raises(DegreeError):
            build_condition(HU1, ou_model(), brownian_query(), DegreeSpec(deg_v=3))

    @pytest.mark.parametrize("kind", list(CertificateKind))
    def test_every_kind_is_affine(self, kind):
        query = brownian_query(QueryKind.Horizon if kind.horizon else QueryKind.Instant)
        problem = build_condition(kind, ou_model(), query, DegreeSpec(4, 4), alpha=0.25)
        assert is_affine(problem)
        assert problem.maximize == (not kind.upper)

    def test_first_kind_is_second_kind_without_relaxation(self):
        hu1 = build_condition(HU1, ou_model(), brownian_query())
        hu2 = build_condition(HU2, ou_model(), brownian_query(), alpha=0.0)
        pinned = hu2.pin(hu2.beta, 0.0)
        assert pinned.constraints == hu1.constraints
        assert pinned.beta is None

    def test_alpha_ignored_without_relaxation(self):
        assert build_condition(HU1, ou_model(), brownian_query(), alpha=3.0).alpha == 0.0

    def test_decision_variable_order(self):
        problem = build_condition(HL2, ou_model(), brownian_query(), DegreeSpec(4, 2))
        n_v = len(problem.unknowns["v"].vars)
        n_w = len(problem.unknowns["w"].vars)
        assert problem.beta.index == n_v + n_w
        assert problem.M.index == n_v + n_w + 1

    def test_forced_zero_w_has_no_coefficients(self):
        problem = build_condition(HL1, ou_model(), brownian_query(), DegreeSpec(4, 0))
        assert problem.unknowns["w"].vars == []
        assert any("forced to zero" in note for note in problem.notes)


class TestBoundFormula:
    def test_second_kind_at_zero_alpha(self):
        assert bound_formula(HU2, 0.3, 0.0, 0.2, 0.0, 2.0) == pytest.approx(0.7)

    def test_second_kind_exponential(self):
        assert bound_formula(HU2, 0.25, 1.0, 0.0, 0.0, math.log(2.0)) == pytest.approx(0.5)

    def test_lower_second_kind_at_zero_alpha(self):
        assert bound_formula(HL2, 0.9, 0.0, -0.1, 0.05, 1.0) == pytest.approx(0.75)

    def test_lower_first_kind(self):
        assert bound_formula(HL1, 0.8, 0.0, 0.0, 0.1, 2.0) == pytest.approx(0.7)

    def test_lower_second_kind_closed_form(self):
        alpha, beta, T, v0, M = -0.7, 0.3, 1.5, 0.4, 0.02
        expected = ((v0 / alpha + beta / alpha ** 2) * math.expm1(alpha * T) - beta / alpha * T) / T - 2 * M / T
        assert bound_formula(HL2, v0, alpha, beta, M, T) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("kind", [HU2, HL2])
    def test_continuous_at_zero_alpha(self, kind):
        rng = np.random.default_rng(11)
        for v0, beta, T in zip(rng.uniform(0, 1, 100), rng.uniform(-1, 1, 100), rng.uniform(0.1, 10, 100)):
            at_zero = bound_formula(kind, v0, 0.0, beta, 0.0, T)
            for alpha in (1e-8, -1e-8):
                assert abs(bound_formula(kind, v0, alpha, beta, 0.0, T) - at_zero) <= 1e-6

    def test_clamping(self):
        assert clamp_bound(HU2, 1.3) == (1.0, True)
        assert clamp_bound(HU2, 0.4) == (0.4, False)
        assert clamp_bound(HL1, -0.2) == (0.0, True)
        assert clamp_bound(HL1, 0.0) == (0.0, True)

    def test_alpha_grid(self):
        grid = default_alpha_grid(2.0)
        assert len(grid) == 21
        assert 0.0 in grid and 4.0 in grid and -2.0 ** -6 / 2.0 in grid


class TestCompetingBounds:
    def test_tighter_than_comparison_bound(self):
        rng = np.random.default_rng(5)
        for _ in range(1000):
            alpha = rng.uniform(-2.0, 0.0)
            beta = -alpha + rng.uniform(0.05, 2.0)
            T = rng.uniform(0.1, 2.0)
            v0 = rng.uniform(0.0, 1.0)
            bounds = competing_bounds(v0, alpha, beta, T)
            assert bounds.santoyo - bounds.gronwall > 0

    def test_regimes(self):
        assert santoyo_bound(0.3, 0.0, 0.2, 2.0) == pytest.approx(0.7)
        assert santoyo_bound(0.5, -1.0, 0.5, 1.0) == pytest.approx(math.exp(-0.5) * (0.5 - 1.0) + 1.0)
        assert santoyo_bound(0.5, 1.0, 0.5, 1.0) is None
        assert santoyo_bound(0.5, -1.0, -0.5, 1.0) is None

    def test_feng(self):
        assert competing_bounds(0.2, 0.0, 0.0, 1.0, eta=0.5).feng == pytest.approx(0.4)


class TestRetrieval:
    def deterministic(self) -> SdeModel:
        return SdeModel(n=1, k=1, drift=(parse("1", 1),), diffusion=((parse("0", 1),),))

    def report(self, kind: CertificateKind, v: str, alpha=0.0, beta=0.0, M=0.0) -> BoundReport:
        return BoundReport(kind=kind, bound=0.5, raw_bound=0.5, v=parse(v, 1), w=None, alpha=alpha,
                           beta=beta, M=M, solver_status="optimal")

    def test_lower_first_kind_level(self):
        query = brownian_query(T=2.0)
        reach = retrieve_deterministic_reach_set(self.report(HL1, "x1 + t", M=0.1), query, self.deterministic())
        # v(0, x) - 2M/T = x1 - 0.1
        assert reach.level == parse("x1 - 0.1", 1)
        assert reach.contains([0.5])
        assert not reach.contains([0.05])
        assert not reach.contains([0.95])

    def test_instant_level_is_initial_value(self):
        query = brownian_query(QueryKind.Instant)
        reach = retrieve_deterministic_reach_set(self.report(IL1, "x1 - t"), query, self.deterministic())
        assert evaluate(reach.level, [0.3]) == pytest.approx(0.3)

    def test_second_kind_with_alpha(self):
        alpha, beta, M, T = 0.5, -0.2, 0.01, 2.0
        query = brownian_query(T=T)
        reach = retrieve_deterministic_reach_set(self.report(HL2, "x1^2", alpha, beta, M), query,
                                                 self.deterministic())
        x = 0.6
        expected = ((x ** 2 / alpha + beta / alpha ** 2) * math.expm1(alpha * T) - beta / alpha * T) / T - 2 * M / T
        assert evaluate(reach.level, [x]) == pytest.approx(expected, rel=1e-12)

    def test_requires_zero_diffusion(self):
        with pytest.raises(ReachError):
            retrieve_deterministic_reach_set(self.report(HL1, "x1"), brownian_query(), ou_model())

    def test_requires_lower_kind(self):
        with pytest.raises(KindMismatchError):
            retrieve_deterministic_reach_set(self.report(HU1, "x1"), brownian_query(), self.deterministic())
