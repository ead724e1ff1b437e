import numpy as np
import pytest

from bound import Bound
from certificates import CertificateKind, Region, Relation, build_condition, extract_report
from errors import RegionSamplingError
from model import QueryKind, ReachQuery, SemialgebraicSet, SetSense, load_model_file
from poly import Monomial, evaluate_many, parse
from residual import residual_check, sample_region


@pytest.fixture
def deterministic_hit(benchmark_path):
    return load_model_file(benchmark_path("deterministic_hit"))


def constant_certificate(problem, value: float) -> list[float]:
    """Decision values with v = value and every other unknown zero."""
    values = [0.0] * len(problem.vars)
    v = problem.unknowns["v"]
    values[v.vars[v.basis.index(Monomial())].index] = value
    return values


class TestSampleRegion:
    def test_interval_boundary(self, deterministic_hit):
        _, query = deterministic_hit
        region = Region("dX", ((query.g_X, Relation.Eq),))
        points = sample_region(region, query, 100, np.random.default_rng(0))
        np.testing.assert_allclose(points[:, 0], [-2.0, 2.0], atol=1e-9)

    def test_target_boundary_inside_domain(self, deterministic_hit):
        _, query = deterministic_hit
        region = Region("dXs", ((query.g_S, Relation.Eq), (query.g_X, Relation.Ge)))
        points = sample_region(region, query, 100, np.random.default_rng(0))
        np.testing.assert_allclose(points[:, 0], [1.0], atol=1e-9)

    def test_circle(self, benchmark_path):
        _, query = load_model_file(benchmark_path("rotational2d"))
        region = Region("dX", ((query.g_X, Relation.Eq),))
        points = sample_region(region, query, 50, np.random.default_rng(1))
        assert points.shape[0] >= 50
        np.testing.assert_allclose(np.linalg.norm(points, axis=1), 2.0, atol=1e-6)

    def test_semialgebraic_interior(self, deterministic_hit):
        _, query = deterministic_hit
        region = Region("Xs", ((query.g_S, Relation.Ge), (query.g_X, Relation.Ge)))
        points = sample_region(region, query, 500, np.random.default_rng(2))
        assert points.shape[0] == 500
        assert (evaluate_many(query.g_S, points) >= 0).all()
        assert (evaluate_many(query.g_X, points) >= 0).all()

    def test_time_factor_ignored(self, deterministic_hit):
        _, query = deterministic_hit
        t_box = parse("t*(2 - t)", 1)
        region = Region("[0,T]xdX", ((query.g_X, Relation.Eq), (t_box, Relation.Ge)))
        assert sample_region(region, query, 10, np.random.default_rng(0)).shape == (2, 1)


class TestResidualCheck:
    def test_exact_certificate_passes(self, deterministic_hit):
        model, query = deterministic_hit
        problem = build_condition(CertificateKind.HU1, model, query)
        report = extract_report(problem, constant_certificate(problem, 1.0), "optimal")
        summary = residual_check(report, problem, samples=300)
        assert summary.checked
        assert summary.worst_violation <= 1e-12
        assert summary.unchecked_regions == []

    def test_injected_fault_detected(self, deterministic_hit):
        model, query = deterministic_hit
        problem = build_condition(CertificateKind.HU1, model, query)
        report = extract_report(problem, constant_certificate(problem, 1.0 - 1e-3), "optimal")
        summary = residual_check(report, problem, samples=300)
        assert not summary.checked
        assert summary.label == "violated"
        assert summary.worst_violation == pytest.approx(1e-3)

    def test_empty_region_is_reported(self, deterministic_hit):
        model, query = deterministic_hit
        far = ReachQuery(domain=query.domain, target=SemialgebraicSet(parse("x1 - 3", 1), SetSense.Closed),
                         horizon_T=query.horizon_T, x0=query.x0, kind=QueryKind.Horizon,
                         bounding_box=(Bound(-2.0, 2.0),))
        problem = build_condition(CertificateKind.HU1, model, far)
        report = extract_report(problem, constant_certificate(problem, 1.0), "optimal")
        summary = residual_check(report, problem, samples=100)
        assert summary.unchecked_regions
        assert all("dXs" in region for region in summary.unchecked_regions)

    def test_requires_solved_values(self, deterministic_hit):
        model, query = deterministic_hit
        problem = build_condition(CertificateKind.HU1, model, query)
        report = extract_report(problem, constant_certificate(problem, 1.0), "optimal")
        report.values = None
        with pytest.raises(RegionSamplingError):
            residual_check(report, problem)
