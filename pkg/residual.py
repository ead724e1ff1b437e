"""Sampling-based check of a solved certificate against its own conditions."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from certificates import BoundReport, CertificateProblem, Region
from errors import RegionSamplingError
from model import ReachQuery
from poly import Polynomial, evaluate_many, univariate_coefficients

logger = logging.getLogger(__name__)


@dataclass
class RegionCheck:
    condition: str
    region: str
    points: int
    worst_violation: float | None

    @property
    def sampled(self) -> bool:
        return self.points > 0

    def to_dict(self) -> dict:
        return {"condition": self.condition, "region": self.region, "points": self.points,
                "worst_violation": self.worst_violation}


@dataclass
class ResidualSummary:
    margin: float
    worst_violation: float = 0.0
    regions: list[RegionCheck] = field(default_factory=list)

    @property
    def checked(self) -> bool:
        return self.worst_violation <= self.margin

    @property
    def unchecked_regions(self) -> list[str]:
        return [f"{r.condition} over {r.region}" for r in self.regions if not r.sampled]

    @property
    def label(self) -> str:
        return "checked" if self.checked else "violated"

    def to_dict(self) -> dict:
        return {"status": self.label, "worst_violation": self.worst_violation, "margin": self.margin,
                "unchecked_regions": self.unchecked_regions, "regions": [r.to_dict() for r in self.regions]}


def _state_parts(region: Region) -> tuple[list[Polynomial], list[Polynomial]]:
    ineqs = [g for g in region.inequalities() if not g.has_time]
    eqs = [g for g in region.equalities() if not g.has_time]
    return ineqs, eqs


def _keep(points: np.ndarray, ineqs: list[Polynomial], tol: float) -> np.ndarray:
    if points.shape[0] == 0:
        return points
    mask = np.ones(points.shape[0], dtype=bool)
    for g in ineqs:
        mask &= evaluate_many(g, points) >= -tol
    return points[mask]


def _roots_1d(h: Polynomial, lows: np.ndarray, highs: np.ndarray) -> np.ndarray:
    roots = np.roots(univariate_coefficients(h))
    real = roots[np.abs(roots.imag) <= 1e-10].real
    slack = 1e-9 * max(1.0, abs(lows[0]), abs(highs[0]))
    inside = real[(real >= lows[0] - slack) & (real <= highs[0] + slack)]
    return np.unique(inside).reshape(-1, 1)


def _roots_on_lines(h: Polynomial, lows: np.ndarray, highs: np.ndarray, count: int,
                    rng: np.random.Generator, xtol: float, grid: int = 64) -> np.ndarray:
    n = lows.shape[0]
    found = []
    for _ in range(count):
        anchor = rng.uniform(lows, highs)
        direction = rng.normal(size=n)
        direction /= np.linalg.norm(direction)
        # parameter range keeping anchor + s * direction inside the box
        with np.errstate(divide="ignore"):
            a = (lows - anchor) / direction
            b = (highs - anchor) / direction
        s_lo = np.max(np.minimum(a, b))
        s_hi = np.min(np.maximum(a, b))
        s = np.linspace(s_lo, s_hi, grid)
        line = anchor[None, :] + s[:, None] * direction[None, :]
        values = evaluate_many(h, line)
        found.extend(line[values == 0.0])
        for k in np.nonzero(np.sign(values[:-1]) * np.sign(values[1:]) < 0)[0]:
            root = brentq(lambda r: evaluate_many(h, anchor + r * direction)[0], s[k], s[k + 1], xtol=xtol)
            found.append(anchor + root * direction)
    return np.array(found).reshape(-1, n)


def sample_region(region: Region,
                  query: ReachQuery,
                  count: int,
                  rng: np.random.Generator,
                  boundary_tol: float = 1e-8,
                  max_batches: int = 50) -> np.ndarray:
    """Points of the state projection of ``region``; equalities are located by root finding."""
    lows, highs = query.box_arrays()
    ineqs, eqs = _state_parts(region)
    if not eqs:
        kept = []
        total = 0
        for _ in range(max_batches):
            batch = _keep(rng.uniform(lows, highs, size=(count, query.n)), ineqs, 0.0)
            kept.append(batch)
            total += batch.shape[0]
            if total >= count:
                break
        return np.vstack(kept)[:count]

    h, others = eqs[0], eqs[1:]
    if query.n == 1:
        points = _roots_1d(h, lows, highs)
    else:
        points = _roots_on_lines(h, lows, highs, count, rng, xtol=boundary_tol)
    for other in others:
        points = points[np.abs(evaluate_many(other, points)) <= boundary_tol] if points.shape[0] else points
    return _keep(points, ineqs, boundary_tol)


def residual_check(report: BoundReport,
                   problem: CertificateProblem,
                   samples: int = 2000,
                   margin: float = 1e-5,
                   seed: int = 0,
                   boundary_tol: float = 1e-8) -> ResidualSummary:
    if report.values is None:
        raise RegionSamplingError("the report carries no solved decision values")
    rng = np.random.default_rng(seed)
    T = problem.query.horizon_T
    summary = ResidualSummary(margin=margin)
    for condition in problem.constraints:
        expression = condition.expression.substitute(report.values)
        for region in condition.regions:
            points = sample_region(region, problem.query, samples, rng, boundary_tol)
            if points.shape[0] == 0:
                logger.warning("no sample points in %s for '%s'; region unchecked", region.name, condition.label)
                summary.regions.append(RegionCheck(condition.label, region.name, 0, None))
                continue
            tvals = rng.uniform(0.0, T, size=points.shape[0]) if region.has_time or expression.has_time else None
            values = evaluate_many(expression, points, tvals)
            worst = float(max(0.0, -values.min()))
            summary.regions.append(RegionCheck(condition.label, region.name, points.shape[0], worst))
            summary.worst_violation = max(summary.worst_violation, worst)
    if not summary.checked:
        logger.warning("%s certificate violates its conditions by %.3g (margin %.3g)",
                       report.kind.value, summary.worst_violation, margin)
    return summary
