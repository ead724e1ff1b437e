"""SDE models, single-inequality semialgebraic sets, reachability queries and model files."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum, auto
from pathlib import Path

import numpy as np

from bound import Bound
from errors import DimensionMismatchError, ModelFileError, ReachError, ValidationError
from poly import Polynomial, evaluate, evaluate_many, parse

logger = logging.getLogger(__name__)


class QueryKind(Enum):
    Horizon = auto()
    Instant = auto()


class SetSense(Enum):
    Open = auto()     # g > 0
    Closed = auto()   # g >= 0


class Membership(Enum):
    Inside = auto()
    BoundaryTolerant = auto()
    Outside = auto()


@dataclass(frozen=True)
class SdeModel:
    n: int
    k: int
    drift: tuple[Polynomial, ...]
    diffusion: tuple[tuple[Polynomial, ...], ...]

    def __post_init__(self):
        if len(self.drift) != self.n:
            raise DimensionMismatchError(f"drift has {len(self.drift)} entries, expected {self.n}")
        if len(self.diffusion) != self.n or any(len(row) != self.k for row in self.diffusion):
            raise DimensionMismatchError(f"diffusion must be {self.n}x{self.k}")
        for entry in self.entries():
            if entry.nvars != self.n:
                raise DimensionMismatchError(f"entry {entry} is not over {self.n} variables")
            if entry.has_time:
                raise ReachError("model entries must be time-independent")

    def entries(self) -> list[Polynomial]:
        return list(self.drift) + [entry for row in self.diffusion for entry in row]

    def has_zero_diffusion(self) -> bool:
        return all(entry.is_zero() for row in self.diffusion for entry in row)

    def without_diffusion(self) -> SdeModel:
        zero = Polynomial.zero(self.n)
        return replace(self, diffusion=tuple(tuple(zero for _ in range(self.k)) for _ in range(self.n)))

    def drift_at(self, points: np.ndarray) -> np.ndarray:
        return np.stack([evaluate_many(b, points) for b in self.drift], axis=-1)

    def diffusion_at(self, points: np.ndarray) -> np.ndarray:
        """Array of shape (m, n, k)."""
        m = np.asarray(points).reshape(-1, self.n).shape[0]
        out = np.zeros((m, self.n, self.k))
        for i, row in enumerate(self.diffusion):
            for j, entry in enumerate(row):
                if not entry.is_zero():
                    out[:, i, j] = evaluate_many(entry, points)
        return out

    def __repr__(self):
        text = f"SdeModel [n={self.n}, k={self.k}] {{\n"
        for i, b in enumerate(self.drift):
            text += f"\tb{i + 1}: {b.to_text()}\n"
        for i, row in enumerate(self.diffusion):
            text += f"\tsigma{i + 1}: [" + ", ".join(e.to_text() for e in row) + "]\n"
        return text + "}"


@dataclass(frozen=True)
class SemialgebraicSet:
    defining: Polynomial
    sense: SetSense

    def contains(self, point) -> bool:
        value = evaluate(self.defining, point)
        return value > 0 if self.sense == SetSense.Open else value >= 0


def membership(s: SemialgebraicSet, point, tol_b: float = 1e-9) -> Membership:
    value = evaluate(s.defining, point)
    if abs(value) <= tol_b:
        return Membership.BoundaryTolerant
    return Membership.Inside if value > 0 else Membership.Outside


@dataclass(frozen=True)
class ReachQuery:
    domain: SemialgebraicSet
    target: SemialgebraicSet
    horizon_T: float
    x0: tuple[float, ...]
    kind: QueryKind
    bounding_box: tuple[Bound, ...] = ()

    def __post_init__(self):
        if not (0 < self.horizon_T < float("inf")):
            raise ValidationError(f"horizon T must be positive and finite, got {self.horizon_T}")
        if self.domain.sense != SetSense.Open or self.target.sense != SetSense.Closed:
            raise ReachError("domain must be open and target closed")

    @property
    def n(self) -> int:
        return len(self.x0)

    @property
    def g_X(self) -> Polynomial:
        return self.domain.defining

    @property
    def g_S(self) -> Polynomial:
        return self.target.defining

    def with_horizon(self, T: float) -> ReachQuery:
        return replace(self, horizon_T=T)

    def with_kind(self, kind: QueryKind) -> ReachQuery:
        return replace(self, kind=kind)

    def box_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if len(self.bounding_box) != self.n:
            raise ValidationError("a bounding box with one interval per state is required")
        lows = np.array([b.lower for b in self.bounding_box])
        highs = np.array([b.upper for b in self.bounding_box])
        return lows, highs

    def sample_box(self, rng: np.random.Generator, count: int) -> np.ndarray:
        lows, highs = self.box_arrays()
        return rng.uniform(lows, highs, size=(count, self.n))


@dataclass
class ValidationReport:
    samples: int
    target_samples: int = 0
    target_interior_samples: int = 0
    violations: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "target_samples": self.target_samples,
            "target_interior_samples": self.target_interior_samples,
            "violations": list(self.violations),
            "warnings": list(self.warnings),
        }


def validate(model: SdeModel,
             query: ReachQuery,
             samples: int = 10000,
             seed: int = 0,
             lower_bound_requested: bool = False) -> ValidationReport:
    """Check the standing assumptions: x0 in X minus Xs (authoritative) and,
    by rejection sampling over the bounding box, Xs inside X and a
    non-empty interior of Xs (advisory)."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if query.n != model.n or query.g_X.nvars != model.n or query.g_S.nvars != model.n:
        raise DimensionMismatchError("query and model dimensions differ")

    report = ValidationReport(samples=samples)
    gx0 = evaluate(query.g_X, query.x0)
    gs0 = evaluate(query.g_S, query.x0)
    if gx0 <= 0:
        report.violations.append(f"x0 outside domain (g_X(x0) = {gx0})")
    if gs0 >= 0:
        report.violations.append(f"x0 inside target (g_S(x0) = {gs0})")
    if report.violations:
        raise ValidationError(report.violations[0], report.violations)

    rng = np.random.default_rng(seed)
    points = query.sample_box(rng, samples)
    gx = evaluate_many(query.g_X, points)
    gs = evaluate_many(query.g_S, points)
    in_target = gs >= 0
    report.target_samples = int(in_target.sum())
    report.target_interior_samples = int((gs > 0).sum())

    escaped = in_target & (gx <= 0)
    if escaped.any():
        witness = points[np.argmax(escaped)]
        report.violations.append(f"target not inside domain: point {witness.tolist()} has g_S >= 0 and g_X <= 0")
        raise ValidationError(report.violations[0], report.violations)

    if report.target_samples == 0:
        report.warnings.append("empty target: no sampled point satisfies g_S >= 0")
    if lower_bound_requested and report.target_interior_samples == 0:
        report.warnings.append("no sampled point in the interior of the target (g_S > 0)")
    for warning in report.warnings:
        logger.warning(warning)
    return report


_MODEL_FIELDS = {"n", "k", "drift", "diffusion", "domain_g", "target_g", "T", "x0", "kind", "bounding_box"}


def model_from_dict(data: dict) -> tuple[SdeModel, ReachQuery]:
    try:
        return _model_from_dict(data)
    except (TypeError, ValueError, KeyError) as error:
        raise ModelFileError(f"malformed model file: {error}") from None


def _model_from_dict(data: dict) -> tuple[SdeModel, ReachQuery]:
    unknown = set(data) - _MODEL_FIELDS
    if unknown:
        raise ModelFileError(f"unknown fields: {sorted(unknown)}")
    missing = _MODEL_FIELDS - set(data)
    if missing:
        raise ModelFileError(f"missing fields: {sorted(missing)}")

    n, k = int(data["n"]), int(data["k"])
    try:
        drift = tuple(parse(expr, n) for expr in data["drift"])
        diffusion = tuple(tuple(parse(expr, n) for expr in row) for row in data["diffusion"])
        domain_g = parse(data["domain_g"], n)
        target_g = parse(data["target_g"], n)
    except (TypeError, AttributeError) as error:
        raise ModelFileError(f"polynomials must be strings: {error}") from None

    kind_name = str(data["kind"]).lower()
    if kind_name not in ("horizon", "instant"):
        raise ModelFileError(f"kind must be 'horizon' or 'instant', got '{data['kind']}'")
    box = data["bounding_box"]
    if len(box) != n or any(len(pair) != 2 for pair in box):
        raise ModelFileError("bounding_box must hold one [lo, hi] pair per state")

    model = SdeModel(n=n, k=k, drift=drift, diffusion=diffusion)
    query = ReachQuery(
        domain=SemialgebraicSet(domain_g, SetSense.Open),
        target=SemialgebraicSet(target_g, SetSense.Closed),
        horizon_T=float(data["T"]),
        x0=tuple(float(x) for x in data["x0"]),
        kind=QueryKind.Horizon if kind_name == "horizon" else QueryKind.Instant,
        bounding_box=tuple(Bound(float(lo), float(hi)) for lo, hi in box))
    if query.n != n:
        raise ModelFileError(f"x0 has {query.n} entries, expected {n}")
    return model, query


def load_model_file(path: str | Path) -> tuple[SdeModel, ReachQuery]:
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as error:
        raise ModelFileError(f"cannot read model file {path}: {error}") from None
    if not isinstance(data, dict):
        raise ModelFileError("model file must hold a JSON object")
    return model_from_dict(data)


def model_to_dict(model: SdeModel, query: ReachQuery) -> dict:
    return {
        "n": model.n,
        "k": model.k,
        "drift": [b.to_text() for b in model.drift],
        "diffusion": [[e.to_text() for e in row] for row in model.diffusion],
        "domain_g": query.g_X.to_text(),
        "target_g": query.g_S.to_text(),
        "T": query.horizon_T,
        "x0": list(query.x0),
        "kind": query.kind.name.lower(),
        "bounding_box": [b.to_list() for b in query.bounding_box],
    }
