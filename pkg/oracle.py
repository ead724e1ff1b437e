"""Ground-truth estimates of the reachability probabilities.

Monte-Carlo simulation of the stopped processes by Euler-Maruyama with one
counter-based random stream per path, and a 1-D Crank-Nicolson solver of
the backward equations those probabilities satisfy.
"""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum, auto
from pathlib import Path

import numpy as np
from scipy.linalg import solve_banded
from scipy.stats import beta

from errors import DimensionMismatchError, ValidationError
from model import QueryKind, ReachQuery, SdeModel
from poly import Polynomial, evaluate, evaluate_many, univariate_coefficients

logger = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1


class PathOutcome(Enum):
    Hit = auto()
    Miss = auto()
    Excluded = auto()


@dataclass(frozen=True)
class SimConfig:
    step_h: float = 1e-3
    n_paths: int = 10000
    seed: int = 0
    boundary_tol: float = 0.0
    chunk_size: int = 1024
    workers: int = 1

    def __post_init__(self):
        if not self.step_h > 0:
            raise ValidationError(f"step must be positive, got {self.step_h}")
        if self.n_paths < 1:
            raise ValidationError(f"at least one path is required, got {self.n_paths}")
        if self.chunk_size < 1 or self.workers < 1:
            raise ValidationError("chunk size and worker count must be positive")

    def check(self, query: ReachQuery) -> None:
        if self.step_h > query.horizon_T:
            raise ValidationError(f"step {self.step_h} exceeds the horizon {query.horizon_T}")


@dataclass
class McEstimate:
    p_hat: float
    ci_low: float
    ci_high: float
    n_success: int
    n_paths: int
    n_excluded: int = 0
    step_h: float | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def std_error(self) -> float:
        return math.sqrt(max(self.p_hat * (1.0 - self.p_hat), 0.0) / self.n_paths) if self.n_paths else 0.0

    def to_dict(self) -> dict:
        return {"p_hat": self.p_hat, "ci_low": self.ci_low, "ci_high": self.ci_high,
                "n_success": self.n_success, "n_paths": self.n_paths, "n_excluded": self.n_excluded,
                "step_h": self.step_h, "warnings": list(self.warnings)}

    def __repr__(self):
        return (f"McEstimate {{\n\tp_hat: {self.p_hat}\n\t95% CI: [{self.ci_low}, {self.ci_high}]\n"
                f"\tsuccesses: {self.n_success}/{self.n_paths}\n}}")


def path_rng(seed: int, path_index: int) -> np.random.Generator:
    """Philox stream keyed by (seed, path index); its counter walks the steps."""
    return np.random.Generator(np.random.Philox(key=(path_index << 64) | (seed & _MASK64)))


def _step_sizes(T: float, h: float) -> np.ndarray:
    steps = math.ceil(T / h - 1e-12)
    sizes = np.full(steps, h)
    sizes[-1] = T - h * (steps - 1)
    return sizes


def _simulate_chunk(model: SdeModel, query: ReachQuery, cfg: SimConfig, first: int, count: int,
                    record: bool = False):
    sizes = _step_sizes(query.horizon_T, cfg.step_h)
    noise = np.stack([path_rng(cfg.seed, i).standard_normal((sizes.size, model.k))
                      for i in range(first, first + count)])
    x = np.tile(np.asarray(query.x0, dtype=float), (count, 1))
    running = np.ones(count, dtype=bool)
    hit = np.zeros(count, dtype=bool)
    left_domain = np.zeros(count, dtype=bool)
    overflow = np.zeros(count, dtype=bool)
    horizon = query.kind == QueryKind.Horizon
    history = [(0.0, x.copy(), ~running)] if record else None

    t = 0.0
    for m, dt in enumerate(sizes):
        idx = np.nonzero(running)[0]
        if idx.size == 0:
            break
        xa = x[idx]
        with np.errstate(over="ignore", invalid="ignore"):
            increment = np.einsum("pnk,pk->pn", model.diffusion_at(xa), noise[idx, m])
            moved = xa + model.drift_at(xa) * dt + increment * math.sqrt(dt)
        finite = np.isfinite(moved).all(axis=1)
        overflow[idx[~finite]] = True
        running[idx[~finite]] = False
        idx, moved = idx[finite], moved[finite]
        x[idx] = moved
        if horizon:
            reached = evaluate_many(query.g_S, moved) >= 0
            hit[idx[reached]] = True
            running[idx[reached]] = False
            idx, moved = idx[~reached], moved[~reached]
        exited = evaluate_many(query.g_X, moved) <= cfg.boundary_tol
        running[idx[exited]] = False
        left_domain[idx[exited]] = True
        t += dt
        if record:
            history.append((t, x.copy(), ~running))

    if not horizon:
        hit = ~overflow & ~left_domain & (evaluate_many(query.g_S, x) >= 0)
    return hit, overflow, history


def _outcomes(hit: np.ndarray, overflow: np.ndarray, horizon: bool) -> list[PathOutcome]:
    outcomes = []
    for h, o in zip(hit, overflow):
        if o and not horizon:
            outcomes.append(PathOutcome.Excluded)
        else:
            outcomes.append(PathOutcome.Hit if h else PathOutcome.Miss)
    return outcomes


def simulate_path(model: SdeModel, query: ReachQuery, cfg: SimConfig, path_index: int) -> PathOutcome:
    cfg.check(query)
    hit, overflow, _ = _simulate_chunk(model, query, cfg, path_index, 1)
    return _outcomes(hit, overflow, query.kind == QueryKind.Horizon)[0]


def clopper_pearson(k: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    if n <= 0:
        return 0.0, 1.0
    tail = (1.0 - confidence) / 2.0
    if k == 0:
        return 0.0, 1.0 - tail ** (1.0 / n)
    if k == n:
        return tail ** (1.0 / n), 1.0
    return float(beta.ppf(tail, k, n - k + 1)), float(beta.ppf(1.0 - tail, k + 1, n - k))


def estimate_probability(model: SdeModel, query: ReachQuery, cfg: SimConfig) -> McEstimate:
    cfg.check(query)
    horizon = query.kind == QueryKind.Horizon
    chunks = [(start, min(cfg.chunk_size, cfg.n_paths - start)) for start in range(0, cfg.n_paths, cfg.chunk_size)]

    def run(chunk: tuple[int, int]) -> tuple[int, int, int]:
        hit, overflow, _ = _simulate_chunk(model, query, cfg, *chunk)
        if horizon:
            return int(hit.sum()), chunk[1], int(overflow.sum())
        return int((hit & ~overflow).sum()), int((~overflow).sum()), int(overflow.sum())

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            counts = list(pool.map(run, chunks))
    else:
        counts = [run(chunk) for chunk in chunks]

    successes = sum(c[0] for c in counts)
    counted = sum(c[1] for c in counts)
    overflowed = sum(c[2] for c in counts)
    warnings = []
    if overflowed:
        what = "counted as misses" if horizon else "excluded"
        warnings.append(f"{overflowed} paths overflowed and were {what}")
        logger.warning(warnings[-1])
    low, high = clopper_pearson(successes, counted)
    p_hat = successes / counted if counted else 0.0
    return McEstimate(p_hat=p_hat, ci_low=min(low, p_hat), ci_high=max(high, p_hat), n_success=successes,
                      n_paths=counted, n_excluded=0 if horizon else overflowed, step_h=cfg.step_h,
                      warnings=warnings)


def refinement_study(model: SdeModel, query: ReachQuery, cfg: SimConfig, halvings: int = 3) -> list[McEstimate]:
    """Estimates at h, h/2, ..., h/2^halvings with the same seeds."""
    return [estimate_probability(model, query, replace(cfg, step_h=cfg.step_h / 2 ** j))
            for j in range(halvings + 1)]


def dump_trajectories(model: SdeModel, query: ReachQuery, cfg: SimConfig, directory: str | Path,
                      count: int = 10, first: int = 0) -> list[Path]:
    """One CSV per path with columns t, x1..xn, stopped_flag."""
    cfg.check(query)
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    _, _, history = _simulate_chunk(model, query, cfg, first, count, record=True)
    paths = []
    for p in range(count):
        path = directory / f"path_{first + p}.csv"
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["t"] + [f"x{i + 1}" for i in range(model.n)] + ["stopped_flag"])
            for t, states, stopped in history:
                writer.writerow([repr(t)] + [repr(float(v)) for v in states[p]] + [int(stopped[p])])
        paths.append(path)
    return paths


def integrate_deterministic(model: SdeModel, x0, T: float, h: float = 1e-3) -> np.ndarray:
    """Forward-Euler trajectory of the drift, shape (steps + 1, n)."""
    trajectory = [np.asarray(x0, dtype=float)]
    for dt in _step_sizes(T, h):
        x = trajectory[-1]
        trajectory.append(x + model.drift_at(x)[0] * dt)
    return np.array(trajectory)


def reach_avoid_confirmed(model: SdeModel, query: ReachQuery, x0, h: float = 1e-3) -> bool:
    """Whether the deterministic flow from x0 reaches Xs (within [0, T] or at T) while staying in X."""
    trajectory = integrate_deterministic(model, x0, query.horizon_T, h)
    gx = evaluate_many(query.g_X, trajectory)
    gs = evaluate_many(query.g_S, trajectory)
    if query.kind == QueryKind.Horizon:
        for x_in, s_in in zip(gx > 0, gs >= 0):
            if s_in:
                return True
            if not x_in:
                return False
        return False
    return bool((gx > 0).all() and gs[-1] >= 0)


def _real_roots(p: Polynomial) -> np.ndarray:
    if p.degree == 0:
        return np.zeros(0)
    roots = np.roots(univariate_coefficients(p))
    return np.sort(roots[np.abs(roots.imag) <= 1e-10].real)


def _interval_around(x0: float, roots: np.ndarray) -> tuple[float, float]:
    below, above = roots[roots < x0], roots[roots > x0]
    if below.size == 0 or above.size == 0:
        raise ValidationError("the finite-difference domain around x0 must be a bounded interval")
    return float(below.max()), float(above.min())


def fd_solve_1d(model: SdeModel, query: ReachQuery, grid: int = 2001, steps: int = 2000) -> float:
    """Crank-Nicolson in reversed time tau = T - t with upwind drift, interpolated at x0."""
    if model.n != 1:
        raise DimensionMismatchError("the finite-difference oracle is one-dimensional")
    if grid < 3:
        raise ValidationError(f"at least 3 grid nodes are required, got {grid}")
    if steps < 1:
        raise ValidationError("at least one time step is required")

    x0 = query.x0[0]
    horizon = query.kind == QueryKind.Horizon
    roots = _real_roots(query.g_X)
    if horizon:
        roots = np.concatenate([roots, _real_roots(query.g_S)])
    left, right = _interval_around(x0, roots)
    nodes = np.linspace(left, right, grid)
    dx = nodes[1] - nodes[0]

    if horizon:
        boundary = [1.0 if evaluate(query.g_S, [end]) >= -1e-9 else 0.0 for end in (left, right)]
        v = np.zeros(grid)
    else:
        boundary = [0.0, 0.0]
        v = (evaluate_many(query.g_S, nodes) >= 0).astype(float)
    v[0], v[-1] = boundary

    inner = nodes[1:-1].reshape(-1, 1)
    b = evaluate_many(model.drift[0], inner)
    a = sum(evaluate_many(model.diffusion[0][l], inner) ** 2 for l in range(model.k)) if model.k else 0.0
    a = np.broadcast_to(np.asarray(a, dtype=float), b.shape)
    # dv/dtau = lower v_{i-1} + diag v_i + upper v_{i+1}
    lower = 0.5 * a / dx ** 2 - np.minimum(b, 0.0) / dx
    upper = 0.5 * a / dx ** 2 + np.maximum(b, 0.0) / dx
    diag = -(lower + upper)

    m = grid - 2
    dtau = query.horizon_T / steps
    bands = np.zeros((3, m))
    bands[0, 1:] = -0.5 * dtau * upper[:-1]
    bands[1] = 1.0 - 0.5 * dtau * diag
    bands[2, :-1] = -0.5 * dtau * lower[1:]
    source = np.zeros(m)
    source[0] = lower[0] * boundary[0]
    source[-1] += upper[-1] * boundary[1]

    u = v[1:-1].copy()
    for _ in range(steps):
        rhs = u + 0.5 * dtau * diag * u + dtau * source
        rhs[1:] += 0.5 * dtau * lower[1:] * u[:-1]
        rhs[:-1] += 0.5 * dtau * upper[:-1] * u[1:]
        u = solve_banded((1, 1), bands, rhs)
    v[1:-1] = u
    return float(np.interp(x0, nodes, v))
