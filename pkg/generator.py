from __future__ import annotations

from dataclasses import dataclass

from errors import DimensionMismatchError
from model import SdeModel
from poly import TIME, Polynomial, differentiate


@dataclass(frozen=True)
class GeneratorResult:
    full: Polynomial
    time_only: Polynomial

    @property
    def spatial(self) -> Polynomial:
        return self.full - self.time_only


def spatial_part(v: Polynomial, model: SdeModel) -> Polynomial:
    """grad v . b + 1/2 sum_l sigma_l^T H sigma_l, one diffusion column at a time."""
    result = Polynomial.zero(model.n, v.has_time)
    gradient = [differentiate(v, i) for i in range(model.n)]
    for i in range(model.n):
        result = result + gradient[i] * model.drift[i]
    for l in range(model.k):
        column = [model.diffusion[i][l] for i in range(model.n)]
        if all(entry.is_zero() for entry in column):
            continue
        for i in range(model.n):
            if column[i].is_zero() or gradient[i].is_zero():
                continue
            for j in range(model.n):
                if column[j].is_zero():
                    continue
                second = differentiate(gradient[i], j)
                if not second.is_zero():
                    result = result + (column[i] * column[j] * second).scale(0.5)
    return result


def apply_generator(v: Polynomial, model: SdeModel) -> GeneratorResult:
    if v.nvars != model.n:
        raise DimensionMismatchError(f"v has {v.nvars} variables, model has {model.n}")
    time_only = differentiate(v, TIME)
    full = time_only + spatial_part(v, model)
    return GeneratorResult(full=full, time_only=time_only)
