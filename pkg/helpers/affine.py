"""Polynomials whose coefficients are affine in scalar decision variables.

An ``AffinePolynomial`` stands for ``constant + sum_k y_k * parts[k]`` with
fixed polynomials ``constant`` and ``parts[k]`` and decision variables
``y_k`` (indices into a ``VarsInfo``).
"""
from __future__ import annotations

from typing import Callable

from poly import Monomial, Polynomial, evaluate, substitute_time


class AffineScalar:
    def __init__(self, constant: float = 0.0, coeffs: dict[int, float] | None = None) -> None:
        self.constant = float(constant)
        self.coeffs: dict[int, float] = {k: float(c) for k, c in (coeffs or {}).items() if c != 0.0}

    def __add__(self, other: AffineScalar | float) -> AffineScalar:
        if not isinstance(other, AffineScalar):
            return AffineScalar(self.constant + other, self.coeffs)
        coeffs = dict(self.coeffs)
        for k, c in other.coeffs.items():
            coeffs[k] = coeffs.get(k, 0.0) + c
        return AffineScalar(self.constant + other.constant, coeffs)

    __radd__ = __add__

    def scale(self, factor: float) -> AffineScalar:
        return AffineScalar(self.constant * factor, {k: c * factor for k, c in self.coeffs.items()})

    def __mul__(self, factor: float) -> AffineScalar:
        return self.scale(factor)

    __rmul__ = __mul__

    def __neg__(self) -> AffineScalar:
        return self.scale(-1.0)

    def __sub__(self, other: AffineScalar | float) -> AffineScalar:
        return self + (-other)

    def value(self, values) -> float:
        return self.constant + sum(c * values[k] for k, c in self.coeffs.items())

    def __repr__(self):
        parts = [f"{self.constant}"] + [f"{c}*y{k}" for k, c in sorted(self.coeffs.items())]
        return "AffineScalar { " + " + ".join(parts) + " }"


class AffinePolynomial:
    def __init__(self, constant: Polynomial, parts: dict[int, Polynomial] | None = None) -> None:
        self.constant = constant
        self.parts: dict[int, Polynomial] = {k: p for k, p in (parts or {}).items() if not p.is_zero()}

    @property
    def nvars(self) -> int:
        return self.constant.nvars

    @property
    def has_time(self) -> bool:
        return self.constant.has_time or any(p.has_time for p in self.parts.values())

    @staticmethod
    def of(p: Polynomial) -> AffinePolynomial:
        return AffinePolynomial(p)

    @staticmethod
    def variable(index: int, nvars: int) -> AffinePolynomial:
        return AffinePolynomial(Polynomial.zero(nvars), {index: Polynomial.constant(1.0, nvars)})

    @staticmethod
    def template(indices: list[int], basis: list[Monomial], nvars: int) -> AffinePolynomial:
        return AffinePolynomial(Polynomial.zero(nvars),
                                {k: Polynomial({m: 1.0}, nvars) for k, m in zip(indices, basis)})

    def __add__(self, other: AffinePolynomial | Polynomial | float) -> AffinePolynomial:
        if isinstance(other, (Polynomial, int, float)):
            return AffinePolynomial(self.constant + other, self.parts)
        parts = dict(self.parts)
        for k, p in other.parts.items():
            parts[k] = parts[k] + p if k in parts else p
        return AffinePolynomial(self.constant + other.constant, parts)

    __radd__ = __add__

    def scale(self, factor: float) -> AffinePolynomial:
        return AffinePolynomial(self.constant.scale(factor), {k: p.scale(factor) for k, p in self.parts.items()})

    def __neg__(self) -> AffinePolynomial:
        return self.scale(-1.0)

    def __sub__(self, other: AffinePolynomial | Polynomial | float) -> AffinePolynomial:
        return self + (-other)

    def __rsub__(self, other: Polynomial | float) -> AffinePolynomial:
        return (-self) + other

    def __mul__(self, other: Polynomial | float) -> AffinePolynomial:
        if not isinstance(other, Polynomial):
            return self.scale(float(other))
        return AffinePolynomial(self.constant * other, {k: p * other for k, p in self.parts.items()})

    __rmul__ = __mul__

    def map(self, fn: Callable[[Polynomial], Polynomial]) -> AffinePolynomial:
        """Apply a linear map on polynomials to every part."""
        return AffinePolynomial(fn(self.constant), {k: fn(p) for k, p in self.parts.items()})

    def at_time(self, value: float) -> AffinePolynomial:
        return self.map(lambda p: substitute_time(p, value))

    def at_point(self, point, tval: float | None = None) -> AffineScalar:
        def ev(p: Polynomial) -> float:
            return evaluate(p, point, tval if p.has_time else None)
        return AffineScalar(ev(self.constant), {k: ev(p) for k, p in self.parts.items()})

    def substitute(self, values) -> Polynomial:
        """Fix every decision variable to ``values[k]``."""
        result = self.constant
        for k, p in self.parts.items():
            result = result + p.scale(float(values[k]))
        return result

    @property
    def degree(self) -> int:
        return max([self.constant.degree] + [p.degree for p in self.parts.values()])

    def monomials(self) -> set[Monomial]:
        monos = {m for m, _ in self.constant.items()}
        for p in self.parts.values():
            monos.update(m for m, _ in p.items())
        return monos

    def __repr__(self):
        text = f"AffinePolynomial {{\n\tconstant: {self.constant.to_text()}\n"
        for k, p in sorted(self.parts.items()):
            text += f"\ty{k}: {p.to_text()}\n"
        return text + "}"

    def __eq__(self, other) -> bool:
        return isinstance(other, AffinePolynomial) and self.constant == other.constant and self.parts == other.parts

    __hash__ = None
