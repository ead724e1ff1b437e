"""Sparse multivariate polynomials in x1..xn and an optional time variable t.

Coefficients are floats and only exact zeros are pruned, so identities on
integer-coefficient inputs stay exact. The time variable is a distinguished
index (``TIME``) that is never counted in ``nvars``.
"""
from __future__ import annotations

import itertools
import re
from typing import Iterable, Mapping

import numpy as np

from errors import DimensionMismatchError, PolynomialSyntaxError, UnknownVariableError

TIME = -1


def var_name(var: int) -> str:
    return "t" if var == TIME else f"x{var + 1}"


def var_index(name: str) -> int:
    if name == "t":
        return TIME
    match = re.fullmatch(r"x([1-9][0-9]*)", name)
    if match is None:
        raise ValueError(f"not a variable name: {name}")
    return int(match.group(1)) - 1


def _var_order(var: int) -> int:
    # t sorts after every state variable
    return 1 << 30 if var == TIME else var


class Monomial:
    __slots__ = ("exponents", "_hash")

    def __init__(self, exponents: Mapping[int, int] | Iterable[tuple[int, int]] = ()) -> None:
        items = exponents.items() if isinstance(exponents, Mapping) else exponents
        merged: dict[int, int] = {}
        for var, exp in items:
            if exp < 0:
                raise ValueError("negative exponent")
            merged[var] = merged.get(var, 0) + exp
        self.exponents: tuple[tuple[int, int], ...] = tuple(
            sorted(((v, e) for v, e in merged.items() if e != 0), key=lambda item: _var_order(item[0])))
        self._hash = hash(self.exponents)

    @property
    def degree(self) -> int:
        return sum(exp for _, exp in self.exponents)

    def exponent(self, var: int) -> int:
        for v, e in self.exponents:
            if v == var:
                return e
        return 0

    def has_var(self, var: int) -> bool:
        return self.exponent(var) > 0

    def max_state_var(self) -> int:
        return max((v for v, _ in self.exponents if v != TIME), default=-1)

    def without(self, var: int) -> Monomial:
        return Monomial((v, e) for v, e in self.exponents if v != var)

    def vector(self, nvars: int) -> tuple[int, ...]:
        vec = [0] * (nvars + 1)
        for v, e in self.exponents:
            vec[nvars if v == TIME else v] = e
        return tuple(vec)

    def sort_key(self, nvars: int) -> tuple:
        return self.degree, tuple(-e for e in self.vector(nvars))

    def __mul__(self, other: Monomial) -> Monomial:
        return Monomial(self.exponents + other.exponents)

    def __eq__(self, other) -> bool:
        return isinstance(other, Monomial) and self.exponents == other.exponents

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        if not self.exponents:
            return "1"
        return "*".join(var_name(v) if e == 1 else f"{var_name(v)}^{e}" for v, e in self.exponents)


ONE = Monomial()


class Polynomial:
    __slots__ = ("_terms", "nvars", "has_time", "_compiled")

    def __init__(self,
                 terms: Mapping[Monomial, float] | None = None,
                 nvars: int = 0,
                 has_time: bool = False) -> None:
        self._terms: dict[Monomial, float] = {}
        for mono, coeff in (terms or {}).items():
            coeff = float(coeff)
            if coeff != 0.0:
                self._terms[mono] = coeff
        for mono in self._terms:
            if mono.max_state_var() >= nvars:
                raise DimensionMismatchError(f"monomial {mono} exceeds nvars={nvars}")
        self.nvars = nvars
        self.has_time = has_time or any(mono.has_var(TIME) for mono in self._terms)
        self._compiled: tuple[np.ndarray, np.ndarray] | None = None

    @staticmethod
    def constant(value: float, nvars: int, has_time: bool = False) -> Polynomial:
        return Polynomial({ONE: value}, nvars, has_time)

    @staticmethod
    def variable(var: int, nvars: int) -> Polynomial:
        return Polynomial({Monomial({var: 1}): 1.0}, nvars, var == TIME)

    @staticmethod
    def zero(nvars: int, has_time: bool = False) -> Polynomial:
        return Polynomial({}, nvars, has_time)

    @property
    def terms(self) -> dict[Monomial, float]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def coefficient(self, mono: Monomial) -> float:
        return self._terms.get(mono, 0.0)

    @property
    def degree(self) -> int:
        return max((mono.degree for mono in self._terms), default=0)

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(mono == ONE for mono in self._terms)

    def max_abs_coefficient(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    def with_time(self) -> Polynomial:
        return Polynomial(self._terms, self.nvars, True)

    def __check(self, other: Polynomial) -> None:
        if self.nvars != other.nvars:
            raise DimensionMismatchError(f"nvars {self.nvars} != {other.nvars}")

    def __add__(self, other: Polynomial | float) -> Polynomial:
        if isinstance(other, (int, float)):
            other = Polynomial.constant(other, self.nvars)
        elif not isinstance(other, Polynomial):
            return NotImplemented
        self.__check(other)
        terms = dict(self._terms)
        for mono, coeff in other._terms.items():
            terms[mono] = terms.get(mono, 0.0) + coeff
        return Polynomial(terms, self.nvars, self.has_time or other.has_time)

    __radd__ = __add__

    def __neg__(self) -> Polynomial:
        return self.scale(-1.0)

    def __sub__(self, other: Polynomial | float) -> Polynomial:
        return self + (-other)

    def __rsub__(self, other: float) -> Polynomial:
        return (-self) + other

    def scale(self, factor: float) -> Polynomial:
        return Polynomial({m: c * factor for m, c in self._terms.items()}, self.nvars, self.has_time)

    def __mul__(self, other: Polynomial | float) -> Polynomial:
        if isinstance(other, (int, float)):
            return self.scale(float(other))
        if not isinstance(other, Polynomial):
            return NotImplemented
        self.__check(other)
        terms: dict[Monomial, float] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                mono = m1 * m2
                terms[mono] = terms.get(mono, 0.0) + c1 * c2
        return Polynomial(terms, self.nvars, self.has_time or other.has_time)

    __rmul__ = __mul__

    def __pow__(self, exp: int) -> Polynomial:
        if exp < 0:
            raise ValueError("negative power")
        result = Polynomial.constant(1.0, self.nvars, self.has_time)
        for _ in range(exp):
            result = result * self
        return result

    def __eq__(self, other) -> bool:
        return isinstance(other, Polynomial) and self.nvars == other.nvars and self._terms == other._terms

    def __hash__(self) -> int:
        return hash((self.nvars, frozenset(self._terms.items())))

    def sorted_terms(self) -> list[tuple[Monomial, float]]:
        return sorted(self._terms.items(), key=lambda item: item[0].sort_key(self.nvars))

    def to_text(self) -> str:
        if not self._terms:
            return "0"
        text = ""
        for mono, coeff in self.sorted_terms():
            sign = "-" if coeff < 0 else "+"
            magnitude = _format_coefficient(abs(coeff))
            if mono == ONE:
                body = magnitude
            elif magnitude == "1":
                body = repr(mono)
            else:
                body = f"{magnitude}*{mono!r}"
            if text == "":
                text = body if sign == "+" else f"-{body}"
            else:
                text += f" {sign} {body}"
        return text

    def __repr__(self) -> str:
        return f"Polynomial {{nvars: {self.nvars}, has_time: {self.has_time}, {self.to_text()}" + " }"

    def __str__(self) -> str:
        return self.to_text()

    def _exponent_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        if self._compiled is None:
            monos = list(self._terms)
            exps = np.array([mono.vector(self.nvars) for mono in monos], dtype=np.int64).reshape(len(monos), self.nvars + 1)
            coeffs = np.array([self._terms[m] for m in monos], dtype=float)
            self._compiled = (exps, coeffs)
        return self._compiled


def _format_coefficient(value: float) -> str:
    if value.is_integer() and value < 1e15:
        return str(int(value))
    return repr(value)


def arith(a: Polynomial, b: Polynomial | float, op: str) -> Polynomial:
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "scale":
        return a.scale(float(b))
    raise ValueError(f"unknown op '{op}'")


def evaluate(p: Polynomial, point, tval: float | None = None) -> float:
    point = np.asarray(point, dtype=float).reshape(-1)
    if point.shape[0] != p.nvars:
        raise DimensionMismatchError(f"point has {point.shape[0]} entries, polynomial has {p.nvars} variables")
    if p.has_time != (tval is not None):
        raise DimensionMismatchError("time value must be supplied iff the polynomial has t")
    total = 0.0
    for mono, coeff in p.items():
        value = coeff
        for var, exp in mono.exponents:
            value *= (tval if var == TIME else point[var]) ** exp
        total += value
    return total


def evaluate_many(p: Polynomial, points, tvals=None) -> np.ndarray:
    """Vectorized evaluation at the rows of ``points`` (shape m x nvars)."""
    points = np.asarray(points, dtype=float).reshape(-1, p.nvars)
    m = points.shape[0]
    if tvals is None:
        if p.has_time:
            raise DimensionMismatchError("time values required")
        tcol = np.zeros((m, 1))
    else:
        tcol = np.broadcast_to(np.asarray(tvals, dtype=float), (m,)).reshape(m, 1)
    exps, coeffs = p._exponent_matrix()
    if coeffs.size == 0:
        return np.zeros(m)
    full = np.hstack([points, tcol])
    powers = np.prod(full[:, None, :] ** exps[None, :, :], axis=2)
    return powers @ coeffs


def differentiate(p: Polynomial, var: int) -> Polynomial:
    if var != TIME and not 0 <= var < p.nvars:
        raise DimensionMismatchError(f"no variable {var_name(var)} in a polynomial with {p.nvars} variables")
    terms: dict[Monomial, float] = {}
    for mono, coeff in p.items():
        exp = mono.exponent(var)
        if exp == 0:
            continue
        reduced = Monomial([(v, e - 1 if v == var else e) for v, e in mono.exponents])
        terms[reduced] = terms.get(reduced, 0.0) + coeff * exp
    return Polynomial(terms, p.nvars, p.has_time)


def substitute_time(p: Polynomial, value: float) -> Polynomial:
    terms: dict[Monomial, float] = {}
    for mono, coeff in p.items():
        exp = mono.exponent(TIME)
        reduced = mono.without(TIME) if exp else mono
        terms[reduced] = terms.get(reduced, 0.0) + coeff * value ** exp
    return Polynomial(terms, p.nvars, False)


def univariate_coefficients(p: Polynomial) -> np.ndarray:
    """Coefficients of a polynomial in x1 alone, highest power first (``np.roots`` order)."""
    if p.nvars != 1 or p.has_time:
        raise DimensionMismatchError("univariate coefficients need a polynomial in x1 only")
    coeffs = np.zeros(p.degree + 1)
    for mono, coeff in p.items():
        coeffs[p.degree - mono.exponent(0)] += coeff
    return coeffs


def monomials_up_to(nvars: int, degree: int, has_time: bool = False) -> list[Monomial]:
    """Dense monomial basis of total degree <= ``degree`` in graded order."""
    variables = list(range(nvars)) + ([TIME] if has_time else [])
    basis = []
    for d in range(degree + 1):
        for combo in itertools.combinations_with_replacement(variables, d):
            basis.append(Monomial((v, 1) for v in combo))
    return sorted(basis, key=lambda m: m.sort_key(nvars))


_TOKEN = re.compile(r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*^()]))")


class _Parser:
    def __init__(self, text: str, nvars: int | None) -> None:
        self.text = text
        self.nvars = nvars
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            match = _TOKEN.match(text, pos)
            if match is None or match.end() == pos:
                bad = len(text) - len(text[pos:].lstrip())
                raise PolynomialSyntaxError(f"unexpected character '{text[bad]}'", len(text[:bad].encode()))
            kind = match.lastgroup
            start = match.start(kind)
            self.tokens.append((kind, match.group(kind), len(text[:start].encode())))
            pos = match.end()
        self.pos = 0

    def peek(self) -> tuple[str, str, int] | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def offset(self) -> int:
        token = self.peek()
        return token[2] if token is not None else len(self.text.encode())

    def take(self, value: str | None = None) -> tuple[str, str, int]:
        token = self.peek()
        if token is None or (value is not None and token[1] != value):
            expected = f"'{value}'" if value else "a term"
            raise PolynomialSyntaxError(f"expected {expected}", self.offset())
        self.pos += 1
        return token

    def expr(self) -> Polynomial:
        result = self.term()
        while (token := self.peek()) is not None and token[1] in "+-" and token[0] == "op":
            self.pos += 1
            rhs = self.term()
            result = result + rhs if token[1] == "+" else result - rhs
        return result

    def term(self) -> Polynomial:
        result = self.unary()
        while (token := self.peek()) is not None and token[1] == "*":
            self.pos += 1
            result = result * self.unary()
        return result

    def unary(self) -> Polynomial:
        token = self.peek()
        if token is not None and token[0] == "op" and token[1] in "+-":
            self.pos += 1
            operand = self.unary()
            return -operand if token[1] == "-" else operand
        return self.power()

    def power(self) -> Polynomial:
        base = self.atom()
        token = self.peek()
        if token is not None and token[1] == "^":
            self.pos += 1
            exp_token = self.take()
            if exp_token[0] != "num" or not exp_token[1].isdigit():
                raise PolynomialSyntaxError("exponent must be a nonnegative integer", exp_token[2])
            return base ** int(exp_token[1])
        return base

    def atom(self) -> Polynomial:
        kind, value, offset = self.take()
        if kind == "num":
            return Polynomial.constant(float(value), self.width)
        if kind == "name":
            try:
                var = var_index(value)
            except ValueError:
                raise UnknownVariableError(value, offset) from None
            if var != TIME and self.nvars is not None and var >= self.nvars:
                raise UnknownVariableError(value, offset)
            return Polynomial.variable(var, self.width)
        if value == "(":
            inner = self.expr()
            self.take(")")
            return inner
        raise PolynomialSyntaxError(f"unexpected '{value}'", offset)

    def parse(self) -> Polynomial:
        if self.nvars is None:
            names = [tok[1] for tok in self.tokens if tok[0] == "name"]
            self.width = max((var_index(n) + 1 for n in names if re.fullmatch(r"x[1-9][0-9]*", n)), default=0)
        else:
            self.width = self.nvars
        if not self.tokens:
            raise PolynomialSyntaxError("empty expression", 0)
        result = self.expr()
        if self.peek() is not None:
            raise PolynomialSyntaxError(f"unexpected '{self.peek()[1]}'", self.offset())
        return result


def parse(expr: str, nvars: int | None = None) -> Polynomial:
    """Parse the text grammar: decimal coefficients, x1..xn, t, + - *, ^ and parentheses.

    With ``nvars`` omitted the width is the largest state index that appears.
    """
    return _Parser(expr, nvars).parse()
