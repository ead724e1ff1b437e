import numpy as np
import pytest

from errors import DimensionMismatchError, PolynomialSyntaxError, UnknownVariableError
from poly import (TIME, Monomial, Polynomial, arith, differentiate, evaluate, evaluate_many, monomials_up_to, parse,
                  substitute_time, univariate_coefficients)


def x(i: int, n: int) -> Polynomial:
    return Polynomial.variable(i, n)


class TestParse:
    def test_constant_and_square(self):
        p = parse("1 - 2*x1^2")
        assert p.terms == {Monomial(): 1.0, Monomial({0: 2}): -2.0}

    def test_terms_are_merged(self):
        p = parse("x1*x2 + x2*x1")
        assert p.terms == {Monomial({0: 1, 1: 1}): 2.0}

    def test_identity_cancels(self):
        assert parse("(x1+1)^2 - x1^2 - 2*x1") == Polynomial.constant(1.0, 1)

    def test_time_variable(self):
        p = parse("t*x1 + 3", nvars=1)
        assert p.has_time
        assert p.coefficient(Monomial({0: 1, TIME: 1})) == 1.0

    def test_unary_minus_and_decimals(self):
        p = parse("-0.5*x1 + 1e-1", nvars=1)
        assert p.coefficient(Monomial({0: 1})) == -0.5
        assert p.coefficient(Monomial()) == pytest.approx(0.1)

    def test_unknown_variable(self):
        with pytest.raises(UnknownVariableError) as error:
            parse("x1 + y", nvars=1)
        assert error.value.offset == 5

    def test_variable_beyond_width(self):
        with pytest.raises(UnknownVariableError):
            parse("x3", nvars=2)

    def test_fractional_exponent_rejected(self):
        with pytest.raises(PolynomialSyntaxError):
            parse("x1^1.5", nvars=1)

    def test_unbalanced_parenthesis(self):
        with pytest.raises(PolynomialSyntaxError):
            parse("(x1 + 1", nvars=1)

    def test_bad_character_offset(self):
        with pytest.raises(PolynomialSyntaxError) as error:
            parse("x1 +   $", nvars=1)
        assert error.value.offset == 7

    def test_to_text_round_trip(self):
        p = parse("3*x1^2*x2 - x2 + 0.25", nvars=2)
        assert parse(p.to_text(), nvars=2) == p


class TestEvaluate:
    def test_point(self):
        assert evaluate(parse("x1^2 + x2"), [2, 3]) == 7

    def test_zero_time_factor(self):
        assert evaluate(parse("t*x1", nvars=1), [5], 0.0) == 0

    def test_constant(self):
        assert evaluate(Polynomial.constant(1.0, 3), [0.3, -2, 9]) == 1

    def test_time_value_required(self):
        with pytest.raises(DimensionMismatchError):
            evaluate(parse("t*x1", nvars=1), [1.0])

    def test_dimension_checked(self):
        with pytest.raises(DimensionMismatchError):
            evaluate(parse("x1 + x2"), [1.0])

    def test_vectorized_matches_scalar(self):
        p = parse("x1^3 - 2*x1*x2 + t*x2 + 1", nvars=2)
        rng = np.random.default_rng(3)
        points = rng.normal(size=(20, 2))
        tvals = rng.uniform(size=20)
        expected = [evaluate(p, pt, tv) for pt, tv in zip(points, tvals)]
        np.testing.assert_allclose(evaluate_many(p, points, tvals), expected, rtol=1e-12)


class TestDifferentiate:
    def test_product(self):
        assert differentiate(parse("x1^2*x2"), 0) == parse("2*x1*x2")

    def test_time_of_static(self):
        assert differentiate(parse("x1^2"), TIME).is_zero()

    def test_second_derivative(self):
        p = parse("x1^4")
        assert differentiate(differentiate(p, 0), 0) == parse("12*x1^2")


class TestArith:
    def test_difference_of_squares(self):
        a, b = parse("x1 + 1"), parse("x1 - 1")
        assert arith(a, b, "mul") == parse("x1^2 - 1")

    def test_additive_inverse(self):
        p = parse("3*x1*x2 - x2 + 7")
        assert arith(p, p.scale(-1.0), "add").is_zero()

    def test_scale_by_zero(self):
        assert arith(parse("x1"), 0.0, "scale").is_zero()

    def test_mixed_widths_rejected(self):
        with pytest.raises(DimensionMismatchError):
            x(0, 1) + x(0, 2)


class TestHelpers:
    def test_substitute_time(self):
        p = parse("t^2*x1 + t + x1", nvars=1)
        assert substitute_time(p, 2.0) == parse("5*x1 + 2", nvars=1)
        assert not substitute_time(p, 2.0).has_time

    def test_basis_size_and_order(self):
        basis = monomials_up_to(2, 2)
        assert len(basis) == 6
        assert [m.degree for m in basis] == sorted(m.degree for m in basis)
        assert basis[0] == Monomial()
        assert basis[1] == Monomial({0: 1})

    def test_basis_with_time(self):
        assert len(monomials_up_to(1, 2, has_time=True)) == 6

    def test_univariate_coefficients(self):
        np.testing.assert_array_equal(univariate_coefficients(parse("4 - x1^2")), [-1.0, 0.0, 4.0])


def random_polynomial(rng: np.random.Generator, nvars: int, terms: int = 6, degree: int = 3,
                      integer: bool = True, with_time: bool = False) -> Polynomial:
    variables = list(range(nvars)) + ([TIME] if with_time else [])
    result: dict[Monomial, float] = {}
    for _ in range(terms):
        mono = Monomial({v: int(rng.integers(0, degree + 1)) for v in variables})
        coeff = float(rng.integers(-5, 6)) if integer else float(rng.normal(scale=10.0))
        result[mono] = result.get(mono, 0.0) + coeff
    return Polynomial(result, nvars)


class TestProperties:
    @pytest.mark.parametrize("seed", range(10))
    def test_to_text_parses_back(self, seed):
        rng = np.random.default_rng(seed)
        p = random_polynomial(rng, 3, integer=False, with_time=seed % 2 == 0)
        assert parse(p.to_text(), nvars=3) == p

    @pytest.mark.parametrize("seed", range(10))
    def test_differentiate_is_linear(self, seed):
        rng = np.random.default_rng(seed)
        a, b = random_polynomial(rng, 2, with_time=True), random_polynomial(rng, 2, with_time=True)
        for var in (0, 1, TIME):
            assert differentiate(a + b, var) == differentiate(a, var) + differentiate(b, var)

    @pytest.mark.parametrize("seed", range(10))
    def test_product_rule(self, seed):
        rng = np.random.default_rng(seed)
        a, b = random_polynomial(rng, 2, with_time=True), random_polynomial(rng, 2, with_time=True)
        for var in (0, 1, TIME):
            assert differentiate(a * b, var) == differentiate(a, var) * b + a * differentiate(b, var)

    @pytest.mark.parametrize("seed", range(5))
    def test_evaluate_is_multiplicative(self, seed):
        rng = np.random.default_rng(seed)
        a, b = random_polynomial(rng, 3, integer=False), random_polynomial(rng, 3, integer=False)
        product = arith(a, b, "mul")
        for point in rng.uniform(-1.5, 1.5, size=(100, 3)):
            assert evaluate(product, point) == pytest.approx(evaluate(a, point) * evaluate(b, point),
                                                             rel=1e-9, abs=1e-9)
