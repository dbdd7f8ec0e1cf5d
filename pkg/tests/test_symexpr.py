import math
import random

import numpy as np
import pytest

from conftest import WORKED_H_TEXT, random_expr
from esgain.symexpr import (Const, Domain1D, Domain2D, EvalOverflowError,
                            ParseError, Var, differentiate, eval_expr,
                            exp_of, nth_derivative, parse_expr, powi,
                            scan_supnorm, to_string)


class TestParse:
    def test_worked_objective_parses_and_evaluates(self, worked_h):
        assert eval_expr(worked_h, [0.0]) == pytest.approx(-1.0)
        assert eval_expr(worked_h, [0.2]) == pytest.approx(-math.cos(0.2) + 0.2 ** 3 / 6)

    def test_zero_literal_and_its_derivative(self):
        e = parse_expr("0", dim=1)
        assert eval_expr(e, [3.7]) == 0.0
        assert eval_expr(differentiate(e), [3.7]) == 0.0

    def test_two_variable_expression(self):
        e = parse_expr("sin(x1)*x2", dim=2)
        assert eval_expr(e, [math.pi / 2, 3.0]) == pytest.approx(3.0)

    def test_syntax_error_carries_offset(self):
        with pytest.raises(ParseError) as exc:
            parse_expr("sin(x) + @", dim=1)
        assert exc.value.offset == 9

    def test_unknown_identifier_rejected(self):
        with pytest.raises(ParseError):
            parse_expr("tan(x)", dim=1)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ParseError):
            parse_expr("x2", dim=1)

    def test_power_binds_tighter_than_product(self):
        e = parse_expr("2*x^3", dim=1)
        assert eval_expr(e, [2.0]) == pytest.approx(16.0)


class TestDifferentiate:
    def test_worked_objective_first_derivative(self, worked_h):
        d = differentiate(worked_h)
        assert eval_expr(d, [1.0]) == pytest.approx(math.sin(1.0) + 0.5, abs=1e-12)

    def test_constant_derivative_is_zero(self):
        assert eval_expr(differentiate(Const(5.0)), [1.2]) == 0.0

    def test_third_derivative_value(self, worked_h):
        d3 = nth_derivative(worked_h, 3)
        assert eval_expr(d3, [-1.0]) == pytest.approx(1.0 - math.sin(-1.0), abs=1e-12)

    def test_axis_selects_variable(self):
        e = parse_expr("sin(x1)*x2", dim=2)
        d2 = differentiate(e, 1)
        assert eval_expr(d2, [0.3, 99.0]) == pytest.approx(math.sin(0.3))


class TestEval:
    def test_determinism_bitwise(self, worked_h):
        a = eval_expr(worked_h, [0.77])
        b = eval_expr(worked_h, [0.77])
        assert a == b and math.copysign(1, a) == math.copysign(1, b)

    def test_overflow_reported(self):
        tower = exp_of(exp_of(exp_of(powi(Var(0), 3))))
        with pytest.raises(EvalOverflowError):
            eval_expr(tower, [10.0])


class TestSupNorm:
    def test_worked_objective_norms(self, worked_h):
        dom = Domain1D(-1.0, 1.0)
        assert float(scan_supnorm(worked_h, dom)) == pytest.approx(1.0, abs=1e-9)
        d3 = nth_derivative(worked_h, 3)
        assert float(scan_supnorm(d3, dom)) == pytest.approx(1.0 + math.sin(1.0), abs=1e-9)

    def test_constant_supnorm(self):
        est = scan_supnorm(Const(-2.5), Domain1D(0.0, 1.0))
        assert float(est) == 2.5

    def test_two_dimensional_domain(self):
        e = parse_expr("x1^2 + x2^2", dim=2)
        est = scan_supnorm(e, Domain2D(-1.0, 1.0, -1.0, 1.0))
        assert float(est) == pytest.approx(2.0, abs=1e-6)

    def test_monotone_under_domain_inclusion(self, worked_h):
        d1 = differentiate(worked_h)
        small = float(scan_supnorm(d1, Domain1D(-0.5, 0.5)))
        big = float(scan_supnorm(d1, Domain1D(-1.0, 1.0)))
        assert small <= big + 1e-9


class TestRandomCorpus:
    """Seeded corpus over the full grammar: symbolic derivative agrees with
    central differences and printing round-trips structurally."""

    N_EXPRS = 1000
    N_POINTS = 10

    def test_derivative_matches_central_difference(self):
        rng = random.Random(20260826)
        checked = 0
        for _ in range(self.N_EXPRS):
            e = random_expr(rng, dim=1, depth=5)
            d = differentiate(e)
            for _ in range(self.N_POINTS):
                x = rng.uniform(-1.0, 1.0)

                def central(step):
                    return (eval_expr(e, [x + step]) - eval_expr(e, [x - step])) / (2 * step)

                try:
                    v = eval_expr(e, [x])
                    # Richardson extrapolation cancels the h^2 truncation term
                    num = (4.0 * central(5e-5) - central(1e-4)) / 3.0
                    sym = eval_expr(d, [x])
                except EvalOverflowError:
                    continue
                if not (math.isfinite(num) and abs(v) < 1e6 and abs(sym) < 1e6):
                    continue  # outside the numerically comparable range
                assert abs(sym - num) <= 1e-6 * (1.0 + abs(sym) + abs(v))
                checked += 1
        assert checked > 5000  # the skip guards must not hollow out the test

    def test_print_parse_round_trip(self):
        rng = random.Random(99)
        for _ in range(self.N_EXPRS):
            dim = rng.choice([1, 2])
            e = random_expr(rng, dim=dim, depth=5)
            assert parse_expr(to_string(e), dim=dim) == e
