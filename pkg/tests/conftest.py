"""Shared fixtures: the worked objective h(x) = -cos x + x^3/6, its bounds
ledger on [-1, 1], and a seeded random expression generator used by the
derivative/printing property tests."""

import random

import pytest

from esgain.contraction import build_ledger
from esgain.symexpr import (Const, Var, add, cos_of, exp_of, mul, neg,
                            parse_expr, powi, sin_of, Domain1D)

WORKED_H_TEXT = "-cos(x) + 0.16666666666666666*x^3"


@pytest.fixture(scope="session")
def worked_h():
    return parse_expr(WORKED_H_TEXT, dim=1)


@pytest.fixture(scope="session")
def worked_ledger(worked_h):
    return build_ledger(worked_h, Domain1D(-1.0, 1.0))


def random_expr(rng: random.Random, dim: int = 1, depth: int = 5):
    """Random expression tree of bounded depth over the full grammar.

    Constants are kept small and exp() is rationed so values and derivatives
    stay in a numerically comparable range on [-1, 1]^dim."""
    if depth <= 0 or rng.random() < 0.3:
        if rng.random() < 0.5:
            return Const(round(rng.uniform(-2.0, 2.0), 3))
        return Var(rng.randrange(dim))
    kind = rng.choice(["add", "mul", "neg", "pow", "sin", "cos", "exp"])
    sub = lambda: random_expr(rng, dim, depth - 1)
    if kind == "add":
        return add(sub(), sub())
    if kind == "mul":
        return mul(sub(), sub())
    if kind == "neg":
        return neg(sub())
    if kind == "pow":
        return powi(sub(), rng.randrange(2, 4))
    if kind == "sin":
        return sin_of(sub())
    if kind == "cos":
        return cos_of(sub())
    # keep exp arguments shallow to avoid towers of exponentials
    return exp_of(random_expr(rng, dim, min(depth - 1, 2)))
