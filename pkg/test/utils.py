from __future__ import annotations

import random
from typing import Dict, List, Optional

import sympy

from multisym.bundle import BundleChart
from multisym.exterior import DiffForm
from multisym.symkernel import Kernel


def random_form(
    chart: BundleChart,
    degree: int,
    rng: random.Random,
    terms: int = 3,
    kernel: Optional[Kernel] = None,
) -> DiffForm:
    """Form of ``degree`` with polynomial coefficients in the chart coordinates"""
    symbols = list(chart.symbols)
    result = DiffForm.zero(chart, degree, kernel=kernel)
    for _ in range(terms):
        differentials = rng.sample(symbols, degree)
        coefficient = sympy.Integer(rng.randint(-3, 3))
        for symbol in rng.sample(symbols, 2):
            coefficient *= symbol ** rng.randint(0, 2)
        result = result + DiffForm.from_symbols(chart, differentials, coefficient)
    return result


def names(symbols) -> List[str]:
    return [str(symbol) for symbol in symbols]


def random_polynomial(
    symbols, rng: random.Random, terms: int = 3, degree: int = 2
) -> sympy.Expr:
    symbols = list(symbols)
    result = sympy.Integer(rng.randint(-3, 3))
    for _ in range(terms):
        term = sympy.Integer(rng.choice((-3, -2, -1, 1, 2, 3)))
        for symbol in rng.sample(symbols, min(2, len(symbols))):
            term *= symbol ** rng.randint(0, degree)
        result += term
    return result


def random_rational_function(symbols, rng: random.Random) -> sympy.Expr:
    """Quotient of random polynomials by a denominator without real zeros"""
    symbols = list(symbols)
    denominator = 1 + sum(rng.randint(0, 2) * symbol**2 for symbol in symbols)
    return random_polynomial(symbols, rng) / denominator


def random_rational_point(symbols, rng: random.Random) -> Dict[sympy.Symbol, sympy.Rational]:
    """Point of [-1, 1]^n with denominators dividing 12"""
    return {symbol: sympy.Rational(rng.randint(-12, 12), 12) for symbol in symbols}
