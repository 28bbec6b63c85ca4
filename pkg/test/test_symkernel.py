import random

import pytest
import sympy

from multisym.errors import (
    DivisionByZero,
    IrrationalValue,
    MissingDerivativeRule,
    RewriteDepthExceeded,
    UnboundSymbol,
    UnknownSymbol,
)
from multisym.symkernel import (
    Kernel,
    derived_function,
    expand_derived,
    gradient,
    linear_split,
    normalize,
    partial,
    substitute,
)

from .utils import random_polynomial, random_rational_function, random_rational_point

x, y, z, m = sympy.symbols("x y z m")


@pytest.mark.parametrize(
    "a,b",
    [
        ((x + y) ** 2, x**2 + 2 * x * y + y**2),
        (x * (y - z) + x * z, x * y),
        (sympy.Rational(1, 2) * (x + x), x),
    ],
)
def test_normalize_equal(a, b):
    """Test equal expressions share their normal form"""
    assert normalize(a) == normalize(b)


def test_normalize_identities():
    """Test rewrite identities are applied to a fixpoint"""
    kernel = Kernel(identities=[(x**2, 1 - y**2)])
    assert kernel.normalize(x**2 + y**2) == 1
    assert kernel.is_zero(x**2 + y**2 - 1)


def test_normalize_rewrite_depth():
    """Test identities which never reach a fixpoint raise"""
    kernel = Kernel(identities=[(x, x + 1)], max_rewrite_depth=3)
    with pytest.raises(RewriteDepthExceeded):
        kernel.normalize(x)


def test_max_rewrite_depth_validation():
    with pytest.raises(Exception):
        Kernel(max_rewrite_depth=0)


def test_max_rewrite_depth_environment(monkeypatch):
    """Test $MULTISYM_MAX_REWRITE sets the default rewrite depth"""
    monkeypatch.setenv("MULTISYM_MAX_REWRITE", "7")
    assert Kernel().max_rewrite_depth == 7
    monkeypatch.setenv("MULTISYM_MAX_REWRITE", "many")
    assert Kernel().max_rewrite_depth == 64


@pytest.mark.parametrize(
    "expr,symbol,expected",
    [
        (x**2 * y, x, 2 * x * y),
        (x**2 * y, z, 0),
        (sympy.sqrt(x), x, 1 / (2 * sympy.sqrt(x))),
        (sympy.exp(2 * x), x, 2 * sympy.exp(2 * x)),
    ],
)
def test_partial(expr, symbol, expected):
    assert sympy.simplify(partial(expr, symbol) - expected) == 0


def test_partial_undeclared():
    """Test differentiating along an undeclared symbol raises"""
    kernel = Kernel(symbols=[x, y])
    assert kernel.partial(x * y, y) == x
    with pytest.raises(UnknownSymbol):
        kernel.partial(x * z, z)


def test_substitute_simultaneous():
    """Test substitution is simultaneous, not sequential"""
    assert substitute(x + 2 * y, {x: y, y: x}) == y + 2 * x


def test_eval():
    kernel = Kernel()
    assert kernel.eval(x**2 + y / 2, {x: 3, y: 1}) == sympy.Rational(19, 2)
    with pytest.raises(UnboundSymbol):
        kernel.eval(x + y, {x: 1})
    with pytest.raises(DivisionByZero):
        kernel.eval(1 / x, {x: 0})


def test_eval_irrational():
    """Test evaluation refuses values that are not rational"""
    kernel = Kernel()
    with pytest.raises(IrrationalValue):
        kernel.eval(sympy.sqrt(x), {x: 2})
    assert kernel.eval(sympy.sqrt(x), {x: 4}) == 2


def test_is_zero_square_roots():
    """Test algebraic identities with square roots are decided"""
    kernel = Kernel()
    assert kernel.is_zero(sympy.sqrt(x) ** 2 - x)
    assert kernel.is_zero(x / sympy.sqrt(x) - sympy.sqrt(x))
    assert not kernel.is_zero(sympy.sqrt(x) - x)


def test_derived_function():
    """Test registered derivative rules and explicit formulas of a derived function"""
    f = derived_function("f_det", "det", (x, y))
    f.rules = {x: y, y: x}
    f.expansion = x * y
    assert sympy.diff(f(x, y), x) == y
    assert sympy.diff(f(x, z), x) == z
    assert expand_derived(f(x, y) + 1) == x * y + 1
    assert Kernel().is_zero(f(x, y) - x * y)

    g = derived_function("g_opaque", "g", (x,))
    with pytest.raises(MissingDerivativeRule):
        sympy.diff(g(x), x)


def test_gradient():
    result = gradient(x**2 + x * y + z, [x, y])
    assert result == {x: 2 * x + y, y: x}


def test_linear_split():
    """Test splitting an expression linear in some unknowns"""
    a, b = sympy.symbols("a b")
    coefficients, constant, nonlinear = linear_split(2 * a * x + b + y, [a, b])
    assert coefficients == {a: 2 * x, b: 1}
    assert constant == y
    assert not nonlinear
    assert linear_split(a * b + x, [a, b])[2]


def test_strip_nonzero_factors():
    """Test numeric content and assumed nonzero factors are removed"""
    kernel = Kernel(nonzero=[m])
    assert kernel.strip_nonzero_factors(-2 * m**2 * (x - y)) in (x - y, y - x)
    assert kernel.strip_nonzero_factors(0) == 0


@pytest.mark.parametrize("seed", range(100))
def test_partial_finite_difference(seed):
    """Test exact partial derivatives against central differences"""
    rng = random.Random(seed)
    kernel = Kernel()
    expr = random_rational_function([x, y, z], rng)
    symbol = rng.choice([x, y, z])
    point = random_rational_point([x, y, z], rng)
    step = sympy.Rational(1, 10**4)
    forward = kernel.eval(expr, {**point, symbol: point[symbol] + step})
    backward = kernel.eval(expr, {**point, symbol: point[symbol] - step})
    exact = kernel.eval(kernel.partial(expr, symbol), point)
    difference = (forward - backward) / (2 * step)
    assert abs(difference - exact) <= sympy.Rational(1, 10**6) * max(1, abs(exact))


@pytest.mark.parametrize("seed", range(100))
def test_normalize_eval_homomorphism(seed):
    """Test evaluation commutes with normalized sums and products"""
    rng = random.Random(seed)
    kernel = Kernel()
    a = random_polynomial([x, y, z], rng)
    b = random_rational_function([x, y, z], rng)
    point = random_rational_point([x, y, z], rng)
    value_a, value_b = kernel.eval(a, point), kernel.eval(b, point)
    assert kernel.eval(kernel.normalize(a + b), point) == value_a + value_b
    assert kernel.eval(kernel.normalize(a * b), point) == value_a * value_b
    assert kernel.eval(kernel.normalize(a - a), point) == 0
