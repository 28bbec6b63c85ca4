import pytest
import sympy

from multisym.exterior import DiffForm, VectorField, volume
from multisym.multivec import MultiVectorField
from multisym.printing import (
    coordinate_latex,
    format_form,
    format_multivector,
    format_scalar,
    format_vector,
)

x0, x1 = sympy.symbols("x[0] x[1]")
y0 = sympy.Symbol("y[0]")


def test_volume(scalar_tower):
    chart = scalar_tower.total
    assert format_form(volume(chart)) == "d^2x"
    assert format_form(volume(chart), latex=True) == "\\mathrm{d}^{2}x"


@pytest.mark.parametrize(
    "symbols,coefficient,expected",
    [
        ([x1], y0, "(y[0])*d^1x_(0)"),
        # dx0 = -i(∂1) d^2x
        ([x0], 1, "-d^1x_(1)"),
        ([y0], 2, "(2)*d(y[0])"),
        ([], x0, "x[0]"),
        ([x0], 0, "0"),
    ],
)
def test_format_form(scalar_tower, symbols, coefficient, expected):
    """Test base differentials are written as contracted volume forms"""
    form = DiffForm.from_symbols(scalar_tower.total, symbols, coefficient)
    assert format_form(form) == expected


def test_format_form_latex(scalar_tower):
    form = DiffForm.from_symbols(scalar_tower.total, [y0, x1], 1)
    assert format_form(form, latex=True) == "\\mathrm{d}y^{0} \\wedge \\mathrm{d}x_{0}"


def test_coordinate_latex(scalar_tower, kg):
    jet = scalar_tower.jet
    assert coordinate_latex(jet, x0) == "x^{0}"
    assert coordinate_latex(jet, jet.jet(y0, 1)) == "{y^{0}}_{,1}"
    restricted = scalar_tower.restricted
    assert coordinate_latex(restricted, restricted.momentum(y0, 1)) == "p_{y^{0}}^{1}"
    extended = scalar_tower.extended
    assert coordinate_latex(extended, extended.scalar_momentum.symbol) == "p"
    assert coordinate_latex(kg.tower.total, sympy.Symbol("phi")) == "\\phi"


def test_format_scalar(scalar_tower):
    jet = scalar_tower.jet
    assert format_scalar(sympy.Integer(3)) == "3"
    assert format_scalar(jet.jet(y0, 1)) == "D[1](y[0])"
    assert format_scalar(jet.jet(y0, 1), jet, latex=True) == "{y^{0}}_{,1}"


def test_format_vector(scalar_tower):
    chart = scalar_tower.total
    assert format_vector(VectorField(chart, {x0: sympy.Integer(1)})) == "(1)*d/d(x[0])"
    assert format_vector(VectorField(chart, {})) == "0"
    latex = format_vector(VectorField(chart, {y0: x1}), latex=True)
    assert latex == "\\left(x^{1}\\right)\\frac{\\partial}{\\partial y^{0}}"


def test_format_multivector(scalar_tower):
    X = MultiVectorField.general(scalar_tower.total)
    lines = format_multivector(X)
    assert len(lines) == 2
    assert lines[0].startswith("(1)*d/d(x[0])")
