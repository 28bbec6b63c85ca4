import pytest
import sympy

from multisym.errors import DegreeMismatch, UnknownCoordinate
from multisym.exterior import DiffForm, volume
from multisym.multivec import (
    ContractionOrder,
    MultiVectorField,
    contract_multi,
    factor_derivatives,
    lie_multi,
    unknown_symbol,
)


def test_general(scalar_tower):
    """Test the generic multivector has an unknown in every fiber slot"""
    chart = scalar_tower.jet
    X = MultiVectorField.general(chart)
    assert X.degree == 2
    fiber = chart.dimension - chart.base_dimension
    assert len(X.unknowns) == 2 * fiber
    y0 = sympy.Symbol("y[0]")
    assert X.component(1, y0) == unknown_symbol(1, y0)
    assert X.component(0, sympy.Symbol("x[0]")) == 1
    assert X.component(0, sympy.Symbol("x[1]")) == 0


def test_holonomic(scalar_tower):
    """Test field components of a holonomic multivector are the multivelocities"""
    chart = scalar_tower.jet
    X = MultiVectorField.general(chart, holonomic=True)
    y0 = sympy.Symbol("y[0]")
    assert X.component(1, y0) == chart.jet(y0, 1)
    assert len(X.unknowns) == 2 * len(chart.jets)


def test_normalization(scalar_tower):
    """Test i(X) d^m x = 1"""
    chart = scalar_tower.jet
    X = MultiVectorField.general(chart)
    assert contract_multi(X, volume(chart)).coefficient() == 1


def test_substitute(scalar_tower):
    chart = scalar_tower.total
    X = MultiVectorField.general(chart)
    y0 = sympy.Symbol("y[0]")
    unknown = unknown_symbol(0, y0)
    bound = X.substitute({unknown: y0})
    assert bound.component(0, y0) == y0
    assert unknown not in bound.unknowns
    assert unknown not in bound.free_unknowns
    assert len(bound.free_unknowns) == len(X.free_unknowns) - 1


def test_factor_derivatives(scalar_tower):
    chart = scalar_tower.total
    y0, x1 = sympy.symbols("y[0] x[1]")
    X = MultiVectorField(chart, [{y0: 2}, {}])
    assert factor_derivatives(X, y0 * x1) == (2 * x1, y0)


def test_invalid(scalar_tower):
    chart = scalar_tower.total
    x0 = sympy.Symbol("x[0]")
    with pytest.raises(DegreeMismatch):
        MultiVectorField(chart, [{}])
    with pytest.raises(UnknownCoordinate):
        MultiVectorField(chart, [{x0: 1}, {}])
    with pytest.raises(UnknownCoordinate):
        MultiVectorField(chart, [{}, {}], unknowns=[x0])


def test_contraction_order(scalar_tower):
    """Test both contraction orders differ by (-1)^(m(m-1)/2) on a top form"""
    chart = scalar_tower.total
    a = volume(chart)
    inner = MultiVectorField.general(chart, order=ContractionOrder.INNERMOST_FIRST)
    outer = MultiVectorField.general(chart, order=ContractionOrder.OUTERMOST_FIRST)
    assert contract_multi(inner, a) == -contract_multi(outer, a)


def test_lie_multi(scalar_tower):
    """Test L(X)J of an (m-1)-form is the divergence along X"""
    chart = scalar_tower.total
    y0, y1, x1 = sympy.symbols("y[0] y[1] x[1]")
    X = MultiVectorField(chart, [{y0: y1}, {y1: y0}])
    J = DiffForm.from_symbols(chart, [x1], y0)
    variation = lie_multi(X, J)
    assert variation.degree == 0
    assert variation.coefficient() == -y1
    assert lie_multi(X, volume(chart) * y0).degree == 1
