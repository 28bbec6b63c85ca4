import random

import pytest
import sympy

from multisym.bundle import ChartMap, FieldFamily, IndexSlot, build_tower, projection
from multisym.errors import ChartMismatch, DegreeMismatch, UnknownCoordinate
from multisym.exterior import (
    DiffForm,
    VectorField,
    contract,
    d,
    differential,
    lie,
    merge_monomials,
    one_form,
    pullback,
    sort_sign,
    volume,
    volume_contraction,
    wedge,
)

from .utils import random_form, random_polynomial

SEEDS = range(5)


@pytest.mark.parametrize(
    "positions,expected",
    [
        ([0, 1, 2], 1),
        ([1, 0, 2], -1),
        ([2, 1, 0], -1),
        ([2, 0, 1], 1),
    ],
)
def test_sort_sign(positions, expected):
    assert sort_sign(positions) == expected


def test_merge_monomials():
    assert merge_monomials((0, 2), (1,)) == (-1, (0, 1, 2))
    assert merge_monomials((1,), (0, 2)) == (-1, (0, 1, 2))
    assert merge_monomials((0,), (0,))[0] == 0


def test_from_symbols(scalar_tower):
    """Test differentials are reordered with the permutation sign"""
    chart = scalar_tower.total
    x0, x1, y0 = sympy.symbols("x[0] x[1] y[0]")
    form = DiffForm.from_symbols(chart, [y0, x0])
    assert form.coefficient(x0, y0) == -1
    assert DiffForm.from_symbols(chart, [x0, x0]).is_zero()
    with pytest.raises(UnknownCoordinate):
        DiffForm.from_symbols(chart, [sympy.Symbol("q")])


def test_invalid_forms(scalar_tower):
    chart = scalar_tower.total
    with pytest.raises(DegreeMismatch):
        DiffForm(chart, -1)
    with pytest.raises(DegreeMismatch):
        DiffForm(chart, 2, {(0,): 1})
    with pytest.raises(ValueError):
        DiffForm(chart, 2, {(1, 0): 1})


@pytest.fixture(scope="module", params=[2, 3, 4])
def tower(request):
    """Two scalar fields over an m-dimensional base"""
    family = FieldFamily(name="y", slots=(IndexSlot(label="A", size=2),))
    return build_tower("x", request.param, [family])


@pytest.mark.parametrize("seed", range(25))
@pytest.mark.parametrize("degree", [0, 1, 2])
def test_d_squared(tower, seed, degree):
    """Test d(d(a)) = 0 on random polynomial forms"""
    rng = random.Random(seed)
    form = random_form(tower.jet, degree, rng)
    assert d(d(form)).is_zero()


@pytest.mark.parametrize("seed", SEEDS)
def test_wedge_graded(scalar_tower, seed):
    """Test a ^ b = (-1)^(pq) b ^ a and the Leibniz rule of d"""
    rng = random.Random(seed)
    chart = scalar_tower.jet
    a = random_form(chart, 1, rng)
    b = random_form(chart, 2, rng)
    assert wedge(a, b) == wedge(b, a)
    c = random_form(chart, 1, rng)
    assert wedge(a, c) == -wedge(c, a)
    assert d(wedge(a, b)) == wedge(d(a), b) - wedge(a, d(b))


@pytest.mark.parametrize("seed", SEEDS)
def test_cartan_formula(scalar_tower, seed):
    """Test L(v) = d i(v) + i(v) d commutes with d"""
    rng = random.Random(seed)
    chart = scalar_tower.jet
    symbols = list(chart.symbols)
    v = VectorField(
        chart, {s: rng.randint(-2, 2) * rng.choice(symbols) for s in rng.sample(symbols, 3)}
    )
    a = random_form(chart, 1, rng)
    assert lie(v, d(a)) == d(lie(v, a))
    # i(v) is an antiderivation
    b = random_form(chart, 1, rng)
    assert contract(v, wedge(a, b)) == wedge(contract(v, a), b) - wedge(a, contract(v, b))


def test_volume_contractions(scalar_tower):
    """Test d^(m-2)x_(mu nu) is antisymmetric; in 2D it is the Levi-Civita symbol"""
    chart = scalar_tower.total
    assert volume_contraction(chart, 0, 1).coefficient() == 1
    assert volume_contraction(chart, 1, 0).coefficient() == -1
    assert volume_contraction(chart, 0, 0).is_zero()
    x0, x1 = sympy.symbols("x[0] x[1]")
    assert volume_contraction(chart, 0) == differential(chart, x1)
    assert volume_contraction(chart, 1) == -differential(chart, x0)
    assert volume(chart).coefficient(x0, x1) == 1


def test_pullback_commutes_with_d(scalar_tower):
    """Test the projection J1 -> E pulls back d(a) to d(pullback(a))"""
    rng = random.Random(0)
    source = scalar_tower.jet
    target = scalar_tower.total
    mapping = projection(source, target)
    a = random_form(target, 1, rng)
    assert pullback(mapping, d(a)) == d(pullback(mapping, a))


def test_one_form(scalar_tower):
    chart = scalar_tower.total
    x0, y0 = sympy.symbols("x[0] y[0]")
    form = one_form(chart, x0 * y0)
    assert form.coefficient(x0) == y0
    assert form.coefficient(y0) == x0


def test_chart_mismatch(scalar_tower):
    a = volume(scalar_tower.total)
    b = volume(scalar_tower.jet)
    with pytest.raises(ChartMismatch):
        wedge(a, b)


def test_vector_field(scalar_tower):
    chart = scalar_tower.total
    x0, y0 = sympy.symbols("x[0] y[0]")
    v = VectorField(chart, {x0: 1, y0: x0})
    assert v.apply(x0 * y0) == y0 + x0**2
    assert (v - v).is_zero()
    assert v.scale(2).component(y0) == 2 * x0


def _random_map(tower, rng):
    """Polynomial map J1 -> E"""
    source, target = tower.jet, tower.total
    symbols = list(source.symbols)
    images = tuple(
        (symbol, symbol + random_polynomial(rng.sample(symbols, 2), rng, terms=2))
        for symbol in target.symbols
    )
    return ChartMap(source=source, target=target, images=images)


@pytest.mark.parametrize("seed", range(40))
@pytest.mark.parametrize("degrees", [(0, 1), (1, 1)])
def test_pullback_homomorphism(tower, seed, degrees):
    """Test pullbacks preserve sums, wedge products and d"""
    rng = random.Random(seed)
    mapping = _random_map(tower, rng)
    p, q = degrees
    a = random_form(tower.total, p, rng, terms=2)
    b = random_form(tower.total, q, rng, terms=2)
    c = random_form(tower.total, q, rng, terms=2)
    assert pullback(mapping, wedge(a, b)) == wedge(pullback(mapping, a), pullback(mapping, b))
    assert pullback(mapping, b + c) == pullback(mapping, b) + pullback(mapping, c)
    assert pullback(mapping, d(a)) == d(pullback(mapping, a))
