import pytest
import sympy
from pydantic import ValidationError

from multisym.bundle import (
    ChartMap,
    FieldFamily,
    IndexSlot,
    IndexSymmetry,
    SpaceTag,
    SymmetryKind,
    build_tower,
    embedding,
    flat_index,
    levi_civita,
    restrict,
    with_scalar_momentum,
)
from multisym.errors import (
    CircularConstraint,
    DuplicateFieldName,
    IncompleteMap,
    UnknownCoordinate,
    WrongSpace,
    ZeroDimensionalBase,
)

from .utils import names


def _family(name, sizes, kind=None):
    slots = tuple(IndexSlot(label=f"i{n}", size=size) for n, size in enumerate(sizes))
    symmetries = ()
    if kind is not None:
        symmetries = (IndexSymmetry(kind=kind, first=0, second=1),)
    return FieldFamily(name=name, slots=slots, symmetries=symmetries)


@pytest.mark.parametrize(
    "sizes,kind,expected",
    [
        # Scalar
        ((), None, 1),
        ((4,), None, 4),
        ((4, 4), None, 16),
        # Index pairs
        ((4, 4), SymmetryKind.SYMMETRIC, 10),
        ((4, 4), SymmetryKind.ANTISYMMETRIC, 6),
        ((4, 4, 4), SymmetryKind.ANTISYMMETRIC, 24),
        ((2, 2), SymmetryKind.SYMMETRIC, 3),
    ],
)
def test_component_count(sizes, kind, expected):
    """Test the independent components implied by ranges and symmetries"""
    family = _family("f", sizes, kind)
    assert family.component_count() == expected
    assert len(family.components()) == expected


def test_canonical():
    """Test signs of the representative of a full index tuple"""
    antisym = _family("w", (4, 4, 4), SymmetryKind.ANTISYMMETRIC)
    assert antisym.canonical((1, 0, 3)) == (-1, (0, 1, 3))
    assert antisym.canonical((0, 1, 3)) == (1, (0, 1, 3))
    assert antisym.canonical((2, 2, 0))[0] == 0
    sym = _family("g", (2, 2), SymmetryKind.SYMMETRIC)
    assert sym.canonical((1, 0)) == (1, (0, 1))
    assert sym.orbit((0, 1)) == [(1, (0, 1)), (1, (1, 0))]
    assert sym.orbit((0, 0)) == [(1, (0, 0))]


@pytest.mark.parametrize(
    "family",
    [
        # Reserved name
        dict(name="D"),
        dict(name="p"),
        # Mismatched ranges
        dict(
            name="f",
            slots=(IndexSlot(label="a", size=2), IndexSlot(label="b", size=3)),
            symmetries=(IndexSymmetry(kind=SymmetryKind.SYMMETRIC, first=0, second=1),),
        ),
        # Missing index
        dict(
            name="f",
            slots=(IndexSlot(label="a", size=2),),
            symmetries=(IndexSymmetry(kind=SymmetryKind.SYMMETRIC, first=0, second=1),),
        ),
    ],
)
def test_invalid_family(family):
    with pytest.raises(ValidationError):
        FieldFamily(**family)


def test_levi_civita():
    assert levi_civita((0, 1, 2)) == 1
    assert levi_civita((1, 0, 2)) == -1
    assert levi_civita((0, 0, 2)) == 0


def test_canonical_order(scalar_tower):
    """Test charts enumerate coordinates in canonical order"""
    assert names(scalar_tower.total.symbols) == ["x[0]", "x[1]", "y[0]", "y[1]"]
    assert names(scalar_tower.jet.symbols)[4:] == [
        "D[0](y[0])",
        "D[1](y[0])",
        "D[0](y[1])",
        "D[1](y[1])",
    ]
    assert names(scalar_tower.extended.symbols)[-1] == "p"
    assert scalar_tower.extended.dimension == scalar_tower.restricted.dimension + 1
    assert scalar_tower.field_count == 2
    assert list(flat_index(scalar_tower.total).values()) == [0, 1]


def test_chart_lookups(scalar_tower):
    jet = scalar_tower.jet
    y0 = sympy.Symbol("y[0]")
    assert jet.jet(y0, 1) == sympy.Symbol("D[1](y[0])")
    with pytest.raises(UnknownCoordinate):
        jet.momentum(y0, 1)
    with pytest.raises(UnknownCoordinate):
        jet.coordinate(sympy.Symbol("q"))
    with pytest.raises(WrongSpace):
        jet.require(SpaceTag.MPI)


def test_build_tower_errors(metric_family):
    with pytest.raises(ZeroDimensionalBase):
        build_tower("x", 0, [metric_family])
    with pytest.raises(DuplicateFieldName):
        build_tower("x", 2, [metric_family, metric_family])
    with pytest.raises(DuplicateFieldName):
        build_tower("g", 2, [metric_family])


def test_symmetric_family_tower(metric_family):
    """Test only independent components of a symmetric family become coordinates"""
    tower = build_tower("x", 2, [metric_family])
    assert names(c.symbol for c in tower.total.fields) == ["g[0,0]", "g[0,1]", "g[1,1]"]
    assert len(tower.jet.jets) == 6


def test_projection(scalar_tower):
    projection = scalar_tower.projection(SpaceTag.J1PI, SpaceTag.E)
    assert projection.is_projection()
    with pytest.raises(UnknownCoordinate):
        scalar_tower.projection(SpaceTag.E, SpaceTag.J1PI)


def test_restrict(scalar_tower):
    """Test graph-type constraint submanifolds and their embedding"""
    chart = scalar_tower.restricted
    y0, y1 = sympy.symbols("y[0] y[1]")
    p00 = chart.momentum(y0, 0)
    p01 = chart.momentum(y0, 1)
    sub = restrict(chart, [(p00, y1)])
    assert sub.space == SpaceTag.PSUB
    assert sub.ambient == SpaceTag.J1PISTAR
    assert not sub.has(p00)
    assert sub.dimension == chart.dimension - 1
    inclusion = embedding(sub, chart)
    assert inclusion.apply(p00 + p01) == y1 + p01
    extended = with_scalar_momentum(sub)
    assert extended.scalar_momentum is not None
    assert restrict(chart, []) is chart


@pytest.mark.parametrize(
    "constraints,error",
    [
        # Twice the same momentum
        ("twice", CircularConstraint),
        # Right-hand side references an eliminated momentum
        ("circular", CircularConstraint),
        # Not a momentum
        ("field", UnknownCoordinate),
        # Unknown symbol
        ("unknown", UnknownCoordinate),
    ],
)
def test_restrict_errors(scalar_tower, constraints, error):
    chart = scalar_tower.restricted
    y0, y1 = sympy.symbols("y[0] y[1]")
    p00, p01 = chart.momentum(y0, 0), chart.momentum(y0, 1)
    cases = {
        "twice": [(p00, y1), (p00, y0)],
        "circular": [(p00, p01), (p01, y0)],
        "field": [(y0, y1)],
        "unknown": [(p00, sympy.Symbol("q"))],
    }
    with pytest.raises(error):
        restrict(chart, cases[constraints])


def test_restrict_wrong_space(scalar_tower):
    with pytest.raises(WrongSpace):
        restrict(scalar_tower.jet, [])


def test_incomplete_map(scalar_tower):
    with pytest.raises((IncompleteMap, ValidationError)):
        ChartMap(source=scalar_tower.jet, target=scalar_tower.total, images=())
