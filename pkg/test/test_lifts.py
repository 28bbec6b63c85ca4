import random

import pytest
import sympy
from pydantic import ValidationError

from multisym.bundle import FieldFamily, IndexSlot, build_tower
from multisym.errors import IndexArityMismatch, LiftNotTangent, NotProjectable
from multisym.exterior import contract, d, lie
from multisym.geometry import LagrangianTheory, liouville_forms
from multisym.lifts import (
    GeneratorSpec,
    check_legendre_projection,
    gamma_form,
    jet_prolong,
    lagrangian_variation,
    lift_all,
    lift_to_E,
    lift_to_J1PiStar,
    lift_to_MPi,
    lift_to_PSub,
    lift_to_PTilde,
)
from multisym.symkernel import Kernel
from multisym.verify import Notation

from .utils import random_polynomial

x0, x1 = sympy.symbols("x[0] x[1]")
y0, y1 = sympy.symbols("y[0] y[1]")


@pytest.fixture
def rotation():
    """Rotation of the base combined with a field dependent shift of y[0]"""
    return GeneratorSpec(name="rotation", base=(x1, -x0), fiber={y0: x0 * y1})


def test_lift_to_E(scalar_tower, rotation):
    """Test ξ_E = -ξ^mu ∂_mu - ξ^A ∂_A"""
    xi_E = lift_to_E(rotation, scalar_tower)
    assert xi_E.component(x0) == -x1
    assert xi_E.component(x1) == x0
    assert xi_E.component(y0) == -x0 * y1
    assert xi_E.component(y1) == 0


def test_lift_to_E_arity(scalar_tower):
    with pytest.raises(IndexArityMismatch):
        lift_to_E(GeneratorSpec(name="short", base=(x0,)), scalar_tower)


def test_jet_prolong(scalar_tower, rotation):
    """Test the prolongation of a vertical shift and of a rotation"""
    shift = GeneratorSpec.vertical("shift", 2, {y0: -x0})
    X = jet_prolong(lift_to_E(shift, scalar_tower), scalar_tower.jet)
    assert X.component(scalar_tower.jet.jet(y0, 0)) == 1
    assert X.component(scalar_tower.jet.jet(y0, 1)) == 0

    X = jet_prolong(lift_to_E(rotation, scalar_tower), scalar_tower.jet)
    jet = scalar_tower.jet.jet
    # y1_0 = ∂_0 y1 transforms with ∂_mu ξ_E^nu
    assert X.component(jet(y1, 0)) == -jet(y1, 1)
    assert X.component(jet(y1, 1)) == jet(y1, 0)


def test_generator_sympifies():
    """Test plain numbers are accepted as generator components"""
    generator = GeneratorSpec(name="shift", base=(y0, 0), fiber={y1: 2})
    assert generator.base == (y0, sympy.Integer(0))
    assert all(isinstance(c, sympy.Expr) for c in generator.base)
    assert generator.fiber == {y1: sympy.Integer(2)}
    with pytest.raises(ValidationError):
        GeneratorSpec(name="empty", base=())


def test_not_projectable(scalar_tower):
    generator = GeneratorSpec(name="bad", base=(y0, 0))
    with pytest.raises(NotProjectable):
        jet_prolong(lift_to_E(generator, scalar_tower), scalar_tower.jet)


def test_canonical_lift_preserves_theta(scalar_tower, rotation):
    """Test L(Z)Θ = 0 and i(Z)Θ = Γ on MPi"""
    chart = scalar_tower.extended
    kernel = Kernel()
    xi_E = lift_to_E(rotation, scalar_tower, kernel=kernel)
    Z = lift_to_MPi(xi_E, chart)
    theta, omega = liouville_forms(chart, kernel=kernel)
    assert lie(Z, theta).is_zero()
    assert lie(Z, omega).is_zero()
    gamma = gamma_form(xi_E, chart)
    assert (contract(Z, theta) - gamma).is_zero()
    assert (contract(Z, omega) - d(gamma)).is_zero()


def test_restricted_lift_is_projection(scalar_tower, rotation):
    """Test Y_ξ is Z_ξ without its scalar momentum component"""
    xi_E = lift_to_E(rotation, scalar_tower)
    Z = lift_to_MPi(xi_E, scalar_tower.extended)
    Y = lift_to_J1PiStar(xi_E, scalar_tower.restricted)
    for symbol in scalar_tower.restricted.symbols:
        assert Y.component(symbol) == Z.component(symbol)


def test_free_lifts(free):
    """Test lifts of the free theory translations and their Legendre projection"""
    translation = free.generator("translation")
    lifts = lift_all(free, translation)
    assert lifts.primary is None
    t0 = sympy.Symbol("t[0]")
    x = free.tower.base.base[0].symbol
    assert lifts.total.component(x) == -t0
    assert lifts.jet.component(x) == -t0
    assert len(lifts.jet.components) == 2
    projection = check_legendre_projection(free, translation)
    assert projection.invariant
    assert projection.holds


def test_lagrangian_variation(free):
    """Test the shift leaves the free Lagrangian invariant"""
    shift = free.generator("shift")
    X = jet_prolong(lift_to_E(shift, free.tower), free.tower.jet)
    assert lagrangian_variation(X, free.lagrangian) == 0


def test_tensor_variation(polyakov):
    """Test the induced variation of a metric with upper indices"""
    n = Notation(polyakov)
    diffeo = polyakov.generator("diffeo")
    assert diffeo.tensorial
    xi_E = lift_to_E(diffeo, polyakov.tower, kernel=polyakov.kernel)
    s0, s1 = n.x
    xi0 = n.function("xi", 0)
    g00, g01 = n.symbol("g", 0, 0), n.symbol("g", 0, 1)
    expected = -2 * (sympy.diff(xi0, s0) * g00 + sympy.diff(xi0, s1) * g01)
    assert polyakov.kernel.is_zero(xi_E.component(g00) - expected)
    assert polyakov.kernel.is_zero(xi_E.component(s0) + xi0)


def test_lift_to_primary():
    """Test lifts restricted to P° exist only when tangent to the primary constraints"""
    tower = build_tower("x", 1, [FieldFamily(name="y", slots=(IndexSlot(label="A", size=2),))])
    v0 = tower.jet.jet(y0, 0)
    theory = LagrangianTheory(
        name="singular", tower=tower, lagrangian=v0 * y1 - y0**2 / 2, kernel=Kernel()
    )
    primary = theory.legendre_map.primary_chart
    shift = lift_to_E(GeneratorSpec.vertical("shift", 1, {y0: -1}), tower)
    Y = lift_to_PSub(shift, primary, tower.restricted)
    assert Y.component(y0) == 1
    Z = lift_to_PTilde(shift, primary, tower.extended)
    assert Z.component(y0) == 1
    # p_y0 = y1 on P°, so moving y1 leaves the submanifold
    with pytest.raises(LiftNotTangent):
        lift_to_PSub(
            lift_to_E(GeneratorSpec.vertical("other", 1, {y1: -1}), tower),
            primary,
            tower.restricted,
        )


def _random_generator(name, rng):
    return GeneratorSpec(
        name=name,
        base=tuple(random_polynomial([x0, x1], rng, terms=2) for _ in range(2)),
        fiber={y: random_polynomial([x0, x1, y0, y1], rng, terms=2) for y in (y0, y1)},
    )


@pytest.mark.parametrize("seed", range(20))
def test_lift_linearity(scalar_tower, seed):
    """Test every lift is linear in the generator"""
    rng = random.Random(seed)
    xi, eta = _random_generator("xi", rng), _random_generator("eta", rng)
    alpha = sympy.Rational(rng.randint(1, 5), rng.randint(1, 5))
    beta = sympy.Rational(-rng.randint(1, 5), rng.randint(1, 5))
    combined = GeneratorSpec(
        name="combined",
        base=tuple(alpha * a + beta * b for a, b in zip(xi.base, eta.base)),
        fiber={y: alpha * xi.fiber[y] + beta * eta.fiber[y] for y in (y0, y1)},
    )
    lifts = [
        lambda v: v,
        lambda v: jet_prolong(v, scalar_tower.jet),
        lambda v: lift_to_MPi(v, scalar_tower.extended),
        lambda v: lift_to_J1PiStar(v, scalar_tower.restricted),
    ]
    for lift in lifts:
        expected = lift(lift_to_E(xi, scalar_tower)).scale(alpha) + lift(
            lift_to_E(eta, scalar_tower)
        ).scale(beta)
        assert (lift(lift_to_E(combined, scalar_tower)) - expected).is_zero()
