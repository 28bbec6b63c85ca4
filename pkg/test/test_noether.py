import random

import pytest
import sympy

from multisym.constraints import derive_field_equations
from multisym.errors import NotExactSymmetry, WrongSpace
from multisym.exterior import VectorField, contract
from multisym.lifts import GeneratorSpec, jet_prolong, lift_to_E
from multisym.multivec import MultiVectorField
from multisym.noether import (
    SpaceName,
    analyze_symmetry,
    conservation_residual,
    find_gauge_fields,
    momentum_map,
    symmetry_space,
    verify_current,
    verify_symmetry,
)

from .utils import random_polynomial


@pytest.mark.parametrize(
    "generator,space",
    [
        ("translation", SpaceName.J1),
        ("translation", SpaceName.J1STAR),
        ("shift", SpaceName.J1),
        ("shift", SpaceName.J1STAR),
        ("shift", SpaceName.MPI),
    ],
)
def test_free_exact_symmetries(free, generator, space):
    """Test natural symmetries of the free fields are exact with a verified current"""
    analysis = analyze_symmetry(free, free.generator(generator), space)
    assert analysis.verdict.exact
    assert analysis.verdict.cartan
    assert analysis.verdict.natural
    assert analysis.current.verified
    assert not analysis.current.on_constraints


def test_lagrangian_invariance(free):
    analysis = analyze_symmetry(free, free.generator("shift"), SpaceName.J1)
    assert analysis.verdict.lagrangian_invariance
    analysis = analyze_symmetry(free, free.generator("shift"), SpaceName.J1STAR)
    assert analysis.verdict.lagrangian_invariance is None


def test_space_e(free):
    """Test on E only the lift is computed"""
    analysis = analyze_symmetry(free, free.generator("translation"), SpaceName.E)
    assert analysis.verdict is None
    assert analysis.current is None


def test_shift_current(free):
    """Test the current of the shift of y[A] is -p_A^mu d^(m-1)x_mu"""
    space = free.lagrangian_space
    _, X = symmetry_space(free, free.generator("shift"), SpaceName.J1)
    current = momentum_map(space, X)
    chart = space.chart
    x0, x1 = (c.symbol for c in chart.base)
    jets = chart.jet
    y0, y1 = (c.symbol for c in chart.fields)
    expected_x1 = -(jets(y0, 0) + jets(y1, 0))
    expected_x0 = jets(y0, 1) + jets(y1, 1)
    assert free.kernel.is_zero(current.form.coefficient(x1) - expected_x1)
    assert free.kernel.is_zero(current.form.coefficient(x0) - expected_x0)


def test_conservation(free):
    """Test the shift current is conserved on solutions of the field equations"""
    space = free.lagrangian_space
    _, X = symmetry_space(free, free.generator("shift"), SpaceName.J1)
    current = momentum_map(space, X)
    general = MultiVectorField.general(space.chart, holonomic=True)
    system = derive_field_equations(space, general, holonomic=True)
    assert conservation_residual(current.form, system.solved) == 0


def test_not_exact(free):
    """Test a generator breaking the Lagrangian has no current from Θ"""
    x0 = free.tower.base.base[0].symbol
    y0 = free.tower.total.fields[0].symbol
    scaling = GeneratorSpec.vertical("scaling", 2, {y0: y0 * x0})
    space = free.lagrangian_space
    X = jet_prolong(lift_to_E(scaling, free.tower), space.chart)
    verdict = verify_symmetry(space, X, generator="scaling")
    assert not verdict.exact
    assert "theta" in verdict.residuals
    with pytest.raises(NotExactSymmetry):
        momentum_map(space, X, verdict=verdict)


def test_verify_current(free):
    """Test a supplied current is checked against i(Y)Ω = -dα"""
    space = free.hamiltonian_space
    _, Y = symmetry_space(free, free.generator("translation"), SpaceName.J1STAR)
    alpha = -contract(Y, space.theta)
    assert verify_current(space, Y, alpha).verified
    assert not verify_current(space, Y, alpha * 2).verified


def test_no_gauge_fields(free):
    """Test a regular theory has no vertical gauge vector fields"""
    assert find_gauge_fields(free.hamiltonian_space) == []


def test_wrong_space(polyakov):
    """Test singular theories have no Hamiltonian on J1STAR"""
    with pytest.raises(WrongSpace):
        symmetry_space(polyakov, polyakov.generator("poincare"), SpaceName.J1STAR)


def test_vector_field_chart(free):
    space = free.lagrangian_space
    Y = VectorField(space.chart, {space.chart.base[0].symbol: sympy.Integer(1)})
    verdict = verify_symmetry(space, Y)
    assert verdict.exact
    assert verdict.space == "J1Pi"
    assert verdict.lagrangian_invariance is None


@pytest.mark.parametrize("seed", range(30))
@pytest.mark.parametrize("space", [SpaceName.J1, SpaceName.J1STAR])
def test_exact_implies_cartan(free, seed, space):
    """Test L(Y)Θ = 0 forces L(Y)Ω = 0, on symmetries and on perturbed ones"""
    rng = random.Random(seed)
    phase_space, translation = symmetry_space(free, free.generator("translation"), space)
    _, shift = symmetry_space(free, free.generator("shift"), space)
    Y = translation.scale(rng.randint(1, 4)) + shift.scale(rng.randint(-4, 4))
    perturbed = seed % 2 == 1
    if perturbed:
        symbols = list(phase_space.chart.symbols)
        Y = Y + VectorField(
            phase_space.chart,
            {s: random_polynomial(symbols, rng, terms=2) for s in rng.sample(symbols, 2)},
        )
    verdict = verify_symmetry(phase_space, Y)
    assert verdict.cartan or not verdict.exact
    if not perturbed:
        assert verdict.exact
