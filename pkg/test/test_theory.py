import os

import pytest
import sympy

from multisym.errors import DerivationError, ParseError, UnknownIdentifier
from multisym.theory import (
    BUILTIN_THEORIES,
    builtin_path,
    builtin_theory,
    load_theory,
    parse_theory,
)


@pytest.mark.parametrize("name", BUILTIN_THEORIES)
def test_builtin_path(name):
    assert os.path.isfile(builtin_path(name))


@pytest.mark.parametrize("name", BUILTIN_THEORIES)
def test_builtin_theory(name):
    """Test every bundled theory parses and resolves"""
    theory = builtin_theory(name)
    assert theory.name == name
    assert theory.lagrangian != 0
    assert theory.generators


def test_reserved_index_label():
    """Test reserved letters are accepted as index labels but not as fields"""
    theory = parse_theory(
        "theory toy { base x[2]; index c, d : 2; field y[c]; "
        "lagrangian = sum(c, d){D[c](y[d])^2}; }"
    )
    assert theory.tower.field_count == 2
    with pytest.raises(ParseError):
        parse_theory("theory toy { base x[1]; field d; }")


def test_builtin_path_unknown():
    with pytest.raises(ValueError):
        builtin_path("maxwell")


def test_kg(kg):
    """Test the resolved Klein-Gordon theory"""
    assert kg.name == "kg"
    assert kg.tower.base_dimension == 4
    assert kg.tower.field_count == 1
    assert kg.tables["eta"] == {(0, 0): -1, (1, 1): 1, (2, 2): 1, (3, 3): 1}
    assert kg.hamiltonian is not None
    assert kg.max_iter is None
    assert "m != 0" in kg.assumptions
    assert list(kg.generators) == ["translation", "lorentz"]


def test_free_lagrangian(free):
    chart = free.tower.jet
    y0, y1 = (c.symbol for c in chart.fields)
    expected = sum(chart.jet(y, mu) ** 2 for y in (y0, y1) for mu in range(2)) / 2
    assert free.kernel.is_zero(free.lagrangian - expected)


def test_generators(free):
    translation = free.generator("translation")
    assert translation.base == (sympy.Symbol("t[0]"), sympy.Symbol("t[1]"))
    shift = free.generator("shift")
    assert shift.fiber == {sympy.Symbol("y[0]"): -1, sympy.Symbol("y[1]"): -1}
    with pytest.raises(UnknownIdentifier):
        free.generator("boost")


def test_polyakov_families(polyakov):
    """Test the symmetric worldsheet metric has three components"""
    assert polyakov.families["g"].component_count() == 3
    assert polyakov.tower.field_count == 6
    assert any("Lorentzian" in note for note in polyakov.assumptions)
    assert polyakov.generator("diffeo").tensorial
    assert not polyakov.generator("poincare").tensorial


def test_option_max_iter():
    theory = parse_theory(
        "theory toy { base x[1]; field y; option max_iter = 7; lagrangian = D[0](y)^2; }"
    )
    assert theory.max_iter == 7


def test_hamiltonian_without_lagrangian():
    with pytest.raises(DerivationError):
        parse_theory("theory toy { base x[1]; field y; hamiltonian = P[0](y)^2; }")


def test_no_lagrangian():
    theory = parse_theory("theory toy { base x[1]; field y; }")
    assert theory.lagrangian == 0


def test_load_theory(tmp_path):
    path = tmp_path / "toy.thy"
    path.write_text("#thy 1\ntheory toy { base x[1]; field y; lagrangian = D[0](y)^2/2; }\n")
    theory = load_theory(str(path))
    assert theory.name == "toy"
    assert theory.tower.field_count == 1


def test_kernel_options():
    theory = builtin_theory("free", max_rewrite_depth=7)
    assert theory.kernel.max_rewrite_depth == 7
