import pytest
import sympy

from multisym.bundle import FieldFamily, IndexSlot, IndexSymmetry, SymmetryKind, build_tower
from multisym.geometry import LagrangianTheory
from multisym.symkernel import Kernel
from multisym.theory import builtin_theory
from multisym.verify import VerificationContext


@pytest.fixture(scope="session")
def kg():
    """Bundled Klein-Gordon theory, shared by the session"""
    return builtin_theory("kg")


@pytest.fixture(scope="session")
def free():
    return builtin_theory("free")


@pytest.fixture(scope="session")
def polyakov():
    return builtin_theory("polyakov")


@pytest.fixture(scope="session")
def einstein_cartan():
    return builtin_theory("einstein_cartan")


@pytest.fixture(scope="session")
def verification():
    return VerificationContext()


@pytest.fixture
def scalar_tower():
    """Two scalar fields over a 2-dimensional base"""
    family = FieldFamily(name="y", slots=(IndexSlot(label="A", size=2),))
    return build_tower("x", 2, [family])


@pytest.fixture
def metric_family():
    return FieldFamily(
        name="g",
        slots=(IndexSlot(label="a", size=2), IndexSlot(label="b", size=2)),
        symmetries=(IndexSymmetry(kind=SymmetryKind.SYMMETRIC, first=0, second=1),),
    )


@pytest.fixture
def chain():
    """L = v^2/2 + r*q: q = 0 starts a chain of tangency constraints v, r, w"""
    q, r = sympy.symbols("y[0] y[1]")
    v = sympy.Symbol("D[0](y[0])")
    family = FieldFamily(name="y", slots=(IndexSlot(label="A", size=2),))
    tower = build_tower("x", 1, [family])
    return LagrangianTheory(
        name="chain", tower=tower, lagrangian=v**2 / 2 + r * q, kernel=Kernel()
    )
