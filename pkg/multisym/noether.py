"""Noether symmetries, multimomentum maps and gauge vector fields"""

from __future__ import annotations

import enum
from typing import Callable, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict

from .bundle import SpaceTag
from .elimination import ConstraintIdeal
from .errors import NotExactSymmetry, WrongSpace
from .exterior import DiffForm, VectorField, contract, d, lie
from .geometry import PhaseSpace, Side, form_kernel
from .lifts import (
    GeneratorSpec,
    jet_prolong,
    lagrangian_variation,
    lift_to_E,
    lift_to_MPi,
    lift_to_PSub,
)
from .multivec import MultiVectorField, lie_multi
from .symkernel import ZERO, Kernel, ScalarExpr

_MODEL_CONFIG = ConfigDict(frozen=True, extra="forbid", arbitrary_types_allowed=True)


def _vanishes(
    form: DiffForm, kernel: Kernel, ideal: Optional[ConstraintIdeal]
) -> Tuple[bool, bool]:
    """(zero everywhere, zero modulo ``ideal``)"""
    if form.is_zero(kernel):
        return True, True
    if ideal is None:
        return False, False
    return False, all(kernel.is_zero(ideal.reduce(c)) for c in form.coefficients())


class SymmetryVerdict(BaseModel):
    """Which Noether symmetry conditions a vector field satisfies

    :attr exact: L(Y)Θ = 0
    :attr cartan: L(Y)Ω = 0
    :attr natural: Y is the canonical lift of a bundle automorphism
    :attr lagrangian_invariance: L(X)𝐋 = 0, Lagrangian side only
    :attr on_constraints: exact or cartan only hold modulo the final constraints
    :attr residuals: L(Y)Θ and L(Y)Ω when they do not vanish everywhere
    """

    model_config = _MODEL_CONFIG

    generator: str
    space: str
    exact: bool
    cartan: bool
    natural: bool = False
    lagrangian_invariance: Optional[bool] = None
    on_constraints: bool = False
    residuals: Dict[str, DiffForm] = {}


def verify_symmetry(
    space: PhaseSpace,
    Y: VectorField,
    generator: str = "Y",
    natural: bool = False,
    lagrangian: Optional[ScalarExpr] = None,
    ideal: Optional[ConstraintIdeal] = None,
) -> SymmetryVerdict:
    """Check the Noether symmetry conditions of ``Y`` on ``space``

    Conditions failing everywhere are evaluated modulo ``ideal`` when given.
    """
    kernel = space.kernel
    space.chart.check_same(Y.chart)
    theta_variation = lie(Y, space.theta)
    omega_variation = lie(Y, space.omega)
    exact_everywhere, exact = _vanishes(theta_variation, kernel, ideal)
    cartan_everywhere, cartan = _vanishes(omega_variation, kernel, ideal)
    residuals = {}
    if not exact_everywhere:
        residuals["theta"] = theta_variation
    if not cartan_everywhere:
        residuals["omega"] = omega_variation
    invariance = None
    if lagrangian is not None and space.side == Side.LAGRANGIAN:
        invariance = kernel.is_zero(lagrangian_variation(Y, lagrangian, kernel=kernel))
    return SymmetryVerdict(
        generator=generator,
        space=space.chart.space.value,
        exact=exact,
        cartan=cartan,
        natural=natural,
        lagrangian_invariance=invariance,
        on_constraints=(exact and not exact_everywhere) or (cartan and not cartan_everywhere),
        residuals=residuals,
    )


class MultimomentumMap(BaseModel):
    """Noether current J with i(Y)Ω = -dJ

    :attr construction: how J was obtained
    :attr verified: dJ + i(Y)Ω vanishes (modulo the final constraints if
        ``on_constraints``)
    """

    model_config = _MODEL_CONFIG

    generator: str
    space: str
    form: DiffForm
    construction: str
    verified: bool
    on_constraints: bool = False

    @property
    def is_zero(self) -> bool:
        return not self.form


def momentum_map(
    space: PhaseSpace,
    Y: VectorField,
    verdict: Optional[SymmetryVerdict] = None,
    generator: str = "Y",
    ideal: Optional[ConstraintIdeal] = None,
) -> MultimomentumMap:
    """J = -i(Y)Θ for an exact symmetry, with dJ + i(Y)Ω = 0 checked

    The representative is determined up to a closed form.

    :raises NotExactSymmetry: If L(Y)Θ does not vanish.
    """
    kernel = space.kernel
    verdict = verdict or verify_symmetry(space, Y, generator=generator, ideal=ideal)
    if not verdict.exact:
        raise NotExactSymmetry(
            f"'{generator}' is not an exact symmetry on {space.chart.space.value}: "
            "a current must be supplied"
        )
    J = -contract(Y, space.theta)
    everywhere, modulo = _vanishes(d(J) + contract(Y, space.omega), kernel, ideal)
    return MultimomentumMap(
        generator=generator,
        space=space.chart.space.value,
        form=J,
        construction="-i(Y)Theta",
        verified=modulo,
        on_constraints=modulo and not everywhere,
    )


def verify_current(
    space: PhaseSpace,
    Y: VectorField,
    alpha: DiffForm,
    generator: str = "Y",
    ideal: Optional[ConstraintIdeal] = None,
) -> MultimomentumMap:
    """Check a supplied current α of a Cartan symmetry: i(Y)Ω + dα = 0"""
    everywhere, modulo = _vanishes(d(alpha) + contract(Y, space.omega), space.kernel, ideal)
    return MultimomentumMap(
        generator=generator,
        space=space.chart.space.value,
        form=alpha,
        construction="supplied",
        verified=modulo,
        on_constraints=modulo and not everywhere,
    )


def conservation_residual(
    J: DiffForm,
    X: MultiVectorField,
    ideal: Optional[ConstraintIdeal] = None,
) -> ScalarExpr:
    """L(X)J for a solved multivector; zero for a conserved current"""
    kernel = J.kernel or Kernel()
    variation = lie_multi(X, J)
    value = kernel.simplify(variation.terms.get((), ZERO))
    if ideal is not None and value != 0:
        value = ideal.reduce(value)
    return value


def is_gauge_field(space: PhaseSpace, K: VectorField, ideal: ConstraintIdeal) -> bool:
    """K is in the kernel of Ω and tangent to the constraints, modulo the constraints"""
    kernel = space.kernel
    rows = list(contract(K, space.omega).coefficients())
    rows += [K.apply(c) for c in ideal.generators]
    return all(kernel.is_zero(ideal.reduce(r)) for r in rows)


def find_gauge_fields(
    space: PhaseSpace, ideal: Optional[ConstraintIdeal] = None
) -> List[VectorField]:
    """Basis of the vertical vector fields in ker Ω tangent to the constraints

    Both conditions are imposed modulo ``ideal``.
    """
    kernel = space.kernel
    reduce: Callable[[ScalarExpr], ScalarExpr] = lambda e: e
    extra: Callable[[VectorField], List[ScalarExpr]] = lambda v: []
    if ideal is not None and len(ideal):
        reduce = ideal.reduce
        extra = lambda v: [v.apply(c) for c in ideal.generators]  # noqa: E731
    solver = ideal.solver if ideal is not None else None
    basis, solution = form_kernel(
        space.omega, vertical=True, extra=extra, reduce=reduce, solver=solver
    )
    if solution.pivots:
        kernel.log.debug(
            "Gauge fields assume nonzero: %s", ", ".join(str(p) for _, p in solution.pivots)
        )
    return basis


class SpaceName(str, enum.Enum):
    """Spaces a symmetry can be analysed on"""

    E = "E"
    J1 = "J1"
    MPI = "MPI"
    J1STAR = "J1STAR"
    P0 = "P0"


class SymmetryAnalysis(BaseModel):
    """Lift, verdict and multimomentum map of one generator on one space"""

    model_config = _MODEL_CONFIG

    generator: str
    space: SpaceName
    vector: VectorField
    verdict: Optional[SymmetryVerdict] = None
    current: Optional[MultimomentumMap] = None


def symmetry_space(
    theory, generator: GeneratorSpec, space: SpaceName
) -> Tuple[Optional[PhaseSpace], VectorField]:
    """Phase space and lifted vector field of ``generator`` on ``space``

    :raises WrongSpace: For J1STAR on a singular theory (use P0).
    """
    tower = theory.tower
    kernel = theory.kernel
    xi_E = lift_to_E(generator, tower, kernel=kernel)
    space = SpaceName(space)
    if space == SpaceName.E:
        return None, xi_E
    if space == SpaceName.J1:
        return theory.lagrangian_space, jet_prolong(xi_E, tower.jet)
    if space == SpaceName.MPI:
        return theory.multimomentum_space, lift_to_MPi(xi_E, tower.extended)
    hamiltonian = theory.hamiltonian_space
    if space == SpaceName.J1STAR and hamiltonian.chart.space == SpaceTag.PSUB:
        raise WrongSpace(
            "The theory is singular: its Hamiltonian lives on P0, not on J1STAR"
        )
    return hamiltonian, lift_to_PSub(xi_E, hamiltonian.chart, tower.restricted)


def analyze_symmetry(
    theory,
    generator: GeneratorSpec,
    space: SpaceName,
    ideal_factory: Optional[Callable[[Side], Optional[ConstraintIdeal]]] = None,
) -> SymmetryAnalysis:
    """Verdict and, for exact symmetries, multimomentum map of a natural symmetry

    When a condition fails everywhere, ``ideal_factory`` provides the final constraints
    of the side the space belongs to and the check is repeated modulo them.
    """
    phase_space, vector = symmetry_space(theory, generator, space)
    if phase_space is None:
        return SymmetryAnalysis(generator=generator.name, space=space, vector=vector)
    lagrangian = theory.lagrangian if phase_space.side == Side.LAGRANGIAN else None
    verdict = verify_symmetry(
        phase_space, vector, generator=generator.name, natural=True, lagrangian=lagrangian
    )
    ideal = None
    if not verdict.exact and ideal_factory is not None and SpaceName(space) != SpaceName.MPI:
        ideal = ideal_factory(phase_space.side)
        if ideal is not None and len(ideal):
            verdict = verify_symmetry(
                phase_space,
                vector,
                generator=generator.name,
                natural=True,
                lagrangian=lagrangian,
                ideal=ideal,
            )
    current = None
    if verdict.exact:
        current = momentum_map(
            phase_space, vector, verdict=verdict, generator=generator.name, ideal=ideal
        )
    else:
        theory.kernel.log.warning(
            "'%s' is not an exact symmetry on %s", generator.name, SpaceName(space).value
        )
    return SymmetryAnalysis(
        generator=generator.name,
        space=space,
        vector=vector,
        verdict=verdict,
        current=current,
    )
