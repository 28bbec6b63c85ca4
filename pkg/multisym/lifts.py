"""Canonical lifts of infinitesimal bundle automorphisms

A generator ξ gives the π-projectable vector field ξ_E = -ξ^mu ∂_mu - ξ^A ∂_A on E, which
lifts to X_ξ on J1Pi (jet prolongation), to Z_ξ on MPi and Y_ξ on J1PiStar (canonical
lifts), and to Y°_ξ on P° and Z~_ξ on P~ when the lift restricts to a constraint
submanifold.
"""

from __future__ import annotations

from typing import Dict, Mapping, Optional, Sequence, Tuple

import sympy
from pydantic import BaseModel, ConfigDict, field_validator

from .bundle import (
    BundleChart,
    CoordinateKind,
    SpaceTag,
    Tower,
    Variance,
    with_scalar_momentum,
)
from .elimination import ConstraintIdeal
from .errors import IndexArityMismatch, LiftNotTangent, NotProjectable
from .exterior import DiffForm, VectorField, lie, volume, volume_contraction
from .symkernel import ZERO, Kernel, ScalarExpr

_MODEL_CONFIG = ConfigDict(frozen=True, extra="forbid", arbitrary_types_allowed=True)


class GeneratorSpec(BaseModel):
    """Infinitesimal generator ξ of a bundle automorphism

    :attr base: components ξ^mu, functions of the base coordinates
    :attr fiber: explicit components ξ^A by field coordinate
    :attr tensorial: add the components induced on tensor-valued fields by ξ^mu
    :attr parameters: constant parameters the generator depends on
    """

    model_config = _MODEL_CONFIG

    name: str
    base: Tuple[sympy.Expr, ...]
    fiber: Dict[sympy.Symbol, sympy.Expr] = {}
    tensorial: bool = False
    parameters: Tuple[sympy.Symbol, ...] = ()

    # validators
    @field_validator("base", mode="before")
    def check_base(cls, v: Sequence[ScalarExpr]) -> Tuple[sympy.Expr, ...]:
        if not v:
            raise ValueError("A generator needs one base component per base dimension")
        return tuple(sympy.sympify(c) for c in v)

    @field_validator("fiber", mode="before")
    def sympify_fiber(
        cls, v: Mapping[sympy.Symbol, ScalarExpr]
    ) -> Dict[sympy.Symbol, sympy.Expr]:
        if not isinstance(v, Mapping):
            return v
        return {sympy.sympify(s): sympy.sympify(e) for s, e in v.items()}

    @classmethod
    def vertical(
        cls, name: str, dimension: int, fiber: Dict[sympy.Symbol, ScalarExpr]
    ) -> "GeneratorSpec":
        return cls(
            name=name,
            base=(ZERO,) * dimension,
            fiber={s: sympy.sympify(e) for s, e in fiber.items()},
        )


def tensor_variation(
    generator: GeneratorSpec, tower: Tower, field: sympy.Symbol
) -> ScalarExpr:
    """Component along ``field`` of the variation induced on tensor indices

    Upper indices contribute ∂_lambda ξ^i T[i -> lambda], lower indices
    -∂_i ξ^lambda T[i -> lambda].

    :raises IndexArityMismatch: If a spacetime index does not range over the base.
    """
    coordinate = tower.total.coordinate(field)
    family = tower.family(coordinate.family)
    m = tower.base_dimension
    base = [c.symbol for c in tower.base.base]
    total: ScalarExpr = ZERO
    for k, slot in enumerate(family.slots):
        if slot.variance == Variance.INTERNAL:
            continue
        if slot.size != m:
            raise IndexArityMismatch(
                f"Index '{slot.label}' of '{family.name}' has range {slot.size}, "
                f"expected the base dimension {m}"
            )
        i = coordinate.index[k]
        for lam in range(m):
            index = list(coordinate.index)
            index[k] = lam
            sign, canonical = family.canonical(index)
            if sign == 0:
                continue
            component = sign * sympy.Symbol(family.component_name(canonical))
            if slot.variance == Variance.UP:
                total += sympy.diff(generator.base[i], base[lam]) * component
            else:
                total -= sympy.diff(generator.base[lam], base[i]) * component
    return total


def lift_to_E(
    generator: GeneratorSpec, tower: Tower, kernel: Optional[Kernel] = None
) -> VectorField:
    """ξ_E = -ξ^mu ∂_mu - (ξ^A + tensor variation) ∂_A on E"""
    chart = tower.total
    if len(generator.base) != chart.base_dimension:
        raise IndexArityMismatch(
            f"Generator '{generator.name}' has {len(generator.base)} base components, "
            f"expected {chart.base_dimension}"
        )
    components: Dict[sympy.Symbol, ScalarExpr] = {}
    for coordinate, value in zip(chart.base, generator.base):
        components[coordinate.symbol] = -value
    for field in chart.fields:
        value = generator.fiber.get(field.symbol, ZERO)
        if generator.tensorial:
            value = value + tensor_variation(generator, tower, field.symbol)
        components[field.symbol] = -value
    return VectorField(chart, components, kernel=kernel)


def _check_projectable(vector: VectorField) -> None:
    fibers = {c.symbol for c in vector.chart.coordinates if c.kind != CoordinateKind.BASE}
    for coordinate in vector.chart.base:
        dependent = vector.component(coordinate.symbol).free_symbols & fibers
        if dependent:
            names = ", ".join(sorted(map(str, dependent)))
            raise NotProjectable(
                f"Base component along {coordinate.symbol} depends on fiber coordinates {names}"
            )


def jet_prolong(xi_E: VectorField, chart: BundleChart) -> VectorField:
    """First jet prolongation X_ξ = j1 ξ_E on a J1Pi chart

    :raises NotProjectable: If a base component depends on the fields.
    """
    chart.require(SpaceTag.J1PI)
    _check_projectable(xi_E)
    base = [c.symbol for c in chart.base]
    fields = [c.symbol for c in chart.fields]
    components = dict(xi_E.components)
    for coordinate in chart.jets:
        field, mu = coordinate.field, coordinate.derivative
        assert field is not None and mu is not None
        v = xi_E.component(field)
        value = sympy.diff(v, base[mu])
        for nu, x in enumerate(base):
            value -= chart.jet(field, nu) * sympy.diff(xi_E.component(x), base[mu])
        for other in fields:
            if other in v.free_symbols:
                value += chart.jet(other, mu) * sympy.diff(v, other)
        components[coordinate.symbol] = value
    return VectorField(chart, components, kernel=xi_E.kernel)


def _momentum_components(
    xi_E: VectorField, chart: BundleChart
) -> Dict[sympy.Symbol, ScalarExpr]:
    base = [c.symbol for c in chart.base]
    fields = [c.symbol for c in chart.fields]
    divergence = sympy.Add(
        *(sympy.diff(xi_E.component(x), x) for x in base)
    )
    components: Dict[sympy.Symbol, ScalarExpr] = {}
    for coordinate in chart.momenta:
        field, mu = coordinate.field, coordinate.derivative
        assert field is not None and mu is not None
        value = -divergence * coordinate.symbol
        for nu, x in enumerate(base):
            value += sympy.diff(xi_E.component(base[mu]), x) * chart.momentum(field, nu)
        for other in fields:
            value -= sympy.diff(xi_E.component(other), field) * chart.momentum(other, mu)
        components[coordinate.symbol] = value
    return components


def lift_to_MPi(xi_E: VectorField, chart: BundleChart) -> VectorField:
    """Canonical lift Z_ξ on MPi

    :raises NotProjectable: If a base component depends on the fields.
    """
    chart.require(SpaceTag.MPI)
    _check_projectable(xi_E)
    components = dict(xi_E.components)
    components.update(_momentum_components(xi_E, chart))
    scalar = chart.scalar_momentum
    assert scalar is not None
    base = [c.symbol for c in chart.base]
    value = sympy.Add(*(sympy.diff(xi_E.component(x), x) for x in base)) * scalar.symbol
    for coordinate in chart.momenta:
        assert coordinate.field is not None and coordinate.derivative is not None
        value += (
            sympy.diff(xi_E.component(coordinate.field), base[coordinate.derivative])
            * coordinate.symbol
        )
    components[scalar.symbol] = -value
    return VectorField(chart, components, kernel=xi_E.kernel)


def lift_to_J1PiStar(xi_E: VectorField, chart: BundleChart) -> VectorField:
    """Canonical lift Y_ξ on J1PiStar

    :raises NotProjectable: If a base component depends on the fields.
    """
    chart.require(SpaceTag.J1PISTAR)
    _check_projectable(xi_E)
    components = dict(xi_E.components)
    components.update(_momentum_components(xi_E, chart))
    return VectorField(chart, components, kernel=xi_E.kernel)


def _restrict_lift(lifted: VectorField, chart: BundleChart) -> VectorField:
    kernel = lifted.kernel or Kernel()
    substitutions = chart.substitution_map
    restricted = VectorField(
        chart,
        {
            s: c.xreplace(substitutions)
            for s, c in lifted.components.items()
            if chart.has(s)
        },
        kernel=kernel,
    )
    residuals: Dict[sympy.Symbol, ScalarExpr] = {}
    for symbol, value in substitutions.items():
        residual = lifted.component(symbol).xreplace(substitutions) - restricted.apply(value)
        if not kernel.is_zero(residual):
            residuals[symbol] = kernel.simplify(residual)
    if residuals:
        names = ", ".join(sorted(map(str, residuals)))
        raise LiftNotTangent(
            f"The lift is not tangent to the constraint submanifold along {names}",
            residuals=residuals,
        )
    return restricted


def lift_to_PSub(
    xi_E: VectorField, chart: BundleChart, ambient: BundleChart
) -> VectorField:
    """Restriction Y°_ξ of Y_ξ to the primary constraint submanifold

    ``ambient`` is the J1PiStar chart the submanifold lives in; an unconstrained
    ``chart`` gives Y_ξ itself.

    :raises LiftNotTangent: If Y_ξ is not tangent to the submanifold.
    """
    lifted = lift_to_J1PiStar(xi_E, ambient)
    if chart.space == SpaceTag.J1PISTAR:
        return lifted
    chart.require(SpaceTag.PSUB)
    return _restrict_lift(lifted, chart)


def lift_to_PTilde(
    xi_E: VectorField, chart: BundleChart, ambient: BundleChart
) -> VectorField:
    """Restriction Z~_ξ of Z_ξ to P~ (P° with the scalar momentum kept)

    ``chart`` is the P° chart and ``ambient`` the MPi chart.

    :raises LiftNotTangent: If Z_ξ is not tangent to P~.
    """
    lifted = lift_to_MPi(xi_E, ambient)
    if chart.space == SpaceTag.J1PISTAR:
        return lifted
    return _restrict_lift(lifted, with_scalar_momentum(chart))


def gamma_form(xi_E: VectorField, chart: BundleChart) -> DiffForm:
    """Γ_ξ = ξ^nu p_A^mu dy^A ^ d^(m-2)x_(mu nu) - (ξ^A p_A^mu + ξ^mu p) d^(m-1)x_mu on MPi

    Equal to i(Z_ξ)Θ.
    """
    chart.require(SpaceTag.MPI)
    kernel = xi_E.kernel
    m = chart.base_dimension
    base = [c.symbol for c in chart.base]
    scalar = chart.scalar_momentum
    assert scalar is not None
    # ξ^mu and ξ^A are minus the components of ξ_E
    xi = {s: -c for s, c in xi_E.components.items()}
    result = DiffForm.zero(chart, m - 1, kernel=kernel)
    for mu in range(m):
        contraction = volume_contraction(chart, mu, kernel=kernel)
        value = xi.get(base[mu], ZERO) * scalar.symbol
        for field in chart.fields:
            value += xi.get(field.symbol, ZERO) * chart.momentum(field.symbol, mu)
        result = result - contraction * value
        if m < 2:
            continue
        for nu in range(m):
            if nu == mu or xi.get(base[nu], ZERO) == 0:
                continue
            double = volume_contraction(chart, mu, nu, kernel=kernel)
            for field in chart.fields:
                dy = DiffForm.from_symbols(chart, [field.symbol], kernel=kernel)
                coefficient = xi[base[nu]] * chart.momentum(field.symbol, mu)
                result = result + (dy ^ double) * coefficient
    return result


def lagrangian_variation(
    X: VectorField, lagrangian: ScalarExpr, kernel: Optional[Kernel] = None
) -> ScalarExpr:
    """Coefficient of L(X)(𝓛 d^m x) along d^m x"""
    chart = X.chart
    density = volume(chart, kernel=kernel) * sympy.sympify(lagrangian)
    variation = lie(X, density)
    return variation.coefficient(*(c.symbol for c in chart.base))


class ProjectionCheck(BaseModel):
    """Comparison of FL°_* X_ξ with Y°_ξ

    :attr variation: L(X_ξ)𝓛 (coefficient of d^m x)
    :attr projectable: FL°_* X_ξ is a well defined vector field on P°
    :attr difference: nonzero components of X_ξ(FL°^z) - FL°^*(Y°_ξ^z)
    :attr on_constraints: the difference only vanishes modulo the final constraints
    :attr holds: FL°_* X_ξ = Y°_ξ; None when L(X_ξ)𝓛 does not vanish
    """

    model_config = _MODEL_CONFIG

    generator: str
    variation: sympy.Expr
    projectable: bool
    difference: Dict[sympy.Symbol, sympy.Expr] = {}
    on_constraints: bool = False
    holds: Optional[bool] = None

    @property
    def invariant(self) -> bool:
        return self.variation == 0


def check_legendre_projection(
    theory,
    generator: GeneratorSpec,
    ideal: Optional[ConstraintIdeal] = None,
) -> ProjectionCheck:
    """Check (FL°)_* X_ξ = Y°_ξ for a Lagrangian theory

    ``ideal`` holds the final Lagrangian constraints; a difference that only vanishes
    modulo them is reported with ``on_constraints``.
    """
    kernel: Kernel = theory.kernel
    tower: Tower = theory.tower
    legendre_map = theory.legendre_map
    xi_E = lift_to_E(generator, tower, kernel=kernel)
    X = jet_prolong(xi_E, tower.jet)
    variation = kernel.simplify(lagrangian_variation(X, theory.lagrangian, kernel=kernel))
    if not kernel.is_zero(variation):
        kernel.log.warning(
            "L(X)L does not vanish for '%s': skipping the projection check", generator.name
        )
        return ProjectionCheck(
            generator=generator.name, variation=variation, projectable=False
        )

    target = legendre_map.primary_chart
    Y = lift_to_PSub(xi_E, target, tower.restricted)
    fl = legendre_map.to_primary
    free = set(legendre_map.free_jets)
    projectable = True
    difference: Dict[sympy.Symbol, sympy.Expr] = {}
    on_constraints = False
    for symbol in target.symbols:
        pushed = X.apply(fl.image[symbol])
        image = pushed.xreplace(legendre_map.inverse)
        if free & kernel.normalize(image).free_symbols:
            projectable = False
        residual = pushed - fl.apply(Y.component(symbol))
        if kernel.is_zero(residual):
            continue
        if ideal is not None and kernel.is_zero(ideal.reduce(residual)):
            on_constraints = True
            continue
        difference[symbol] = kernel.simplify(residual)
    if not projectable:
        kernel.log.warning("FL°_* X is not projectable for '%s'", generator.name)
    return ProjectionCheck(
        generator=generator.name,
        variation=ZERO,
        projectable=projectable,
        difference=difference,
        on_constraints=on_constraints,
        holds=not difference,
    )


class Lifts(BaseModel):
    """Every lift of one generator, as printed by the command line"""

    model_config = _MODEL_CONFIG

    generator: GeneratorSpec
    total: VectorField
    jet: VectorField
    extended: VectorField
    restricted: VectorField
    primary: Optional[VectorField] = None
    extended_primary: Optional[VectorField] = None


def lift_all(theory, generator: GeneratorSpec) -> Lifts:
    """ξ_E, X_ξ, Z_ξ, Y_ξ and, for singular theories, Y°_ξ and Z~_ξ

    A lift that does not restrict to P° is logged and left out.
    """
    kernel: Kernel = theory.kernel
    tower: Tower = theory.tower
    xi_E = lift_to_E(generator, tower, kernel=kernel)
    primary = extended_primary = None
    chart = theory.legendre_map.primary_chart
    if chart.space == SpaceTag.PSUB:
        try:
            primary = lift_to_PSub(xi_E, chart, tower.restricted)
            extended_primary = lift_to_PTilde(xi_E, chart, tower.extended)
        except LiftNotTangent as error:
            kernel.log.warning("%s", error)
    return Lifts(
        generator=generator,
        total=xi_E,
        jet=jet_prolong(xi_E, tower.jet),
        extended=lift_to_MPi(xi_E, tower.extended),
        restricted=lift_to_J1PiStar(xi_E, tower.restricted),
        primary=primary,
        extended_primary=extended_primary,
    )
