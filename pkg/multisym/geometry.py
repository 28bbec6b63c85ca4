"""Poincaré-Cartan, Liouville and Hamilton-Cartan forms, Legendre maps

A :class:`LagrangianTheory` holds a Lagrangian on J1Pi and derives, on demand and only
once, its Poincaré-Cartan forms, its Legendre map and the De Donder-Weyl Hamiltonian
theory on J1PiStar (regular case) or on the primary constraint submanifold P° (singular
case).
"""

from __future__ import annotations

import enum
import functools
from typing import Callable, Dict, List, Optional, Tuple

import sympy
from pydantic import BaseModel, ConfigDict

from .bundle import (
    BundleChart,
    ChartMap,
    SpaceTag,
    Tower,
    momentum_coordinate,
    projection,
    restrict,
)
from .elimination import LinearSolution, LinearSolver
from .errors import NoHamiltonianFound, NonlinearInversion
from .exterior import DiffForm, VectorField, contract, d, pullback, volume, volume_contraction
from .symkernel import ZERO, Kernel, ScalarExpr, gradient


class Side(str, enum.Enum):
    LAGRANGIAN = "lagrangian"
    HAMILTONIAN = "hamiltonian"


_MODEL_CONFIG = ConfigDict(frozen=True, extra="forbid", arbitrary_types_allowed=True)


def momentum_form(
    chart: BundleChart,
    momentum: Callable[[sympy.Symbol, int], ScalarExpr],
    kernel: Optional[Kernel] = None,
) -> DiffForm:
    """Σ momentum(y, mu) dy ^ d^(m-1)x_mu over the field components of ``chart``"""
    m = chart.base_dimension
    terms: Dict[Tuple[int, ...], ScalarExpr] = {}
    contractions = [volume_contraction(chart, mu) for mu in range(m)]
    for field in chart.fields:
        dy = DiffForm.from_symbols(chart, [field.symbol])
        for mu in range(m):
            coefficient = momentum(field.symbol, mu)
            if coefficient == 0:
                continue
            for monomial, value in (dy ^ contractions[mu]).terms.items():
                terms[monomial] = terms.get(monomial, ZERO) + coefficient * value
    return DiffForm(chart, m, terms, kernel=kernel, check=False)


def liouville_forms(
    chart: BundleChart, kernel: Optional[Kernel] = None
) -> Tuple[DiffForm, DiffForm]:
    """Canonical forms Θ = p_A^mu dy^A ^ d^(m-1)x_mu + p d^m x and Ω = -dΘ on MPi

    :raises WrongSpace: If ``chart`` is not an extended multimomentum chart.
    """
    chart.require(SpaceTag.MPI)
    theta = momentum_form(chart, chart.momentum, kernel=kernel)
    scalar = chart.scalar_momentum
    assert scalar is not None
    theta = theta + volume(chart, kernel=kernel) * scalar.symbol
    return theta, -d(theta)


def hamilton_cartan(
    chart: BundleChart, hamiltonian: ScalarExpr, kernel: Optional[Kernel] = None
) -> Tuple[DiffForm, DiffForm]:
    """Θ_H = p_A^mu dy^A ^ d^(m-1)x_mu - H d^m x on J1PiStar or on P°

    On P° the eliminated momenta are replaced by their constraint expressions.
    """
    chart.require(SpaceTag.J1PISTAR, SpaceTag.PSUB)
    substitutions = chart.substitution_map

    def momentum(field: sympy.Symbol, mu: int) -> ScalarExpr:
        symbol = momentum_coordinate(chart.coordinate(field), mu).symbol
        if chart.has(symbol):
            return symbol
        return substitutions.get(symbol, ZERO)

    theta = momentum_form(chart, momentum, kernel=kernel)
    theta = theta - volume(chart, kernel=kernel) * sympy.sympify(hamiltonian)
    return theta, -d(theta)


class PoincareCartan(BaseModel):
    """Objects derived from a Lagrangian on J1Pi"""

    model_config = _MODEL_CONFIG

    theta: DiffForm
    omega: DiffForm
    energy: sympy.Expr
    momenta: Dict[sympy.Symbol, sympy.Expr]
    jets: Tuple[sympy.Symbol, ...]
    hessian: Dict[Tuple[sympy.Symbol, sympy.Symbol], sympy.Expr]

    def hessian_entry(self, first: sympy.Symbol, second: sympy.Symbol) -> sympy.Expr:
        return self.hessian.get((first, second), ZERO)

    def hessian_matrix(self) -> sympy.Matrix:
        """Dense Hessian, rows and columns in chart order of the jet coordinates"""
        return sympy.Matrix(
            [[self.hessian_entry(a, b) for b in self.jets] for a in self.jets]
        )

    @property
    def hessian_is_zero(self) -> bool:
        return not self.hessian


def poincare_cartan(
    chart: BundleChart, lagrangian: ScalarExpr, kernel: Optional[Kernel] = None
) -> PoincareCartan:
    """Θ_L, Ω_L, E_L and the Hessian of ``lagrangian`` on a J1Pi chart"""
    chart.require(SpaceTag.J1PI)
    kernel = kernel or Kernel()
    lagrangian = kernel.normalize(lagrangian)
    jets = tuple(c.symbol for c in chart.jets)
    momenta = {
        jet: kernel.normalize(value)
        for jet, value in gradient(lagrangian, jets).items()
    }
    energy = kernel.normalize(
        sympy.Add(*(value * jet for jet, value in momenta.items())) - lagrangian
    )
    hessian: Dict[Tuple[sympy.Symbol, sympy.Symbol], sympy.Expr] = {}
    for jet, value in momenta.items():
        for other, second in gradient(value, jets).items():
            second = kernel.normalize(second)
            if second != 0:
                hessian[(jet, other)] = second

    def momentum(field: sympy.Symbol, mu: int) -> ScalarExpr:
        return momenta.get(chart.jet(field, mu), ZERO)

    theta = momentum_form(chart, momentum, kernel=kernel)
    theta = theta - volume(chart, kernel=kernel) * energy
    return PoincareCartan(
        theta=theta,
        omega=-d(theta),
        energy=energy,
        momenta=momenta,
        jets=jets,
        hessian=hessian,
    )


class LegendreMap(BaseModel):
    """Legendre map FL: J1Pi -> J1PiStar, its extension and its partial inverse

    :attr restricted: chart map to J1PiStar (momenta ∂L/∂y^A_nu)
    :attr extended: chart map to MPi (also p = L - y^A_nu ∂L/∂y^A_nu)
    :attr inverse: multivelocities solved in terms of momenta and free multivelocities
    :attr free_jets: multivelocities the momenta do not determine
    :attr constraints: primary constraints p_i = f_i
    :attr kernel_basis: basis of the Hessian kernel, one map per free multivelocity
    :attr assumptions: non-numeric pivots of the inversion, assumed nonzero
    :attr nonlinear: momentum equations not linear in the multivelocities
    """

    model_config = _MODEL_CONFIG

    restricted: ChartMap
    extended: ChartMap
    inverse: Dict[sympy.Symbol, sympy.Expr]
    free_jets: Tuple[sympy.Symbol, ...]
    constraints: Tuple[Tuple[sympy.Symbol, sympy.Expr], ...]
    kernel_basis: Tuple[Dict[sympy.Symbol, sympy.Expr], ...]
    assumptions: Tuple[sympy.Expr, ...] = ()
    nonlinear: bool = False

    @property
    def regular(self) -> bool:
        return not (self.free_jets or self.constraints or self.nonlinear)

    @property
    def classification(self) -> str:
        return "regular" if self.regular else "singular"

    @functools.cached_property
    def primary_chart(self) -> BundleChart:
        """P°: J1PiStar itself for regular theories"""
        return restrict(self.restricted.target, self.constraints)

    @functools.cached_property
    def to_primary(self) -> ChartMap:
        """FL°: J1Pi -> P°"""
        target = self.primary_chart
        image = self.restricted.image
        return ChartMap(
            source=self.restricted.source,
            target=target,
            images=tuple((s, image[s]) for s in target.symbols),
        )

    def require_inverse(self) -> Dict[sympy.Symbol, sympy.Expr]:
        """:raises NonlinearInversion: If no linear inverse exists"""
        if self.nonlinear:
            raise NonlinearInversion(
                "The momenta are not linear in the multivelocities: no inverse"
            )
        return self.inverse

    def check_factorization(self, kernel: Optional[Kernel] = None) -> bool:
        """FL = σ ∘ FL~ as chart maps"""
        kernel = kernel or Kernel()
        sigma = projection(self.extended.target, self.restricted.target)
        composed = sigma.compose(self.extended)
        return all(
            kernel.is_zero(composed.image[s] - self.restricted.image[s])
            for s in self.restricted.target.symbols
        )


def legendre(
    tower: Tower,
    cartan: PoincareCartan,
    kernel: Optional[Kernel] = None,
    solver: Optional[LinearSolver] = None,
) -> LegendreMap:
    """Legendre map of a Lagrangian and its linear inversion

    The momentum equations are solved for the multivelocities; rows left without
    multivelocities are solved for momenta and give the primary constraints.
    """
    kernel = kernel or Kernel()
    solver = solver or LinearSolver(kernel=kernel)
    jet_chart, restricted, extended = tower.jet, tower.restricted, tower.extended
    images: List[Tuple[sympy.Symbol, sympy.Expr]] = []
    equations: List[ScalarExpr] = []
    momentum_symbols: List[sympy.Symbol] = []
    for coordinate in restricted.coordinates:
        if coordinate.field is None:
            images.append((coordinate.symbol, coordinate.symbol))
            continue
        jet = jet_chart.jet(coordinate.field, coordinate.derivative)
        value = cartan.momenta.get(jet, ZERO)
        images.append((coordinate.symbol, value))
        equations.append(coordinate.symbol - value)
        momentum_symbols.append(coordinate.symbol)
    restricted_map = ChartMap(source=jet_chart, target=restricted, images=tuple(images))
    scalar = extended.scalar_momentum
    assert scalar is not None
    extended_map = ChartMap(
        source=jet_chart,
        target=extended,
        images=tuple(images) + ((scalar.symbol, -cartan.energy),),
    )

    jets = [c.symbol for c in jet_chart.jets]
    velocities = solver.solve(equations, jets, certify=False)
    constraints: List[Tuple[sympy.Symbol, sympy.Expr]] = []
    assumptions = [pivot for _, pivot in velocities.pivots]
    if velocities.residuals:
        rows = [value for _, value in velocities.residuals]
        primary = solver.solve(rows, momentum_symbols, certify=False)
        assumptions += [pivot for _, pivot in primary.pivots]
        for symbol in momentum_symbols:
            if symbol in primary.bindings:
                constraints.append((symbol, primary.bindings[symbol]))
        if primary.residuals or primary.deferred:
            raise NonlinearInversion(
                "Primary constraints are not linear in the multimomenta"
            )

    basis: List[Dict[sympy.Symbol, sympy.Expr]] = []
    for free in velocities.free:
        direction = {free: sympy.Integer(1)}
        for jet, binding in velocities.bindings.items():
            value = kernel.normalize(sympy.diff(binding, free))
            if value != 0:
                direction[jet] = value
        basis.append(direction)
    return LegendreMap(
        restricted=restricted_map,
        extended=extended_map,
        inverse=dict(velocities.bindings),
        free_jets=tuple(velocities.free),
        constraints=tuple(constraints),
        kernel_basis=tuple(basis),
        assumptions=tuple(assumptions),
        nonlinear=bool(velocities.deferred),
    )


class HamiltonianTheory(BaseModel):
    """De Donder-Weyl Hamiltonian system on J1PiStar or on P°

    :attr user_supplied: the Hamiltonian was given with the theory and verified
    :attr pullback_verified: FL°* Θ_H = Θ_L holds symbolically
    """

    model_config = _MODEL_CONFIG

    tower: Tower
    chart: BundleChart
    hamiltonian: sympy.Expr
    theta: DiffForm
    omega: DiffForm
    legendre: Optional[LegendreMap] = None
    user_supplied: bool = False
    pullback_verified: bool = False

    @property
    def singular(self) -> bool:
        return self.chart.space == SpaceTag.PSUB


def hamiltonize(
    tower: Tower,
    cartan: PoincareCartan,
    legendre_map: LegendreMap,
    kernel: Optional[Kernel] = None,
    hamiltonian: Optional[ScalarExpr] = None,
) -> HamiltonianTheory:
    """Hamiltonian system associated with a Lagrangian one

    The Hamiltonian is E_L with the solved multivelocities substituted; the remaining
    multivelocities must cancel. A supplied ``hamiltonian`` is verified against E_L and
    preferred for display.

    :raises NoHamiltonianFound: If E_L does not descend to P°, or the supplied
        Hamiltonian does not pull back to E_L.
    """
    kernel = kernel or Kernel()
    if legendre_map.nonlinear:
        raise NoHamiltonianFound(
            "The Legendre map could not be inverted: no Hamiltonian"
        )
    chart = legendre_map.primary_chart
    eliminated = chart.substitution_map
    energy = kernel.simplify(
        sympy.sympify(cartan.energy).xreplace(legendre_map.inverse).xreplace(eliminated)
    )
    jets = set(cartan.jets)
    leftover = sorted(energy.free_symbols & jets, key=sympy.default_sort_key)
    if leftover:
        if not all(kernel.is_zero(sympy.diff(energy, jet)) for jet in leftover):
            raise NoHamiltonianFound(
                "The Lagrangian energy depends on undetermined multivelocities "
                f"({', '.join(map(str, leftover))})",
                residual=energy,
            )
        energy = kernel.simplify(energy.xreplace({jet: ZERO for jet in leftover}))

    user_supplied = hamiltonian is not None
    if hamiltonian is not None:
        hamiltonian = kernel.normalize(sympy.sympify(hamiltonian).xreplace(eliminated))
        residual = legendre_map.to_primary.apply(hamiltonian) - cartan.energy
        if not kernel.is_zero(residual):
            raise NoHamiltonianFound(
                "The supplied Hamiltonian does not pull back to the Lagrangian energy",
                residual=kernel.simplify(residual),
            )
    else:
        hamiltonian = energy

    theta, omega = hamilton_cartan(chart, hamiltonian, kernel=kernel)
    pulled = pullback(legendre_map.to_primary, theta)
    verified = (pulled - cartan.theta).is_zero(kernel)
    return HamiltonianTheory(
        tower=tower,
        chart=chart,
        hamiltonian=hamiltonian,
        theta=theta,
        omega=omega,
        legendre=legendre_map,
        user_supplied=user_supplied,
        pullback_verified=verified,
    )


def kernel_symbol(coordinate: sympy.Symbol) -> sympy.Symbol:
    return sympy.Symbol(f"K({coordinate.name})")


def form_kernel(
    form: DiffForm,
    vertical: bool = False,
    extra: Callable[[VectorField], List[ScalarExpr]] = lambda v: [],
    reduce: Callable[[ScalarExpr], ScalarExpr] = lambda e: e,
    solver: Optional[LinearSolver] = None,
) -> Tuple[List[VectorField], LinearSolution]:
    """Basis of {v : i(v) form = 0} over the field of chart functions

    ``extra`` adds linear conditions on the generic vector field, ``reduce`` maps every
    condition before solving (e.g. to its remainder modulo constraints).
    """
    chart = form.chart
    kernel = form.kernel or Kernel()
    solver = solver or LinearSolver(kernel=kernel)
    base = {c.symbol for c in chart.base}
    coordinates = [s for s in chart.symbols if not (vertical and s in base)]
    unknowns = {s: kernel_symbol(s) for s in coordinates}
    generic = VectorField(chart, unknowns, kernel=kernel)
    rows = [reduce(c) for c in contract(generic, form).coefficients()]
    rows += [reduce(c) for c in extra(generic)]
    solution = solver.solve(rows, unknowns.values(), certify=False)
    basis = []
    for free in solution.free:
        components: Dict[sympy.Symbol, ScalarExpr] = {}
        for coordinate, unknown in unknowns.items():
            if unknown == free:
                components[coordinate] = sympy.Integer(1)
            elif unknown in solution.bindings:
                components[coordinate] = sympy.diff(solution.bindings[unknown], free)
        basis.append(VectorField(chart, components, kernel=kernel))
    return basis, solution


def is_nondegenerate(form: DiffForm, solver: Optional[LinearSolver] = None) -> bool:
    """1-nondegeneracy at generic points: v ↦ i(v)Ω has a trivial kernel"""
    basis, _ = form_kernel(form, solver=solver)
    return not basis


class PhaseSpace(BaseModel):
    """Chart with the forms of one formalism, as used by constraints and noether

    :attr variables: coordinates in which constraints are polynomial (multivelocities or
        multimomenta)
    """

    model_config = _MODEL_CONFIG

    side: Side
    chart: BundleChart
    theta: DiffForm
    omega: DiffForm
    energy: Optional[sympy.Expr] = None
    kernel: Kernel
    variables: Tuple[sympy.Symbol, ...] = ()


class LagrangianTheory(BaseModel):
    """First-order Lagrangian field theory on a chart tower

    :attr assumptions: declared nonzero quantities and free-form hypotheses
    """

    model_config = _MODEL_CONFIG

    name: str = "theory"
    tower: Tower
    lagrangian: sympy.Expr
    kernel: Kernel
    hamiltonian: Optional[sympy.Expr] = None
    assumptions: Tuple[str, ...] = ()

    @functools.cached_property
    def solver(self) -> LinearSolver:
        return LinearSolver(kernel=self.kernel, parent=self.kernel.parent)

    @functools.cached_property
    def cartan(self) -> PoincareCartan:
        self.kernel.log.debug("Poincaré-Cartan forms of %s", self.name)
        return poincare_cartan(self.tower.jet, self.lagrangian, kernel=self.kernel)

    @functools.cached_property
    def legendre_map(self) -> LegendreMap:
        self.kernel.log.debug("Legendre map of %s", self.name)
        return legendre(self.tower, self.cartan, kernel=self.kernel, solver=self.solver)

    @functools.cached_property
    def hamiltonian_theory(self) -> HamiltonianTheory:
        self.kernel.log.debug("Hamiltonian formalism of %s", self.name)
        return hamiltonize(
            self.tower,
            self.cartan,
            self.legendre_map,
            kernel=self.kernel,
            hamiltonian=self.hamiltonian,
        )

    @functools.cached_property
    def lagrangian_space(self) -> PhaseSpace:
        return PhaseSpace(
            side=Side.LAGRANGIAN,
            chart=self.tower.jet,
            theta=self.cartan.theta,
            omega=self.cartan.omega,
            energy=self.cartan.energy,
            kernel=self.kernel,
            variables=self.cartan.jets,
        )

    @functools.cached_property
    def hamiltonian_space(self) -> PhaseSpace:
        hamiltonian = self.hamiltonian_theory
        return PhaseSpace(
            side=Side.HAMILTONIAN,
            chart=hamiltonian.chart,
            theta=hamiltonian.theta,
            omega=hamiltonian.omega,
            energy=hamiltonian.hamiltonian,
            kernel=self.kernel,
            variables=tuple(c.symbol for c in hamiltonian.chart.momenta),
        )

    @functools.cached_property
    def multimomentum_space(self) -> PhaseSpace:
        theta, omega = liouville_forms(self.tower.extended, kernel=self.kernel)
        return PhaseSpace(
            side=Side.HAMILTONIAN,
            chart=self.tower.extended,
            theta=theta,
            omega=omega,
            kernel=self.kernel,
            variables=tuple(c.symbol for c in self.tower.extended.momenta),
        )

    def phase_space(self, side: Side) -> PhaseSpace:
        if Side(side) == Side.LAGRANGIAN:
            return self.lagrangian_space
        return self.hamiltonian_space

    @property
    def assumption_ledger(self) -> Tuple[str, ...]:
        """Declared hypotheses followed by the pivots of the Legendre inversion"""
        pivots = tuple(f"{p} != 0" for p in self.legendre_map.assumptions)
        return tuple(dict.fromkeys(self.assumptions + pivots))
