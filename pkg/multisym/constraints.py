"""Field equations i(X)Ω = 0 and the constraint algorithm

The vertical components of i(X)Ω are linear in the unknown coefficients of a normalized
multivector X and are solved. The horizontal ones are combinations of them
(i(X_mu) i(X)Ω = 0) and are kept as dependent rows once that identity is checked. Rows
that become free of unknowns are constraints.

The algorithm runs three stages: compatibility constraints from the general X, SOPDE
constraints from the holonomic X (Lagrangian side only), then tangency constraints
L(X_mu)c until no new constraint appears.
"""

from __future__ import annotations

import enum
from typing import Dict, List, Optional, Sequence, Tuple

import sympy
import traitlets
from pydantic import BaseModel, ConfigDict, Field
from traitlets.config import LoggingConfigurable

from .bundle import CoordinateKind
from .elimination import ConstraintIdeal, LinearSolution, LinearSolver
from .errors import (
    InconsistentSystem,
    IterationCapExceeded,
    NonlinearUnknownSystem,
    UnsolvedCoefficient,
)
from .geometry import PhaseSpace, Side
from .multivec import ContractionOrder, MultiVectorField, contract_multi, factor_derivatives
from .symkernel import Kernel, ScalarExpr, linear_split

_MODEL_CONFIG = ConfigDict(frozen=True, extra="forbid", arbitrary_types_allowed=True)


class FieldEquationSystem(BaseModel):
    """Components of i(X)Ω and their solution

    Every row is in exactly one of ``pivot_rows``, ``dependent``, ``residuals`` and
    ``deferred``.

    :attr rows: (coordinate, coefficient of its differential) for nonzero components
    :attr bindings: solved unknown coefficients
    :attr pivot_rows: rows used as pivots
    :attr dependent: rows that follow from the others
    :attr residuals: (coordinate, value) of rows left free of unknowns
    :attr deferred: (coordinate, value) of rows not linear in the unknowns
    :attr assumptions: non-numeric pivots, assumed nonzero
    :attr horizontal: base coordinates among the rows
    """

    model_config = _MODEL_CONFIG

    side: Side
    multivector: MultiVectorField
    rows: Tuple[Tuple[sympy.Symbol, sympy.Expr], ...]
    bindings: Dict[sympy.Symbol, sympy.Expr] = {}
    pivot_rows: Tuple[sympy.Symbol, ...] = ()
    dependent: Tuple[sympy.Symbol, ...] = ()
    residuals: Tuple[Tuple[sympy.Symbol, sympy.Expr], ...] = ()
    deferred: Tuple[Tuple[sympy.Symbol, sympy.Expr], ...] = ()
    assumptions: Tuple[sympy.Expr, ...] = ()
    certified: bool = False
    horizontal: Tuple[sympy.Symbol, ...] = ()
    holonomic: bool = False

    @property
    def solved(self) -> MultiVectorField:
        """X with the solved coefficients substituted"""
        return self.multivector.substitute(self.bindings)

    @property
    def vertical_rows(self) -> Tuple[Tuple[sympy.Symbol, sympy.Expr], ...]:
        horizontal = set(self.horizontal)
        return tuple(row for row in self.rows if row[0] not in horizontal)


def _follows_from_vertical(
    kernel: Kernel,
    X: MultiVectorField,
    mu: int,
    value: ScalarExpr,
    vertical: Dict[sympy.Symbol, ScalarExpr],
) -> bool:
    """Whether the x^mu row is -X_mu^A times the vertical rows, as i(X_mu) i(X)Ω = 0"""
    combination = sympy.Add(
        value, *(X.component(mu, symbol) * row for symbol, row in vertical.items())
    )
    return kernel.is_zero(combination)


def derive_field_equations(
    space: PhaseSpace,
    X: MultiVectorField,
    solver: Optional[LinearSolver] = None,
    certify: bool = True,
    holonomic: bool = False,
    strict: bool = False,
) -> FieldEquationSystem:
    """Extract and solve the field equations i(X)Ω = 0

    Vertical rows are solved. A horizontal row is dependent when it is the combination of
    the vertical rows forced by i(X_mu) i(X)Ω = 0; otherwise it is reduced with the
    bindings and classified like any other row. Nonlinear rows are deferred and solving
    continues without them.

    :raises NonlinearUnknownSystem: If rows were deferred and ``strict`` is set.
    """
    kernel = space.kernel
    solver = solver or LinearSolver(kernel=kernel)
    space.chart.check_same(X.chart)
    form = contract_multi(X, space.omega)
    base = {c.symbol: mu for mu, c in enumerate(space.chart.base)}
    rows: List[Tuple[sympy.Symbol, sympy.Expr]] = []
    horizontal: List[Tuple[sympy.Symbol, sympy.Expr]] = []
    for monomial, coefficient in form.items():
        (symbol,) = form.monomial_symbols(monomial)
        (horizontal if symbol in base else rows).append((symbol, coefficient))
    solution = solver.solve([c for _, c in rows], X.free_unknowns, certify=certify)
    pivot_rows = [rows[i][0] for i in solution.pivot_rows]
    dependent = [rows[i][0] for i in solution.dependent]
    residuals = [(rows[i][0], v) for i, v in solution.residuals]
    deferred = [(rows[i][0], v) for i, v in solution.deferred]
    vertical = dict(rows)
    for symbol, value in horizontal:
        if _follows_from_vertical(kernel, X, base[symbol], value, vertical):
            dependent.append(symbol)
            continue
        reduced = kernel.normalize(value.xreplace(solution.bindings))
        if reduced == 0 or kernel.is_zero(reduced):
            dependent.append(symbol)
            continue
        _, _, nonlinear = linear_split(reduced, X.free_unknowns)
        if nonlinear or reduced.free_symbols & X.free_unknowns:
            deferred.append((symbol, reduced))
        else:
            residuals.append((symbol, reduced))
    system = FieldEquationSystem(
        side=space.side,
        multivector=X,
        rows=tuple(rows + horizontal),
        bindings=solution.bindings,
        pivot_rows=tuple(pivot_rows),
        dependent=tuple(dependent),
        residuals=tuple(residuals),
        deferred=tuple(deferred),
        assumptions=tuple(p for _, p in solution.pivots),
        certified=solution.certified,
        horizontal=tuple(symbol for symbol, _ in horizontal),
        holonomic=holonomic,
    )
    if system.deferred:
        message = f"{len(system.deferred)} field equations are not linear in the unknowns"
        if strict:
            raise NonlinearUnknownSystem(message)
        solver.log.warning(message)
    return system


class Stage(str, enum.Enum):
    COMPATIBILITY = "compatibility"
    SOPDE = "sopde"
    TANGENCY = "tangency"


class Termination(str, enum.Enum):
    CONVERGED = "converged"
    ITERATION_CAP = "iteration-cap"


class Constraint(BaseModel):
    """One independent constraint

    :attr expr: the constraint with nonzero factors removed, as printed
    :attr family: field family of the row or constraint it was derived from
    :attr source: coordinate whose differential or constraint produced it
    """

    model_config = _MODEL_CONFIG

    expr: sympy.Expr
    raw: sympy.Expr
    stage: Stage
    family: str
    source: str
    iteration: int = 0


class ConstraintReport(BaseModel):
    """Staged result of the constraint algorithm"""

    model_config = _MODEL_CONFIG

    side: Side
    space: str
    compatibility: Tuple[Constraint, ...] = ()
    sopde: Tuple[Constraint, ...] = ()
    tangency: Tuple[Constraint, ...] = ()
    status: Termination = Termination.CONVERGED
    iterations: int = 0
    assumptions: Tuple[sympy.Expr, ...] = ()
    notes: Tuple[str, ...] = ()
    ideal: Optional[ConstraintIdeal] = Field(default=None, exclude=True)
    multivector: Optional[MultiVectorField] = Field(default=None, exclude=True)
    systems: Tuple[FieldEquationSystem, ...] = Field(default=(), exclude=True)

    @property
    def constraints(self) -> Tuple[Constraint, ...]:
        return self.compatibility + self.sopde + self.tangency

    def families(self, stage: Optional[Stage] = None) -> Dict[str, List[Constraint]]:
        grouped: Dict[str, List[Constraint]] = {}
        for constraint in self.constraints:
            if stage is None or constraint.stage == stage:
                grouped.setdefault(constraint.family, []).append(constraint)
        return grouped

    @property
    def final_is_primary(self) -> bool:
        return not self.constraints


def _family_of(space: PhaseSpace, symbol: sympy.Symbol) -> str:
    return space.chart.coordinate(symbol).family


class ConstraintAlgorithm(LoggingConfigurable):
    """Staged constraint algorithm on a phase space"""

    max_iter = traitlets.Int(
        10, help="Maximal number of tangency rounds before giving up."
    ).tag(config=True)

    contraction_order = traitlets.UseEnum(
        ContractionOrder,
        default_value=ContractionOrder.INNERMOST_FIRST,
        help="Order of the iterated contraction i(X)Ω.",
    ).tag(config=True)

    @traitlets.validate("max_iter")
    def _validate_max_iter(self, proposal: dict) -> int:
        if proposal["value"] < 1:
            raise traitlets.TraitError("max_iter must be strictly positive")
        return proposal["value"]

    def __init__(self, solver: Optional[LinearSolver] = None, **kwargs):
        super().__init__(**kwargs)
        self._solver = solver

    def solver_for(self, kernel: Kernel) -> LinearSolver:
        if self._solver is None or self._solver.kernel is not kernel:
            self._solver = LinearSolver(kernel=kernel, parent=self)
        return self._solver

    def _record(
        self,
        space: PhaseSpace,
        ideal: ConstraintIdeal,
        residuals: Sequence[Tuple[str, str, ScalarExpr]],
        stage: Stage,
        iteration: int = 0,
    ) -> List[Constraint]:
        """Add the independent residuals to ``ideal``

        :raises InconsistentSystem: If a residual reduces to a nonzero constant.
        """
        kernel = space.kernel
        found = []
        for family, source, value in residuals:
            remainder = ideal.reduce(value)
            if remainder.is_Number and remainder != 0:
                raise InconsistentSystem(
                    f"Constraint from {source} reduces to {remainder}", residual=value
                )
            if kernel.is_zero(remainder) or not ideal.add(remainder):
                continue
            self.log.debug("%s constraint from %s", stage.value, source)
            found.append(
                Constraint(
                    expr=kernel.strip_nonzero_factors(remainder),
                    raw=remainder,
                    stage=stage,
                    family=family,
                    source=source,
                    iteration=iteration,
                )
            )
        return found

    def _system_residuals(
        self, space: PhaseSpace, system: FieldEquationSystem
    ) -> List[Tuple[str, str, ScalarExpr]]:
        return [
            (_family_of(space, symbol), str(symbol), value)
            for symbol, value in system.residuals
        ]

    def run(self, space: PhaseSpace) -> ConstraintReport:
        """Run every stage on ``space``

        :raises InconsistentSystem: If a constraint is a nonzero constant.
        :raises IterationCapExceeded: If tangency does not converge within
            :attr:`max_iter` rounds; the partial report is attached.
        """
        kernel = space.kernel
        chart = space.chart
        solver = self.solver_for(kernel)
        solvable = [c.symbol for c in chart.fields]
        ideal = ConstraintIdeal(
            space.variables, kernel=kernel, solver=solver, solvable=solvable
        )
        assumptions: List[sympy.Expr] = []
        systems: List[FieldEquationSystem] = []
        notes = ["compatibility constraints are extracted before SOPDE constraints"]

        self.log.debug("Compatibility stage on %s", chart.space.value)
        X = MultiVectorField.general(chart, order=self.contraction_order, kernel=kernel)
        system = derive_field_equations(space, X, solver=solver)
        systems.append(system)
        assumptions += system.assumptions
        compatibility = self._record(
            space, ideal, self._system_residuals(space, system), Stage.COMPATIBILITY
        )
        X = system.solved

        sopde: List[Constraint] = []
        if space.side == Side.LAGRANGIAN and chart.jets:
            self.log.debug("SOPDE stage")
            holonomic = MultiVectorField.general(
                chart, holonomic=True, order=self.contraction_order, kernel=kernel
            )
            system = derive_field_equations(
                space, holonomic, solver=solver, holonomic=True
            )
            systems.append(system)
            assumptions += system.assumptions
            sopde = self._record(
                space, ideal, self._system_residuals(space, system), Stage.SOPDE
            )
            X = system.solved

        def report(
            status: Termination, tangency: Sequence[Constraint], iterations: int
        ) -> ConstraintReport:
            return ConstraintReport(
                side=space.side,
                space=chart.space.value,
                compatibility=tuple(compatibility),
                sopde=tuple(sopde),
                tangency=tuple(tangency),
                status=status,
                iterations=iterations,
                assumptions=tuple(dict.fromkeys(assumptions)),
                notes=tuple(notes),
                ideal=ideal,
                multivector=X,
                systems=tuple(systems),
            )

        tangency: List[Constraint] = []
        pending = compatibility + sopde
        iteration = 0
        while pending:
            iteration += 1
            if iteration > self.max_iter:
                partial = report(Termination.ITERATION_CAP, tangency, iteration - 1)
                raise IterationCapExceeded(
                    f"New constraints still appear after {self.max_iter} tangency rounds",
                    report=partial,
                )
            self.log.debug("Tangency round %d on %d constraints", iteration, len(pending))
            rows: List[ScalarExpr] = []
            origins: List[Constraint] = []
            for constraint in pending:
                for derivative in factor_derivatives(X, constraint.raw):
                    rows.append(derivative)
                    origins.append(constraint)
            point = None
            if len(rows) > solver.symbolic_row_limit:
                point = ideal.sample_point(chart.symbols, solver.rng(iteration))
            solution: LinearSolution = solver.solve(rows, X.free_unknowns, point=point)
            assumptions += [p for _, p in solution.pivots]
            X = X.substitute(solution.bindings)
            if solution.deferred:
                self.log.warning(
                    "%d tangency conditions are not linear in the unknowns",
                    len(solution.deferred),
                )
            residuals = [
                (origins[i].family, origins[i].source, value)
                for i, value in solution.residuals
            ]
            pending = self._record(space, ideal, residuals, Stage.TANGENCY, iteration)
            tangency += pending

        if not (compatibility or sopde or tangency):
            self.log.info("No constraints on %s: the final submanifold is the whole space", chart.space.value)
        return report(Termination.CONVERGED, tangency, iteration)


def run_constraint_algorithm(
    theory,
    side: Side = Side.LAGRANGIAN,
    max_iter: Optional[int] = None,
    parent=None,
) -> ConstraintReport:
    """Constraint algorithm of ``theory`` on the Lagrangian or Hamiltonian side"""
    space = theory.phase_space(Side(side))
    kwargs = {} if max_iter is None else {"max_iter": max_iter}
    algorithm = ConstraintAlgorithm(
        solver=theory.solver, parent=parent or theory.kernel.parent, **kwargs
    )
    return algorithm.run(space)


# Integral sections


def derivative_marker(mu: Sequence[int], target: str) -> sympy.Symbol:
    """Formal derivative ∂_mu of a field or momentum on an integral section"""
    return sympy.Symbol(f"d[{','.join(str(m) for m in mu)}]({target})")


def on_sections(system: FieldEquationSystem) -> Tuple[sympy.Expr, ...]:
    """Field equations written on integral sections of X

    Unknown coefficients X[mu](y) become ∂_mu y, X[mu](P[nu](y)) become ∂_mu p_y^nu and,
    on holonomic sections, multivelocities y_nu become ∂_nu y and X[mu](y_nu) become
    ∂_mu ∂_nu y.

    :raises UnsolvedCoefficient: If some rows are not linear in the coefficients.
    """
    if system.deferred:
        raise UnsolvedCoefficient(
            f"{len(system.deferred)} field equations have no linear solution"
        )
    X = system.multivector
    chart = X.chart
    markers: Dict[sympy.Symbol, sympy.Expr] = {}
    for mu, factor in enumerate(X.factors):
        for symbol, component in factor.components.items():
            if component not in X.unknowns:
                continue
            coordinate = chart.coordinate(symbol)
            if coordinate.kind == CoordinateKind.JET:
                indices = sorted([mu, coordinate.derivative])
                markers[component] = derivative_marker(indices, str(coordinate.field))
            else:
                markers[component] = derivative_marker([mu], str(symbol))
    if system.holonomic:
        for coordinate in chart.jets:
            markers[coordinate.symbol] = derivative_marker(
                [coordinate.derivative], str(coordinate.field)
            )
    kernel: Kernel = X.factors[0].kernel or Kernel()
    equations = []
    for _, value in system.vertical_rows:
        equation = kernel.normalize(value.xreplace(markers))
        if equation != 0:
            equations.append(equation)
    return tuple(equations)
