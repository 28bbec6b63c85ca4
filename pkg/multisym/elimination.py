"""Linear elimination over the field of chart functions

:class:`LinearSolver` solves systems that are linear in a set of unknowns with
coefficients that are functions of the chart coordinates, the way a sparse direct solver
would: pivots are chosen by a Markowitz-like cost that prefers numeric and monomial
coefficients, and every non-numeric pivot is recorded as a nonzero assumption.
Coefficients are converted to a sympy field of rational functions before elimination, so
no expression is simplified while rows are combined.

Large systems whose pivots would not all be numeric are first evaluated at a random
rational point. When they are consistent there, only the independent rows are eliminated
symbolically, in the pivot order found at that point.

:class:`ConstraintIdeal` keeps an independent set of constraints that are polynomial in
the jet or momentum coordinates with coefficients depending on the configuration bundle
coordinates only.
"""

from __future__ import annotations

import random
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import sympy
import traitlets
from sympy.polys.constructor import construct_domain
from sympy.polys.domains import QQ
from sympy.polys.matrices import DomainMatrix
from traitlets.config import LoggingConfigurable

from .symkernel import (
    ONE,
    ZERO,
    DerivedFunction,
    Kernel,
    ScalarExpr,
    expand_derived,
    linear_split,
)


class NotRational(Exception):
    """Raised internally when a random evaluation leaves the rationals"""


def random_rational(rng: random.Random) -> sympy.Rational:
    numerator = rng.choice([-1, 1]) * rng.randint(1, 29)
    return sympy.Rational(numerator, rng.randint(1, 7))


def random_point(
    symbols: Iterable[sympy.Symbol], rng: random.Random
) -> Dict[sympy.Symbol, sympy.Rational]:
    return {s: random_rational(rng) for s in sorted(symbols, key=sympy.default_sort_key)}


def evaluate_rational(
    expr: ScalarExpr,
    point: Mapping[sympy.Symbol, sympy.Rational],
    functions: Dict[sympy.Expr, sympy.Rational],
    rng: random.Random,
    opaque: bool = False,
) -> sympy.Rational:
    """Value of ``expr`` at ``point``; opaque function applications get random values

    Symbols missing from ``point`` get random values too, remembered in ``functions``.
    With ``opaque`` derived functions are not expanded and get random values as well.

    :raises NotRational: If the value is not a finite rational number.
    """
    explicit = sympy.sympify(expr) if opaque else expand_derived(sympy.sympify(expr))
    for derivative in sorted(explicit.atoms(sympy.Derivative), key=sympy.default_sort_key):
        if derivative not in functions:
            functions[derivative] = random_rational(rng)
    atoms = explicit.atoms(sympy.core.function.AppliedUndef)
    if opaque:
        atoms |= explicit.atoms(DerivedFunction)
    for atom in sorted(atoms, key=sympy.default_sort_key):
        if atom not in functions:
            functions[atom] = random_rational(rng)
    value = explicit.xreplace(functions).xreplace(dict(point))
    missing = value.free_symbols
    if missing:
        for symbol in sorted(missing, key=sympy.default_sort_key):
            if symbol not in functions:
                functions[symbol] = random_rational(rng)
        value = value.xreplace(functions)
    if not value.is_Rational:
        raise NotRational(f"Value {value} is not rational")
    return value


def rational_rank(rows: Sequence[Sequence[sympy.Rational]], width: int) -> int:
    if not rows or width == 0:
        return 0
    matrix = DomainMatrix([[QQ.convert(v) for v in row] for row in rows], (len(rows), width), QQ)
    return matrix.rank()


def rational_field(values: Sequence[ScalarExpr]) -> Tuple[Any, List[Any]]:
    """Smallest sympy field holding every value, and the values converted to it

    Function applications and radicals become independent generators.
    """
    domain, elements = construct_domain(list(values), field=True, composite=True)
    if not domain.is_Field:
        field = domain.get_field()
        elements = [field.convert_from(e, domain) for e in elements]
        domain = field
    return domain, elements


class LinearSolution:
    """Result of :meth:`LinearSolver.solve`

    :attr bindings: solved unknowns in terms of the free unknowns
    :attr free: unknowns left undetermined
    :attr residuals: (row, value) for rows that became free of unknowns
    :attr deferred: (row, value) for rows not linear in the unknowns
    :attr pivot_rows: rows used as pivots, one per bound unknown
    :attr dependent: rows dropped as combinations of the pivot rows
    :attr pivots: (unknown, coefficient) of every non-numeric pivot
    :attr certified: pivots were chosen at a random point where the system is consistent
    """

    __slots__ = (
        "bindings",
        "free",
        "residuals",
        "deferred",
        "dependent",
        "pivot_rows",
        "pivots",
        "certified",
        "rank",
    )

    def __init__(self):
        self.bindings: Dict[sympy.Symbol, ScalarExpr] = {}
        self.free: Tuple[sympy.Symbol, ...] = ()
        self.residuals: List[Tuple[int, ScalarExpr]] = []
        self.deferred: List[Tuple[int, ScalarExpr]] = []
        self.dependent: List[int] = []
        self.pivot_rows: List[int] = []
        self.pivots: List[Tuple[sympy.Symbol, ScalarExpr]] = []
        self.certified = False
        self.rank = 0

    @property
    def consistent(self) -> bool:
        return not self.residuals


class _Row:
    __slots__ = ("origin", "coefficients", "constant")

    def __init__(self, origin: int, coefficients: Dict[sympy.Symbol, Any], constant: Any):
        self.origin = origin
        self.coefficients = coefficients
        self.constant = constant


def _pivot_class(coefficient: ScalarExpr) -> int:
    if coefficient.is_Number:
        return 0
    if not coefficient.is_Add:
        return 1
    return 2


def _element_cost(element: Any) -> Tuple[int, int]:
    """(numeric 0, monomial 1, other 2; number of terms) of a field element"""
    numer = getattr(element, "numer", None)
    if numer is None:
        expression = getattr(element, "ex", None)
        if expression is None:
            return 0, 1
        return _pivot_class(expression), len(sympy.Add.make_args(expression))
    denom = element.denom
    if numer.is_ground and denom.is_ground:
        return 0, 1
    if numer.is_term and denom.is_term:
        return 1, 2
    return 2, len(numer) + len(denom)


Plan = List[Tuple[int, sympy.Symbol]]


class LinearSolver(LoggingConfigurable):
    """Solver for systems linear in unknown coefficients"""

    symbolic_row_limit = traitlets.Int(
        16,
        help="Systems with more rows than this whose pivots are not numeric are "
        "evaluated at a random rational point first; only the rows found independent "
        "there are eliminated symbolically.",
    ).tag(config=True)

    seed = traitlets.Int(
        0, help="Seed of the random rational points used by rank certificates."
    ).tag(config=True)

    @traitlets.validate("symbolic_row_limit")
    def _validate_symbolic_row_limit(self, proposal: dict) -> int:
        if proposal["value"] < 1:
            raise traitlets.TraitError("symbolic_row_limit must be strictly positive")
        return proposal["value"]

    def __init__(self, kernel: Optional[Kernel] = None, **kwargs):
        super().__init__(**kwargs)
        self.kernel = kernel or Kernel(parent=self)

    def rng(self, salt: int = 0) -> random.Random:
        return random.Random(self.seed * 7919 + salt)

    def solve(
        self,
        equations: Sequence[ScalarExpr],
        unknowns: Iterable[sympy.Symbol],
        point: Optional[Mapping[sympy.Symbol, sympy.Rational]] = None,
        certify: bool = True,
    ) -> LinearSolution:
        """Solve ``equations == 0`` for ``unknowns``

        ``point`` is used by rank certificates; by default a random point is drawn.
        With ``certify`` false every row is eliminated.
        """
        unknowns = sorted(set(unknowns), key=sympy.default_sort_key)
        solution = LinearSolution()
        rows: List[_Row] = []
        for origin, equation in enumerate(equations):
            expanded = self.kernel.normalize(equation)
            if expanded == 0:
                solution.dependent.append(origin)
                continue
            coefficients, constant, nonlinear = linear_split(expanded, unknowns)
            if nonlinear:
                solution.deferred.append((origin, expanded))
                continue
            if not coefficients:
                if self.kernel.is_zero(constant):
                    solution.dependent.append(origin)
                else:
                    solution.residuals.append((origin, constant))
                continue
            rows.append(_Row(origin, coefficients, constant))

        plan: Optional[Plan] = None
        if certify and len(rows) > self.symbolic_row_limit and not all(
            any(c.is_Number for c in row.coefficients.values()) for row in rows
        ):
            plan = self._certify(rows, unknowns, point)
            if plan is not None:
                solution.certified = True
            else:
                self.log.info(
                    "No rank certificate for %d rows, eliminating every row", len(rows)
                )
        self._eliminate(rows, unknowns, solution, plan)
        solution.dependent.sort()
        return solution

    def _certify(
        self,
        rows: Sequence[_Row],
        unknowns: Sequence[sympy.Symbol],
        point: Optional[Mapping[sympy.Symbol, sympy.Rational]],
    ) -> Optional[Plan]:
        """Pivot order of the system at a random point if it is consistent there"""
        rng = self.rng(len(rows))
        symbols: set = set()
        for row in rows:
            symbols |= row.constant.free_symbols
            for c in row.coefficients.values():
                symbols |= c.free_symbols
        point = dict(point or {})
        point.update(random_point(symbols - set(point), rng))
        functions: Dict[sympy.Expr, sympy.Rational] = {}
        values: List[Dict[sympy.Symbol, Any]] = []
        constants: List[Any] = []
        try:
            for row in rows:
                entries = {}
                for u, c in row.coefficients.items():
                    value = QQ.convert(evaluate_rational(c, point, functions, rng))
                    if value:
                        entries[u] = value
                values.append(entries)
                constant = evaluate_rational(row.constant, point, functions, rng)
                constants.append(QQ.convert(constant))
        except NotRational:
            return None
        classes = [
            {u: _pivot_class(c) for u, c in row.coefficients.items()} for row in rows
        ]
        order = {u: i for i, u in enumerate(unknowns)}
        active = list(range(len(rows)))
        plan: Plan = []
        while True:
            if any(not values[i] and constants[i] for i in active):
                self.log.info(
                    "Rank certificate: %d rows are inconsistent at a random point", len(rows)
                )
                return None
            active = [i for i in active if values[i]]
            if not active:
                break
            counts: Dict[sympy.Symbol, int] = {}
            for i in active:
                for u in values[i]:
                    counts[u] = counts.get(u, 0) + 1
            _, index, unknown = min(
                (
                    (
                        classes[i].get(u, 2),
                        (len(values[i]) - 1) * (counts[u] - 1),
                        rows[i].origin,
                        order[u],
                    ),
                    i,
                    u,
                )
                for i in active
                for u in values[i]
            )
            plan.append((rows[index].origin, unknown))
            active.remove(index)
            pivot_row = values[index]
            pivot = pivot_row[unknown]
            for i in active:
                factor = values[i].get(unknown)
                if factor is None:
                    continue
                ratio = factor / pivot
                for v, value in pivot_row.items():
                    updated = values[i].get(v, QQ.zero) - ratio * value
                    if updated:
                        values[i][v] = updated
                    else:
                        values[i].pop(v, None)
                values[i].pop(unknown, None)
                constants[i] = constants[i] - ratio * constants[index]
        self.log.debug(
            "Rank certificate: %d rows, %d unknowns, rank %d", len(rows), len(unknowns), len(plan)
        )
        return plan

    def _eliminate(
        self,
        rows: List[_Row],
        unknowns: Sequence[sympy.Symbol],
        solution: LinearSolution,
        plan: Optional[Plan] = None,
    ) -> None:
        if not rows:
            solution.free = tuple(unknowns)
            return
        kernel = self.kernel
        flat: List[ScalarExpr] = []
        for row in rows:
            flat.extend(row.coefficients.values())
            flat.append(row.constant)
        domain, elements = rational_field(flat)
        position = iter(elements)
        active = [
            _Row(row.origin, {u: next(position) for u in row.coefficients}, next(position))
            for row in rows
        ]
        steps = iter(plan) if plan is not None else None
        if plan is not None:
            kept = {origin for origin, _ in plan}
            solution.dependent.extend(row.origin for row in active if row.origin not in kept)
            active = [row for row in active if row.origin in kept]
        order = {u: i for i, u in enumerate(unknowns)}
        eliminated: List[Tuple[sympy.Symbol, _Row]] = []

        def settle(row: _Row) -> None:
            value = kernel.simplify(domain.to_sympy(row.constant)) if row.constant else ZERO
            if value != 0 and not kernel.is_zero(value):
                solution.residuals.append((row.origin, value))
            else:
                solution.dependent.append(row.origin)

        while active:
            if steps is not None:
                origin, unknown = next(steps)
                pivot_row = next(row for row in active if row.origin == origin)
            else:
                counts: Dict[sympy.Symbol, int] = {}
                for row in active:
                    for u in row.coefficients:
                        counts[u] = counts.get(u, 0) + 1

                def cost(candidate: Tuple[_Row, sympy.Symbol]) -> tuple:
                    row, u = candidate
                    kind, size = _element_cost(row.coefficients[u])
                    fill = (len(row.coefficients) - 1) * (counts[u] - 1)
                    return kind, fill, size, row.origin, order[u]

                pivot_row, unknown = min(
                    ((row, u) for row in active for u in row.coefficients), key=cost
                )
                pivot = pivot_row.coefficients[unknown]
                if _element_cost(pivot)[0] and kernel.is_zero(domain.to_sympy(pivot)):
                    # vanishes through a relation the field ignores, such as sqrt(a)^2 = a
                    del pivot_row.coefficients[unknown]
                    if not pivot_row.coefficients:
                        active.remove(pivot_row)
                        settle(pivot_row)
                    continue
            active.remove(pivot_row)
            solution.pivot_rows.append(pivot_row.origin)
            pivot = pivot_row.coefficients[unknown]
            if _element_cost(pivot)[0]:
                solution.pivots.append((unknown, kernel.simplify(domain.to_sympy(pivot))))
            self.log.debug("Pivot on %s (row %d)", unknown, pivot_row.origin)
            remaining = []
            for row in active:
                factor = row.coefficients.get(unknown)
                if factor is None:
                    remaining.append(row)
                    continue
                ratio = factor / pivot
                coefficients = dict(row.coefficients)
                del coefficients[unknown]
                for v, c in pivot_row.coefficients.items():
                    if v == unknown:
                        continue
                    value = coefficients.get(v, domain.zero) - ratio * c
                    if value:
                        coefficients[v] = value
                    else:
                        coefficients.pop(v, None)
                constant = row.constant - ratio * pivot_row.constant
                if coefficients:
                    remaining.append(_Row(row.origin, coefficients, constant))
                else:
                    settle(_Row(row.origin, coefficients, constant))
            active = remaining
            eliminated.append((unknown, pivot_row))

        # back substitution, bindings affine in the free unknowns (None: constant term)
        affine: Dict[sympy.Symbol, Dict[Optional[sympy.Symbol], Any]] = {}
        for unknown, row in reversed(eliminated):
            pivot = row.coefficients[unknown]
            total: Dict[Optional[sympy.Symbol], Any] = {None: row.constant}
            for v, c in row.coefficients.items():
                if v == unknown:
                    continue
                for key, value in affine.get(v, {v: domain.one}).items():
                    total[key] = total.get(key, domain.zero) + c * value
            affine[unknown] = {key: -value / pivot for key, value in total.items() if value}
        bindings: Dict[sympy.Symbol, ScalarExpr] = {}
        for unknown in unknowns:
            if unknown not in affine:
                continue
            terms = affine[unknown]
            bindings[unknown] = kernel.normalize(
                sympy.Add(
                    *(
                        domain.to_sympy(value) * (ONE if key is None else key)
                        for key, value in sorted(
                            terms.items(),
                            key=lambda item: (item[0] is not None, order.get(item[0], -1)),
                        )
                    )
                )
            )
        solution.bindings = bindings
        solution.free = tuple(u for u in unknowns if u not in affine)
        solution.rank = len(affine)
        solution.residuals.sort(key=lambda item: item[0])


def polynomial_terms(
    expr: ScalarExpr, variables: Sequence[sympy.Symbol]
) -> Dict[sympy.Expr, ScalarExpr]:
    """Coefficients of ``expr`` by monomial in ``variables``"""
    terms: Dict[sympy.Expr, ScalarExpr] = {}
    present = expr.free_symbols & set(variables)
    for term in sympy.Add.make_args(sympy.expand(expr, power_exp=False)):
        if present:
            coefficient, monomial = term.as_independent(*present, as_Add=False)
        else:
            coefficient, monomial = term, sympy.Integer(1)
        terms[monomial] = terms.get(monomial, ZERO) + coefficient
    return {m: c for m, c in terms.items() if c != 0}


def _monomial_key(monomial: sympy.Expr):
    degree = sympy.Poly(monomial).total_degree() if monomial.free_symbols else 0
    return (-degree, sympy.default_sort_key(monomial))


class ConstraintIdeal:
    """Independent constraints, linear over configuration bundle functions

    Every constraint is read as a linear combination of monomials in ``variables`` (jet
    or momentum coordinates) with coefficients depending on the other coordinates.
    Small ideals are kept in reduced echelon form; large ones are tested for
    independence by their generic rank, kept as an echelon basis of their coefficients
    at one random point. Constraints free of ``variables`` that are linear in one of
    the ``solvable`` coordinates with a numeric coefficient eliminate that coordinate
    instead.
    """

    def __init__(
        self,
        variables: Iterable[sympy.Symbol],
        kernel: Optional[Kernel] = None,
        solver: Optional[LinearSolver] = None,
        solvable: Iterable[sympy.Symbol] = (),
    ):
        self.variables = tuple(sorted(set(variables), key=sympy.default_sort_key))
        self.solvable = tuple(sorted(set(solvable), key=sympy.default_sort_key))
        self.kernel = kernel or Kernel()
        self.solver = solver or LinearSolver(kernel=self.kernel)
        self.generators: List[ScalarExpr] = []
        self.eliminations: Dict[sympy.Symbol, ScalarExpr] = {}
        self._echelon: List[Tuple[sympy.Expr, Dict[sympy.Expr, ScalarExpr]]] = []
        self._polynomial: List[ScalarExpr] = []
        self._generic = False
        self._cache: Dict[ScalarExpr, Dict[sympy.Expr, ScalarExpr]] = {}
        self._basis: Optional[List[Tuple[sympy.Expr, Dict[sympy.Expr, Any]]]] = None
        self._values: Dict[sympy.Expr, sympy.Rational] = {}
        self._rng = self.solver.rng(len(self.variables))

    def __len__(self) -> int:
        return len(self.generators)

    def __iter__(self):
        return iter(self.generators)

    @property
    def symbolic(self) -> bool:
        return len(self.generators) < self.solver.symbolic_row_limit

    def _substitute(self, expr: ScalarExpr) -> ScalarExpr:
        expr = sympy.sympify(expr)
        if self.eliminations:
            expr = expr.xreplace(self.eliminations)
        return self.kernel.normalize(expr)

    def _terms(self, expr: ScalarExpr) -> Dict[sympy.Expr, ScalarExpr]:
        expr = sympy.sympify(expr)
        if expr not in self._cache:
            self._cache[expr] = polynomial_terms(self._substitute(expr), self.variables)
        return self._cache[expr]

    def _reduce_terms(self, terms: Dict[sympy.Expr, ScalarExpr]) -> Dict[sympy.Expr, ScalarExpr]:
        terms = dict(terms)
        for leading, row in self._echelon:
            factor = terms.get(leading)
            if factor is None:
                continue
            for monomial, coefficient in row.items():
                value = self.kernel.simplify(terms.get(monomial, ZERO) - factor * coefficient)
                if value == 0 or self.kernel.is_zero(value):
                    terms.pop(monomial, None)
                else:
                    terms[monomial] = value
        return terms

    def reduce(self, expr: ScalarExpr) -> ScalarExpr:
        """Remainder of ``expr`` modulo the ideal (canonical for small ideals)"""
        terms = self._reduce_terms(self._terms(expr))
        return self.kernel.normalize(sympy.Add(*(c * m for m, c in terms.items())))

    def contains(self, expr: ScalarExpr) -> bool:
        if self.kernel.is_zero(self._substitute(expr)):
            return True
        if not self._generic:
            return self.kernel.is_zero(self.reduce(expr))
        return not self._reduce_numeric(self._numeric(expr))

    # generic rank

    def _numeric(self, expr: ScalarExpr) -> Dict[sympy.Expr, Any]:
        """Coefficients of ``expr`` by monomial at the random point of this ideal"""
        values = {}
        for monomial, coefficient in self._terms(expr).items():
            try:
                value = evaluate_rational(coefficient, {}, self._values, self._rng)
            except NotRational:
                value = evaluate_rational(coefficient, {}, self._values, self._rng, opaque=True)
            converted = QQ.convert(value)
            if converted:
                values[monomial] = converted
        return values

    def _reduce_numeric(self, values: Dict[sympy.Expr, Any]) -> Dict[sympy.Expr, Any]:
        if self._basis is None:
            self._basis = []
            for expr in self._polynomial:
                self._append_numeric(self._numeric(expr))
        for leading, row in self._basis:
            factor = values.get(leading)
            if factor is None:
                continue
            for monomial, coefficient in row.items():
                value = values.get(monomial, QQ.zero) - factor * coefficient
                if value:
                    values[monomial] = value
                else:
                    values.pop(monomial, None)
        return values

    def _append_numeric(self, values: Dict[sympy.Expr, Any]) -> bool:
        values = self._reduce_numeric(values)
        if not values:
            return False
        leading = min(values, key=_monomial_key)
        pivot = values[leading]
        assert self._basis is not None
        self._basis.append((leading, {m: c / pivot for m, c in values.items()}))
        return True

    # growth

    def _solve_for(self, expr: ScalarExpr) -> Optional[Tuple[sympy.Symbol, ScalarExpr]]:
        present = [s for s in self.solvable if s in expr.free_symbols]
        for symbol in present:
            coefficients, rest, nonlinear = linear_split(expr, [symbol])
            coefficient = coefficients.get(symbol)
            if nonlinear or coefficient is None or not coefficient.is_Number:
                continue
            return symbol, self.kernel.normalize(-rest / coefficient)
        return None

    def _eliminate(self, symbol: sympy.Symbol, value: ScalarExpr) -> None:
        binding = {symbol: value}
        self.eliminations = {
            s: self.kernel.normalize(v.xreplace(binding))
            for s, v in self.eliminations.items()
        }
        self.eliminations[symbol] = value
        self._echelon = [
            (leading, {m: self.kernel.simplify(c.xreplace(binding)) for m, c in row.items()})
            for leading, row in self._echelon
        ]
        self._cache = {}
        self._basis = None

    def add(self, expr: ScalarExpr) -> bool:
        """Add ``expr`` if it is independent of the current generators

        :returns: whether the constraint was new
        """
        substituted = self._substitute(expr)
        if self.kernel.is_zero(substituted):
            return False
        if not substituted.free_symbols & set(self.variables):
            solved = self._solve_for(self.reduce(substituted))
            if solved is not None:
                self._eliminate(*solved)
                self.generators.append(expr)
                return True
            if self.contains(substituted):
                return False
            # monomial 1 is never an echelon pivot
            self._polynomial.append(expr)
            if self._basis is not None:
                self._append_numeric(self._numeric(expr))
            self.generators.append(expr)
            return True
        if not self._generic and self.symbolic:
            terms = self._reduce_terms(self._terms(substituted))
            if not terms:
                return False
            leading = min(terms, key=_monomial_key)
            pivot = terms[leading]
            row = {m: self.kernel.simplify(c / pivot) for m, c in terms.items()}
            for index, (other_leading, other) in enumerate(self._echelon):
                factor = other.get(leading)
                if factor is None:
                    continue
                updated = dict(other)
                for monomial, coefficient in row.items():
                    value = self.kernel.simplify(updated.get(monomial, ZERO) - factor * coefficient)
                    if value == 0:
                        updated.pop(monomial, None)
                    else:
                        updated[monomial] = value
                self._echelon[index] = (other_leading, updated)
            self._echelon.append((leading, row))
            self._polynomial.append(expr)
            self.generators.append(expr)
            return True
        self._generic = True
        if not self._append_numeric(self._numeric(substituted)):
            return False
        self._polynomial.append(expr)
        self.generators.append(expr)
        return True

    def sample_point(
        self, coordinates: Iterable[sympy.Symbol], rng: random.Random
    ) -> Optional[Dict[sympy.Symbol, sympy.Rational]]:
        """Random rational point of ``coordinates`` on the constraint set

        Only available when every constraint is affine in ``variables``; None otherwise.
        """
        coordinates = set(coordinates)
        free = coordinates - set(self.variables) - set(self.eliminations)
        point = random_point(free, rng)
        functions: Dict[sympy.Expr, sympy.Rational] = {}
        try:
            for symbol, value in sorted(
                self.eliminations.items(), key=lambda item: sympy.default_sort_key(item[0])
            ):
                if symbol in coordinates:
                    point[symbol] = evaluate_rational(value, point, functions, rng)
        except NotRational:
            return None
        substituted = (self._substitute(g) for g in self.generators)
        generators = [g for g in substituted if g != 0]
        if not generators:
            point.update(random_point(set(self.variables) & coordinates, rng))
            return point
        variables = sorted(set(self.variables) & coordinates, key=sympy.default_sort_key)
        equations = []
        try:
            for expr in generators:
                coefficients, constant, nonlinear = linear_split(expr, variables)
                if nonlinear:
                    return None
                equations.append(
                    (
                        {v: evaluate_rational(c, point, functions, rng) for v, c in coefficients.items()},
                        evaluate_rational(constant, point, functions, rng),
                    )
                )
        except NotRational:
            return None
        width = len(variables)
        matrix = DomainMatrix(
            [
                [QQ.convert(coefficients.get(v, 0)) for v in variables] + [QQ.convert(-constant)]
                for coefficients, constant in equations
            ],
            (len(equations), width + 1),
            QQ,
        )
        reduced, pivots = matrix.rref()
        if width in pivots:
            return None
        values = {v: random_rational(rng) for v in variables}
        dense = reduced.to_Matrix()
        for i, j in enumerate(pivots):
            total = dense[i, width]
            for k in range(width):
                if k != j and k not in pivots:
                    total -= dense[i, k] * values[variables[k]]
            values[variables[j]] = sympy.Rational(total)
        point.update(values)
        return point
