"""Locally decomposable m-multivector fields X = X_0 ^ ... ^ X_(m-1)

Factor ``mu`` is ``d/dx^mu`` plus fiber components. Unknown fiber components are
symbols named ``X[mu](coordinate)``, kept apart from chart coordinates.
"""

from __future__ import annotations

import enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import sympy

from .bundle import BundleChart, CoordinateKind
from .errors import DegreeMismatch, UnknownCoordinate
from .exterior import DiffForm, VectorField, contract, d
from .symkernel import Kernel, ScalarExpr


class ContractionOrder(str, enum.Enum):
    """Order of the iterated contraction i(X)a"""

    INNERMOST_FIRST = "innermost-first"
    OUTERMOST_FIRST = "outermost-first"


def unknown_symbol(mu: int, coordinate: sympy.Symbol) -> sympy.Symbol:
    return sympy.Symbol(f"X[{mu}]({coordinate.name})")


class MultiVectorField:
    """Normalized representative of a class of m-multivector fields (i(X) d^m x = 1)"""

    __slots__ = ("chart", "factors", "unknowns", "order")

    def __init__(
        self,
        chart: BundleChart,
        fiber: Sequence[Mapping[sympy.Symbol, ScalarExpr]],
        unknowns: Iterable[sympy.Symbol] = (),
        order: ContractionOrder = ContractionOrder.INNERMOST_FIRST,
        kernel: Optional[Kernel] = None,
    ):
        m = chart.base_dimension
        if len(fiber) != m:
            raise DegreeMismatch(f"Expected {m} factors, got {len(fiber)}")
        base = {c.symbol for c in chart.base}
        self.unknowns = frozenset(unknowns)
        clash = self.unknowns & set(chart.symbols)
        if clash:
            names = ", ".join(sorted(map(str, clash)))
            raise UnknownCoordinate(f"Unknown coefficients clash with coordinates: {names}")
        factors = []
        for mu, components in enumerate(fiber):
            if base & set(components):
                raise UnknownCoordinate(
                    f"Factor {mu} may only have fiber components besides d/dx^{mu}"
                )
            full: Dict[sympy.Symbol, ScalarExpr] = {chart.base[mu].symbol: sympy.Integer(1)}
            full.update(components)
            factors.append(VectorField(chart, full, kernel=kernel))
        self.chart = chart
        self.factors: Tuple[VectorField, ...] = tuple(factors)
        self.order = ContractionOrder(order)

    @classmethod
    def general(
        cls,
        chart: BundleChart,
        holonomic: bool = False,
        order: ContractionOrder = ContractionOrder.INNERMOST_FIRST,
        kernel: Optional[Kernel] = None,
    ) -> "MultiVectorField":
        """Multivector with an unknown coefficient in every fiber slot

        With ``holonomic`` (jet charts only) the field components of factor ``mu`` are
        the jet coordinates ``D[mu](y)``.
        """
        fiber: List[Dict[sympy.Symbol, ScalarExpr]] = []
        unknowns: List[sympy.Symbol] = []
        base = {c.symbol for c in chart.base}
        for mu in range(chart.base_dimension):
            components: Dict[sympy.Symbol, ScalarExpr] = {}
            for coordinate in chart.coordinates:
                if coordinate.symbol in base:
                    continue
                if holonomic and coordinate.kind == CoordinateKind.FIELD:
                    components[coordinate.symbol] = chart.jet(coordinate.symbol, mu)
                    continue
                symbol = unknown_symbol(mu, coordinate.symbol)
                components[coordinate.symbol] = symbol
                unknowns.append(symbol)
            fiber.append(components)
        return cls(chart, fiber, unknowns=unknowns, order=order, kernel=kernel)

    @property
    def degree(self) -> int:
        return len(self.factors)

    def component(self, mu: int, coordinate: sympy.Symbol) -> ScalarExpr:
        return self.factors[mu].component(coordinate)

    def substitute(self, bindings: Mapping[sympy.Symbol, ScalarExpr]) -> "MultiVectorField":
        """Bind unknown coefficients; bound symbols stop being unknowns"""
        bindings = dict(bindings)
        base = {c.symbol for c in self.chart.base}
        fiber = [
            {
                s: sympy.sympify(c).xreplace(bindings)
                for s, c in factor.components.items()
                if s not in base
            }
            for factor in self.factors
        ]
        remaining = self.unknowns - set(bindings)
        return MultiVectorField(
            self.chart,
            fiber,
            unknowns=remaining,
            order=self.order,
            kernel=self.factors[0].kernel if self.factors else None,
        )

    @property
    def free_unknowns(self) -> frozenset:
        present: set = set()
        for factor in self.factors:
            for component in factor.components.values():
                present |= component.free_symbols
        return self.unknowns & present

    def __repr__(self) -> str:
        return f"MultiVectorField<{self.chart.space.value}>({', '.join(map(repr, self.factors))})"


def contract_multi(X: MultiVectorField, a: DiffForm) -> DiffForm:
    """Iterated contraction i(X_(m-1)) ... i(X_0) a (innermost factor first by default)"""
    X.chart.check_same(a.chart)
    factors = X.factors
    if X.order == ContractionOrder.OUTERMOST_FIRST:
        factors = tuple(reversed(factors))
    result = a
    for factor in factors:
        if result.degree == 0:
            return DiffForm.zero(a.chart, 0, kernel=a.kernel)
        result = contract(factor, result)
    return result


def lie_multi(X: MultiVectorField, a: DiffForm) -> DiffForm:
    """Graded Lie derivative L(X)a = d i(X)a - (-1)^m i(X) da"""
    X.chart.check_same(a.chart)
    m = X.degree
    if a.degree + 1 < m:
        return DiffForm.zero(a.chart, max(a.degree - m + 1, 0), kernel=a.kernel)
    if a.degree < m:
        return -(contract_multi(X, d(a)) * (-1) ** m)
    return d(contract_multi(X, a)) - contract_multi(X, d(a)) * (-1) ** m


def factor_derivatives(X: MultiVectorField, expr: ScalarExpr) -> Tuple[ScalarExpr, ...]:
    """L(X_lambda) f for every factor, the component-wise tangency condition"""
    return tuple(factor.apply(expr) for factor in X.factors)
