"""Differential forms and vector fields on a bundle chart

Forms are stored as sparse maps from wedge monomials to coefficients. A monomial is the
strictly increasing tuple of the positions of its basis differentials in the chart's
canonical coordinate order, so ``dx0^dx1`` on a chart whose first coordinates are
``x[0], x[1]`` is ``(0, 1)``. Signs are absorbed into coefficients.
"""

from __future__ import annotations

import bisect
from typing import Callable, Dict, Iterable, Iterator, Mapping, Optional, Sequence, Tuple

import sympy

from .bundle import BundleChart, ChartMap
from .errors import DegreeMismatch, UnknownCoordinate
from .symkernel import ZERO, Kernel, ScalarExpr, gradient

Monomial = Tuple[int, ...]


def _normal(kernel: Optional[Kernel], expr: ScalarExpr) -> ScalarExpr:
    if kernel is None:
        return sympy.expand(expr, power_exp=False)
    return kernel.normalize(expr)


def _pick_kernel(*objects) -> Optional[Kernel]:
    for obj in objects:
        if obj.kernel is not None:
            return obj.kernel
    return None


def sort_sign(positions: Sequence[int]) -> int:
    """Sign of the permutation sorting distinct ``positions``"""
    inversions = sum(
        1
        for i in range(len(positions))
        for j in range(i + 1, len(positions))
        if positions[i] > positions[j]
    )
    return -1 if inversions % 2 else 1


def merge_monomials(left: Monomial, right: Monomial) -> Tuple[int, Monomial]:
    """Sign and sorted monomial of ``left ^ right`` (sign 0 if they share a factor)"""
    if not left:
        return 1, right
    if not right:
        return 1, left
    if set(left).intersection(right):
        return 0, ()
    inversions = sum(bisect.bisect_left(right, i) for i in left)
    return (-1) ** inversions, tuple(sorted(left + right))


class DiffForm:
    """Exterior form of fixed degree on a chart

    Coefficients are kept in normal form and zero coefficients are dropped. When a
    theory :class:`~multisym.symkernel.Kernel` is attached, its identities take part in
    the normalization.
    """

    __slots__ = ("chart", "degree", "terms", "kernel")

    def __init__(
        self,
        chart: BundleChart,
        degree: int,
        terms: Optional[Mapping[Monomial, ScalarExpr]] = None,
        kernel: Optional[Kernel] = None,
        check: bool = True,
    ):
        if degree < 0:
            raise DegreeMismatch(f"Form degree must be non-negative, got {degree}")
        self.chart = chart
        self.degree = degree
        self.kernel = kernel
        normalized: Dict[Monomial, ScalarExpr] = {}
        for monomial, coefficient in (terms or {}).items():
            if check:
                self._check_monomial(monomial)
            value = _normal(kernel, sympy.sympify(coefficient))
            if value != 0:
                normalized[monomial] = value
        if normalized and degree > chart.dimension:
            raise DegreeMismatch(
                f"Degree {degree} exceeds the dimension {chart.dimension} of the chart"
            )
        self.terms = normalized

    def _check_monomial(self, monomial: Monomial) -> None:
        if len(monomial) != self.degree:
            raise DegreeMismatch(
                f"Monomial {monomial} does not have degree {self.degree}"
            )
        if any(a >= b for a, b in zip(monomial, monomial[1:])):
            raise ValueError(f"Monomial {monomial} is not strictly increasing")
        if monomial and not 0 <= monomial[0] <= monomial[-1] < self.chart.dimension:
            raise UnknownCoordinate(f"Monomial {monomial} is outside of the chart")

    # construction helpers

    @classmethod
    def zero(cls, chart: BundleChart, degree: int, kernel: Optional[Kernel] = None) -> "DiffForm":
        return cls(chart, degree, {}, kernel=kernel)

    @classmethod
    def scalar(
        cls, chart: BundleChart, expr: ScalarExpr, kernel: Optional[Kernel] = None
    ) -> "DiffForm":
        return cls(chart, 0, {(): expr}, kernel=kernel)

    @classmethod
    def from_symbols(
        cls,
        chart: BundleChart,
        symbols: Sequence[sympy.Symbol],
        coefficient: ScalarExpr = 1,
        kernel: Optional[Kernel] = None,
    ) -> "DiffForm":
        """``coefficient * d(symbols[0]) ^ d(symbols[1]) ^ ...`` in any order"""
        positions = [chart.position.get(s) for s in symbols]
        if None in positions:
            missing = [str(s) for s, p in zip(symbols, positions) if p is None]
            raise UnknownCoordinate(f"Not coordinates of the chart: {', '.join(missing)}")
        if len(set(positions)) != len(positions):
            return cls.zero(chart, len(positions), kernel=kernel)
        sign = sort_sign(positions)
        return cls(
            chart,
            len(positions),
            {tuple(sorted(positions)): sign * sympy.sympify(coefficient)},
            kernel=kernel,
        )

    # inspection

    def items(self) -> Iterator[Tuple[Monomial, ScalarExpr]]:
        return iter(sorted(self.terms.items()))

    def coefficients(self) -> Tuple[ScalarExpr, ...]:
        return tuple(coefficient for _, coefficient in self.items())

    def coefficient(self, *symbols: sympy.Symbol) -> ScalarExpr:
        """Coefficient of ``d(symbols[0]) ^ ...``, with the sign of the given order"""
        positions = [self.chart.position[s] for s in symbols]
        if len(set(positions)) != len(positions):
            return ZERO
        sign = sort_sign(positions)
        return sign * self.terms.get(tuple(sorted(positions)), ZERO)

    def monomial_symbols(self, monomial: Monomial) -> Tuple[sympy.Symbol, ...]:
        return tuple(self.chart.symbols[i] for i in monomial)

    @property
    def free_symbols(self) -> set:
        symbols: set = set()
        for coefficient in self.terms.values():
            symbols |= coefficient.free_symbols
        return symbols

    def is_zero(self, kernel: Optional[Kernel] = None) -> bool:
        """Exact zero test of every coefficient"""
        kernel = kernel or self.kernel or Kernel()
        return all(kernel.is_zero(c) for c in self.terms.values())

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    # algebra

    def _check_compatible(self, other: "DiffForm") -> None:
        self.chart.check_same(other.chart)
        if self.degree != other.degree:
            raise DegreeMismatch(
                f"Cannot add forms of degree {self.degree} and {other.degree}"
            )

    def __add__(self, other: "DiffForm") -> "DiffForm":
        self._check_compatible(other)
        return self._merge(other, 1)

    def _merge(self, other: "DiffForm", sign: int) -> "DiffForm":
        """``self + sign * other``, normalizing only the coefficients of ``other``"""
        kernel = _pick_kernel(self, other)
        if kernel is not self.kernel:
            terms = dict(self.terms)
            for monomial, coefficient in other.terms.items():
                terms[monomial] = terms.get(monomial, ZERO) + sign * coefficient
            return DiffForm(self.chart, self.degree, terms, kernel=kernel, check=False)
        terms = dict(self.terms)
        for monomial, coefficient in other.terms.items():
            value = _normal(kernel, terms.get(monomial, ZERO) + sign * coefficient)
            if value == 0:
                terms.pop(monomial, None)
            else:
                terms[monomial] = value
        return DiffForm._normalized(self.chart, self.degree, terms, kernel)

    @classmethod
    def _normalized(
        cls,
        chart: BundleChart,
        degree: int,
        terms: Dict[Monomial, ScalarExpr],
        kernel: Optional[Kernel],
    ) -> "DiffForm":
        form = cls.__new__(cls)
        form.chart = chart
        form.degree = degree
        form.terms = terms
        form.kernel = kernel
        return form

    def __neg__(self) -> "DiffForm":
        return DiffForm._normalized(
            self.chart, self.degree, {m: -c for m, c in self.terms.items()}, self.kernel
        )

    def __sub__(self, other: "DiffForm") -> "DiffForm":
        self._check_compatible(other)
        return self._merge(other, -1)

    def __mul__(self, factor: ScalarExpr) -> "DiffForm":
        if isinstance(factor, DiffForm):
            return wedge(self, factor)
        return self.map(lambda c: c * factor)

    __rmul__ = __mul__

    def __xor__(self, other: "DiffForm") -> "DiffForm":
        return wedge(self, other)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DiffForm):
            return NotImplemented
        return (
            self.chart.same_as(other.chart)
            and self.degree == other.degree
            and self.terms == other.terms
        )

    __hash__ = None  # type: ignore[assignment]

    def map(self, function: Callable[[ScalarExpr], ScalarExpr]) -> "DiffForm":
        """Apply ``function`` to every coefficient"""
        return DiffForm(
            self.chart,
            self.degree,
            {m: function(c) for m, c in self.terms.items()},
            kernel=self.kernel,
            check=False,
        )

    def substitute(self, bindings: Mapping[sympy.Symbol, ScalarExpr]) -> "DiffForm":
        """Substitute non-coordinate symbols (parameters, unknowns) in the coefficients"""
        bindings = dict(bindings)
        return self.map(lambda c: c.xreplace(bindings))

    def with_kernel(self, kernel: Optional[Kernel]) -> "DiffForm":
        return DiffForm(self.chart, self.degree, self.terms, kernel=kernel, check=False)

    def __repr__(self) -> str:
        body = " + ".join(
            f"({c})*{'^'.join('d' + str(s) for s in self.monomial_symbols(m)) or '1'}"
            for m, c in self.items()
        )
        return f"DiffForm<{self.chart.space.value}, {self.degree}>({body or '0'})"


class VectorField:
    """Vector field on a chart given by its nonzero components"""

    __slots__ = ("chart", "components", "kernel")

    def __init__(
        self,
        chart: BundleChart,
        components: Optional[Mapping[sympy.Symbol, ScalarExpr]] = None,
        kernel: Optional[Kernel] = None,
    ):
        self.chart = chart
        self.kernel = kernel
        normalized: Dict[sympy.Symbol, ScalarExpr] = {}
        for symbol, component in (components or {}).items():
            if not chart.has(symbol):
                raise UnknownCoordinate(
                    f"'{symbol}' is not a coordinate of {chart.space.value}"
                )
            value = _normal(kernel, sympy.sympify(component))
            if value != 0:
                normalized[symbol] = value
        self.components = normalized

    @classmethod
    def coordinate(cls, chart: BundleChart, symbol: sympy.Symbol) -> "VectorField":
        """The coordinate vector field ∂/∂symbol"""
        return cls(chart, {symbol: 1})

    def component(self, symbol: sympy.Symbol) -> ScalarExpr:
        return self.components.get(symbol, ZERO)

    def items(self) -> Iterator[Tuple[sympy.Symbol, ScalarExpr]]:
        position = self.chart.position
        return iter(sorted(self.components.items(), key=lambda kv: position[kv[0]]))

    def apply(self, expr: ScalarExpr) -> ScalarExpr:
        """Derivative of a scalar along the vector field"""
        expr = sympy.sympify(expr)
        free = expr.free_symbols
        total = sympy.Add(
            *(
                component * sympy.diff(expr, symbol)
                for symbol, component in self.components.items()
                if symbol in free
            )
        )
        return _normal(self.kernel, total)

    def __add__(self, other: "VectorField") -> "VectorField":
        self.chart.check_same(other.chart)
        components = dict(self.components)
        for symbol, component in other.components.items():
            components[symbol] = components.get(symbol, ZERO) + component
        return VectorField(self.chart, components, kernel=_pick_kernel(self, other))

    def __neg__(self) -> "VectorField":
        return self.scale(-1)

    def __sub__(self, other: "VectorField") -> "VectorField":
        return self + (-other)

    def scale(self, factor: ScalarExpr) -> "VectorField":
        return VectorField(
            self.chart,
            {s: c * factor for s, c in self.components.items()},
            kernel=self.kernel,
        )

    def map(self, function: Callable[[ScalarExpr], ScalarExpr]) -> "VectorField":
        return VectorField(
            self.chart,
            {s: function(c) for s, c in self.components.items()},
            kernel=self.kernel,
        )

    def substitute(self, bindings: Mapping[sympy.Symbol, ScalarExpr]) -> "VectorField":
        bindings = dict(bindings)
        return self.map(lambda c: c.xreplace(bindings))

    def project(self, chart: BundleChart) -> "VectorField":
        """Drop the components along coordinates that ``chart`` does not have"""
        return VectorField(
            chart,
            {s: c for s, c in self.components.items() if chart.has(s)},
            kernel=self.kernel,
        )

    def is_zero(self, kernel: Optional[Kernel] = None) -> bool:
        kernel = kernel or self.kernel or Kernel()
        return all(kernel.is_zero(c) for c in self.components.values())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VectorField):
            return NotImplemented
        return self.chart.same_as(other.chart) and self.components == other.components

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        body = " + ".join(f"({c})*d/d{s}" for s, c in self.items())
        return f"VectorField<{self.chart.space.value}>({body or '0'})"


def wedge(a: DiffForm, b: DiffForm) -> DiffForm:
    """Exterior product; a product of degree above the chart dimension is zero"""
    a.chart.check_same(b.chart)
    degree = a.degree + b.degree
    kernel = _pick_kernel(a, b)
    if degree > a.chart.dimension:
        return DiffForm(a.chart, degree, {}, kernel=kernel)
    terms: Dict[Monomial, ScalarExpr] = {}
    for left, u in a.terms.items():
        for right, v in b.terms.items():
            sign, merged = merge_monomials(left, right)
            if sign:
                terms[merged] = terms.get(merged, ZERO) + sign * u * v
    return DiffForm(a.chart, degree, terms, kernel=kernel, check=False)


def wedge_all(forms: Iterable[DiffForm]) -> DiffForm:
    result: Optional[DiffForm] = None
    for form in forms:
        result = form if result is None else wedge(result, form)
    if result is None:
        raise ValueError("wedge_all needs at least one form")
    return result


def form_sum(
    chart: BundleChart, degree: int, forms: Iterable[DiffForm], kernel: Optional[Kernel] = None
) -> DiffForm:
    """Sum of ``forms``, every coefficient normalized once"""
    parts: Dict[Monomial, list] = {}
    for form in forms:
        chart.check_same(form.chart)
        if form.degree != degree:
            raise DegreeMismatch(f"Cannot add a form of degree {form.degree} to degree {degree}")
        kernel = kernel or form.kernel
        for monomial, coefficient in form.terms.items():
            parts.setdefault(monomial, []).append(coefficient)
    terms = {monomial: sympy.Add(*values) for monomial, values in parts.items()}
    return DiffForm(chart, degree, terms, kernel=kernel, check=False)


def d(a: DiffForm) -> DiffForm:
    """Exterior derivative

    Only chart coordinates are differentiated; parameters and unknown coefficients are
    constants.
    """
    chart = a.chart
    position = chart.position
    terms: Dict[Monomial, ScalarExpr] = {}
    for monomial, coefficient in a.terms.items():
        present = [s for s in coefficient.free_symbols if s in position]
        for symbol, derivative in gradient(coefficient, present).items():
            index = position[symbol]
            if index in monomial:
                continue
            before = bisect.bisect_left(monomial, index)
            merged = monomial[:before] + (index,) + monomial[before:]
            sign = -1 if before % 2 else 1
            terms[merged] = terms.get(merged, ZERO) + sign * derivative
    if a.degree + 1 > chart.dimension:
        return DiffForm(chart, a.degree + 1, {}, kernel=a.kernel)
    return DiffForm(chart, a.degree + 1, terms, kernel=a.kernel, check=False)


def contract(v: VectorField, a: DiffForm) -> DiffForm:
    """Interior product i(v)a"""
    v.chart.check_same(a.chart)
    kernel = _pick_kernel(a, v)
    if a.degree == 0:
        return DiffForm(a.chart, 0, {}, kernel=kernel)
    components = {a.chart.position[s]: c for s, c in v.components.items()}
    terms: Dict[Monomial, ScalarExpr] = {}
    for monomial, coefficient in a.terms.items():
        for k, index in enumerate(monomial):
            component = components.get(index)
            if component is None:
                continue
            rest = monomial[:k] + monomial[k + 1 :]
            sign = -1 if k % 2 else 1
            terms[rest] = terms.get(rest, ZERO) + sign * component * coefficient
    return DiffForm(a.chart, a.degree - 1, terms, kernel=kernel, check=False)


def lie(v: VectorField, a: DiffForm) -> DiffForm:
    """Lie derivative L(v)a = d i(v)a + i(v) da"""
    v.chart.check_same(a.chart)
    if a.degree == 0:
        return DiffForm.scalar(a.chart, v.apply(a.terms.get((), ZERO)), kernel=a.kernel)
    return d(contract(v, a)) + contract(v, d(a))


def pullback(mapping: ChartMap, a: DiffForm) -> DiffForm:
    """Pull a form on ``mapping.target`` back to ``mapping.source``"""
    mapping.target.check_same(a.chart)
    source = mapping.source
    images = mapping.image
    differentials: Dict[int, DiffForm] = {}

    def differential(index: int) -> DiffForm:
        if index not in differentials:
            symbol = a.chart.symbols[index]
            differentials[index] = d(DiffForm.scalar(source, images[symbol]))
        return differentials[index]

    result = DiffForm.zero(source, a.degree, kernel=a.kernel)
    terms: Dict[Monomial, ScalarExpr] = {}
    for monomial, coefficient in a.terms.items():
        pulled = mapping.apply(coefficient)
        if monomial:
            factor = wedge_all(differential(i) for i in monomial)
        else:
            factor = DiffForm.scalar(source, 1)
        for m, c in factor.terms.items():
            terms[m] = terms.get(m, ZERO) + pulled * c
    if terms:
        result = DiffForm(source, a.degree, terms, kernel=a.kernel, check=False)
    return result


# volume forms


def volume(chart: BundleChart, kernel: Optional[Kernel] = None) -> DiffForm:
    """d^m x = dx^0 ^ ... ^ dx^(m-1)"""
    return DiffForm.from_symbols(chart, [c.symbol for c in chart.base], kernel=kernel)


def volume_contraction(
    chart: BundleChart, *indices: int, kernel: Optional[Kernel] = None
) -> DiffForm:
    """d^(m-k) x_(mu nu ...) = ... i(d/dx^nu) i(d/dx^mu) d^m x"""
    form = volume(chart, kernel=kernel)
    for mu in indices:
        form = contract(VectorField.coordinate(chart, chart.base[mu].symbol), form)
    return form


def one_form(chart: BundleChart, expr: ScalarExpr, kernel: Optional[Kernel] = None) -> DiffForm:
    """Differential of a scalar"""
    return d(DiffForm.scalar(chart, expr, kernel=kernel))


def differential(chart: BundleChart, symbol: sympy.Symbol) -> DiffForm:
    return DiffForm.from_symbols(chart, [symbol])
