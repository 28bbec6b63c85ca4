"""Exact scalar arithmetic for chart expressions

Scalars are sympy expressions over chart coordinates, parameters, unknown coefficient
symbols and opaque functions. Two kinds of opaque functions occur:

- generic functions (``sympy.Function``) such as the components of a symmetry generator,
  differentiated formally;
- :class:`DerivedFunction` subclasses such as ``sqrt(-det g)`` or the lower metric,
  which carry user registered partial derivatives and an optional explicit expansion
  used for cross-checks.
"""

from __future__ import annotations

import os
import random
from typing import (
    Dict,
    Iterable,
    List,
    Mapping,
    Optional,
    Sequence,
    Set,
    Tuple,
    Type,
)

import sympy
import traitlets
from traitlets.config import LoggingConfigurable

from .errors import (
    DivisionByZero,
    IrrationalValue,
    MissingDerivativeRule,
    RewriteDepthExceeded,
    UnboundSymbol,
    UnknownSymbol,
)

ScalarExpr = sympy.Expr

ZERO = sympy.Integer(0)
ONE = sympy.Integer(1)

DEFAULT_MAX_REWRITE_DEPTH = 64


class DerivedFunction(sympy.Function):
    """Opaque function of chart coordinates with registered partial derivatives

    Concrete functions are created with :func:`derived_function`; the class attributes
    are filled once while a theory is resolved and never change afterwards.
    """

    label: str = ""
    parameters: Tuple[sympy.Symbol, ...] = ()
    rules: Dict[sympy.Symbol, sympy.Expr] = {}
    expansion: Optional[sympy.Expr] = None

    @classmethod
    def eval(cls, *args):
        return None

    def fdiff(self, argindex=1):
        coordinate = self.parameters[argindex - 1]
        try:
            rule = self.rules[coordinate]
        except KeyError:
            raise MissingDerivativeRule(
                f"No derivative rule of '{self.label}' with respect to '{coordinate}'"
            )
        if tuple(self.args) == self.parameters:
            return rule
        return rule.xreplace(dict(zip(self.parameters, self.args)))

    def expanded(self) -> sympy.Expr:
        """Explicit formula of this application, if one was registered"""
        if self.expansion is None:
            return self
        if tuple(self.args) == self.parameters:
            return self.expansion
        return self.expansion.xreplace(dict(zip(self.parameters, self.args)))


def derived_function(
    name: str, label: str, parameters: Sequence[sympy.Symbol]
) -> Type[DerivedFunction]:
    """Create a new :class:`DerivedFunction` class depending on ``parameters``"""
    return type(
        name,
        (DerivedFunction,),
        {
            "label": label,
            "parameters": tuple(parameters),
            "rules": {},
            "expansion": None,
        },
    )


def derived_atoms(expr: sympy.Expr) -> Set[DerivedFunction]:
    return {atom for atom in expr.atoms(DerivedFunction)}


def expand_derived(expr: sympy.Expr) -> sympy.Expr:
    """Replace every derived function application by its explicit formula"""
    if not expr.has(DerivedFunction):
        return expr
    previous = None
    current = expr
    while previous != current:
        previous = current
        current = current.replace(
            lambda atom: isinstance(atom, DerivedFunction)
            and atom.expansion is not None,
            lambda atom: atom.expanded(),
        )
    return current


def gradient(
    expr: sympy.Expr, symbols: Iterable[sympy.Symbol]
) -> Dict[sympy.Symbol, sympy.Expr]:
    """Partial derivatives along ``symbols`` of an expanded sum, term by term

    Only nonzero derivatives are returned.
    """
    wanted = set(symbols)
    parts: Dict[sympy.Symbol, List[sympy.Expr]] = {}
    for term in sympy.Add.make_args(sympy.sympify(expr)):
        for symbol in term.free_symbols & wanted:
            parts.setdefault(symbol, []).append(sympy.diff(term, symbol))
    result = {}
    for symbol, derivatives in parts.items():
        value = sympy.Add(*derivatives)
        if value != 0:
            result[symbol] = value
    return result


def linear_split(
    expr: sympy.Expr, unknowns: Iterable[sympy.Symbol]
) -> Tuple[Dict[sympy.Symbol, sympy.Expr], sympy.Expr, bool]:
    """Split an expanded expression into linear parts along ``unknowns``

    :returns: (coefficients by unknown, unknown-free part, nonlinear flag)
    """
    unknown_set = set(unknowns)
    present = expr.free_symbols & unknown_set
    if not present:
        return {}, expr, False
    coefficients: Dict[sympy.Symbol, List[sympy.Expr]] = {}
    constant: List[sympy.Expr] = []
    nonlinear = False
    for term in sympy.Add.make_args(expr):
        coefficient, dependent = term.as_independent(*present, as_Add=False)
        if dependent == 1:
            constant.append(term)
        elif dependent in present:
            coefficients.setdefault(dependent, []).append(coefficient)
        else:
            nonlinear = True
            constant.append(term)
    return (
        {u: sympy.Add(*parts) for u, parts in coefficients.items()},
        sympy.Add(*constant),
        nonlinear,
    )


def _square_root_bases(expr: sympy.Expr) -> List[sympy.Expr]:
    bases = {
        power.base
        for power in expr.atoms(sympy.Pow)
        if power.exp.is_Rational and not power.exp.is_Integer
    }
    return sorted(bases, key=sympy.default_sort_key)


def _algebraic_is_zero(expr: sympy.Expr) -> bool:
    """Exact zero test for rational functions in square roots of polynomials"""
    numerator, _ = sympy.fraction(sympy.together(expr))
    numerator = sympy.expand(numerator, power_exp=False)
    if numerator == 0:
        return True
    bases = _square_root_bases(numerator)
    if not bases:
        return sympy.cancel(numerator) == 0
    base = bases[0]
    if any(
        power.base == base and power.exp.is_Rational and power.exp.q != 2
        for power in numerator.atoms(sympy.Pow)
    ):
        return sympy.simplify(numerator) == 0
    root = sympy.Dummy("root")
    replaced = numerator.replace(
        lambda atom: atom.is_Pow
        and atom.base == base
        and atom.exp.is_Rational
        and atom.exp.q == 2,
        lambda atom: root ** int(atom.exp * 2),
    )
    replaced, _ = sympy.fraction(sympy.together(replaced))
    poly = sympy.Poly(sympy.expand(replaced), root)
    even: List[sympy.Expr] = []
    odd: List[sympy.Expr] = []
    for (degree,), coefficient in poly.terms():
        part = coefficient * base ** (degree // 2)
        (odd if degree % 2 else even).append(part)
    return _algebraic_is_zero(sympy.Add(*even)) and _algebraic_is_zero(
        sympy.Add(*odd)
    )


def _sampled_nonzero(expr: sympy.Expr) -> bool:
    """Whether ``expr`` is certainly nonzero at a random point

    Opaque functions and their derivatives get independent values. False means
    undecided: the value vanished, hit a pole or could not be told apart from rounding.
    """
    rng = random.Random(0)

    def sample() -> sympy.Rational:
        return sympy.Rational(rng.choice((-1, 1)) * rng.randint(1, 29), rng.randint(1, 7))

    derivatives = sorted(expr.atoms(sympy.Derivative), key=sympy.default_sort_key)
    value = expr.xreplace({atom: sample() for atom in derivatives})
    opaque = value.atoms(sympy.core.function.AppliedUndef) | value.atoms(DerivedFunction)
    value = value.xreplace(
        {atom: sample() for atom in sorted(opaque, key=sympy.default_sort_key)}
    )
    value = value.xreplace(
        {s: sample() for s in sorted(value.free_symbols, key=sympy.default_sort_key)}
    )
    if value.has(sympy.zoo, sympy.nan, sympy.oo, -sympy.oo):
        return False
    if value.is_Rational:
        return value != 0
    try:
        coarse = complex(value.evalf(50))
        fine = complex(value.evalf(80))
    except (TypeError, ValueError):
        return False
    # rounding noise of a vanishing value shrinks with the precision
    return coarse != 0 and abs(coarse - fine) <= 1e-12 * abs(coarse)


class Kernel(LoggingConfigurable):
    """Per-theory scalar arithmetic: normalization, differentiation, substitution

    A kernel knows the declared symbols of its theory (coordinates of every chart of the
    tower, parameters), the registered derived functions, the rewrite identities and the
    nonzero assumptions made about parameters and functions.
    """

    max_rewrite_depth = traitlets.Int(
        help="Maximal number of identity rewriting passes before giving up. "
        "Defaults to $MULTISYM_MAX_REWRITE or 64.",
    ).tag(config=True)

    @traitlets.default("max_rewrite_depth")
    def _default_max_rewrite_depth(self) -> int:
        value = os.environ.get("MULTISYM_MAX_REWRITE", "")
        if not value:
            return DEFAULT_MAX_REWRITE_DEPTH
        try:
            return int(value)
        except ValueError:
            self.log.warning(
                f"Ignoring malformed MULTISYM_MAX_REWRITE='{value}': using {DEFAULT_MAX_REWRITE_DEPTH}"
            )
            return DEFAULT_MAX_REWRITE_DEPTH

    @traitlets.validate("max_rewrite_depth")
    def _validate_max_rewrite_depth(self, proposal: dict) -> int:
        if proposal["value"] < 1:
            raise traitlets.TraitError("max_rewrite_depth must be strictly positive")
        return proposal["value"]

    def __init__(
        self,
        symbols: Optional[Iterable[sympy.Symbol]] = None,
        identities: Sequence[Tuple[sympy.Expr, sympy.Expr]] = (),
        functions: Mapping[str, Type[DerivedFunction]] = {},
        nonzero: Iterable[sympy.Expr] = (),
        **kwargs,
    ):
        super().__init__(**kwargs)
        self.symbols = None if symbols is None else frozenset(symbols)
        self.identities = tuple(identities)
        self.functions = dict(functions)
        self.nonzero = tuple(nonzero)

    def declare(self, symbols: Iterable[sympy.Symbol]) -> "Kernel":
        """Return a kernel sharing this one's rules with additional declared symbols"""
        extended = None if self.symbols is None else self.symbols | set(symbols)
        kernel = Kernel(
            symbols=extended,
            identities=self.identities,
            functions=self.functions,
            nonzero=self.nonzero,
            parent=self.parent,
            max_rewrite_depth=self.max_rewrite_depth,
        )
        return kernel

    # normal form

    def normalize(self, expr: ScalarExpr) -> ScalarExpr:
        """Canonical form: expanded sum of products with identities applied to fixpoint

        :raises RewriteDepthExceeded: If the identities do not reach a fixpoint.
        """
        current = sympy.expand(sympy.sympify(expr), power_exp=False)
        if not self.identities or current.is_Number:
            return current
        for _ in range(self.max_rewrite_depth):
            rewritten = sympy.expand(current.subs(self.identities), power_exp=False)
            if rewritten == current:
                return current
            current = rewritten
        raise RewriteDepthExceeded(
            f"Identities did not reach a fixpoint within {self.max_rewrite_depth} passes"
        )

    def is_zero(self, expr: ScalarExpr) -> bool:
        """Decide whether ``expr`` vanishes identically

        The normal form is tried first, then derived functions are replaced by their
        explicit formulas and the resulting algebraic expression is decided exactly.
        """
        normal = self.normalize(expr)
        if normal == 0:
            return True
        explicit = expand_derived(normal)
        if _sampled_nonzero(explicit):
            return False
        return _algebraic_is_zero(explicit)

    def simplify(self, expr: ScalarExpr) -> ScalarExpr:
        """Normal form of a possibly rational expression (common denominator cancelled)"""
        normal = self.normalize(expr)
        if normal.is_Number:
            return normal
        numerator, denominator = sympy.fraction(sympy.cancel(sympy.together(normal)))
        if denominator == 1:
            return self.normalize(numerator)
        return self.normalize(numerator) / self.normalize(denominator)

    # calculus

    def check_declared(self, symbol: sympy.Symbol) -> None:
        if self.symbols is not None and symbol not in self.symbols:
            raise UnknownSymbol(f"'{symbol}' is not a declared coordinate or parameter")

    def partial(self, expr: ScalarExpr, symbol: sympy.Symbol) -> ScalarExpr:
        """Exact partial derivative, normalized

        :raises UnknownSymbol: If ``symbol`` is not declared.
        """
        self.check_declared(symbol)
        expr = sympy.sympify(expr)
        if symbol not in expr.free_symbols:
            return ZERO
        return self.normalize(sympy.diff(expr, symbol))

    def substitute(
        self, expr: ScalarExpr, bindings: Mapping[sympy.Symbol, ScalarExpr]
    ) -> ScalarExpr:
        """Simultaneous substitution of symbols, then normalization"""
        for symbol in bindings:
            self.check_declared(symbol)
        return self.normalize(sympy.sympify(expr).xreplace(dict(bindings)))

    def eval(
        self, expr: ScalarExpr, point: Mapping[sympy.Symbol, object]
    ) -> sympy.Rational:
        """Exact value of ``expr`` at ``point``

        :raises UnboundSymbol: If a free symbol of ``expr`` has no value.
        :raises DivisionByZero: If the evaluation divides by zero.
        :raises IrrationalValue: If the value is not a rational number.
        """
        explicit = expand_derived(sympy.sympify(expr))
        values = {symbol: sympy.Rational(value) for symbol, value in point.items()}
        missing = explicit.free_symbols - set(values)
        if missing:
            names = ", ".join(sorted(str(symbol) for symbol in missing))
            raise UnboundSymbol(f"No value for: {names}")
        if explicit.atoms(sympy.core.function.AppliedUndef):
            raise UnboundSymbol(f"Cannot evaluate opaque functions in '{expr}'")
        value = explicit.xreplace(values)
        if value.has(sympy.zoo, sympy.nan, sympy.oo, -sympy.oo):
            raise DivisionByZero(f"Division by zero evaluating '{expr}'")
        if not value.is_Rational:
            value = sympy.expand(value)
        if not value.is_Rational:
            raise IrrationalValue(f"'{expr}' has the irrational value {value}")
        return value

    # assumptions

    def strip_nonzero_factors(self, expr: ScalarExpr) -> ScalarExpr:
        """Remove numeric content and factors assumed nonzero, fix the sign

        Used to print constraints the way they are usually written.
        """
        normal = self.simplify(expr)
        if normal == 0:
            return normal
        numerator, _ = sympy.fraction(sympy.together(normal))
        numerator = sympy.factor_terms(sympy.expand(numerator, power_exp=False))
        kept = []
        for factor in sympy.Mul.make_args(numerator):
            base = factor.base if factor.is_Pow else factor
            if factor.is_Number or self.is_assumed_nonzero(base):
                continue
            kept.append(factor)
        result = self.normalize(sympy.Mul(*kept))
        leading = sympy.Add.make_args(result)
        ordered = sorted(leading, key=sympy.default_sort_key)
        if ordered and ordered[0].could_extract_minus_sign():
            result = self.normalize(-result)
        return result

    def is_assumed_nonzero(self, expr: ScalarExpr) -> bool:
        if expr.is_Number:
            return expr != 0
        if expr in self.nonzero:
            return True
        if isinstance(expr, DerivedFunction) and expr.func in {
            n.func for n in self.nonzero if isinstance(n, DerivedFunction)
        }:
            return True
        if isinstance(expr, sympy.exp):
            return True
        return False


def normalize(expr: ScalarExpr) -> ScalarExpr:
    """Normal form without theory identities"""
    return Kernel().normalize(expr)


def partial(expr: ScalarExpr, symbol: sympy.Symbol) -> ScalarExpr:
    return Kernel().partial(expr, symbol)


def substitute(
    expr: ScalarExpr, bindings: Mapping[sympy.Symbol, ScalarExpr]
) -> ScalarExpr:
    return Kernel().substitute(expr, bindings)


def evaluate(expr: ScalarExpr, point: Mapping[sympy.Symbol, object]) -> sympy.Rational:
    return Kernel().eval(expr, point)
