"""Text and LaTeX rendering of scalars, forms and vector fields

Forms are written in the usual multisymplectic notation: the base differentials of a
term are collected into ``d^(m-k)x_(mu...)``, the contraction of the volume form
``d^m x`` by the missing base directions.
"""

from __future__ import annotations

import re
from typing import Dict, List, Optional, Sequence, Tuple

import sympy

from .bundle import BundleChart, CoordinateKind
from .exterior import DiffForm, VectorField, volume_contraction
from .multivec import MultiVectorField
from .symkernel import ScalarExpr

_INDEXED_REGEXP = re.compile(r"^(?P<name>[A-Za-z_][A-Za-z0-9_]*)(?:\[(?P<index>[0-9,]+)\])?$")
_GREEK = {
    "alpha",
    "beta",
    "gamma",
    "delta",
    "epsilon",
    "eta",
    "lambda",
    "mu",
    "nu",
    "omega",
    "phi",
    "pi",
    "psi",
    "rho",
    "sigma",
    "tau",
    "theta",
    "xi",
    "zeta",
}


def _latex_name(name: str) -> str:
    if name in _GREEK:
        return "\\" + name
    if len(name) > 1:
        return f"\\mathrm{{{name}}}"
    return name


def _latex_indexed(name: str) -> str:
    """``e[0,1]`` as ``e^{01}``"""
    match = _INDEXED_REGEXP.match(name)
    if match is None:
        return f"\\mathrm{{{name}}}"
    base = _latex_name(match["name"])
    if match["index"] is None:
        return base
    return f"{base}^{{{match['index'].replace(',', '')}}}"


def coordinate_latex(chart: BundleChart, symbol: sympy.Symbol) -> str:
    """LaTeX name of a chart coordinate: jets as ``y_{,mu}``, momenta as ``p_y^{mu}``"""
    coordinate = chart.coordinate(symbol)
    if coordinate.kind == CoordinateKind.SCALAR_MOMENTUM:
        return "p"
    if coordinate.kind in (CoordinateKind.BASE, CoordinateKind.FIELD):
        return _latex_indexed(coordinate.name)
    assert coordinate.field is not None
    field = _latex_indexed(coordinate.field.name)
    if coordinate.kind == CoordinateKind.JET:
        return f"{{{field}}}_{{,{coordinate.derivative}}}"
    return f"p_{{{field}}}^{{{coordinate.derivative}}}"


def _symbol_names(chart: BundleChart, expr: ScalarExpr) -> Dict[sympy.Symbol, str]:
    return {s: coordinate_latex(chart, s) for s in expr.free_symbols if chart.has(s)}


def format_scalar(
    expr: ScalarExpr, chart: Optional[BundleChart] = None, latex: bool = False
) -> str:
    expr = sympy.sympify(expr)
    if not latex:
        return sympy.sstr(expr, order="lex")
    names = _symbol_names(chart, expr) if chart is not None else {}
    return sympy.latex(expr, symbol_names=names, order="lex")


def _volume_part(chart: BundleChart, base: Sequence[int]) -> Tuple[int, Tuple[int, ...]]:
    """Sign s and contracted directions with dx^base = s d^(m-k)x_(directions)"""
    missing = tuple(mu for mu in range(chart.base_dimension) if mu not in base)
    contracted = volume_contraction(chart, *missing)
    ((_, sign),) = contracted.terms.items()
    return int(sign), missing


def form_terms(form: DiffForm) -> List[Tuple[ScalarExpr, Tuple[sympy.Symbol, ...], Tuple[int, ...]]]:
    """Terms ``(coefficient, fiber differentials, contracted base directions)``

    Each term stands for ``coefficient * d(fiber[0]) ^ ... ^ d^(m-k)x_(directions)``.
    """
    chart = form.chart
    kinds = {c.symbol: c.kind for c in chart.coordinates}
    result = []
    for monomial, coefficient in form.items():
        symbols = form.monomial_symbols(monomial)
        base = [chart.position[s] for s in symbols if kinds[s] == CoordinateKind.BASE]
        fiber = tuple(s for s in symbols if kinds[s] != CoordinateKind.BASE)
        sign, missing = _volume_part(chart, base)
        # dx^base ^ dy^fiber = (-1)^(|base| |fiber|) dy^fiber ^ dx^base
        if (len(base) * len(fiber)) % 2:
            sign = -sign
        result.append((sign * coefficient, fiber, missing))
    return result


def _volume_text(m: int, missing: Tuple[int, ...], latex: bool) -> str:
    degree = m - len(missing)
    if degree == 0:
        return ""
    if latex:
        power = f"^{{{degree}}}" if degree > 1 else ""
        lower = f"_{{{''.join(str(mu) for mu in missing)}}}" if missing else ""
        return f"\\mathrm{{d}}{power}x{lower}"
    lower = f"_({','.join(str(mu) for mu in missing)})" if missing else ""
    return f"d^{degree}x{lower}"


def format_form(form: DiffForm, latex: bool = False) -> str:
    chart = form.chart
    m = chart.base_dimension
    wedge = " \\wedge " if latex else " ^ "
    parts = []
    for coefficient, fiber, missing in form_terms(form):
        factors = []
        for symbol in fiber:
            if latex:
                factors.append(f"\\mathrm{{d}}{coordinate_latex(chart, symbol)}")
            else:
                factors.append(f"d({symbol})")
        volume = _volume_text(m, missing, latex)
        if volume:
            factors.append(volume)
        scalar = format_scalar(coefficient, chart, latex)
        body = wedge.join(factors)
        if not factors:
            parts.append(scalar)
        elif coefficient == 1:
            parts.append(body)
        elif coefficient == -1:
            parts.append(f"-{body}")
        else:
            joiner = " " if latex else "*"
            parts.append(f"({scalar}){joiner}{body}")
    if not parts:
        return "0"
    return " + ".join(parts)


def format_vector(vector: VectorField, latex: bool = False) -> str:
    chart = vector.chart
    parts = []
    for symbol, component in vector.items():
        scalar = format_scalar(component, chart, latex)
        if latex:
            parts.append(
                f"\\left({scalar}\\right)\\frac{{\\partial}}{{\\partial {coordinate_latex(chart, symbol)}}}"
            )
        else:
            parts.append(f"({scalar})*d/d({symbol})")
    if not parts:
        return "0"
    return " + ".join(parts)


def format_multivector(X: MultiVectorField, latex: bool = False) -> List[str]:
    """One line per factor X_mu"""
    return [format_vector(factor, latex) for factor in X.factors]
