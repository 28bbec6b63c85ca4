"""Report payloads built from computed objects, and their rendering"""

from __future__ import annotations

from typing import List, Optional, Sequence, Union

import sympy
from jinja2 import ChoiceLoader, Environment, FileSystemLoader, PrefixLoader

from .bundle import BundleChart
from .constraints import (
    Constraint,
    ConstraintReport,
    derive_field_equations,
    on_sections,
)
from .errors import UnsolvedCoefficient
from .exterior import DiffForm, VectorField
from .geometry import Side
from .lifts import Lifts, ProjectionCheck
from .models import (
    ConstraintEntry,
    ConstraintsPayload,
    Current,
    DerivePayload,
    Entry,
    LiftPayload,
    NoetherPayload,
    Rendered,
    Report,
    Verdict,
)
from .multivec import ContractionOrder, MultiVectorField
from .noether import SymmetryAnalysis
from .printing import format_form, format_scalar, format_vector
from .utils import local_path

FORMATS = ("text", "json", "latex")

_TEMPLATES = {"text": "report.txt.j2", "latex": "report.tex.j2"}


def render(
    value: Union[DiffForm, VectorField, sympy.Expr],
    chart: Optional[BundleChart] = None,
) -> Rendered:
    if isinstance(value, DiffForm):
        return Rendered(text=format_form(value), latex=format_form(value, latex=True))
    if isinstance(value, VectorField):
        return Rendered(text=format_vector(value), latex=format_vector(value, latex=True))
    return Rendered(
        text=format_scalar(value), latex=format_scalar(value, chart, latex=True)
    )


def entry(label: str, value, chart: Optional[BundleChart] = None) -> Entry:
    return Entry(label=label, value=render(value, chart))


# derive


def derive_payload(
    theory,
    side: Side,
    order: ContractionOrder = ContractionOrder.INNERMOST_FIRST,
) -> DerivePayload:
    """Forms, energy, Legendre map and field equations of ``theory`` on ``side``

    Lagrangian field equations are derived for a holonomic multivector, so their
    section form is the Euler-Lagrange system.
    """
    side = Side(side)
    kernel = theory.kernel
    legendre_map = theory.legendre_map
    jet_chart = theory.tower.jet
    space = theory.phase_space(side)
    chart = space.chart
    if side == Side.LAGRANGIAN:
        cartan = theory.cartan
        forms = [entry("Theta_L", cartan.theta), entry("Omega_L", cartan.omega)]
        energy = entry("E_L", cartan.energy, jet_chart)
        hessian = [
            entry(f"d2L/d({a})d({b})", value, jet_chart)
            for (a, b), value in sorted(
                cartan.hessian.items(),
                key=lambda kv: (jet_chart.position[kv[0][0]], jet_chart.position[kv[0][1]]),
            )
        ]
        pullback_verified = None
    else:
        hamiltonian = theory.hamiltonian_theory
        forms = [entry("Theta_H", hamiltonian.theta), entry("Omega_H", hamiltonian.omega)]
        energy = entry("H", hamiltonian.hamiltonian, chart)
        hessian = []
        pullback_verified = hamiltonian.pullback_verified
    legendre = [
        entry(str(symbol), image, jet_chart)
        for symbol, image in legendre_map.restricted.images
        if theory.tower.restricted.coordinate(symbol).field is not None
    ]
    primary = [
        entry(str(symbol), value, theory.tower.restricted)
        for symbol, value in legendre_map.constraints
    ]

    X = MultiVectorField.general(
        chart, holonomic=side == Side.LAGRANGIAN, order=order, kernel=kernel
    )
    system = derive_field_equations(
        space, X, solver=theory.solver, holonomic=side == Side.LAGRANGIAN
    )
    equations = [
        entry(str(symbol), value, chart) for symbol, value in system.vertical_rows
    ]
    sections: List[Rendered] = []
    try:
        sections = [render(e) for e in on_sections(system)]
    except UnsolvedCoefficient as error:
        kernel.log.warning("%s", error)
    return DerivePayload(
        side=side.value,
        space=chart.space.value,
        classification=legendre_map.classification,
        forms=forms,
        energy=energy,
        hessian=hessian,
        legendre=legendre,
        primary_constraints=primary,
        field_equations=equations,
        sections=sections,
        unsolved=len(system.deferred),
        pullback_verified=pullback_verified,
    )


# constraints


def _constraint_entries(
    constraints: Sequence[Constraint], chart: BundleChart
) -> List[ConstraintEntry]:
    return [
        ConstraintEntry(
            stage=c.stage.value,
            family=c.family,
            source=c.source,
            iteration=c.iteration,
            expr=render(c.expr, chart),
        )
        for c in constraints
    ]


def constraints_payload(theory, report: ConstraintReport) -> ConstraintsPayload:
    chart = theory.phase_space(report.side).chart
    if report.final_is_primary:
        final = f"the whole of {report.space}"
    else:
        final = f"{len(report.constraints)} constraints on {report.space}"
    return ConstraintsPayload(
        side=report.side.value,
        space=report.space,
        compatibility=_constraint_entries(report.compatibility, chart),
        sopde=_constraint_entries(report.sopde, chart),
        tangency=_constraint_entries(report.tangency, chart),
        status=report.status.value,
        iterations=report.iterations,
        final=final,
        notes=list(report.notes),
    )


# noether and lift


def lift_entries(lifts: Lifts) -> List[Entry]:
    result = [
        entry("xi_E", lifts.total),
        entry("X_xi", lifts.jet),
        entry("Z_xi", lifts.extended),
        entry("Y_xi", lifts.restricted),
    ]
    if lifts.primary is not None:
        result.append(entry("Y0_xi", lifts.primary))
    if lifts.extended_primary is not None:
        result.append(entry("Ztilde_xi", lifts.extended_primary))
    return result


def noether_payload(analysis: SymmetryAnalysis, lifts: Optional[Lifts] = None) -> NoetherPayload:
    verdict = current = None
    if analysis.verdict is not None:
        v = analysis.verdict
        verdict = Verdict(
            exact=v.exact,
            cartan=v.cartan,
            natural=v.natural,
            lagrangian_invariance=v.lagrangian_invariance,
            on_constraints=v.on_constraints,
        )
    if analysis.current is not None:
        c = analysis.current
        current = Current(
            form=render(c.form),
            construction=c.construction,
            verified=c.verified,
            on_constraints=c.on_constraints,
            zero=c.is_zero,
        )
    return NoetherPayload(
        generator=analysis.generator,
        space=analysis.space.value,
        vector=render(analysis.vector),
        verdict=verdict,
        current=current,
        lifts=lift_entries(lifts) if lifts is not None else [],
    )


def lift_payload(lifts: Lifts, projection: Optional[ProjectionCheck] = None) -> LiftPayload:
    return LiftPayload(
        generator=lifts.generator.name,
        lifts=lift_entries(lifts),
        projection=None if projection is None else projection.holds,
    )


# rendering


def template_environment(template_paths: Sequence[str] = ()) -> Environment:
    """jinja2 environment for report templates

    Use 'templates/...' to extend the embedded templates, other names are looked up in
    ``template_paths`` first.
    """
    template_path = local_path("templates")
    loader = ChoiceLoader(
        [
            PrefixLoader({"templates": FileSystemLoader(template_path)}),
            FileSystemLoader(list(template_paths) + [template_path]),
        ]
    )
    return Environment(
        loader=loader,
        autoescape=False,
        trim_blocks=True,
        lstrip_blocks=True,
        keep_trailing_newline=True,
    )


def render_report(
    report: Report, fmt: str = "text", template_paths: Sequence[str] = ()
) -> str:
    """Report as text, LaTeX or JSON

    :raises ValueError: For an unknown format.
    """
    if fmt == "json":
        return report.to_json()
    if fmt not in _TEMPLATES:
        raise ValueError(f"Unknown report format '{fmt}' (available: {', '.join(FORMATS)})")
    template = template_environment(template_paths).get_template(_TEMPLATES[fmt])
    return template.render(report=report)
