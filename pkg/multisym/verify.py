"""Acceptance checks on the bundled theories

Every check is a function of a shared :class:`VerificationContext` returning whether it
passed and a short description of what differed. Checks are registered in groups
(``forms``, ``kg``, ``einstein_cartan``, ``polyakov``) and selected by group or name
prefix.
"""

from __future__ import annotations

import itertools
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import sympy
from traitlets.config import Configurable
from traitlets.log import get_logger

from .bundle import BundleChart, FieldFamily, IndexSlot, build_tower
from .constraints import (
    ConstraintReport,
    Stage,
    derive_field_equations,
    derivative_marker,
    on_sections,
    run_constraint_algorithm,
)
from .elimination import ConstraintIdeal
from .errors import MultisymError
from .exterior import (
    DiffForm,
    VectorField,
    contract,
    d,
    differential,
    form_sum,
    lie,
    pullback,
    volume,
    volume_contraction,
)
from .geometry import Side, hamiltonize, liouville_forms
from .lifts import (
    GeneratorSpec,
    check_legendre_projection,
    gamma_form,
    lift_to_E,
    lift_to_MPi,
    lift_to_PSub,
)
from .models import CheckResult, VerifyPayload
from .multivec import ContractionOrder, MultiVectorField
from .noether import SpaceName, SymmetryAnalysis, analyze_symmetry
from .symkernel import ZERO, Kernel, ScalarExpr
from .theory import Theory, builtin_theory

GROUPS = ("forms", "kg", "einstein_cartan", "polyakov")

Outcome = Tuple[bool, str]


class Check(NamedTuple):
    name: str
    group: str
    function: Callable[["VerificationContext"], Outcome]


CHECKS: Dict[str, Check] = {}


def check(group: str, name: Optional[str] = None):
    """Register an acceptance check"""

    def decorator(function: Callable[["VerificationContext"], Outcome]):
        check_name = name or function.__name__
        if check_name in CHECKS:
            raise ValueError(f"Duplicate check '{check_name}'")
        CHECKS[check_name] = Check(name=check_name, group=group, function=function)
        return function

    return decorator


def outcome(failures: Sequence[str]) -> Outcome:
    return not failures, "; ".join(failures)


def proportional(kernel: Kernel, a: ScalarExpr, b: ScalarExpr) -> bool:
    """``a`` is a nonzero numeric multiple of ``b``"""
    if kernel.is_zero(b):
        return kernel.is_zero(a)
    ratio = sympy.cancel(sympy.together(kernel.normalize(a) / kernel.normalize(b)))
    return bool(ratio.is_number) and ratio != 0


def same_form(kernel: Kernel, a: DiffForm, b: DiffForm) -> bool:
    return a.degree == b.degree and (a - b).is_zero(kernel)


def same_vector(kernel: Kernel, a: VectorField, b: VectorField) -> bool:
    return (a - b).is_zero(kernel)


class Notation:
    """Full-index access to the coordinates and declared objects of a theory

    Indices out of canonical order are reordered with the sign of the index symmetry;
    the diagonal of an antisymmetric pair is zero.
    """

    def __init__(self, theory: Theory):
        self.theory = theory
        self.kernel = theory.kernel
        self.tower = theory.tower
        self.x = tuple(c.symbol for c in self.tower.base.base)

    def _component(self, name: str, index: Sequence[int]) -> Tuple[int, str]:
        family: FieldFamily = self.theory.families[name]
        sign, canonical = family.canonical(index)
        return sign, family.component_name(canonical)

    def symbol(self, name: str, *index: int) -> ScalarExpr:
        """Field component or parameter"""
        sign, component = self._component(name, index)
        return sign * sympy.Symbol(component)

    def jet(self, name: str, index: Sequence[int], mu: int) -> ScalarExpr:
        sign, component = self._component(name, index)
        if sign == 0:
            return ZERO
        return sign * self.tower.jet.jet(sympy.Symbol(component), mu)

    def momentum(self, name: str, index: Sequence[int], mu: int) -> ScalarExpr:
        sign, component = self._component(name, index)
        if sign == 0:
            return ZERO
        return sign * self.tower.restricted.momentum(sympy.Symbol(component), mu)

    def function(self, name: str, *index: int) -> ScalarExpr:
        sign, component = self._component(name, index)
        return sign * sympy.Function(component)(*self.x)

    def derived(self, name: str, *index: int) -> ScalarExpr:
        sign, component = self._component(name, index)
        if sign == 0:
            return ZERO
        cls = self.kernel.functions[component]
        return sign * cls(*cls.parameters)

    def const(self, name: str, *index: int) -> ScalarExpr:
        return self.theory.tables[name].get(tuple(index), ZERO)

    def d(self, chart: BundleChart, name: str, *index: int) -> DiffForm:
        sign, component = self._component(name, index)
        if sign == 0:
            return DiffForm.zero(chart, 1, kernel=self.kernel)
        return differential(chart, sympy.Symbol(component)) * sign

    def total(self, chart: BundleChart, degree: int, parts: Sequence[DiffForm]) -> DiffForm:
        return form_sum(chart, degree, parts, kernel=self.kernel)


class VerificationContext:
    """Theories, constraint reports and symmetry analyses shared between checks

    Everything is computed on first use.
    """

    def __init__(
        self,
        parent: Optional[Configurable] = None,
        contraction_order: ContractionOrder = ContractionOrder.INNERMOST_FIRST,
    ):
        self.parent = parent
        self.contraction_order = ContractionOrder(contraction_order)
        self._theories: Dict[str, Theory] = {}
        self._notations: Dict[str, Notation] = {}
        self._reports: Dict[Tuple[str, Side], ConstraintReport] = {}
        self._analyses: Dict[Tuple[str, str, SpaceName], SymmetryAnalysis] = {}

    def theory(self, name: str) -> Theory:
        if name not in self._theories:
            self._theories[name] = builtin_theory(name, parent=self.parent)
        return self._theories[name]

    def notation(self, name: str) -> Notation:
        if name not in self._notations:
            self._notations[name] = Notation(self.theory(name))
        return self._notations[name]

    def report(self, name: str, side: Side) -> ConstraintReport:
        key = (name, Side(side))
        if key not in self._reports:
            self._reports[key] = run_constraint_algorithm(
                self.theory(name), side=side, parent=self.parent
            )
        return self._reports[key]

    def ideal(self, name: str, side: Side) -> Optional[ConstraintIdeal]:
        return self.report(name, side).ideal

    def analysis(self, name: str, generator: str, space: SpaceName) -> SymmetryAnalysis:
        key = (name, generator, SpaceName(space))
        if key not in self._analyses:
            theory = self.theory(name)
            self._analyses[key] = analyze_symmetry(
                theory,
                theory.generator(generator),
                space,
                ideal_factory=lambda side: self.ideal(name, side),
            )
        return self._analyses[key]

    def multivector(self, name: str, side: Side) -> MultiVectorField:
        theory = self.theory(name)
        return MultiVectorField.general(
            theory.phase_space(side).chart,
            holonomic=Side(side) == Side.LAGRANGIAN,
            order=self.contraction_order,
            kernel=theory.kernel,
        )

    def sections(self, name: str, side: Side) -> Tuple[sympy.Expr, ...]:
        """Field equations of ``name`` on integral sections"""
        theory = self.theory(name)
        system = derive_field_equations(
            theory.phase_space(side),
            self.multivector(name, side),
            solver=theory.solver,
            holonomic=Side(side) == Side.LAGRANGIAN,
        )
        return on_sections(system)


def select(pattern: Optional[str] = None) -> List[Check]:
    """Checks of a group, or whose name starts with ``pattern``

    :raises ValueError: If nothing matches.
    """
    if not pattern:
        return list(CHECKS.values())
    selected = [
        c for c in CHECKS.values() if c.group == pattern or c.name.startswith(pattern)
    ]
    if not selected:
        raise ValueError(
            f"No check matches '{pattern}' (groups: {', '.join(GROUPS)})"
        )
    return selected


def run_checks(
    pattern: Optional[str] = None,
    context: Optional[VerificationContext] = None,
    parent: Optional[Configurable] = None,
) -> VerifyPayload:
    """Run the selected checks; a check raising a multisym error fails"""
    context = context or VerificationContext(parent=parent)
    log = parent.log if parent is not None else get_logger()
    results = []
    for item in select(pattern):
        log.info("Check %s", item.name)
        try:
            passed, detail = item.function(context)
        except MultisymError as error:
            passed, detail = False, f"{type(error).__name__}: {error}"
        if not passed:
            log.warning("Check %s failed: %s", item.name, detail)
        results.append(
            CheckResult(name=item.name, group=item.group, passed=passed, detail=detail)
        )
    return VerifyPayload(checks=results)


# forms


def _scalar_tower(m: int, n: int):
    family = FieldFamily(name="y", slots=(IndexSlot(label="A", size=n),))
    return build_tower("x", m, [family])


def _liouville(m: int, n: int) -> Outcome:
    tower = _scalar_tower(m, n)
    chart = tower.extended
    kernel = Kernel(symbols=chart.symbols)
    theta, omega = liouville_forms(chart, kernel=kernel)
    scalar = chart.scalar_momentum
    assert scalar is not None
    expected = volume(chart, kernel=kernel) * scalar.symbol
    for field in chart.fields:
        for mu in range(m):
            term = differential(chart, field.symbol) ^ volume_contraction(chart, mu)
            expected = expected + term * chart.momentum(field.symbol, mu)
    failures = []
    if not same_form(kernel, theta, expected):
        failures.append("Theta differs from p dy ^ d^(m-1)x_mu + p d^m x")
    if not (omega + d(theta)).is_zero(kernel):
        failures.append("Omega + dTheta does not vanish")
    return outcome(failures)


def _register_liouville(m: int, n: int) -> None:
    check("forms", f"liouville_m{m}_n{n}")(lambda context: _liouville(m, n))


for _m, _n in itertools.product((2, 3, 4), (1, 2)):
    _register_liouville(_m, _n)


def _lift_propositions(m: int) -> Outcome:
    tower = _scalar_tower(m, 1)
    x = tuple(c.symbol for c in tower.base.base)
    (y,) = (c.symbol for c in tower.total.fields)
    generator = GeneratorSpec(
        name="generic",
        base=tuple(sympy.Function(f"xi[{mu}]")(*x) for mu in range(m)),
        fiber={y: sympy.Function("zeta")(*x, y)},
    )
    kernel = Kernel()
    xi_E = lift_to_E(generator, tower, kernel=kernel)
    chart = tower.extended
    Z = lift_to_MPi(xi_E, chart)
    theta, omega = liouville_forms(chart, kernel=kernel)
    gamma = gamma_form(xi_E, chart)
    failures = []
    if not lie(Z, theta).is_zero(kernel):
        failures.append("L(Z)Theta does not vanish")
    if not lie(Z, omega).is_zero(kernel):
        failures.append("L(Z)Omega does not vanish")
    if not same_form(kernel, contract(Z, theta), gamma):
        failures.append("i(Z)Theta differs from Gamma")
    if not same_form(kernel, contract(Z, omega), d(gamma)):
        failures.append("i(Z)Omega differs from dGamma")
    return outcome(failures)


def _register_lift(m: int) -> None:
    check("forms", f"lift_propositions_m{m}")(lambda context: _lift_propositions(m))


for _m in (2, 3):
    _register_lift(_m)


# Klein-Gordon


def _kg_metric(n: Notation) -> List[List[ScalarExpr]]:
    return [[n.const("eta", mu, nu) for nu in range(4)] for mu in range(4)]


@check("kg")
def kg_hessian(context: VerificationContext) -> Outcome:
    n = context.notation("kg")
    hessian = n.theory.cartan.hessian_matrix()
    eta = _kg_metric(n)
    failures = [
        f"d2L/dphi_{mu}dphi_{nu} = {hessian[mu, nu]}"
        for mu, nu in itertools.product(range(4), repeat=2)
        if not n.kernel.is_zero(hessian[mu, nu] + eta[mu][nu])
    ]
    return outcome(failures)


@check("kg")
def kg_hamiltonian(context: VerificationContext) -> Outcome:
    n = context.notation("kg")
    theory = n.theory
    derived = hamiltonize(
        theory.tower, theory.cartan, theory.legendre_map, kernel=theory.kernel
    ).hamiltonian
    p = [n.momentum("phi", (), mu) for mu in range(4)]
    m, phi = n.symbol("m"), n.symbol("phi")
    expected = -sympy.Rational(1, 2) * sum(
        n.const("eta", mu, nu) * p[mu] * p[nu]
        for mu, nu in itertools.product(range(4), repeat=2)
    ) + sympy.Rational(1, 2) * m**2 * phi**2
    return outcome(
        [] if n.kernel.is_zero(derived - expected) else [f"H = {derived}"]
    )


def _matches(kernel: Kernel, expected: ScalarExpr, equations: Sequence[ScalarExpr]) -> bool:
    return any(proportional(kernel, equation, expected) for equation in equations)


@check("kg")
def kg_hamilton_equations(context: VerificationContext) -> Outcome:
    n = context.notation("kg")
    equations = context.sections("kg", Side.HAMILTONIAN)
    chart = n.theory.hamiltonian_space.chart
    phi = n.symbol("phi")
    momenta = [chart.momentum(phi, mu) for mu in range(4)]
    expected = {
        "d_mu p^mu + m^2 phi": sum(
            derivative_marker([mu], str(momenta[mu])) for mu in range(4)
        )
        + n.symbol("m") ** 2 * phi
    }
    for mu in range(4):
        expected[f"d_{mu} phi + eta_{mu}nu p^nu"] = derivative_marker([mu], "phi") + sum(
            n.const("eta", mu, nu) * momenta[nu] for nu in range(4)
        )
    failures = [
        f"missing {label}"
        for label, value in expected.items()
        if not _matches(n.kernel, value, equations)
    ]
    return outcome(failures)


@check("kg")
def kg_euler_lagrange(context: VerificationContext) -> Outcome:
    n = context.notation("kg")
    equations = context.sections("kg", Side.LAGRANGIAN)
    expected = sum(
        n.const("eta", mu, mu) * derivative_marker([mu, mu], "phi") for mu in range(4)
    ) - n.symbol("m") ** 2 * n.symbol("phi")
    if _matches(n.kernel, expected, equations):
        return True, ""
    return False, "Klein-Gordon equation not found among the section equations"


@check("kg")
def kg_legendre_pullback(context: VerificationContext) -> Outcome:
    hamiltonian = context.theory("kg").hamiltonian_theory
    failures = []
    if not hamiltonian.user_supplied:
        failures.append("the bundled Hamiltonian was not used")
    if not hamiltonian.pullback_verified:
        failures.append("FL*Theta_H differs from Theta_L")
    return outcome(failures)


@check("kg")
def kg_no_constraints(context: VerificationContext) -> Outcome:
    failures = [
        f"{len(context.report('kg', side).constraints)} constraints on the {side.value} side"
        for side in Side
        if context.report("kg", side).constraints
    ]
    return outcome(failures)


@check("kg")
def kg_lorentz_projection(context: VerificationContext) -> Outcome:
    theory = context.theory("kg")
    result = check_legendre_projection(theory, theory.generator("lorentz"))
    if result.holds:
        return True, ""
    return False, f"FL_*X differs from Y along {', '.join(map(str, result.difference))}"


def _kg_lorentz_xi(n: Notation) -> List[ScalarExpr]:
    return [
        sum(
            n.const("eta", mu, rho) * n.symbol("om", rho, nu) * n.x[nu]
            for nu, rho in itertools.product(range(4), repeat=2)
        )
        for mu in range(4)
    ]


def _kg_current(
    n: Notation,
    chart: BundleChart,
    momentum: Callable[[int], ScalarExpr],
    energy: ScalarExpr,
) -> DiffForm:
    """ξ^rho (-p^mu dphi ^ d^2x_(mu rho) - energy d^3x_rho)"""
    xi = _kg_lorentz_xi(n)
    dphi = n.d(chart, "phi")
    parts = []
    for rho in range(4):
        parts.append(volume_contraction(chart, rho) * (-xi[rho] * energy))
        for mu in range(4):
            if mu != rho:
                parts.append((dphi ^ volume_contraction(chart, mu, rho)) * (-xi[rho] * momentum(mu)))
    return n.total(chart, 3, parts)


def _current_outcome(
    kernel: Kernel, analysis: SymmetryAnalysis, expected: DiffForm
) -> List[str]:
    failures = []
    verdict, current = analysis.verdict, analysis.current
    where = analysis.space.value
    if verdict is None or not verdict.exact:
        return [f"not exact on {where}"]
    if current is None or not current.verified:
        failures.append(f"dJ + i(Y)Omega does not vanish on {where}")
    if current is not None and not same_form(kernel, current.form, expected):
        failures.append(f"J on {where} differs from the expected current")
    return failures


def _pullback_outcome(theory: Theory, lagrangian: SymmetryAnalysis, hamiltonian: SymmetryAnalysis) -> List[str]:
    if lagrangian.current is None or hamiltonian.current is None:
        return []
    pulled = pullback(theory.legendre_map.to_primary, hamiltonian.current.form)
    if same_form(theory.kernel, pulled, lagrangian.current.form):
        return []
    return ["FL*J_H differs from J_L"]


@check("kg")
def kg_lorentz_currents(context: VerificationContext) -> Outcome:
    n = context.notation("kg")
    theory = n.theory
    phi, m = n.symbol("phi"), n.symbol("m")
    eta = _kg_metric(n)
    pairs = list(itertools.product(range(4), repeat=2))

    jets = [n.jet("phi", (), mu) for mu in range(4)]
    lagrangian_energy = -sympy.Rational(1, 2) * sum(
        eta[mu][nu] * jets[mu] * jets[nu] for mu, nu in pairs
    ) + sympy.Rational(1, 2) * m**2 * phi**2
    J_L = _kg_current(
        n,
        theory.tower.jet,
        lambda mu: -sum(eta[mu][nu] * jets[nu] for nu in range(4)),
        lagrangian_energy,
    )
    momenta = [n.momentum("phi", (), mu) for mu in range(4)]
    hamiltonian = -sympy.Rational(1, 2) * sum(
        eta[mu][nu] * momenta[mu] * momenta[nu] for mu, nu in pairs
    ) + sympy.Rational(1, 2) * m**2 * phi**2
    J_H = _kg_current(n, theory.tower.restricted, lambda mu: momenta[mu], hamiltonian)

    lagrangian = context.analysis("kg", "lorentz", SpaceName.J1)
    hamiltonian_analysis = context.analysis("kg", "lorentz", SpaceName.J1STAR)
    failures = _current_outcome(n.kernel, lagrangian, J_L)
    failures += _current_outcome(n.kernel, hamiltonian_analysis, J_H)
    failures += _pullback_outcome(theory, lagrangian, hamiltonian_analysis)
    return outcome(failures)


@check("kg")
def kg_translation_exact(context: VerificationContext) -> Outcome:
    failures = []
    for space in (SpaceName.J1, SpaceName.J1STAR, SpaceName.MPI):
        analysis = context.analysis("kg", "translation", space)
        if analysis.verdict is None or not analysis.verdict.exact:
            failures.append(f"not exact on {space.value}")
    return outcome(failures)


# Einstein-Cartan

_EC = "einstein_cartan"


def _ec_density(n: Notation) -> Dict[Tuple[int, int, int, int], ScalarExpr]:
    """eps^(mu nu rho sigma) eps_(abcd) e^a_mu e^b_nu by (rho, sigma, c, d)"""
    result: Dict[Tuple[int, int, int, int], ScalarExpr] = {}
    for mu, nu, rho, sigma in itertools.permutations(range(4)):
        outer = n.const("eps", mu, nu, rho, sigma)
        for a, b, c, dd in itertools.permutations(range(4)):
            value = outer * n.const("eps", a, b, c, dd)
            term = value * n.symbol("e", a, mu) * n.symbol("e", b, nu)
            key = (rho, sigma, c, dd)
            result[key] = result.get(key, ZERO) + term
    return result


@check(_EC)
def ec_components(context: VerificationContext) -> Outcome:
    tower = context.theory(_EC).tower
    count = tower.field_count
    return outcome([] if count == 40 else [f"{count} field components"])


@check(_EC)
def ec_hessian_zero(context: VerificationContext) -> Outcome:
    cartan = context.theory(_EC).cartan
    if cartan.hessian_is_zero:
        return True, ""
    return False, f"{len(cartan.hessian)} nonzero Hessian entries"


@check(_EC)
def ec_primary_constraints(context: VerificationContext) -> Outcome:
    n = context.notation(_EC)
    constraints = dict(n.theory.legendre_map.constraints)
    density = _ec_density(n)
    failures = []
    tower = n.tower
    for field in tower.restricted.fields:
        for rho in range(4):
            momentum = tower.restricted.momentum(field.symbol, rho)
            if momentum not in constraints:
                failures.append(f"{momentum} is not constrained")
                continue
            if field.family == "e":
                expected = ZERO
            else:
                c, dd, sigma = field.index
                expected = 2 * density.get((rho, sigma, c, dd), ZERO)
            if not n.kernel.is_zero(constraints[momentum] - expected):
                failures.append(f"{momentum} = {constraints[momentum]}")
    return outcome(failures)


@check(_EC)
def ec_lagrangian_constraints(context: VerificationContext) -> Outcome:
    report = context.report(_EC, Side.LAGRANGIAN)
    families = sorted(report.families(Stage.SOPDE))
    failures = []
    if families != ["e", "w"]:
        failures.append(f"SOPDE families {families}")
    if report.tangency:
        failures.append(f"{len(report.tangency)} tangency constraints")
    return outcome(failures)


@check(_EC)
def ec_hamiltonian_constraints(context: VerificationContext) -> Outcome:
    report = context.report(_EC, Side.HAMILTONIAN)
    failures = []
    if report.compatibility:
        failures.append(f"{len(report.compatibility)} compatibility constraints")
    if not report.final_is_primary:
        failures.append("the final constraint submanifold is smaller than P0")
    return outcome(failures)


def _ec_diffeo_current(n: Notation, chart: BundleChart) -> DiffForm:
    density = _ec_density(n)
    xi = [n.function("xi", mu) for mu in range(4)]
    parts = []
    for (rho, sigma, c, dd), value in density.items():
        connection = sum(
            n.const("eta", i, j) * n.symbol("w", c, i, rho) * n.symbol("w", j, dd, sigma)
            for i, j in itertools.product(range(4), repeat=2)
        )
        for lam in range(4):
            parts.append(volume_contraction(chart, lam) * (value * xi[lam] * connection))
            if lam != rho:
                term = n.d(chart, "w", c, dd, sigma) ^ volume_contraction(chart, rho, lam)
                parts.append(term * (-value * xi[lam]))
        transport = sum(
            n.symbol("w", c, dd, nu) * sympy.diff(xi[nu], n.x[sigma]) for nu in range(4)
        )
        parts.append(volume_contraction(chart, rho) * (-value * transport))
    return n.total(chart, 3, parts)


def _ec_lorentz_current(n: Notation, chart: BundleChart) -> DiffForm:
    density = _ec_density(n)
    parts = []
    for (rho, sigma, c, dd), value in density.items():
        variation = sum(
            n.const("eta", i, j)
            * (
                n.function("lam", c, i) * n.symbol("w", j, dd, sigma)
                + n.function("lam", dd, i) * n.symbol("w", c, j, sigma)
            )
            for i, j in itertools.product(range(4), repeat=2)
        ) - sympy.diff(n.function("lam", c, dd), n.x[sigma])
        parts.append(volume_contraction(chart, rho) * (-value * variation))
    return n.total(chart, 3, parts)


def _ec_currents(
    context: VerificationContext,
    generator: str,
    build: Callable[[Notation, BundleChart], DiffForm],
) -> Outcome:
    n = context.notation(_EC)
    theory = n.theory
    lagrangian = context.analysis(_EC, generator, SpaceName.J1)
    hamiltonian = context.analysis(_EC, generator, SpaceName.P0)
    failures = _current_outcome(n.kernel, lagrangian, build(n, theory.tower.jet))
    primary = theory.legendre_map.primary_chart
    failures += _current_outcome(n.kernel, hamiltonian, build(n, primary))
    failures += _pullback_outcome(theory, lagrangian, hamiltonian)
    return outcome(failures)


@check(_EC)
def ec_diffeo_currents(context: VerificationContext) -> Outcome:
    return _ec_currents(context, "diffeo", _ec_diffeo_current)


@check(_EC)
def ec_lorentz_currents(context: VerificationContext) -> Outcome:
    return _ec_currents(context, "lorentz", _ec_lorentz_current)


@check(_EC)
def ec_primary_lifts(context: VerificationContext) -> Outcome:
    n = context.notation(_EC)
    theory = n.theory
    chart = theory.legendre_map.primary_chart
    xi = [n.function("xi", mu) for mu in range(4)]
    eta = lambda i, j: n.const("eta", i, j)  # noqa: E731
    pairs = list(itertools.product(range(4), repeat=2))

    diffeo: Dict[sympy.Symbol, ScalarExpr] = {x: -xi[mu] for mu, x in enumerate(n.x)}
    lorentz: Dict[sympy.Symbol, ScalarExpr] = {}
    for field in chart.fields:
        if field.family == "e":
            a, mu = field.index
            diffeo[field.symbol] = sum(
                n.symbol("e", a, nu) * sympy.diff(xi[nu], n.x[mu]) for nu in range(4)
            )
            lorentz[field.symbol] = sum(
                eta(b, c) * n.function("lam", a, b) * n.symbol("e", c, mu)
                for b, c in pairs
            )
        else:
            a, b, mu = field.index
            diffeo[field.symbol] = sum(
                n.symbol("w", a, b, nu) * sympy.diff(xi[nu], n.x[mu]) for nu in range(4)
            )
            lorentz[field.symbol] = sum(
                eta(c, dd)
                * (
                    n.function("lam", a, c) * n.symbol("w", dd, b, mu)
                    + n.function("lam", b, c) * n.symbol("w", a, dd, mu)
                )
                for c, dd in pairs
            ) - sympy.diff(n.function("lam", a, b), n.x[mu])

    failures = []
    for name, components in (("diffeo", diffeo), ("lorentz", lorentz)):
        xi_E = lift_to_E(theory.generator(name), theory.tower, kernel=theory.kernel)
        Y = lift_to_PSub(xi_E, chart, theory.tower.restricted)
        expected = VectorField(chart, components, kernel=theory.kernel)
        if not same_vector(theory.kernel, Y, expected):
            failures.append(f"Y0 of {name} differs from the expected lift")
    return outcome(failures)


# Polyakov

_STRING = "polyakov"


def _string_stress(n: Notation, a: int, b: int) -> ScalarExpr:
    """eta_(mu nu) (x^mu_a x^nu_b - 1/2 g_ab g^cd x^mu_c x^nu_d)"""
    pairs = list(itertools.product(range(2), repeat=2))
    targets = [(mu, mu) for mu in range(3)]
    trace = sum(
        n.symbol("g", c, dd)
        * sum(n.const("eta", mu, nu) * n.jet("x", (mu,), c) * n.jet("x", (nu,), dd) for mu, nu in targets)
        for c, dd in pairs
    )
    kinetic = sum(
        n.const("eta", mu, nu) * n.jet("x", (mu,), a) * n.jet("x", (nu,), b)
        for mu, nu in targets
    )
    return kinetic - sympy.Rational(1, 2) * n.derived("gl", a, b) * trace


def _string_momentum(n: Notation, a: int, mu: int) -> ScalarExpr:
    """-T sqrt(-g) eta_(mu nu) g^ab x^nu_b"""
    return -n.symbol("T") * n.derived("sqrtg") * sum(
        n.const("eta", mu, mu) * n.symbol("g", a, b) * n.jet("x", (mu,), b)
        for b in range(2)
    )


@check("polyakov")
def polyakov_legendre_map(context: VerificationContext) -> Outcome:
    n = context.notation(_STRING)
    legendre_map = n.theory.legendre_map
    image = legendre_map.restricted.image
    constraints = dict(legendre_map.constraints)
    failures = []
    for a, mu in itertools.product(range(2), range(3)):
        momentum = n.momentum("x", (mu,), a)
        if not n.kernel.is_zero(image[momentum] - _string_momentum(n, a, mu)):
            failures.append(f"{momentum} = {image[momentum]}")
    for field in n.tower.restricted.fields:
        if field.family != "g":
            continue
        for c in range(2):
            momentum = n.tower.restricted.momentum(field.symbol, c)
            if momentum not in constraints or not n.kernel.is_zero(constraints[momentum]):
                failures.append(f"{momentum} is not constrained to zero")
    return outcome(failures)


@check("polyakov")
def polyakov_hamiltonian(context: VerificationContext) -> Outcome:
    n = context.notation(_STRING)
    theory = n.theory
    derived = hamiltonize(
        theory.tower, theory.cartan, theory.legendre_map, kernel=theory.kernel
    ).hamiltonian
    pairs = list(itertools.product(range(2), repeat=2))
    expected = -sum(
        n.const("eta", mu, mu)
        * n.derived("gl", a, b)
        * n.momentum("x", (mu,), a)
        * n.momentum("x", (mu,), b)
        for mu in range(3)
        for a, b in pairs
    ) / (2 * n.symbol("T") * n.derived("sqrtg"))
    return outcome([] if n.kernel.is_zero(derived - expected) else [f"H0 = {derived}"])


@check("polyakov")
def polyakov_stress_tensor(context: VerificationContext) -> Outcome:
    n = context.notation(_STRING)
    family = n.theory.families["g"]
    failures = []
    for index in family.components():
        a, b = index
        orbit = len(family.orbit(index))
        derivative = n.kernel.partial(n.theory.lagrangian, n.symbol("g", a, b))
        expected = (
            -orbit * n.symbol("T") / 2 * n.derived("sqrtg") * _string_stress(n, a, b)
        )
        if not n.kernel.is_zero(derivative - expected):
            failures.append(f"dL/dg[{a},{b}] differs from -T/2 sqrt(-g) T_{a}{b}")
    return outcome(failures)


@check("polyakov")
def polyakov_traceless(context: VerificationContext) -> Outcome:
    n = context.notation(_STRING)
    trace = sum(
        n.symbol("g", a, b) * _string_stress(n, a, b)
        for a, b in itertools.product(range(2), repeat=2)
    )
    return outcome([] if n.kernel.is_zero(trace) else ["g^ab T_ab does not vanish"])


@check("polyakov")
def polyakov_virasoro(context: VerificationContext) -> Outcome:
    n = context.notation(_STRING)
    theory = n.theory
    report = context.report(_STRING, Side.LAGRANGIAN)
    failures = []
    families = sorted(report.families(Stage.COMPATIBILITY))
    if families != ["g"]:
        failures.append(f"compatibility families {families}")
    ideal = report.ideal
    assert ideal is not None
    stress = [_string_stress(n, a, b) for a, b in n.theory.families["g"].components()]
    failures += [
        f"T_ab component {k} is not a consequence of the constraints"
        for k, value in enumerate(stress)
        if not ideal.contains(value)
    ]
    virasoro = ConstraintIdeal(
        theory.lagrangian_space.variables, kernel=theory.kernel, solver=theory.solver
    )
    for value in stress:
        virasoro.add(value)
    failures += [
        f"constraint from {c.source} is not a combination of T_ab"
        for c in report.compatibility
        if not virasoro.contains(c.raw)
    ]
    if report.tangency:
        failures.append(f"{len(report.tangency)} tangency constraints")
    return outcome(failures)


@check("polyakov")
def polyakov_hamiltonian_constraints(context: VerificationContext) -> Outcome:
    theory = context.theory(_STRING)
    report = context.report(_STRING, Side.HAMILTONIAN)
    ideal = context.ideal(_STRING, Side.LAGRANGIAN)
    assert ideal is not None
    failures = []
    if not report.compatibility:
        failures.append("no compatibility constraints")
    to_primary = theory.legendre_map.to_primary
    failures += [
        f"FL0* of the constraint from {c.source} does not vanish on the Lagrangian side"
        for c in report.compatibility
        if not ideal.contains(to_primary.apply(c.raw))
    ]
    if report.tangency:
        failures.append(f"{len(report.tangency)} tangency constraints")
    return outcome(failures)


def _string_symmetry(context: VerificationContext, generator: str) -> Outcome:
    theory = context.theory(_STRING)
    failures = []
    for space in (SpaceName.J1, SpaceName.P0):
        verdict = context.analysis(_STRING, generator, space).verdict
        if verdict is None or not verdict.exact:
            failures.append(f"not exact on {space.value}")
    projection = check_legendre_projection(
        theory, theory.generator(generator), ideal=context.ideal(_STRING, Side.LAGRANGIAN)
    )
    if not projection.holds:
        failures.append("FL0_* X differs from Y0")
    return outcome(failures)


for _generator in ("diffeo", "poincare", "weyl"):
    check("polyakov", f"polyakov_{_generator}_symmetry")(
        lambda context, generator=_generator: _string_symmetry(context, generator)
    )


@check("polyakov")
def polyakov_weyl_currents(context: VerificationContext) -> Outcome:
    failures = []
    for space in (SpaceName.J1, SpaceName.P0):
        current = context.analysis(_STRING, "weyl", space).current
        if current is None or not current.is_zero:
            failures.append(f"J on {space.value} is not zero")
    return outcome(failures)


def _string_diffeo_current(n: Notation, chart: BundleChart, side: Side) -> DiffForm:
    """-eps_ac ξ^c P^a_mu dx^mu - ξ^c E d^1σ_c with P, E the momentum and energy of ``side``"""
    T, sqrtg = n.symbol("T"), n.derived("sqrtg")
    xi = [n.function("xi", a) for a in range(2)]
    pairs = list(itertools.product(range(2), repeat=2))
    if side == Side.LAGRANGIAN:
        momentum = lambda a, mu: _string_momentum(n, a, mu)  # noqa: E731
        energy = -T / 2 * sqrtg * sum(
            n.const("eta", mu, mu) * n.symbol("g", a, b) * n.jet("x", (mu,), a) * n.jet("x", (mu,), b)
            for mu in range(3)
            for a, b in pairs
        )
    else:
        momentum = lambda a, mu: n.momentum("x", (mu,), a)  # noqa: E731
        energy = -sum(
            n.const("eta", mu, mu) * n.derived("gl", a, b) * n.momentum("x", (mu,), a) * n.momentum("x", (mu,), b)
            for mu in range(3)
            for a, b in pairs
        ) / (2 * T * sqrtg)
    parts = []
    for c in range(2):
        parts.append(volume_contraction(chart, c) * (-xi[c] * energy))
        for a, mu in itertools.product(range(2), range(3)):
            epsilon = n.const("eps", a, c)
            if epsilon != 0:
                parts.append(n.d(chart, "x", mu) * (-epsilon * xi[c] * momentum(a, mu)))
    return n.total(chart, 1, parts)


def _string_poincare_current(n: Notation, chart: BundleChart, side: Side) -> DiffForm:
    """-P^a_mu (om^mu_nu x^nu + t^mu) d^1σ_a"""
    variation = [
        sum(n.const("eta", mu, mu) * n.symbol("om", mu, nu) * n.symbol("x", nu) for nu in range(3))
        + n.symbol("t", mu)
        for mu in range(3)
    ]
    parts = []
    for a, mu in itertools.product(range(2), range(3)):
        if side == Side.LAGRANGIAN:
            momentum = _string_momentum(n, a, mu)
        else:
            momentum = n.momentum("x", (mu,), a)
        parts.append(volume_contraction(chart, a) * (-momentum * variation[mu]))
    return n.total(chart, 1, parts)


def _string_currents(
    context: VerificationContext,
    generator: str,
    build: Callable[[Notation, BundleChart, Side], DiffForm],
) -> Outcome:
    n = context.notation(_STRING)
    theory = n.theory
    lagrangian = context.analysis(_STRING, generator, SpaceName.J1)
    hamiltonian = context.analysis(_STRING, generator, SpaceName.P0)
    primary = theory.legendre_map.primary_chart
    failures = _current_outcome(
        n.kernel, lagrangian, build(n, theory.tower.jet, Side.LAGRANGIAN)
    )
    failures += _current_outcome(
        n.kernel, hamiltonian, build(n, primary, Side.HAMILTONIAN)
    )
    failures += _pullback_outcome(theory, lagrangian, hamiltonian)
    return outcome(failures)


@check("polyakov")
def polyakov_diffeo_currents(context: VerificationContext) -> Outcome:
    return _string_currents(context, "diffeo", _string_diffeo_current)


@check("polyakov")
def polyakov_poincare_currents(context: VerificationContext) -> Outcome:
    return _string_currents(context, "poincare", _string_poincare_current)
