"""Resolution of a parsed :class:`~multisym.dsl.TheorySpec` into a runtime theory"""

from __future__ import annotations

import itertools
from typing import Dict, List, Mapping, Optional, Tuple, Type

import sympy
from traitlets.config import Configurable

from .bundle import (
    FieldFamily,
    IndexSlot,
    IndexSymmetry,
    SymmetryKind,
    Tower,
    Variance,
    build_tower,
    levi_civita,
)
from .dsl import (
    Access,
    BaseDecl,
    BinOp,
    Call,
    ConstDecl,
    DerivedDecl,
    Diff,
    FunctionDecl,
    GeneratorDecl,
    Jet,
    Momentum,
    Neg,
    Number,
    Sum,
    TheorySpec,
    parse,
)
from .errors import DerivationError, DivisionByZero
from .geometry import LagrangianTheory
from .lifts import GeneratorSpec
from .symkernel import ZERO, DerivedFunction, Kernel, derived_function
from .utils import local_path

BUILTIN_THEORIES = ("kg", "einstein_cartan", "polyakov", "free")

Env = Mapping[str, int]


def _family(decl, sizes: Mapping[str, int]) -> FieldFamily:
    """Index structure of an indexed declaration"""
    labels = [slot.label for slot in decl.slots]
    slots = tuple(
        IndexSlot(
            label=slot.label,
            size=sizes[slot.label],
            variance=Variance(getattr(slot, "variance", "internal")),
        )
        for slot in decl.slots
    )
    symmetries = tuple(
        IndexSymmetry(
            kind=SymmetryKind(s.symmetry),
            first=labels.index(s.first),
            second=labels.index(s.second),
        )
        for s in getattr(decl, "symmetries", ())
    )
    return FieldFamily(name=decl.name, slots=slots, symmetries=symmetries)


class Resolver:
    """Evaluate theory expressions to sympy over the charts of the tower

    Products are evaluated left to right and stop at the first vanishing factor, which
    prunes sums over constant tables such as the Levi-Civita symbol.
    """

    def __init__(self, spec: TheorySpec):
        self.spec = spec
        self.sizes = spec.index_sizes
        self.declarations = spec.named()
        self.families: Dict[str, FieldFamily] = {
            name: _family(decl, self.sizes)
            for name, decl in self.declarations.items()
            if not isinstance(decl, (BaseDecl, ConstDecl))
        }
        base = spec.base
        self.tower: Tower = build_tower(
            base.name,
            base.dimension,
            [self.families[f.name] for f in spec.declarations("field")],
        )
        self.base_symbols = tuple(c.symbol for c in self.tower.base.base)
        self.tables: Dict[str, Dict[Tuple[int, ...], sympy.Expr]] = {}
        for decl in spec.declarations("const"):
            self.tables[decl.name] = self._table(decl)
        self.functions: Dict[str, Type[DerivedFunction]] = {}
        self.derived: Dict[str, Dict[Tuple[int, ...], sympy.Expr]] = {}
        self._build_derived()

    # tables and derived functions

    def _table(self, decl: ConstDecl) -> Dict[Tuple[int, ...], sympy.Expr]:
        sizes = [self.sizes[slot.label] for slot in decl.slots]
        if decl.table == "levicivita":
            return {
                index: sympy.Integer(levi_civita(index))
                for index in itertools.permutations(range(len(sizes)))
            }
        return {
            (i, i): self.eval(entry, {}) for i, entry in enumerate(decl.entries)
        }

    def _build_derived(self) -> None:
        decls: List[DerivedDecl] = self.spec.declarations("derived")
        applied: Dict[str, Dict[Tuple[int, ...], sympy.Expr]] = {}
        for decl in decls:
            targets = {rule.target.name for rule in decl.rules}
            parameters = tuple(
                c.symbol for c in self.tower.total.fields if c.family in targets
            )
            family = self.families[decl.name]
            applied[decl.name] = {}
            for index in family.components():
                name = family.component_name(index)
                cls = derived_function(name, name, parameters)
                self.functions[name] = cls
                applied[decl.name][index] = cls(*parameters)
        self.derived = applied
        for decl in decls:
            family = self.families[decl.name]
            labels = [slot.label for slot in decl.slots]
            for index in family.components():
                application = applied[decl.name][index]
                env = dict(zip(labels, index))
                cls = application.func
                if decl.expand is not None:
                    cls.expansion = self.eval(decl.expand, env)
                for rule in decl.rules:
                    cls.rules.update(self._derivative_rule(rule, env))

    def _derivative_rule(self, rule, env: Env) -> Dict[sympy.Symbol, sympy.Expr]:
        """Rule along every independent component, summed over its symmetry orbit"""
        family = self.families[rule.target.name]
        rules = {}
        for index in family.components():
            total = ZERO
            for sign, full in family.orbit(index):
                inner = self._bind(rule.target, full, env)
                if inner is None:
                    continue
                total += sign * self.eval(rule.expr, inner)
            if total != 0:
                rules[sympy.Symbol(family.component_name(index))] = total
        return rules

    @staticmethod
    def _bind(target: Access, index: Tuple[int, ...], env: Env) -> Optional[Dict[str, int]]:
        """Environment matching ``target`` indices against ``index``, None on conflict"""
        bound: Dict[str, int] = {}
        for ref, value in zip(target.indices, index):
            if isinstance(ref, int):
                if ref != value:
                    return None
            elif bound.setdefault(ref, value) != value:
                return None
        inner = dict(env)
        inner.update(bound)
        return inner

    # expressions

    def index(self, ref, env: Env) -> int:
        return ref if isinstance(ref, int) else env[ref]

    def component(self, access: Access, env: Env) -> Tuple[int, sympy.Symbol]:
        """Sign and canonical coordinate of a field or base access"""
        decl = self.declarations[access.name]
        index = tuple(self.index(ref, env) for ref in access.indices)
        if isinstance(decl, BaseDecl):
            return 1, self.base_symbols[index[0]]
        family = self.families[access.name]
        sign, canonical = family.canonical(index)
        return sign, sympy.Symbol(family.component_name(canonical))

    def access(self, access: Access, env: Env) -> sympy.Expr:
        decl = self.declarations[access.name]
        index = tuple(self.index(ref, env) for ref in access.indices)
        if isinstance(decl, BaseDecl):
            return self.base_symbols[index[0]]
        if isinstance(decl, ConstDecl):
            return self.tables[access.name].get(index, ZERO)
        family = self.families[access.name]
        sign, canonical = family.canonical(index)
        if sign == 0:
            return ZERO
        if isinstance(decl, FunctionDecl):
            function = sympy.Function(family.component_name(canonical))
            return sign * function(*self.base_symbols)
        if isinstance(decl, DerivedDecl):
            return sign * self.derived[access.name][canonical]
        return sign * sympy.Symbol(family.component_name(canonical))

    def eval(self, node, env: Env) -> sympy.Expr:
        if isinstance(node, Number):
            return sympy.Integer(node.value)
        if isinstance(node, Access):
            return self.access(node, env)
        if isinstance(node, (Jet, Momentum)):
            sign, field = self.component(node.target, env)
            if sign == 0:
                return ZERO
            mu = self.index(node.index, env)
            if isinstance(node, Jet):
                return sign * self.tower.jet.jet(field, mu)
            return sign * self.tower.restricted.momentum(field, mu)
        if isinstance(node, Call):
            argument = self.eval(node.argument, env)
            return sympy.exp(argument) if node.function == "exp" else sympy.sqrt(argument)
        if isinstance(node, Diff):
            sign, coordinate = self.component(node.coordinate, env)
            if sign == 0:
                return ZERO
            return sign * sympy.diff(self.eval(node.expr, env), coordinate)
        if isinstance(node, Sum):
            terms = []
            ranges = [range(self.sizes[label]) for label in node.labels]
            for values in itertools.product(*ranges):
                inner = dict(env)
                inner.update(zip(node.labels, values))
                term = self.eval(node.body, inner)
                if term != 0:
                    terms.append(term)
            return sympy.Add(*terms)
        if isinstance(node, Neg):
            return -self.eval(node.operand, env)
        return self._binop(node, env)

    def _binop(self, node: BinOp, env: Env) -> sympy.Expr:
        left = self.eval(node.left, env)
        if node.op == "*":
            if left == 0:
                return ZERO
            return left * self.eval(node.right, env)
        right = self.eval(node.right, env)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "/":
            if right == 0:
                raise DivisionByZero(f"Division by zero in '{node}'")
            return left / right
        return left**right

    # theory data

    def parameters(self) -> List[sympy.Symbol]:
        symbols = []
        for decl in self.spec.declarations("param"):
            family = self.families[decl.name]
            symbols += [sympy.Symbol(family.component_name(i)) for i in family.components()]
        return symbols

    def nonzero(self) -> List[sympy.Expr]:
        result: List[sympy.Expr] = []
        for decl in self.spec.declarations("param"):
            if decl.nonzero:
                family = self.families[decl.name]
                result += [
                    sympy.Symbol(family.component_name(i)) for i in family.components()
                ]
        for decl in self.spec.declarations("assume"):
            result += [self.eval(expr, {}) for expr in decl.nonzero]
        return result

    def identities(self) -> List[Tuple[sympy.Expr, sympy.Expr]]:
        return [
            (self.eval(decl.lhs, {}), self.eval(decl.rhs, {}))
            for decl in self.spec.declarations("identity")
        ]

    def notes(self) -> List[str]:
        return [d.note for d in self.spec.declarations("assume") if d.note is not None]

    def generator(self, decl: GeneratorDecl) -> GeneratorSpec:
        m = self.tower.base_dimension
        base = [ZERO] * m
        for component in decl.base:
            if isinstance(component.index, int):
                base[component.index] = self.eval(component.expr, {})
                continue
            for mu in range(m):
                base[mu] = self.eval(component.expr, {component.index: mu})
        fiber: Dict[sympy.Symbol, sympy.Expr] = {}
        for component in decl.fiber:
            family = self.families[component.target.name]
            for index in family.components():
                env = self._bind(component.target, index, {})
                if env is not None:
                    symbol = sympy.Symbol(family.component_name(index))
                    fiber[symbol] = self.eval(component.expr, env)
        parameters = set(self.parameters())
        used = set().union(*(sympy.sympify(e).free_symbols for e in base + list(fiber.values())))
        return GeneratorSpec(
            name=decl.name,
            base=tuple(base),
            fiber=fiber,
            tensorial=decl.tensorial,
            parameters=tuple(sorted(used & parameters, key=sympy.default_sort_key)),
        )


class Theory(LagrangianTheory):
    """Lagrangian theory with the generators and options of its source

    :attr spec: the parsed source
    :attr generators: symmetry generators by name, in declaration order
    :attr max_iter: iteration cap of the constraint algorithm requested by the source
    :attr families: index structure of every indexed declaration by name
    :attr tables: values of the constant tables, zero entries omitted
    """

    spec: TheorySpec
    generators: Dict[str, GeneratorSpec] = {}
    max_iter: Optional[int] = None
    families: Dict[str, FieldFamily] = {}
    tables: Dict[str, Dict[Tuple[int, ...], sympy.Expr]] = {}

    @classmethod
    def from_spec(
        cls, spec: TheorySpec, parent: Optional[Configurable] = None, **kernel_options
    ) -> "Theory":
        """Build the kernel, chart tower, Lagrangian and generators of ``spec``

        :raises DerivationError: If the source has a hamiltonian but no lagrangian.
        """
        resolver = Resolver(spec)
        tower = resolver.tower
        kernel = Kernel(
            symbols=set(tower.symbols) | set(resolver.parameters()),
            identities=resolver.identities(),
            functions=resolver.functions,
            nonzero=resolver.nonzero(),
            parent=parent,
            **kernel_options,
        )
        lagrangians = spec.declarations("lagrangian")
        hamiltonians = spec.declarations("hamiltonian")
        if hamiltonians and not lagrangians:
            raise DerivationError(
                f"Theory '{spec.name}' declares a hamiltonian without a lagrangian"
            )
        kernel.log.debug("Resolving the lagrangian of %s", spec.name)
        lagrangian = (
            kernel.normalize(resolver.eval(lagrangians[0].expr, {})) if lagrangians else ZERO
        )
        hamiltonian = None
        if hamiltonians:
            hamiltonian = kernel.normalize(resolver.eval(hamiltonians[0].expr, {}))
        assumptions = tuple(f"{e} != 0" for e in kernel.nonzero) + tuple(resolver.notes())
        options = {o.name: o.value for o in spec.declarations("option")}
        return cls(
            name=spec.name,
            tower=tower,
            lagrangian=lagrangian,
            kernel=kernel,
            hamiltonian=hamiltonian,
            assumptions=assumptions,
            spec=spec,
            generators={
                g.name: resolver.generator(g) for g in spec.declarations("generator")
            },
            max_iter=options.get("max_iter"),
            families=dict(resolver.families),
            tables=dict(resolver.tables),
        )

    def generator(self, name: str) -> GeneratorSpec:
        try:
            return self.generators[name]
        except KeyError:
            # Raises UnknownIdentifier naming the available generators
            self.spec.generator(name)
            raise


def parse_theory(
    text, parent: Optional[Configurable] = None, **kernel_options
) -> Theory:
    """Parse and resolve theory source text or bytes"""
    return Theory.from_spec(parse(text), parent=parent, **kernel_options)


def load_theory(path: str, parent: Optional[Configurable] = None, **kernel_options) -> Theory:
    with open(path, "rb") as f:
        return parse_theory(f.read(), parent=parent, **kernel_options)


def builtin_path(name: str) -> str:
    if name not in BUILTIN_THEORIES:
        raise ValueError(
            f"No bundled theory '{name}' (available: {', '.join(BUILTIN_THEORIES)})"
        )
    return local_path(f"theories/{name}.thy")


def builtin_source(name: str) -> bytes:
    with open(builtin_path(name), "rb") as f:
        return f.read()


def builtin_theory(
    name: str, parent: Optional[Configurable] = None, **kernel_options
) -> Theory:
    """One of the theories shipped with the package: see :data:`BUILTIN_THEORIES`"""
    return load_theory(builtin_path(name), parent=parent, **kernel_options)
