"""Theory description language: ``.thy`` sources to :class:`TheorySpec` and back

A source file optionally starts with the version header ``#thy 1`` and holds a single
``theory NAME { ... }`` block of declarations::

    #thy 1
    theory kg {
      base x[4];
      index mu, nu : 4;
      field phi;
      param m nonzero;
      const eta[mu, nu] = diag(-1, 1, 1, 1);
      lagrangian = -1/2*(sum(mu, nu){eta[mu, nu]*D[mu](phi)*D[nu](phi)} + m^2*phi^2);
    }

Sums are explicit, ``sum(labels){expr}``, over the ranges of the ``index`` declarations.
:func:`parse` also checks scoping and index arities, :func:`format_theory` prints the
canonical form.
"""

from __future__ import annotations

import re
from typing import Dict, Iterator, List, Literal, Optional, Sequence, Set, Tuple, Union

from pydantic import (
    BaseModel,
    Field,
    NonNegativeInt,
    PositiveInt,
    ValidationError,
    field_validator,
)
from typing_extensions import Annotated

from .errors import (
    DuplicateDeclaration,
    IndexArityMismatch,
    MissingBaseDecl,
    ParseError,
    SourceSpan,
    UnknownIdentifier,
)

VERSION = 1

MAX_NESTING = 100
"""Maximal nesting of expressions, parentheses and sums included"""

KEYWORDS = frozenset(
    {
        "antisym",
        "assume",
        "base",
        "const",
        "derived",
        "diag",
        "diff",
        "down",
        "exp",
        "expand",
        "fiber",
        "field",
        "function",
        "generator",
        "hamiltonian",
        "identity",
        "index",
        "lagrangian",
        "levicivita",
        "nonzero",
        "note",
        "option",
        "param",
        "sqrt",
        "sum",
        "sym",
        "tensorial",
        "theory",
        "up",
    }
)

RESERVED = frozenset({"D", "P", "X", "d", "p"})

OPTIONS = ("max_iter",)


# Expressions

IndexRef = Union[int, str]


class Number(BaseModel, frozen=True, extra="forbid"):
    kind: Literal["num"] = "num"
    value: NonNegativeInt


class Access(BaseModel, frozen=True, extra="forbid"):
    """Declared quantity, optionally indexed: ``phi``, ``e[a, mu]``, ``x[0]``"""

    kind: Literal["access"] = "access"
    name: str
    indices: Tuple[IndexRef, ...] = ()
    span: Optional[SourceSpan] = None


class Jet(BaseModel, frozen=True, extra="forbid"):
    """Multivelocity ``D[mu](field)``"""

    kind: Literal["jet"] = "jet"
    index: IndexRef
    target: Access


class Momentum(BaseModel, frozen=True, extra="forbid"):
    """Multimomentum ``P[mu](field)``"""

    kind: Literal["momentum"] = "momentum"
    index: IndexRef
    target: Access


class Call(BaseModel, frozen=True, extra="forbid"):
    kind: Literal["call"] = "call"
    function: Literal["exp", "sqrt"]
    argument: "Expr"


class Diff(BaseModel, frozen=True, extra="forbid"):
    """Partial derivative ``diff(expr, coordinate)``"""

    kind: Literal["diff"] = "diff"
    expr: "Expr"
    coordinate: Access


class Sum(BaseModel, frozen=True, extra="forbid"):
    kind: Literal["sum"] = "sum"
    labels: Tuple[str, ...]
    body: "Expr"

    # validators
    @field_validator("labels")
    def check_labels(cls, v: Tuple[str, ...]) -> Tuple[str, ...]:
        if not v:
            raise ValueError("A sum needs at least one index")
        return v


class Neg(BaseModel, frozen=True, extra="forbid"):
    kind: Literal["neg"] = "neg"
    operand: "Expr"


class BinOp(BaseModel, frozen=True, extra="forbid"):
    kind: Literal["binop"] = "binop"
    op: Literal["+", "-", "*", "/", "^"]
    left: "Expr"
    right: "Expr"


Expr = Annotated[
    Union[Number, Access, Jet, Momentum, Call, Diff, Sum, Neg, BinOp],
    Field(discriminator="kind"),
]

for _model in (Call, Diff, Sum, Neg, BinOp):
    _model.model_rebuild()


# Declarations


class Slot(BaseModel, frozen=True, extra="forbid"):
    label: str
    variance: Literal["internal", "up", "down"] = "internal"


class SymmetryDecl(BaseModel, frozen=True, extra="forbid"):
    symmetry: Literal["sym", "antisym"]
    first: str
    second: str


class BaseDecl(BaseModel, frozen=True, extra="forbid"):
    kind: Literal["base"] = "base"
    name: str
    dimension: NonNegativeInt
    span: Optional[SourceSpan] = None


class IndexDecl(BaseModel, frozen=True, extra="forbid"):
    kind: Literal["index"] = "index"
    labels: Tuple[str, ...]
    size: PositiveInt
    span: Optional[SourceSpan] = None


class FieldDecl(BaseModel, frozen=True, extra="forbid"):
    kind: Literal["field"] = "field"
    name: str
    slots: Tuple[Slot, ...] = ()
    symmetries: Tuple[SymmetryDecl, ...] = ()
    span: Optional[SourceSpan] = None


class ParamDecl(BaseModel, frozen=True, extra="forbid"):
    """Constant parameter, possibly indexed (e.g. generator parameters)"""

    kind: Literal["param"] = "param"
    name: str
    slots: Tuple[Slot, ...] = ()
    symmetries: Tuple[SymmetryDecl, ...] = ()
    nonzero: bool = False
    span: Optional[SourceSpan] = None


class ConstDecl(BaseModel, frozen=True, extra="forbid"):
    """Numeric tensor table: ``diag(...)`` or the Levi-Civita symbol"""

    kind: Literal["const"] = "const"
    name: str
    slots: Tuple[Slot, ...] = ()
    table: Literal["diag", "levicivita"]
    entries: Tuple[Expr, ...] = ()
    span: Optional[SourceSpan] = None


class FunctionDecl(BaseModel, frozen=True, extra="forbid"):
    """Opaque function of the base coordinates"""

    kind: Literal["function"] = "function"
    name: str
    slots: Tuple[Slot, ...] = ()
    symmetries: Tuple[SymmetryDecl, ...] = ()
    span: Optional[SourceSpan] = None


class DiffRule(BaseModel, frozen=True, extra="forbid"):
    target: Access
    expr: Expr


class DerivedDecl(BaseModel, frozen=True, extra="forbid"):
    """Opaque function of field components with explicit derivative rules"""

    kind: Literal["derived"] = "derived"
    name: str
    slots: Tuple[Slot, ...] = ()
    symmetries: Tuple[SymmetryDecl, ...] = ()
    expand: Optional[Expr] = None
    rules: Tuple[DiffRule, ...] = ()
    span: Optional[SourceSpan] = None


class IdentityDecl(BaseModel, frozen=True, extra="forbid"):
    kind: Literal["identity"] = "identity"
    lhs: Expr
    rhs: Expr
    span: Optional[SourceSpan] = None


class AssumeDecl(BaseModel, frozen=True, extra="forbid"):
    kind: Literal["assume"] = "assume"
    nonzero: Tuple[Expr, ...] = ()
    note: Optional[str] = None
    span: Optional[SourceSpan] = None


class LagrangianDecl(BaseModel, frozen=True, extra="forbid"):
    kind: Literal["lagrangian"] = "lagrangian"
    expr: Expr
    span: Optional[SourceSpan] = None


class HamiltonianDecl(BaseModel, frozen=True, extra="forbid"):
    kind: Literal["hamiltonian"] = "hamiltonian"
    expr: Expr
    span: Optional[SourceSpan] = None


class BaseComponent(BaseModel, frozen=True, extra="forbid"):
    index: IndexRef
    expr: Expr


class FiberComponent(BaseModel, frozen=True, extra="forbid"):
    target: Access
    expr: Expr


class GeneratorDecl(BaseModel, frozen=True, extra="forbid"):
    """Infinitesimal bundle automorphism; omitted components vanish"""

    kind: Literal["generator"] = "generator"
    name: str
    base: Tuple[BaseComponent, ...] = ()
    fiber: Tuple[FiberComponent, ...] = ()
    tensorial: bool = False
    span: Optional[SourceSpan] = None


class OptionDecl(BaseModel, frozen=True, extra="forbid"):
    kind: Literal["option"] = "option"
    name: Literal["max_iter"]
    value: PositiveInt
    span: Optional[SourceSpan] = None


Declaration = Annotated[
    Union[
        BaseDecl,
        IndexDecl,
        FieldDecl,
        ParamDecl,
        ConstDecl,
        FunctionDecl,
        DerivedDecl,
        IdentityDecl,
        AssumeDecl,
        LagrangianDecl,
        HamiltonianDecl,
        GeneratorDecl,
        OptionDecl,
    ],
    Field(discriminator="kind"),
]

_NAMED = (BaseDecl, FieldDecl, ParamDecl, ConstDecl, FunctionDecl, DerivedDecl)


class TheorySpec(BaseModel, frozen=True, extra="forbid"):
    """Parsed theory source, in declaration order"""

    version: Literal[1] = VERSION
    name: str
    items: Tuple[Declaration, ...] = ()
    span: Optional[SourceSpan] = None

    def declarations(self, kind: str) -> List[BaseModel]:
        return [item for item in self.items if item.kind == kind]

    @property
    def base(self) -> BaseDecl:
        bases = self.declarations("base")
        if not bases:
            raise MissingBaseDecl(f"Theory '{self.name}' has no base declaration", self.span)
        return bases[0]

    @property
    def index_sizes(self) -> Dict[str, int]:
        return {
            label: item.size for item in self.declarations("index") for label in item.labels
        }

    def named(self) -> Dict[str, BaseModel]:
        return {item.name: item for item in self.items if isinstance(item, _NAMED)}

    def generator(self, name: str) -> GeneratorDecl:
        for item in self.declarations("generator"):
            if item.name == name:
                return item
        available = ", ".join(g.name for g in self.declarations("generator")) or "none"
        raise UnknownIdentifier(f"No generator '{name}' (available: {available})")

    def structure(self) -> dict:
        """Dump without source spans, for structural comparison"""
        return _strip_spans(self.model_dump(mode="json"))


def _strip_spans(value):
    if isinstance(value, dict):
        return {k: _strip_spans(v) for k, v in value.items() if k != "span"}
    if isinstance(value, list):
        return [_strip_spans(v) for v in value]
    return value


def structurally_equal(a: TheorySpec, b: TheorySpec) -> bool:
    return a.structure() == b.structure()


# Tokenizer

_TOKEN_REGEXP = re.compile(
    rb"""
    (?P<space>[ \t\r\n]+)
    |(?P<comment>\#[^\n]*)
    |(?P<ident>[A-Za-z_][A-Za-z0-9_]*)
    |(?P<int>[0-9]+)
    |(?P<string>"(?:[^"\\\n]|\\.)*")
    |(?P<punct>[{}\[\]();,:=+\-*/^])
    """,
    re.VERBOSE,
)

_HEADER_REGEXP = re.compile(rb"#thy(?![A-Za-z0-9_])[ \t]*([^\n]*)")


class Token:
    __slots__ = ("kind", "text", "start", "end")

    def __init__(self, kind: str, text: str, start: int, end: int):
        self.kind = kind
        self.text = text
        self.start = start
        self.end = end

    def __repr__(self) -> str:
        return f"Token({self.kind}, {self.text!r}, {self.start})"


class _Source:
    """Byte offsets to 1-based line and column"""

    def __init__(self, data: bytes):
        self.data = data
        self._newlines = [m.start() for m in re.finditer(rb"\n", data)]

    def span(self, start: int, end: int) -> SourceSpan:
        start = min(max(start, 0), len(self.data))
        end = min(max(end, start), len(self.data))
        line = 1
        line_start = 0
        for offset in self._newlines:
            if offset >= start:
                break
            line += 1
            line_start = offset + 1
        return SourceSpan(start=start, end=end, line=line, column=start - line_start + 1)


def tokenize(data: bytes, source: Optional[_Source] = None) -> List[Token]:
    """Split ``data`` into tokens, dropping blanks and comments

    :raises ParseError: On an unexpected character or an unterminated string.
    """
    source = source or _Source(data)
    tokens = []
    position = 0
    while position < len(data):
        match = _TOKEN_REGEXP.match(data, position)
        if match is None:
            if data[position : position + 1] == b'"':
                raise ParseError("Unterminated string", source.span(position, len(data)))
            raise ParseError(
                f"Unexpected character {data[position:position + 1]!r}",
                source.span(position, position + 1),
            )
        kind = match.lastgroup
        if kind not in ("space", "comment"):
            tokens.append(
                Token(kind, match.group().decode("utf-8"), match.start(), match.end())
            )
        position = match.end()
    tokens.append(Token("eof", "", len(data), len(data)))
    return tokens


def _unquote(text: str) -> str:
    return re.sub(r"\\(.)", r"\1", text[1:-1])


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


# Parser


class Parser:
    """Recursive descent parser over the token list of one source"""

    def __init__(self, data: bytes):
        self.source = _Source(data)
        self.tokens = tokenize(data, self.source)
        self.position = 0
        self.depth = 0

    # token helpers

    @property
    def current(self) -> Token:
        return self.tokens[self.position]

    def span(self, start: int, end: Optional[int] = None) -> SourceSpan:
        if end is None:
            end = self.tokens[max(self.position - 1, 0)].end
        return self.source.span(start, end)

    def error(self, message: str, expected: Sequence[str] = ()) -> ParseError:
        token = self.current
        return ParseError(message, self.source.span(token.start, token.end), expected)

    def at(self, text: str) -> bool:
        token = self.current
        return token.kind in ("punct", "ident") and token.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.position += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        token = self.current
        if not self.at(text):
            found = token.text or "end of input"
            raise self.error(f"Unexpected '{found}'", expected=[text])
        self.position += 1
        return token

    def expect_kind(self, kind: str, what: str) -> Token:
        token = self.current
        if token.kind != kind:
            found = token.text or "end of input"
            raise self.error(f"Unexpected '{found}'", expected=[what])
        self.position += 1
        return token

    def name(self, label: bool = False) -> Token:
        token = self.expect_kind("ident", "identifier")
        # index labels never appear where d(...) or D[..](..) are parsed
        if token.text in KEYWORDS or (token.text in RESERVED and not label):
            self.position -= 1
            raise self.error(f"'{token.text}' is reserved and cannot be declared")
        return token

    def integer(self) -> int:
        token = self.expect_kind("int", "integer")
        try:
            return int(token.text)
        except ValueError:
            raise ParseError("Integer too large", self.source.span(token.start, token.end))

    def enter(self) -> None:
        self.depth += 1
        if self.depth > MAX_NESTING:
            raise self.error(f"Expression nested deeper than {MAX_NESTING} levels")

    def leave(self) -> None:
        self.depth -= 1

    def build(self, model, **fields):
        try:
            return model(**fields)
        except ValidationError as error:
            message = "; ".join(e["msg"] for e in error.errors())
            span = fields.get("span") or self.span(self.current.start, self.current.end)
            raise ParseError(f"Invalid {model.__name__}: {message}", span)

    # theory

    def theory(self) -> TheorySpec:
        start = self.current.start
        self.expect("theory")
        name = self.name().text
        name_span = self.span(start)
        self.expect("{")
        items = []
        while not self.at("}"):
            if self.current.kind == "eof":
                raise self.error("Unexpected end of input", expected=["}"])
            items.append(self.declaration())
        self.expect("}")
        if self.current.kind != "eof":
            raise self.error(f"Unexpected '{self.current.text}' after the theory block")
        return self.build(TheorySpec, name=name, items=tuple(items), span=name_span)

    _DECLARATIONS = (
        "base",
        "index",
        "field",
        "param",
        "const",
        "function",
        "derived",
        "identity",
        "assume",
        "lagrangian",
        "hamiltonian",
        "generator",
        "option",
    )

    def declaration(self):
        token = self.current
        if token.kind != "ident" or token.text not in self._DECLARATIONS:
            raise self.error(
                f"Unexpected '{token.text}'", expected=self._DECLARATIONS
            )
        return getattr(self, f"decl_{token.text}")()

    def decl_base(self) -> BaseDecl:
        start = self.expect("base").start
        name = self.name().text
        self.expect("[")
        dimension = self.integer()
        self.expect("]")
        self.expect(";")
        return self.build(BaseDecl, name=name, dimension=dimension, span=self.span(start))

    def decl_index(self) -> IndexDecl:
        start = self.expect("index").start
        labels = [self.name(label=True).text]
        while self.accept(","):
            labels.append(self.name(label=True).text)
        self.expect(":")
        size = self.integer()
        self.expect(";")
        return self.build(IndexDecl, labels=tuple(labels), size=size, span=self.span(start))

    def slots(self, variance: bool = True) -> Tuple[Slot, ...]:
        if not self.accept("["):
            return ()
        slots = []
        while True:
            label = self.expect_kind("ident", "index").text
            kind = "internal"
            if variance and self.accept(":"):
                if self.accept("up"):
                    kind = "up"
                else:
                    self.expect("down")
                    kind = "down"
            slots.append(Slot(label=label, variance=kind))
            if not self.accept(","):
                break
        self.expect("]")
        return tuple(slots)

    def symmetries(self) -> Tuple[SymmetryDecl, ...]:
        result = []
        while self.at("sym") or self.at("antisym"):
            kind = self.current.text
            self.position += 1
            self.expect("(")
            first = self.expect_kind("ident", "index").text
            self.expect(",")
            second = self.expect_kind("ident", "index").text
            self.expect(")")
            result.append(SymmetryDecl(symmetry=kind, first=first, second=second))
        return tuple(result)

    def decl_field(self) -> FieldDecl:
        start = self.expect("field").start
        name = self.name().text
        slots = self.slots()
        symmetries = self.symmetries()
        self.expect(";")
        return self.build(
            FieldDecl, name=name, slots=slots, symmetries=symmetries, span=self.span(start)
        )

    def decl_param(self) -> ParamDecl:
        start = self.expect("param").start
        name = self.name().text
        slots = self.slots(variance=False)
        symmetries = self.symmetries()
        nonzero = self.accept("nonzero")
        self.expect(";")
        return self.build(
            ParamDecl,
            name=name,
            slots=slots,
            symmetries=symmetries,
            nonzero=nonzero,
            span=self.span(start),
        )

    def decl_const(self) -> ConstDecl:
        start = self.expect("const").start
        name = self.name().text
        slots = self.slots(variance=False)
        self.expect("=")
        entries: List = []
        if self.accept("levicivita"):
            table = "levicivita"
        else:
            self.expect("diag")
            table = "diag"
            self.expect("(")
            entries.append(self.expression())
            while self.accept(","):
                entries.append(self.expression())
            self.expect(")")
        self.expect(";")
        return self.build(
            ConstDecl,
            name=name,
            slots=slots,
            table=table,
            entries=tuple(entries),
            span=self.span(start),
        )

    def decl_function(self) -> FunctionDecl:
        start = self.expect("function").start
        name = self.name().text
        slots = self.slots(variance=False)
        symmetries = self.symmetries()
        self.expect(";")
        return self.build(
            FunctionDecl,
            name=name,
            slots=slots,
            symmetries=symmetries,
            span=self.span(start),
        )

    def decl_derived(self) -> DerivedDecl:
        start = self.expect("derived").start
        name = self.name().text
        slots = self.slots(variance=False)
        symmetries = self.symmetries()
        self.expect("{")
        expand = None
        rules = []
        while not self.accept("}"):
            if self.accept("expand"):
                if expand is not None:
                    raise self.error(f"Second expansion of '{name}'")
                self.expect("=")
                expand = self.expression()
            elif self.accept("diff"):
                target = self.access()
                self.expect("=")
                rules.append(DiffRule(target=target, expr=self.expression()))
            else:
                raise self.error(
                    f"Unexpected '{self.current.text or 'end of input'}'",
                    expected=["expand", "diff", "}"],
                )
            self.expect(";")
        return self.build(
            DerivedDecl,
            name=name,
            slots=slots,
            symmetries=symmetries,
            expand=expand,
            rules=tuple(rules),
            span=self.span(start),
        )

    def decl_identity(self) -> IdentityDecl:
        start = self.expect("identity").start
        lhs = self.expression()
        self.expect("=")
        rhs = self.expression()
        self.expect(";")
        return self.build(IdentityDecl, lhs=lhs, rhs=rhs, span=self.span(start))

    def decl_assume(self) -> AssumeDecl:
        start = self.expect("assume").start
        if self.accept("note"):
            note = _unquote(self.expect_kind("string", "string").text)
            self.expect(";")
            return self.build(AssumeDecl, note=note, span=self.span(start))
        self.expect("nonzero")
        exprs = [self.expression()]
        while self.accept(","):
            exprs.append(self.expression())
        self.expect(";")
        return self.build(AssumeDecl, nonzero=tuple(exprs), span=self.span(start))

    def decl_lagrangian(self) -> LagrangianDecl:
        start = self.expect("lagrangian").start
        self.expect("=")
        expr = self.expression()
        self.expect(";")
        return self.build(LagrangianDecl, expr=expr, span=self.span(start))

    def decl_hamiltonian(self) -> HamiltonianDecl:
        start = self.expect("hamiltonian").start
        self.expect("=")
        expr = self.expression()
        self.expect(";")
        return self.build(HamiltonianDecl, expr=expr, span=self.span(start))

    def decl_generator(self) -> GeneratorDecl:
        start = self.expect("generator").start
        name = self.name().text
        self.expect("{")
        base = []
        fiber = []
        tensorial = False
        while not self.accept("}"):
            if self.accept("base"):
                self.expect("[")
                index = self.index_ref()
                self.expect("]")
                self.expect("=")
                base.append(BaseComponent(index=index, expr=self.expression()))
            elif self.accept("fiber"):
                target = self.access()
                self.expect("=")
                fiber.append(FiberComponent(target=target, expr=self.expression()))
            elif self.accept("tensorial"):
                tensorial = True
            else:
                raise self.error(
                    f"Unexpected '{self.current.text or 'end of input'}'",
                    expected=["base", "fiber", "tensorial", "}"],
                )
            self.expect(";")
        return self.build(
            GeneratorDecl,
            name=name,
            base=tuple(base),
            fiber=tuple(fiber),
            tensorial=tensorial,
            span=self.span(start),
        )

    def decl_option(self) -> OptionDecl:
        start = self.expect("option").start
        token = self.expect_kind("ident", "option name")
        if token.text not in OPTIONS:
            self.position -= 1
            raise self.error(f"Unknown option '{token.text}'", expected=OPTIONS)
        self.expect("=")
        value = self.integer()
        self.expect(";")
        return self.build(OptionDecl, name=token.text, value=value, span=self.span(start))

    # expressions

    def index_ref(self) -> IndexRef:
        if self.current.kind == "int":
            return self.integer()
        return self.expect_kind("ident", "index").text

    def access(self) -> Access:
        token = self.expect_kind("ident", "identifier")
        if token.text in KEYWORDS or token.text in RESERVED:
            self.position -= 1
            raise self.error(f"Unexpected '{token.text}'", expected=["identifier"])
        indices: List[IndexRef] = []
        if self.accept("["):
            indices.append(self.index_ref())
            while self.accept(","):
                indices.append(self.index_ref())
            self.expect("]")
        return Access(name=token.text, indices=tuple(indices), span=self.span(token.start))

    def expression(self):
        self.enter()
        left = self.term()
        while self.at("+") or self.at("-"):
            op = self.current.text
            self.position += 1
            left = BinOp(op=op, left=left, right=self.term())
        self.leave()
        return left

    def term(self):
        left = self.unary()
        while self.at("*") or self.at("/"):
            op = self.current.text
            self.position += 1
            left = BinOp(op=op, left=left, right=self.unary())
        return left

    def unary(self):
        if self.accept("-"):
            self.enter()
            operand = self.unary()
            self.leave()
            return Neg(operand=operand)
        return self.power()

    def power(self):
        base = self.atom()
        if self.accept("^"):
            self.enter()
            exponent = self.unary()
            self.leave()
            return BinOp(op="^", left=base, right=exponent)
        return base

    def atom(self):
        token = self.current
        if token.kind == "int":
            return Number(value=self.integer())
        if self.accept("("):
            expr = self.expression()
            self.expect(")")
            return expr
        if token.kind != "ident":
            raise self.error(
                f"Unexpected '{token.text or 'end of input'}'", expected=["expression"]
            )
        if token.text in ("D", "P"):
            self.position += 1
            self.expect("[")
            index = self.index_ref()
            self.expect("]")
            self.expect("(")
            target = self.access()
            self.expect(")")
            model = Jet if token.text == "D" else Momentum
            return model(index=index, target=target)
        if token.text in ("exp", "sqrt"):
            self.position += 1
            self.expect("(")
            argument = self.expression()
            self.expect(")")
            return Call(function=token.text, argument=argument)
        if token.text == "diff":
            self.position += 1
            self.expect("(")
            expr = self.expression()
            self.expect(",")
            coordinate = self.access()
            self.expect(")")
            return Diff(expr=expr, coordinate=coordinate)
        if token.text == "sum":
            self.position += 1
            self.expect("(")
            labels = [self.expect_kind("ident", "index").text]
            while self.accept(","):
                labels.append(self.expect_kind("ident", "index").text)
            self.expect(")")
            self.expect("{")
            body = self.expression()
            self.expect("}")
            return Sum(labels=tuple(labels), body=body)
        return self.access()


# Scope checks


class _Checker:
    """Resolve identifiers, index labels and arities of a parsed theory"""

    def __init__(self, spec: TheorySpec):
        self.spec = spec
        self.names: Dict[str, BaseModel] = {}
        self.labels: Dict[str, int] = {}
        self.dimension = 0

    def run(self) -> None:
        spec = self.spec
        base = spec.base
        self.dimension = base.dimension
        for extra in spec.declarations("base")[1:]:
            raise DuplicateDeclaration("Second base declaration", extra.span)
        for item in spec.items:
            if isinstance(item, IndexDecl):
                for label in item.labels:
                    self.declare(label, item)
                    self.labels[label] = item.size
            elif isinstance(item, _NAMED):
                self.declare(item.name, item)
        for kind in ("lagrangian", "hamiltonian"):
            extra = spec.declarations(kind)[1:]
            if extra:
                raise DuplicateDeclaration(f"Second {kind} declaration", extra[0].span)
        options = [o.name for o in spec.declarations("option")]
        for item in spec.declarations("option"):
            if options.count(item.name) > 1:
                raise DuplicateDeclaration(f"Option '{item.name}' set twice", item.span)
        generators = [g.name for g in spec.declarations("generator")]
        for item in spec.declarations("generator"):
            if generators.count(item.name) > 1:
                raise DuplicateDeclaration(f"Generator '{item.name}' declared twice", item.span)
        for item in spec.items:
            try:
                getattr(self, f"check_{item.kind}")(item)
            except ParseError as error:
                if error.span is not None:
                    raise
                raise type(error)(error.message, item.span, error.expected) from None
        self.check_cycles()

    def declare(self, name: str, item: BaseModel) -> None:
        if name in self.names or name in self.labels:
            raise DuplicateDeclaration(f"'{name}' is declared twice", item.span)
        self.names[name] = item

    # declarations

    def slot_sizes(self, item) -> List[int]:
        if isinstance(item, BaseDecl):
            return [self.dimension]
        return [self.label_size(s.label, item.span) for s in item.slots]

    def label_size(self, label: str, span: Optional[SourceSpan]) -> int:
        try:
            return self.labels[label]
        except KeyError:
            raise UnknownIdentifier(f"Unknown index '{label}'", span)

    def check_slots(self, item) -> None:
        labels = [slot.label for slot in item.slots]
        for slot in item.slots:
            size = self.label_size(slot.label, item.span)
            if slot.variance != "internal" and size != self.dimension:
                raise IndexArityMismatch(
                    f"Spacetime index '{slot.label}' of '{item.name}' ranges over {size}, "
                    f"the base dimension is {self.dimension}",
                    item.span,
                )
        if len(set(labels)) != len(labels):
            raise DuplicateDeclaration(f"Repeated index in '{item.name}'", item.span)
        for symmetry in getattr(item, "symmetries", ()):
            for label in (symmetry.first, symmetry.second):
                if label not in labels:
                    raise UnknownIdentifier(
                        f"'{label}' is not an index of '{item.name}'", item.span
                    )
            first, second = labels.index(symmetry.first), labels.index(symmetry.second)
            if first >= second:
                raise ParseError(
                    f"Symmetric indices of '{item.name}' must be given in order", item.span
                )
            if self.labels[symmetry.first] != self.labels[symmetry.second]:
                raise IndexArityMismatch(
                    f"Symmetric indices of '{item.name}' have different ranges", item.span
                )

    def check_base(self, item: BaseDecl) -> None:
        pass

    def check_index(self, item: IndexDecl) -> None:
        pass

    def check_field(self, item: FieldDecl) -> None:
        self.check_slots(item)

    def check_param(self, item: ParamDecl) -> None:
        self.check_slots(item)

    def check_function(self, item: FunctionDecl) -> None:
        self.check_slots(item)

    def check_const(self, item: ConstDecl) -> None:
        sizes = [self.label_size(slot.label, item.span) for slot in item.slots]
        if item.table == "diag":
            if len(sizes) != 2 or sizes[0] != sizes[1] or len(item.entries) != sizes[0]:
                raise IndexArityMismatch(
                    f"diag table '{item.name}' needs two indices of range {len(item.entries)}",
                    item.span,
                )
            for entry in item.entries:
                self.expr(entry, {}, constant=True)
        elif any(size != len(sizes) for size in sizes):
            raise IndexArityMismatch(
                f"Levi-Civita table '{item.name}' needs {len(sizes)} indices of range "
                f"{len(sizes)}",
                item.span,
            )

    def check_derived(self, item: DerivedDecl) -> None:
        self.check_slots(item)
        scope = {slot.label: self.labels[slot.label] for slot in item.slots}
        if item.expand is not None:
            self.expr(item.expand, scope)
        targets = set()
        for rule in item.rules:
            declared = self.names.get(rule.target.name)
            if not isinstance(declared, FieldDecl):
                raise UnknownIdentifier(
                    f"'{rule.target.name}' is not a field", rule.target.span or item.span
                )
            if rule.target.name in targets:
                raise DuplicateDeclaration(
                    f"Second rule of '{item.name}' along '{rule.target.name}'",
                    rule.target.span,
                )
            targets.add(rule.target.name)
            inner = dict(scope)
            inner.update(self.bind_target(rule.target, declared))
            self.expr(rule.expr, inner)

    def bind_target(self, target: Access, declared) -> Dict[str, int]:
        """Labels of a statement target such as ``fiber g[a, b]`` become bound"""
        sizes = [self.labels[slot.label] for slot in declared.slots]
        self.check_arity(target, declared, sizes)
        scope = {}
        for ref, size in zip(target.indices, sizes):
            if isinstance(ref, str):
                if self.labels.get(ref) != size:
                    raise IndexArityMismatch(
                        f"Index '{ref}' does not range over {size}", target.span
                    )
                scope[ref] = size
            elif not 0 <= ref < size:
                raise IndexArityMismatch(f"Index {ref} out of range {size}", target.span)
        return scope

    def check_identity(self, item: IdentityDecl) -> None:
        self.expr(item.lhs, {})
        self.expr(item.rhs, {})

    def check_assume(self, item: AssumeDecl) -> None:
        for expr in item.nonzero:
            self.expr(expr, {})

    def check_lagrangian(self, item: LagrangianDecl) -> None:
        self.expr(item.expr, {})

    def check_hamiltonian(self, item: HamiltonianDecl) -> None:
        self.expr(item.expr, {}, momenta=True)

    def check_generator(self, item: GeneratorDecl) -> None:
        seen: Set = set()
        for component in item.base:
            scope = self.bind_base_index(component.index, item.span)
            key = ("base", component.index)
            if key in seen:
                raise DuplicateDeclaration(
                    f"Base component {component.index} of '{item.name}' given twice",
                    item.span,
                )
            seen.add(key)
            self.expr(component.expr, scope)
        for fiber in item.fiber:
            declared = self.names.get(fiber.target.name)
            if not isinstance(declared, FieldDecl):
                raise UnknownIdentifier(
                    f"'{fiber.target.name}' is not a field", fiber.target.span or item.span
                )
            key = ("fiber", fiber.target.name, fiber.target.indices)
            if key in seen:
                raise DuplicateDeclaration(
                    f"Fiber component {fiber.target.name} of '{item.name}' given twice",
                    fiber.target.span,
                )
            seen.add(key)
            self.expr(fiber.expr, self.bind_target(fiber.target, declared))

    def bind_base_index(self, ref: IndexRef, span: Optional[SourceSpan]) -> Dict[str, int]:
        if isinstance(ref, int):
            if not 0 <= ref < self.dimension:
                raise IndexArityMismatch(f"Index {ref} out of range {self.dimension}", span)
            return {}
        if self.label_size(ref, span) != self.dimension:
            raise IndexArityMismatch(
                f"Index '{ref}' does not range over the base dimension", span
            )
        return {ref: self.dimension}

    def check_option(self, item: OptionDecl) -> None:
        pass

    # expressions

    def check_arity(self, access: Access, declared, sizes: Sequence[int]) -> None:
        if len(access.indices) != len(sizes):
            where = ""
            if declared.span is not None:
                where = f" (declared at line {declared.span.line})"
            raise IndexArityMismatch(
                f"'{access.name}' takes {len(sizes)} indices, got {len(access.indices)}{where}",
                access.span,
            )

    def check_access(self, access: Access, scope: Dict[str, int]) -> BaseModel:
        declared = self.names.get(access.name)
        if declared is None:
            raise UnknownIdentifier(f"Unknown identifier '{access.name}'", access.span)
        sizes = self.slot_sizes(declared)
        self.check_arity(access, declared, sizes)
        for ref, size in zip(access.indices, sizes):
            if isinstance(ref, int):
                if not 0 <= ref < size:
                    raise IndexArityMismatch(
                        f"Index {ref} of '{access.name}' out of range {size}", access.span
                    )
            elif ref not in scope:
                raise UnknownIdentifier(f"Index '{ref}' is not bound here", access.span)
            elif scope[ref] != size:
                raise IndexArityMismatch(
                    f"Index '{ref}' ranges over {scope[ref]}, '{access.name}' expects {size}",
                    access.span,
                )
        return declared

    def check_derivative_index(self, ref: IndexRef, scope: Dict[str, int], span) -> None:
        if isinstance(ref, int):
            if not 0 <= ref < self.dimension:
                raise IndexArityMismatch(f"Index {ref} out of range {self.dimension}", span)
        elif ref not in scope:
            raise UnknownIdentifier(f"Index '{ref}' is not bound here", span)
        elif scope[ref] != self.dimension:
            raise IndexArityMismatch(
                f"Derivative index '{ref}' does not range over the base dimension", span
            )

    def expr(
        self,
        node,
        scope: Dict[str, int],
        momenta: bool = False,
        constant: bool = False,
    ) -> None:
        stack = [(node, scope)]
        while stack:
            node, scope = stack.pop()
            if isinstance(node, Number):
                continue
            if constant and not isinstance(node, (Neg, BinOp)):
                raise ParseError("Table entries must be numbers")
            if isinstance(node, Access):
                self.check_access(node, scope)
            elif isinstance(node, (Jet, Momentum)):
                if isinstance(node, Momentum) and not momenta:
                    raise ParseError(
                        "Multimomenta only appear in a hamiltonian", node.target.span
                    )
                declared = self.check_access(node.target, scope)
                if not isinstance(declared, FieldDecl):
                    raise ParseError(
                        f"'{node.target.name}' is not a field", node.target.span
                    )
                self.check_derivative_index(node.index, scope, node.target.span)
            elif isinstance(node, Call):
                stack.append((node.argument, scope))
            elif isinstance(node, Diff):
                declared = self.check_access(node.coordinate, scope)
                if not isinstance(declared, (BaseDecl, FieldDecl)):
                    raise ParseError(
                        f"Cannot differentiate along '{node.coordinate.name}'",
                        node.coordinate.span,
                    )
                stack.append((node.expr, scope))
            elif isinstance(node, Sum):
                inner = dict(scope)
                for label in node.labels:
                    inner[label] = self.label_size(label, None)
                stack.append((node.body, inner))
            elif isinstance(node, Neg):
                stack.append((node.operand, scope))
            elif isinstance(node, BinOp):
                stack.append((node.left, scope))
                stack.append((node.right, scope))

    def check_cycles(self) -> None:
        derived = {item.name: item for item in self.spec.declarations("derived")}
        graph = {
            name: {a.name for a in iter_accesses(item.expand) if a.name in derived}
            for name, item in derived.items()
            if item.expand is not None
        }
        state: Dict[str, int] = {}

        def visit(name: str) -> None:
            state[name] = 1
            for child in sorted(graph.get(name, ())):
                if state.get(child) == 1:
                    raise ParseError(
                        f"Expansion of '{name}' refers back to '{child}'",
                        derived[name].span,
                    )
                if child not in state:
                    visit(child)
            state[name] = 2

        for name in sorted(graph):
            if name not in state:
                visit(name)


def iter_accesses(node) -> Iterator[Access]:
    """Every :class:`Access` below ``node``, statement targets excluded"""
    stack = [node] if node is not None else []
    while stack:
        node = stack.pop()
        if isinstance(node, Access):
            yield node
        elif isinstance(node, (Jet, Momentum)):
            yield node.target
        elif isinstance(node, Call):
            stack.append(node.argument)
        elif isinstance(node, Diff):
            stack.append(node.expr)
            yield node.coordinate
        elif isinstance(node, Sum):
            stack.append(node.body)
        elif isinstance(node, Neg):
            stack.append(node.operand)
        elif isinstance(node, BinOp):
            stack.extend((node.left, node.right))


def _read_header(data: bytes, source: _Source) -> bytes:
    """Check the optional version header, blanking it out of ``data``"""
    match = _HEADER_REGEXP.match(data)
    if match is None:
        return data
    version = match.group(1).strip()
    if version != str(VERSION).encode():
        raise ParseError(
            f"Unsupported theory language version {version.decode('utf-8', 'replace')!r}",
            source.span(match.start(1), match.end(1)),
            expected=[str(VERSION)],
        )
    return data


def parse(text: Union[bytes, str]) -> TheorySpec:
    """Parse and check a theory source

    :raises ParseError: With the span of the first problem found.
    """
    data = text.encode("utf-8") if isinstance(text, str) else bytes(text)
    source = _Source(data)
    try:
        data.decode("utf-8")
    except UnicodeDecodeError as error:
        raise ParseError("Input is not valid UTF-8", source.span(error.start, error.end))
    _read_header(data, source)
    parser = Parser(data)
    spec = parser.theory()
    _Checker(spec).run()
    return spec


# Printer

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}
_ATOM = 5


def _precedence(node) -> int:
    if isinstance(node, BinOp):
        return _PRECEDENCE[node.op]
    if isinstance(node, Neg):
        return _PRECEDENCE["neg"]
    return _ATOM


def _wrap(node, minimum: int) -> str:
    text = format_expr(node)
    if _precedence(node) < minimum:
        return f"({text})"
    return text


def format_access(node: Access) -> str:
    if not node.indices:
        return node.name
    return f"{node.name}[{', '.join(str(i) for i in node.indices)}]"


def format_expr(node) -> str:
    """Canonical text of an expression, parenthesized where the grammar requires it"""
    if isinstance(node, Number):
        return str(node.value)
    if isinstance(node, Access):
        return format_access(node)
    if isinstance(node, Jet):
        return f"D[{node.index}]({format_access(node.target)})"
    if isinstance(node, Momentum):
        return f"P[{node.index}]({format_access(node.target)})"
    if isinstance(node, Call):
        return f"{node.function}({format_expr(node.argument)})"
    if isinstance(node, Diff):
        return f"diff({format_expr(node.expr)}, {format_access(node.coordinate)})"
    if isinstance(node, Sum):
        return f"sum({', '.join(node.labels)}){{{format_expr(node.body)}}}"
    if isinstance(node, Neg):
        return f"-{_wrap(node.operand, _PRECEDENCE['neg'])}"
    precedence = _PRECEDENCE[node.op]
    if node.op == "^":
        return f"{_wrap(node.left, _ATOM)}^{_wrap(node.right, _PRECEDENCE['neg'])}"
    left = _wrap(node.left, precedence)
    right = _wrap(node.right, precedence + 1)
    if node.op in "+-":
        return f"{left} {node.op} {right}"
    return f"{left}{node.op}{right}"


def _format_slots(slots: Tuple[Slot, ...]) -> str:
    if not slots:
        return ""
    parts = [
        slot.label if slot.variance == "internal" else f"{slot.label}:{slot.variance}"
        for slot in slots
    ]
    return f"[{', '.join(parts)}]"


def _format_symmetries(symmetries: Tuple[SymmetryDecl, ...]) -> str:
    return "".join(f" {s.symmetry}({s.first}, {s.second})" for s in symmetries)


def format_declaration(item) -> List[str]:
    """Lines of one declaration, without indentation"""
    if isinstance(item, BaseDecl):
        return [f"base {item.name}[{item.dimension}];"]
    if isinstance(item, IndexDecl):
        return [f"index {', '.join(item.labels)} : {item.size};"]
    if isinstance(item, FieldDecl):
        return [
            f"field {item.name}{_format_slots(item.slots)}"
            f"{_format_symmetries(item.symmetries)};"
        ]
    if isinstance(item, ParamDecl):
        flag = " nonzero" if item.nonzero else ""
        return [
            f"param {item.name}{_format_slots(item.slots)}"
            f"{_format_symmetries(item.symmetries)}{flag};"
        ]
    if isinstance(item, ConstDecl):
        if item.table == "levicivita":
            value = "levicivita"
        else:
            value = f"diag({', '.join(format_expr(e) for e in item.entries)})"
        return [f"const {item.name}{_format_slots(item.slots)} = {value};"]
    if isinstance(item, FunctionDecl):
        return [
            f"function {item.name}{_format_slots(item.slots)}"
            f"{_format_symmetries(item.symmetries)};"
        ]
    if isinstance(item, DerivedDecl):
        lines = [
            f"derived {item.name}{_format_slots(item.slots)}"
            f"{_format_symmetries(item.symmetries)} {{"
        ]
        if item.expand is not None:
            lines.append(f"  expand = {format_expr(item.expand)};")
        for rule in item.rules:
            lines.append(f"  diff {format_access(rule.target)} = {format_expr(rule.expr)};")
        lines.append("}")
        return lines
    if isinstance(item, IdentityDecl):
        return [f"identity {format_expr(item.lhs)} = {format_expr(item.rhs)};"]
    if isinstance(item, AssumeDecl):
        if item.note is not None:
            return [f"assume note {_quote(item.note)};"]
        return [f"assume nonzero {', '.join(format_expr(e) for e in item.nonzero)};"]
    if isinstance(item, LagrangianDecl):
        return [f"lagrangian = {format_expr(item.expr)};"]
    if isinstance(item, HamiltonianDecl):
        return [f"hamiltonian = {format_expr(item.expr)};"]
    if isinstance(item, GeneratorDecl):
        lines = [f"generator {item.name} {{"]
        for component in item.base:
            lines.append(f"  base[{component.index}] = {format_expr(component.expr)};")
        for fiber in item.fiber:
            lines.append(f"  fiber {format_access(fiber.target)} = {format_expr(fiber.expr)};")
        if item.tensorial:
            lines.append("  tensorial;")
        lines.append("}")
        return lines
    return [f"option {item.name} = {item.value};"]


def format_theory(spec: TheorySpec) -> str:
    """Canonical source text, always with the version header"""
    lines = [f"#thy {VERSION}", f"theory {spec.name} {{"]
    for item in spec.items:
        lines.extend(f"  {line}" for line in format_declaration(item))
    lines.append("}")
    return "\n".join(lines) + "\n"
