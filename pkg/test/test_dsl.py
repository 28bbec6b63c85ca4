import pathlib
import random
from typing import List

import pytest

from multisym.dsl import (
    MAX_NESTING,
    TheorySpec,
    format_theory,
    parse,
    structurally_equal,
    tokenize,
)
from multisym.errors import (
    DuplicateDeclaration,
    IndexArityMismatch,
    MissingBaseDecl,
    ParseError,
    UnknownIdentifier,
)
from multisym.theory import BUILTIN_THEORIES, builtin_source

GOLDEN = pathlib.Path(__file__).parent / "golden"


def source(*declarations: str, header: str = "") -> str:
    body = "\n".join(f"  {line}" for line in declarations)
    return f"{header}theory toy {{\n{body}\n}}\n"


@pytest.mark.parametrize("name", BUILTIN_THEORIES)
def test_round_trip(name):
    """Test printing then parsing a bundled theory gives the same structure"""
    spec = parse(builtin_source(name))
    text = format_theory(spec)
    assert structurally_equal(parse(text), spec)
    assert format_theory(parse(text)) == text


def test_parse_free():
    spec = parse(builtin_source("free"))
    assert isinstance(spec, TheorySpec)
    assert spec.name == "free"
    assert spec.base.dimension == 2
    assert spec.index_sizes == {"mu": 2, "A": 2}
    assert [g.name for g in spec.declarations("generator")] == ["translation", "shift"]
    assert spec.generator("shift").name == "shift"
    with pytest.raises(UnknownIdentifier):
        spec.generator("boost")


def test_parse_str_and_bytes():
    text = source("base x[1];", "field y;", "lagrangian = D[0](y)^2;")
    assert structurally_equal(parse(text), parse(text.encode()))


def test_spans():
    """Test spans are 1-based lines and columns"""
    with pytest.raises(UnknownIdentifier) as info:
        parse(source("base x[1];", "lagrangian = z;"))
    span = info.value.span
    assert span.line == 3
    assert span.column == 16
    assert info.value.describe().startswith("3:16: ")


@pytest.mark.parametrize(
    "declarations,error",
    [
        (("base x[1];", "base s[1];"), DuplicateDeclaration),
        (("base x[1];", "field y;", "field y;"), DuplicateDeclaration),
        (("base x[1];", "index A : 2;", "field A;"), DuplicateDeclaration),
        (("base x[1];", "field y[A, A];", "index A : 2;"), DuplicateDeclaration),
        (("base x[1];", "option max_iter = 2;", "option max_iter = 3;"), DuplicateDeclaration),
        (("base x[1];", "field y;", "lagrangian = 0;", "lagrangian = 1;"), DuplicateDeclaration),
        (("base x[1];", "lagrangian = z;"), UnknownIdentifier),
        (("base x[1];", "field y[A];"), UnknownIdentifier),
        (("base x[1];", "index A : 2;", "field y[A];", "lagrangian = y[B];"), UnknownIdentifier),
        (("field y;",), MissingBaseDecl),
        (("base x[1];", "index A : 2;", "field y[A];", "lagrangian = y[0, 1];"), IndexArityMismatch),
        (("base x[1];", "index A : 2;", "field y[A];", "lagrangian = y[2];"), IndexArityMismatch),
        # spacetime slot over an index which is not the base dimension
        (("base x[1];", "index A : 2;", "field y[A:up];"), IndexArityMismatch),
        (("base x[1];", "field y;", "lagrangian = D[1](y);"), IndexArityMismatch),
        (("base x[1];", "field D;"), ParseError),
        (("base x[1];", "option depth = 3;"), ParseError),
        (("base x[1];", "field y"), ParseError),
        (("base x[1];", "field y;", "lagrangian = (y;"), ParseError),
        (("base x[1];", "field y;", "lagrangian = y $ y;"), ParseError),
    ],
)
def test_errors(declarations, error):
    """Test invalid sources raise the matching parse error"""
    with pytest.raises(error):
        parse(source(*declarations))


def test_error_hierarchy():
    for error in (DuplicateDeclaration, UnknownIdentifier, MissingBaseDecl, IndexArityMismatch):
        assert issubclass(error, ParseError)
        assert error.exit_code == 1


@pytest.mark.parametrize(
    "header,valid",
    [
        ("", True),
        ("#thy 1\n", True),
        ("#thy   1\n", True),
        ("#thy 2\n", False),
        ("#thy one\n", False),
        ("#thyroid\n", True),  # plain comment
    ],
)
def test_header(header, valid):
    text = source("base x[1];", header=header)
    if valid:
        assert parse(text).version == 1
    else:
        with pytest.raises(ParseError) as info:
            parse(text)
        assert info.value.expected == ("1",)


def test_invalid_utf8():
    with pytest.raises(ParseError):
        parse(b"theory toy { base x[1]; } \xff")


def test_trailing_input():
    with pytest.raises(ParseError):
        parse(source("base x[1];") + "theory other {}")


@pytest.mark.parametrize(
    "depth,valid",
    [
        (10, True),
        (MAX_NESTING - 1, True),
        (MAX_NESTING + 10, False),
    ],
)
def test_nesting(depth, valid):
    """Test deeply nested expressions are rejected instead of recursing"""
    expr = "(" * depth + "y" + ")" * depth
    text = source("base x[1];", "field y;", f"lagrangian = {expr};")
    if valid:
        parse(text)
    else:
        with pytest.raises(ParseError):
            parse(text)


def test_unary_nesting():
    text = source("base x[1];", "field y;", f"lagrangian = {'-' * (MAX_NESTING + 5)}y;")
    with pytest.raises(ParseError):
        parse(text)


def test_tokenize():
    tokens = tokenize(b'field y; # comment\n"a\\"b"')
    assert [t.kind for t in tokens] == ["ident", "ident", "punct", "string", "eof"]
    with pytest.raises(ParseError):
        tokenize(b'"open')


def test_sum_precedence():
    """Test printing keeps operator precedence"""
    text = source(
        "base x[1];",
        "index A : 2;",
        "field y[A];",
        "lagrangian = -(y[0] - y[1])^2/(2*y[0]) + sum(A){y[A]}^2;",
    )
    spec = parse(text)
    assert structurally_equal(parse(format_theory(spec)), spec)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(500))
def test_mutations(seed):
    """Test damaged sources either parse or raise ParseError"""
    rng = random.Random(seed)
    data = bytearray(builtin_source(rng.choice(BUILTIN_THEORIES)))
    for _ in range(rng.randint(1, 4)):
        position = rng.randrange(len(data))
        if rng.random() < 0.5:
            del data[position]
        else:
            data[position] = rng.choice(b"{}[]();,:=+-*/^ xy0")
    try:
        spec = parse(bytes(data))
    except ParseError:
        return
    assert structurally_equal(parse(format_theory(spec)), spec)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(10))
def test_random_bytes(seed):
    """Test random inputs either parse or raise ParseError"""
    rng = random.Random(seed)
    alphabet = b"{}[]();,:=+-*/^#\"\n xyDP01theorybasefield\xff"
    prefix = b"theory t { base x[1]; "
    for _ in range(10**4):
        data = bytes(rng.choice(alphabet) for _ in range(rng.randint(0, 48)))
        if rng.random() < 0.5:
            data = prefix + data
        try:
            parse(data)
        except ParseError:
            pass


class TheoryGenerator:
    """Random valid theory sources"""

    def __init__(self, rng: random.Random):
        self.rng = rng
        self.dimension = rng.randint(1, 3)
        self.internal = rng.randint(1, 3)
        self.scalars = [f"f{i}" for i in range(rng.randint(1, 3))]
        self.multiplets = [f"v{i}" for i in range(rng.randint(0, 2))]
        self.params = [f"c{i}" for i in range(rng.randint(0, 3))]

    def declarations(self) -> List[str]:
        rng = self.rng
        lines = [
            f"base x[{self.dimension}];",
            f"index mu, nu : {self.dimension};",
            f"index A : {self.internal};",
        ]
        lines += [f"field {name};" for name in self.scalars]
        lines += [f"field {name}[A];" for name in self.multiplets]
        lines += [
            f"param {name}{' nonzero' if rng.random() < 0.5 else ''};"
            for name in self.params
        ]
        entries = ", ".join(str(rng.choice((-1, 1))) for _ in range(self.dimension))
        lines.append(f"const eta[mu, nu] = diag({entries});")
        lines.append(f"lagrangian = {self.expr(3)};")
        if rng.random() < 0.5:
            lines.append(f"hamiltonian = {self.expr(3, momenta=True)};")
        if rng.random() < 0.5:
            lines.append(
                "generator g { "
                f"base[mu] = {self.expr(1)}; fiber {self.scalars[0]} = {self.expr(2)}; }}"
            )
        if rng.random() < 0.3:
            lines.append(f"option max_iter = {rng.randint(1, 20)};")
        return lines

    def leaf(self, momenta: bool) -> str:
        rng = self.rng
        k = rng.randrange(self.dimension)
        choices = [
            str(rng.randint(0, 9)),
            f"x[{k}]",
            rng.choice(self.scalars),
            f"D[{k}]({rng.choice(self.scalars)})",
            f"eta[{k}, {rng.randrange(self.dimension)}]",
        ]
        if self.params:
            choices.append(rng.choice(self.params))
        if self.multiplets:
            choices.append(f"{rng.choice(self.multiplets)}[{rng.randrange(self.internal)}]")
        if momenta:
            choices.append(f"P[{k}]({rng.choice(self.scalars)})")
        return rng.choice(choices)

    def expr(self, depth: int, momenta: bool = False) -> str:
        rng = self.rng
        if depth == 0:
            return self.leaf(momenta)
        inner = self.expr(depth - 1, momenta)
        other = self.expr(depth - 1, momenta)
        shape = rng.randrange(8)
        if shape == 0:
            return f"{inner} + {other}"
        if shape == 1:
            return f"{inner} - ({other})"
        if shape == 2:
            return f"{inner}*{other}"
        if shape == 3:
            return f"({inner})/({other})"
        if shape == 4:
            return f"-({inner})^{rng.randint(1, 3)}"
        if shape == 5:
            return f"{rng.choice(('exp', 'sqrt'))}({inner})"
        if shape == 6 and self.multiplets:
            name = rng.choice(self.multiplets)
            return f"sum(A){{{name}[A]*{inner}}}"
        return f"diff({inner}, x[{rng.randrange(self.dimension)}])"

    def source(self) -> str:
        return source(*self.declarations(), header="#thy 1\n")


@pytest.mark.parametrize("seed", range(500))
def test_generated_round_trip(seed):
    """Test random valid theories survive printing and parsing"""
    text = TheoryGenerator(random.Random(seed)).source()
    spec = parse(text)
    printed = format_theory(spec)
    assert structurally_equal(parse(printed), spec)
    assert format_theory(parse(printed)) == printed


def test_format_golden():
    """Test the canonical text of a loosely written theory"""
    text = (
        "theory minimal{base x[1];field y;param m nonzero;"
        "lagrangian=(D[0](y)^2-m^2*y^2)/2;generator shift{base[0]=1;}}"
    )
    expected = (GOLDEN / "minimal.thy").read_text(encoding="utf-8")
    assert format_theory(parse(text)) == expected
    assert format_theory(parse(expected)) == expected
