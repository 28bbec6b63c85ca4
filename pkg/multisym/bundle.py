"""Coordinate charts of the spaces M, E, J1Pi, MPi, J1PiStar and P°

Every chart fixes a concrete base dimension and enumerates its coordinates in canonical
order: base coordinates, field components (family order, then row-major index order),
jet or momentum coordinates ordered by (field component, base index), then the scalar
momentum ``p``.
"""

from __future__ import annotations

import enum
import functools
import itertools
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import sympy
from pydantic import BaseModel, ConfigDict, PositiveInt, field_validator, model_validator

from .errors import (
    ChartMismatch,
    CircularConstraint,
    DuplicateFieldName,
    IncompleteMap,
    UnknownCoordinate,
    WrongSpace,
    ZeroDimensionalBase,
)

RESERVED_NAMES = frozenset({"D", "P", "p", "X", "d"})


class Variance(str, enum.Enum):
    """How a field index transforms under base diffeomorphisms"""

    INTERNAL = "internal"
    UP = "up"
    DOWN = "down"


class SymmetryKind(str, enum.Enum):
    SYMMETRIC = "sym"
    ANTISYMMETRIC = "antisym"


class IndexSlot(BaseModel, frozen=True, extra="forbid"):
    """One index of a field family: label, concrete range and variance"""

    label: str
    size: PositiveInt
    variance: Variance = Variance.INTERNAL


class IndexSymmetry(BaseModel, frozen=True, extra="forbid"):
    kind: SymmetryKind
    first: int
    second: int

    @model_validator(mode="after")
    def check_order(self) -> "IndexSymmetry":
        if not 0 <= self.first < self.second:
            raise ValueError("Symmetric index pair must be given as first < second")
        return self


class FieldFamily(BaseModel, frozen=True, extra="forbid"):
    """Indexed family of field components, e.g. ``e[a, mu]`` or ``g[a, b] sym(a, b)``"""

    name: str
    slots: Tuple[IndexSlot, ...] = ()
    symmetries: Tuple[IndexSymmetry, ...] = ()

    @field_validator("name")
    def check_name(cls, v: str) -> str:
        if v in RESERVED_NAMES:
            raise ValueError(f"'{v}' is a reserved name")
        return v

    @model_validator(mode="after")
    def check_symmetries(self) -> "FieldFamily":
        used: set = set()
        for symmetry in self.symmetries:
            if symmetry.second >= len(self.slots):
                raise ValueError(f"Symmetry of '{self.name}' refers to a missing index")
            if self.slots[symmetry.first].size != self.slots[symmetry.second].size:
                raise ValueError(
                    f"Symmetric indices of '{self.name}' must have the same range"
                )
            if {symmetry.first, symmetry.second} & used:
                raise ValueError(f"Overlapping index symmetries in '{self.name}'")
            used |= {symmetry.first, symmetry.second}
        return self

    def canonical(self, index: Sequence[int]) -> Tuple[int, Tuple[int, ...]]:
        """Sign and independent component representing ``index``

        The sign is 0 for the diagonal of an antisymmetric pair.
        """
        index = list(index)
        sign = 1
        for symmetry in self.symmetries:
            i, j = index[symmetry.first], index[symmetry.second]
            if i == j and symmetry.kind == SymmetryKind.ANTISYMMETRIC:
                return 0, tuple(index)
            if i > j:
                index[symmetry.first], index[symmetry.second] = j, i
                if symmetry.kind == SymmetryKind.ANTISYMMETRIC:
                    sign = -sign
        return sign, tuple(index)

    def components(self) -> List[Tuple[int, ...]]:
        """Independent components in row-major order"""
        ranges = [range(slot.size) for slot in self.slots]
        result = []
        for index in itertools.product(*ranges):
            sign, canonical = self.canonical(index)
            if sign != 0 and canonical == index:
                result.append(index)
        return result

    def orbit(self, index: Sequence[int]) -> List[Tuple[int, Tuple[int, ...]]]:
        """All full index tuples represented by the independent component ``index``"""
        members = {}
        ranges = [range(slot.size) for slot in self.slots]
        for candidate in itertools.product(*ranges):
            sign, canonical = self.canonical(candidate)
            if sign != 0 and canonical == tuple(index):
                members[candidate] = sign
        return sorted((sign, candidate) for candidate, sign in members.items())

    def component_count(self) -> int:
        """Number of independent components implied by the slot ranges and symmetries"""
        count = 1
        paired = set()
        for symmetry in self.symmetries:
            n = self.slots[symmetry.first].size
            if symmetry.kind == SymmetryKind.SYMMETRIC:
                count *= n * (n + 1) // 2
            else:
                count *= n * (n - 1) // 2
            paired |= {symmetry.first, symmetry.second}
        for position, slot in enumerate(self.slots):
            if position not in paired:
                count *= slot.size
        return count

    def component_name(self, index: Sequence[int]) -> str:
        if not self.slots:
            return self.name
        return f"{self.name}[{','.join(str(i) for i in index)}]"


def levi_civita(index: Sequence[int]) -> int:
    """Totally antisymmetric symbol with value 1 on (0, 1, ..., n-1)"""
    return int(sympy.LeviCivita(*index))


class SpaceTag(str, enum.Enum):
    M = "M"
    E = "E"
    J1PI = "J1Pi"
    MPI = "MPi"
    J1PISTAR = "J1PiStar"
    PSUB = "PSub"


class CoordinateKind(str, enum.Enum):
    BASE = "base"
    FIELD = "field"
    JET = "jet"
    MOMENTUM = "momentum"
    SCALAR_MOMENTUM = "scalar"


class Coordinate(BaseModel):
    """A chart coordinate and its place in the field structure"""

    model_config = ConfigDict(frozen=True, extra="forbid", arbitrary_types_allowed=True)

    symbol: sympy.Symbol
    kind: CoordinateKind
    family: str
    index: Tuple[int, ...] = ()
    derivative: Optional[int] = None
    field: Optional[sympy.Symbol] = None

    @property
    def name(self) -> str:
        return self.symbol.name


def base_coordinate(name: str, mu: int) -> Coordinate:
    return Coordinate(
        symbol=sympy.Symbol(f"{name}[{mu}]"),
        kind=CoordinateKind.BASE,
        family=name,
        index=(mu,),
    )


def field_coordinate(family: FieldFamily, index: Tuple[int, ...]) -> Coordinate:
    return Coordinate(
        symbol=sympy.Symbol(family.component_name(index)),
        kind=CoordinateKind.FIELD,
        family=family.name,
        index=index,
    )


def jet_coordinate(field: Coordinate, mu: int) -> Coordinate:
    return Coordinate(
        symbol=sympy.Symbol(f"D[{mu}]({field.name})"),
        kind=CoordinateKind.JET,
        family=field.family,
        index=field.index,
        derivative=mu,
        field=field.symbol,
    )


def momentum_coordinate(field: Coordinate, mu: int) -> Coordinate:
    return Coordinate(
        symbol=sympy.Symbol(f"P[{mu}]({field.name})"),
        kind=CoordinateKind.MOMENTUM,
        family=field.family,
        index=field.index,
        derivative=mu,
        field=field.symbol,
    )


SCALAR_MOMENTUM = Coordinate(
    symbol=sympy.Symbol("p"), kind=CoordinateKind.SCALAR_MOMENTUM, family="p"
)


class BundleChart(BaseModel):
    """Concrete coordinate chart of one space of the tower

    For :attr:`SpaceTag.PSUB` charts, :attr:`substitutions` holds the eliminated
    momenta as expressions over the retained coordinates, and :attr:`ambient` the space
    the constraint submanifold lives in.
    """

    model_config = ConfigDict(frozen=True, extra="forbid", arbitrary_types_allowed=True)

    space: SpaceTag
    base_dimension: int
    coordinates: Tuple[Coordinate, ...]
    substitutions: Tuple[Tuple[sympy.Symbol, sympy.Expr], ...] = ()
    ambient: Optional[SpaceTag] = None

    @model_validator(mode="after")
    def check_unique_names(self) -> "BundleChart":
        names = [c.name for c in self.coordinates]
        if len(set(names)) != len(names):
            duplicates = sorted({n for n in names if names.count(n) > 1})
            raise DuplicateFieldName(f"Duplicate coordinate names: {', '.join(duplicates)}")
        return self

    @functools.cached_property
    def symbols(self) -> Tuple[sympy.Symbol, ...]:
        return tuple(c.symbol for c in self.coordinates)

    @functools.cached_property
    def key(self) -> Tuple:
        return (self.space, self.symbols)

    @functools.cached_property
    def position(self) -> Dict[sympy.Symbol, int]:
        return {symbol: i for i, symbol in enumerate(self.symbols)}

    @functools.cached_property
    def by_symbol(self) -> Dict[sympy.Symbol, Coordinate]:
        return {c.symbol: c for c in self.coordinates}

    @property
    def dimension(self) -> int:
        return len(self.coordinates)

    def _of_kind(self, kind: CoordinateKind) -> Tuple[Coordinate, ...]:
        return tuple(c for c in self.coordinates if c.kind == kind)

    @functools.cached_property
    def base(self) -> Tuple[Coordinate, ...]:
        return self._of_kind(CoordinateKind.BASE)

    @functools.cached_property
    def fields(self) -> Tuple[Coordinate, ...]:
        return self._of_kind(CoordinateKind.FIELD)

    @functools.cached_property
    def jets(self) -> Tuple[Coordinate, ...]:
        return self._of_kind(CoordinateKind.JET)

    @functools.cached_property
    def momenta(self) -> Tuple[Coordinate, ...]:
        return self._of_kind(CoordinateKind.MOMENTUM)

    @property
    def scalar_momentum(self) -> Optional[Coordinate]:
        found = self._of_kind(CoordinateKind.SCALAR_MOMENTUM)
        return found[0] if found else None

    @functools.cached_property
    def _derived_index(self) -> Dict[Tuple[CoordinateKind, sympy.Symbol, int], sympy.Symbol]:
        return {
            (c.kind, c.field, c.derivative): c.symbol
            for c in self.coordinates
            if c.field is not None and c.derivative is not None
        }

    def jet(self, field: sympy.Symbol, mu: int) -> sympy.Symbol:
        try:
            return self._derived_index[(CoordinateKind.JET, field, mu)]
        except KeyError:
            raise UnknownCoordinate(f"No jet coordinate D[{mu}]({field}) in {self.space.value}")

    def momentum(self, field: sympy.Symbol, mu: int) -> sympy.Symbol:
        try:
            return self._derived_index[(CoordinateKind.MOMENTUM, field, mu)]
        except KeyError:
            raise UnknownCoordinate(f"No momentum P[{mu}]({field}) in {self.space.value}")

    def has(self, symbol: sympy.Symbol) -> bool:
        return symbol in self.position

    def coordinate(self, symbol: sympy.Symbol) -> Coordinate:
        try:
            return self.by_symbol[symbol]
        except KeyError:
            raise UnknownCoordinate(f"'{symbol}' is not a coordinate of {self.space.value}")

    @property
    def substitution_map(self) -> Dict[sympy.Symbol, sympy.Expr]:
        return dict(self.substitutions)

    def require(self, *spaces: SpaceTag) -> None:
        if self.space not in spaces:
            expected = " or ".join(s.value for s in spaces)
            raise WrongSpace(f"Expected a chart on {expected}, got {self.space.value}")

    def same_as(self, other: "BundleChart") -> bool:
        return self is other or self.key == other.key

    def check_same(self, other: "BundleChart") -> None:
        if not self.same_as(other):
            raise ChartMismatch(
                f"Objects live on different charts ({self.space.value} and {other.space.value})"
            )


class ChartMap(BaseModel):
    """Map between charts given by the image of every target coordinate"""

    model_config = ConfigDict(frozen=True, extra="forbid", arbitrary_types_allowed=True)

    source: BundleChart
    target: BundleChart
    images: Tuple[Tuple[sympy.Symbol, sympy.Expr], ...]

    @model_validator(mode="after")
    def check_complete(self) -> "ChartMap":
        defined = {symbol for symbol, _ in self.images}
        missing = [s for s in self.target.symbols if s not in defined]
        if missing:
            raise IncompleteMap(
                f"Map to {self.target.space.value} lacks images of: {', '.join(map(str, missing))}"
            )
        return self

    @functools.cached_property
    def image(self) -> Dict[sympy.Symbol, sympy.Expr]:
        return dict(self.images)

    def apply(self, expr: sympy.Expr) -> sympy.Expr:
        """Pull a scalar on the target back to the source"""
        return sympy.sympify(expr).xreplace(self.image)

    def compose(self, inner: "ChartMap") -> "ChartMap":
        """``self ∘ inner``"""
        self.source.check_same(inner.target)
        return ChartMap(
            source=inner.source,
            target=self.target,
            images=tuple(
                (symbol, sympy.expand(inner.apply(expr))) for symbol, expr in self.images
            ),
        )

    def is_projection(self) -> bool:
        return all(symbol == expr for symbol, expr in self.images)


def projection(source: BundleChart, target: BundleChart) -> ChartMap:
    """Coordinate-forgetting map ``source -> target``"""
    missing = [s for s in target.symbols if not source.has(s)]
    if missing:
        raise UnknownCoordinate(
            f"{target.space.value} is not a quotient of {source.space.value}: "
            f"missing {', '.join(map(str, missing))}"
        )
    return ChartMap(
        source=source, target=target, images=tuple((s, s) for s in target.symbols)
    )


def identity_map(chart: BundleChart) -> ChartMap:
    return projection(chart, chart)


class Tower(BaseModel):
    """The charts of M, E, J1Pi, MPi and J1PiStar of one theory"""

    model_config = ConfigDict(frozen=True, extra="forbid", arbitrary_types_allowed=True)

    base_name: str
    families: Tuple[FieldFamily, ...]
    base: BundleChart
    total: BundleChart
    jet: BundleChart
    extended: BundleChart
    restricted: BundleChart

    @property
    def base_dimension(self) -> int:
        return self.base.base_dimension

    @property
    def field_count(self) -> int:
        return len(self.total.fields)

    def chart(self, space: SpaceTag) -> BundleChart:
        return {
            SpaceTag.M: self.base,
            SpaceTag.E: self.total,
            SpaceTag.J1PI: self.jet,
            SpaceTag.MPI: self.extended,
            SpaceTag.J1PISTAR: self.restricted,
        }[space]

    def projection(self, source: SpaceTag, target: SpaceTag) -> ChartMap:
        return projection(self.chart(source), self.chart(target))

    @functools.cached_property
    def symbols(self) -> Tuple[sympy.Symbol, ...]:
        seen: Dict[sympy.Symbol, None] = {}
        for chart in (self.jet, self.extended):
            for symbol in chart.symbols:
                seen.setdefault(symbol, None)
        return tuple(seen)

    def family(self, name: str) -> FieldFamily:
        for family in self.families:
            if family.name == name:
                return family
        raise UnknownCoordinate(f"No field family '{name}'")


def build_tower(
    base_name: str, dimension: int, families: Sequence[FieldFamily]
) -> Tower:
    """Enumerate the charts of every space of the tower

    :raises ZeroDimensionalBase: If ``dimension`` is not positive.
    :raises DuplicateFieldName: If two families share a name or clash with the base.
    """
    if dimension < 1:
        raise ZeroDimensionalBase(f"Base dimension must be positive, got {dimension}")
    names = [base_name] + [family.name for family in families]
    if len(set(names)) != len(names):
        duplicates = sorted({n for n in names if names.count(n) > 1})
        raise DuplicateFieldName(f"Duplicate field names: {', '.join(duplicates)}")

    base = tuple(base_coordinate(base_name, mu) for mu in range(dimension))
    fields = tuple(
        field_coordinate(family, index)
        for family in families
        for index in family.components()
    )
    jets = tuple(jet_coordinate(f, mu) for f in fields for mu in range(dimension))
    momenta = tuple(momentum_coordinate(f, mu) for f in fields for mu in range(dimension))

    def chart(space: SpaceTag, coordinates: Iterable[Coordinate]) -> BundleChart:
        return BundleChart(
            space=space, base_dimension=dimension, coordinates=tuple(coordinates)
        )

    return Tower(
        base_name=base_name,
        families=tuple(families),
        base=chart(SpaceTag.M, base),
        total=chart(SpaceTag.E, base + fields),
        jet=chart(SpaceTag.J1PI, base + fields + jets),
        extended=chart(SpaceTag.MPI, base + fields + momenta + (SCALAR_MOMENTUM,)),
        restricted=chart(SpaceTag.J1PISTAR, base + fields + momenta),
    )


def restrict(
    chart: BundleChart,
    constraints: Sequence[Tuple[sympy.Symbol, sympy.Expr]],
    parameters: Iterable[sympy.Symbol] = (),
) -> BundleChart:
    """Graph-type constraint submanifold ``p_i = f_i`` of a momentum chart

    :raises CircularConstraint: If a momentum is constrained twice or a right-hand side
        references an eliminated coordinate.
    :raises UnknownCoordinate: If a constrained symbol is not a momentum of ``chart`` or a
        right-hand side references an undeclared symbol.
    """
    chart.require(SpaceTag.J1PISTAR, SpaceTag.MPI)
    if not constraints:
        return chart
    eliminated: Dict[sympy.Symbol, sympy.Expr] = {}
    for symbol, expr in constraints:
        coordinate = chart.coordinate(symbol)
        if coordinate.kind != CoordinateKind.MOMENTUM:
            raise UnknownCoordinate(f"'{symbol}' is not a multimomentum coordinate")
        if symbol in eliminated:
            raise CircularConstraint(f"'{symbol}' is constrained more than once")
        eliminated[symbol] = sympy.sympify(expr)
    allowed = set(chart.symbols) | set(parameters)
    for symbol, expr in eliminated.items():
        referenced = expr.free_symbols
        circular = referenced & set(eliminated)
        if circular:
            names = ", ".join(sorted(map(str, circular)))
            raise CircularConstraint(f"Constraint of '{symbol}' references eliminated {names}")
        unknown = referenced - allowed
        if unknown:
            names = ", ".join(sorted(map(str, unknown)))
            raise UnknownCoordinate(f"Constraint of '{symbol}' references unknown {names}")
    return BundleChart(
        space=SpaceTag.PSUB,
        base_dimension=chart.base_dimension,
        coordinates=tuple(c for c in chart.coordinates if c.symbol not in eliminated),
        substitutions=tuple(
            (s, eliminated[s]) for s in chart.symbols if s in eliminated
        ),
        ambient=chart.space,
    )


def embedding(chart: BundleChart, ambient: BundleChart) -> ChartMap:
    """Inclusion of a constraint submanifold chart into its ambient chart"""
    substitutions = chart.substitution_map
    images = []
    for symbol in ambient.symbols:
        if symbol in substitutions:
            images.append((symbol, substitutions[symbol]))
        elif chart.has(symbol):
            images.append((symbol, symbol))
        else:
            raise UnknownCoordinate(f"'{symbol}' is neither retained nor eliminated")
    return ChartMap(source=chart, target=ambient, images=tuple(images))


def with_scalar_momentum(chart: BundleChart) -> BundleChart:
    """P̃: the constraint submanifold of J1PiStar lifted into MPi (keeps ``p``)"""
    chart.require(SpaceTag.PSUB)
    return BundleChart(
        space=SpaceTag.PSUB,
        base_dimension=chart.base_dimension,
        coordinates=chart.coordinates + (SCALAR_MOMENTUM,),
        substitutions=chart.substitutions,
        ambient=SpaceTag.MPI,
    )


def flat_index(chart: BundleChart) -> Mapping[sympy.Symbol, int]:
    """Abstract index A of every field component (family order, row-major)"""
    return {c.symbol: i for i, c in enumerate(chart.fields)}
