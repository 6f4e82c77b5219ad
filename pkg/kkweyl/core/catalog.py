"""
Geometry entries and the metric file format.

A metric file is a list of headers followed by statements, one per line:

    name: taub_nut
    kind: kk_triple
    signature: euclidean
    coordinates: r, theta, phi
    parameters: m = 1
    require: m > 0

    let V = 1 + m/r
    sigma = -ln(V)/2
    a[3] = m*(1 - cos(theta))
    g[1,1] = V^2
    domain r = [0.5, 5]

Component indices are 1-based. Off-diagonal metric components default to
zero; diagonal components are required. `require:` rules are Python
comparisons over the parameters and are checked when an entry is bound.
"""

import logging
import math
import re
from dataclasses import dataclass, field
from enum import StrEnum
from functools import cache, cached_property
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from simpleeval import EvalWithCompoundTypes, InvalidExpression

from kkweyl.core import jets
from kkweyl.core.einstein_weyl import WeylStructure
from kkweyl.core.exceptions import (
    DimensionError,
    GeometryNotFound,
    JetDomainError,
    MetricFileError,
    ParameterError,
    ParseError,
    SemanticError,
)
from kkweyl.core.expressions import (
    CONSTANTS,
    Node,
    Number,
    Parser,
    check_names,
    evaluate,
    to_source,
    tokenize,
)
from kkweyl.core.geometry import MetricField, Signature
from kkweyl.core.jets import Jet
from kkweyl.core.kaluza_klein import KKTriple, assemble_kk, extract_kk
from kkweyl.core.utils import Validatable, is_identifier


logger = logging.getLogger(__name__)


class Kind(StrEnum):
    METRIC4 = 'metric4'
    KK_TRIPLE = 'kk_triple'
    METRIC3 = 'metric3'

    @property
    def dim(self) -> int:
        return 4 if self is Kind.METRIC4 else 3


HEADERS = (
    'name',
    'kind',
    'signature',
    'coordinates',
    'parameters',
    'provenance',
    'require',
)
REQUIRED_HEADERS = ('name', 'kind', 'signature', 'coordinates')

_header_pattern = re.compile(r'^([A-Za-z_]+)\s*:(.*)$')

_rule_functions = {
    'abs': abs,
    'sqrt': math.sqrt,
    'min': min,
    'max': max,
}


@dataclass(frozen=True)
class Program:
    """
    Parsed component statements of a metric file.

    Attributes:
        definitions: `let` bindings in file order.
        metric: Full symmetric component matrix.
        sigma: Conformal scalar of a `kk_triple`, or None.
        vector: `a` of a `kk_triple` or `w` of a `metric3`, or None.
    """

    definitions: tuple[tuple[str, Node], ...]
    metric: tuple[tuple[Node, ...], ...]
    sigma: Node | None = None
    vector: tuple[Node, ...] | None = None


@dataclass(frozen=True)
class GeometryEntry(Validatable):
    """
    A named geometry with closed-form components.

    Attributes:
        name (str): Identifier used on the command line.
        kind (Kind): `metric4`, `kk_triple` or `metric3`.
        signature (Signature): Signature of the 4-metric or of the
            reduction.
        coordinates (tuple[str, ...]): Chart coordinate names.
        parameters (tuple): Parameter names with default expressions.
        domain (tuple): Per-coordinate bounds as expressions.
        program (Program): Component statements.
        requires (tuple[str, ...]): Validity rules over the parameters.
        provenance (str): Free-form note.
        origin (str): Where the entry was read from.
    """

    name: str
    kind: Kind
    signature: Signature
    coordinates: tuple[str, ...]
    parameters: tuple[tuple[str, Node], ...]
    domain: tuple[tuple[str, Node, Node], ...]
    program: Program
    requires: tuple[str, ...] = ()
    provenance: str = ''
    origin: str = field(default='', compare=False)

    def validate_name(self):
        if not is_identifier(self.name):
            raise ValueError(f'Invalid geometry name {self.name!r}')

    def validate_coordinates(self):
        if len(self.coordinates) != Kind(self.kind).dim:
            raise DimensionError(
                f'{self.kind} needs {Kind(self.kind).dim} coordinates'
            )

    @property
    def dim(self) -> int:
        return Kind(self.kind).dim

    @property
    def parameter_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.parameters)

    def defaults(self) -> dict[str, str]:
        return {name: to_source(node) for name, node in self.parameters}

    def bind(self, params: Mapping[str, float] | None = None, **kwargs):
        """
        Fixes parameter values, filling in defaults.

        Raises:
            ParameterError: An unknown parameter was given, a value is not a
                finite number, or a `require:` rule is violated.
        """
        return BoundGeometry.create(self, {**(params or {}), **kwargs})

    def describe(self) -> dict:
        return {
            'name': self.name,
            'kind': str(self.kind),
            'signature': str(self.signature),
            'coordinates': list(self.coordinates),
            'parameters': self.defaults(),
            'domain': {
                c: [to_source(lo), to_source(hi)] for c, lo, hi in self.domain
            },
            'requires': list(self.requires),
            'provenance': self.provenance,
        }


@dataclass(frozen=True, eq=False)
class BoundGeometry:
    """
    A geometry entry with every parameter fixed.
    """

    entry: GeometryEntry
    params: Mapping[str, float]
    domain: tuple[tuple[float, float], ...]

    @classmethod
    def create(cls, entry: GeometryEntry, overrides: Mapping[str, float]):
        unknown = sorted(set(overrides) - set(entry.parameter_names))
        if unknown:
            raise ParameterError(
                f'{entry.name} has no parameter(s) {", ".join(unknown)}; '
                f'known: {", ".join(entry.parameter_names) or "none"}'
            )
        params = {}
        for name, default in entry.parameters:
            raw = overrides[name] if name in overrides else default
            try:
                value = raw if not isinstance(raw, Node) else evaluate(
                    raw, params
                )
                value = float(value)
            except (TypeError, ArithmeticError, ValueError) as e:
                raise ParameterError(
                    f'{entry.name}: parameter {name} = {raw!r} is not a number'
                ) from e
            if not math.isfinite(value):
                raise ParameterError(
                    f'{entry.name}: parameter {name} = {value} is not finite'
                )
            params[name] = value
        _check_requirements(entry, params)
        domain = tuple(
            _bounds(entry, coordinate, lo, hi, params)
            for coordinate, lo, hi in entry.domain
        )
        return cls(entry, params, domain)

    @property
    def name(self) -> str:
        return self.entry.name

    @property
    def kind(self) -> Kind:
        return Kind(self.entry.kind)

    @property
    def signature(self) -> Signature:
        return Signature(self.entry.signature)

    def _environment(self, x: Jet) -> dict:
        env = dict(self.params)
        for i, coordinate in enumerate(self.entry.coordinates):
            env[coordinate] = x[i]
        for name, node in self.entry.program.definitions:
            env[name] = evaluate(node, env)
        return env

    def _metric_components(self, x: Jet):
        env = self._environment(x)
        return [
            [evaluate(node, env) for node in row]
            for row in self.entry.program.metric
        ]

    def _sigma(self, x: Jet):
        node = self.entry.program.sigma
        if node is None:
            return 0.0
        return evaluate(node, self._environment(x))

    def _vector(self, x: Jet):
        nodes = self.entry.program.vector
        if nodes is None:
            return jets.constant([0.0, 0.0, 0.0], x.dim, x.order)
        env = self._environment(x)
        return [evaluate(node, env) for node in nodes]

    @cached_property
    def midpoint(self) -> tuple[float, ...]:
        return tuple((lo + hi) / 2 for lo, hi in self.domain)

    def point3(self, point: Sequence[float]) -> tuple[float, ...]:
        return tuple(float(x) for x in point[:3])

    def point4(self, point: Sequence[float]) -> tuple[float, ...]:
        if len(point) == 4:
            return tuple(float(x) for x in point)
        return (*self.point3(point), 0.0)

    def metric4(self) -> MetricField:
        """
        Returns the 4-metric, assembling it for Kaluza-Klein triples.

        Raises:
            DimensionError: The entry is a 3-geometry.
        """
        if self.kind is Kind.METRIC4:
            return MetricField(
                4, self.signature, self._metric_components, self.name
            ).validate()
        if self.kind is Kind.KK_TRIPLE:
            return assemble_kk(self.kk_triple())
        raise DimensionError(f'{self.name} is a 3-geometry without a 4-metric')

    def metric3(self) -> MetricField:
        if self.kind is Kind.METRIC4:
            return self.kk_triple().g3
        return MetricField(
            3,
            Signature.EUCLIDEAN,
            self._metric_components,
            f'{self.name} (3d)',
        ).validate()

    def kk_triple(self) -> KKTriple:
        """
        Returns the Kaluza-Klein triple, reducing along the last coordinate
        for 4-metrics.

        Raises:
            DimensionError: The entry is a 3-geometry.
            ReductionError: The 4-metric depends on its last coordinate.
        """
        if self.kind is Kind.KK_TRIPLE:
            return KKTriple(
                sigma=self._sigma,
                a=self._vector,
                g3=self.metric3(),
                reduction_signature=self.signature,
                name=self.name,
            ).validate()
        if self.kind is Kind.METRIC4:
            return extract_kk(
                self.metric4(), self.signature, points=[self.midpoint]
            ).validate()
        raise DimensionError(f'{self.name} has no Killing reduction')

    def weyl_structure(self) -> WeylStructure:
        if self.kind is not Kind.METRIC3:
            raise DimensionError(
                f'{self.name} is a {self.kind} entry; Weyl structures are '
                f'declared by metric3 files'
            )
        return WeylStructure(
            g3=self.metric3(), w=self._vector, name=self.name
        ).validate()


def _check_requirements(entry: GeometryEntry, params: dict[str, float]):
    evaluator = EvalWithCompoundTypes(
        names={**CONSTANTS, **params}, functions=_rule_functions
    )
    for rule in entry.requires:
        try:
            result = evaluator.eval(rule)
        except (InvalidExpression, ArithmeticError, ValueError) as e:
            raise ParameterError(
                f'{entry.name}: cannot evaluate requirement {rule!r}: {e}'
            ) from e
        if type(result) is not bool:
            raise ParameterError(
                f'{entry.name}: requirement {rule!r} is not a comparison'
            )
        if not result:
            raise ParameterError(
                f'{entry.name}: requirement {rule!r} does not hold for '
                + ', '.join(f'{k} = {v:g}' for k, v in params.items())
            )


def _bounds(entry, coordinate, lo, hi, params) -> tuple[float, float]:
    try:
        low, high = float(evaluate(lo, params)), float(evaluate(hi, params))
    except (ArithmeticError, JetDomainError) as e:
        raise ParameterError(
            f'{entry.name}: cannot evaluate the domain of {coordinate}: {e}'
        ) from e
    if not low < high:
        raise ParameterError(
            f'{entry.name}: empty domain for {coordinate}: [{low}, {high}]'
        )
    return low, high


def _strip_comment(line: str) -> str:
    return line.split('#', 1)[0].rstrip()


def _parse_coordinates(text: str, line: int, column: int) -> tuple[str, ...]:
    parser = Parser(tokenize(text, line, column))
    names = [parser.expect('name')]
    while parser.current.kind == ',':
        parser.advance()
        names.append(parser.expect('name'))
    parser.expect_end()
    seen = set()
    for token in names:
        if token.text in seen or token.text in CONSTANTS:
            raise SemanticError(
                f'coordinate name {token.text!r} is not available',
                token.line,
                token.column,
            )
        seen.add(token.text)
    return tuple(token.text for token in names)


def _parse_parameters(
    text: str, line: int, column: int, taken: set[str]
) -> list[tuple[str, Node]]:
    parser = Parser(tokenize(text, line, column))
    result = []
    while True:
        token = parser.expect('name')
        if token.text in taken:
            raise SemanticError(
                f'parameter name {token.text!r} is already in use',
                token.line,
                token.column,
            )
        parser.expect('=')
        node = parser.expression()
        check_names(node, [name for name, _ in result])
        result.append((token.text, node))
        taken.add(token.text)
        if parser.current.kind != ',':
            break
        parser.advance()
    parser.expect_end()
    return result


def _parse_index(parser: Parser, dim: int) -> int:
    token = parser.expect('number')
    value = float(token.text)
    if not value.is_integer() or not 1 <= value <= dim:
        raise SemanticError(
            f'index {token.text} out of range 1..{dim}',
            token.line,
            token.column,
        )
    return int(value) - 1


class _MetricFileReader:
    def __init__(self, text: str, origin: str):
        self.text = text
        self.origin = origin
        self.headers: dict[str, tuple[str, int, int]] = {}
        self.requires: list[str] = []
        self.statements: list[tuple[str, int]] = []
        self.last_line = 1

    def split(self):
        for number, raw in enumerate(self.text.splitlines(), start=1):
            line = _strip_comment(raw)
            if not line.strip():
                continue
            self.last_line = number
            match = _header_pattern.match(line)
            if match is None:
                self.statements.append((line, number))
                continue
            key, value = match.group(1), match.group(2)
            column = match.start(2) + 1
            if key not in HEADERS:
                raise ParseError(
                    f'unknown header {key!r}', number, 1, HEADERS
                )
            if key == 'require':
                rule = value.strip()
                try:
                    EvalWithCompoundTypes().parse(rule)
                except SyntaxError as e:
                    raise ParseError(
                        f'invalid requirement {rule!r}', number, column
                    ) from e
                self.requires.append(rule)
            elif key in self.headers:
                raise SemanticError(f'duplicate header {key!r}', number, 1)
            else:
                self.headers[key] = (value, number, column)

    def header(self, key: str) -> tuple[str, int, int]:
        if key not in self.headers:
            raise SemanticError(
                f'missing header {key!r}', self.last_line, 1
            )
        return self.headers[key]

    def read(self) -> GeometryEntry:
        self.split()
        for key in REQUIRED_HEADERS:
            self.header(key)

        name, line, column = self.header('name')
        name = name.strip()
        if not is_identifier(name):
            raise SemanticError(f'invalid name {name!r}', line, column)

        value, line, column = self.header('kind')
        try:
            kind = Kind(value.strip())
        except ValueError:
            raise ParseError(
                f'unknown kind {value.strip()!r}',
                line,
                column,
                tuple(k.value for k in Kind),
            ) from None

        value, line, column = self.header('signature')
        try:
            signature = Signature(value.strip())
        except ValueError:
            raise ParseError(
                f'unknown signature {value.strip()!r}',
                line,
                column,
                tuple(s.value for s in Signature),
            ) from None
        if kind is Kind.METRIC3 and signature is not Signature.EUCLIDEAN:
            raise SemanticError(
                'metric3 files describe euclidean 3-metrics', line, column
            )

        coordinates = _parse_coordinates(*self.header('coordinates'))
        if len(coordinates) != kind.dim:
            _, line, column = self.header('coordinates')
            raise SemanticError(
                f'{kind} needs {kind.dim} coordinates, got {len(coordinates)}',
                line,
                column,
            )

        parameters = []
        if 'parameters' in self.headers:
            parameters = _parse_parameters(
                *self.headers['parameters'], taken=set(coordinates)
            )
        provenance = self.headers.get('provenance', ('', 0, 0))[0].strip()

        statements = _StatementReader(
            kind, coordinates, [n for n, _ in parameters], self.last_line
        )
        for text, number in self.statements:
            statements.read(text, number)
        program, domain = statements.finish()

        return GeometryEntry(
            name=name,
            kind=kind,
            signature=signature,
            coordinates=coordinates,
            parameters=tuple(parameters),
            domain=domain,
            program=program,
            requires=tuple(self.requires),
            provenance=provenance,
            origin=self.origin,
        ).validate()


class _StatementReader:
    def __init__(self, kind: Kind, coordinates, parameters, last_line: int):
        self.kind = kind
        self.coordinates = tuple(coordinates)
        self.parameters = tuple(parameters)
        self.last_line = last_line
        self.definitions: list[tuple[str, Node]] = []
        self.metric: dict[tuple[int, int], tuple[Node, int, tuple]] = {}
        self.sigma: Node | None = None
        self.vector: dict[int, Node] = {}
        self.domain: dict[str, tuple[Node, Node]] = {}

    @property
    def names(self) -> list[str]:
        return [
            *self.coordinates,
            *self.parameters,
            *(name for name, _ in self.definitions),
        ]

    def _target(self, parser: Parser):
        token = parser.expect('name')
        target = token.text
        allowed = {'let', 'g', 'domain'}
        if self.kind is Kind.KK_TRIPLE:
            allowed |= {'sigma', 'a'}
        if self.kind is Kind.METRIC3:
            allowed.add('w')
        if target not in allowed:
            raise SemanticError(
                f'{target!r} is not a statement of a {self.kind} file',
                token.line,
                token.column,
            )
        return token

    def _value(self, parser: Parser, names) -> Node:
        parser.expect('=')
        node = parser.expression()
        parser.expect_end()
        check_names(node, names)
        return node

    def read(self, text: str, line: int):
        parser = Parser(tokenize(text, line))
        token = self._target(parser)
        target = token.text

        if target == 'let':
            name = parser.expect('name')
            if name.text in self.names or name.text in CONSTANTS:
                raise SemanticError(
                    f'{name.text!r} is already defined', name.line, name.column
                )
            node = self._value(parser, self.names)
            self.definitions.append((name.text, node))
        elif target == 'sigma':
            if self.sigma is not None:
                raise SemanticError('duplicate sigma', token.line, token.column)
            self.sigma = self._value(parser, self.names)
        elif target in ('a', 'w'):
            parser.expect('[')
            i = _parse_index(parser, 3)
            parser.expect(']')
            if i in self.vector:
                raise SemanticError(
                    f'duplicate component {target}[{i + 1}]',
                    token.line,
                    token.column,
                )
            self.vector[i] = self._value(parser, self.names)
        elif target == 'g':
            self._metric(parser, token)
        else:
            self._domain(parser)

    def _metric(self, parser: Parser, token):
        dim = self.kind.dim
        parser.expect('[')
        i = _parse_index(parser, dim)
        parser.expect(',')
        j = _parse_index(parser, dim)
        parser.expect(']')
        node = self._value(parser, self.names)
        key = (min(i, j), max(i, j))
        if key in self.metric:
            previous, line, index = self.metric[key]
            if index == (i, j) or to_source(previous) != to_source(node):
                raise SemanticError(
                    f'component g[{i + 1},{j + 1}] conflicts with the '
                    f'definition on line {line}',
                    token.line,
                    token.column,
                )
        self.metric[key] = (node, token.line, (i, j))

    def _domain(self, parser: Parser):
        coordinate = parser.expect('name')
        if coordinate.text not in self.coordinates:
            raise SemanticError(
                f'unknown coordinate {coordinate.text!r}',
                coordinate.line,
                coordinate.column,
            )
        if coordinate.text in self.domain:
            raise SemanticError(
                f'duplicate domain for {coordinate.text!r}',
                coordinate.line,
                coordinate.column,
            )
        parser.expect('=')
        parser.expect('[')
        lo = parser.expression()
        parser.expect(',')
        hi = parser.expression()
        parser.expect(']')
        parser.expect_end()
        for node in (lo, hi):
            check_names(node, self.parameters)
        self.domain[coordinate.text] = (lo, hi)

    def finish(self) -> tuple[Program, tuple]:
        dim = self.kind.dim
        for i in range(dim):
            if (i, i) not in self.metric:
                raise SemanticError(
                    f'missing diagonal component g[{i + 1},{i + 1}]',
                    self.last_line,
                    1,
                )
        for coordinate in self.coordinates:
            if coordinate not in self.domain:
                raise SemanticError(
                    f'missing domain for coordinate {coordinate!r}',
                    self.last_line,
                    1,
                )
        zero = Number(0.0)
        metric = tuple(
            tuple(
                self.metric.get((min(i, j), max(i, j)), (zero,))[0]
                for j in range(dim)
            )
            for i in range(dim)
        )
        vector = None
        if self.vector:
            vector = tuple(self.vector.get(i, zero) for i in range(3))
        program = Program(
            definitions=tuple(self.definitions),
            metric=metric,
            sigma=self.sigma,
            vector=vector,
        )
        domain = tuple(
            (coordinate, *self.domain[coordinate])
            for coordinate in self.coordinates
        )
        return program, domain


def parse_metric_file(text: str, origin: str = '') -> GeometryEntry:
    """
    Parses the text of a metric file.

    Raises:
        LexicalError: An unexpected character was found.
        ParseError: A line does not follow the grammar.
        SemanticError: A name, function, index or component is invalid.
    """
    return _MetricFileReader(text, origin).read()


def read_metric_file(path: str | Path) -> GeometryEntry:
    path = Path(path)
    logger.debug('Reading metric file %s', path)
    return parse_metric_file(path.read_text(encoding='utf-8'), str(path))


def _builtin_files() -> dict[str, object]:
    root = resources.files('kkweyl.core').joinpath('geometries')
    return {
        item.name.removesuffix('.metric'): item
        for item in root.iterdir()
        if item.name.endswith('.metric')
    }


def builtin_names() -> tuple[str, ...]:
    return tuple(sorted(_builtin_files()))


@cache
def builtin(name: str) -> GeometryEntry:
    """
    Loads a builtin geometry.

    Raises:
        GeometryNotFound: There is no builtin with that name.
    """
    files = _builtin_files()
    if name not in files:
        raise GeometryNotFound(
            f'Unknown geometry {name!r}; available: '
            f'{", ".join(sorted(files))}'
        )
    text = files[name].read_text(encoding='utf-8')
    try:
        entry = parse_metric_file(text, f'builtin:{name}')
    except MetricFileError as e:
        raise MetricFileError(
            f'builtin {name}: {e.message}', e.line, e.column
        ) from e
    if entry.name != name:
        raise GeometryNotFound(
            f'Builtin file {name}.metric declares name {entry.name!r}'
        )
    return entry


__all__ = [
    'Kind',
    'Program',
    'GeometryEntry',
    'BoundGeometry',
    'parse_metric_file',
    'read_metric_file',
    'builtin_names',
    'builtin',
]
