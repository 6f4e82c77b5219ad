"""
Arithmetic expressions used by metric files.

    expression := term (('+' | '-') term)*
    term       := unary (('*' | '/') unary)*
    unary      := '-' unary | power
    power      := primary ('^' unary)?
    primary    := number | name | name '(' expression ')' | '(' expression ')'

`^` binds tighter than unary minus and associates to the right, so `-x^2` is
`-(x^2)` and `2^3^2` is `2^(3^2)`. Expressions evaluate over floats and jets
alike.
"""

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from kkweyl.core import jets
from kkweyl.core.exceptions import (
    JetDomainError,
    LexicalError,
    ParseError,
    SemanticError,
)


CONSTANTS = {'pi': math.pi}

FUNCTIONS = tuple(sorted(jets.FUNCTIONS))


_token_pattern = re.compile(
    r'(?P<space>[ \t\r]+)'
    r'|(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)'
    r'|(?P<name>[A-Za-z_][A-Za-z0-9_]*)'
    r'|(?P<symbol>[-+*/^()\[\],=:])'
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int

    def describe(self) -> str:
        if self.kind == 'end':
            return 'end of line'
        return repr(self.text)


def tokenize(text: str, line: int = 1, column: int = 1) -> list[Token]:
    """
    Splits one line of text into tokens, ending with an `end` token.

    Args:
        text (str): Source text without newlines.
        line (int): Line number reported in errors.
        column (int): Column of the first character of `text`.

    Raises:
        LexicalError: An unexpected character was found.
    """
    tokens = []
    position = 0
    while position < len(text):
        match = _token_pattern.match(text, position)
        if match is None:
            raise LexicalError(
                f'unexpected character {text[position]!r}',
                line,
                column + position,
            )
        kind = match.lastgroup
        if kind != 'space':
            value = match.group()
            tokens.append(
                Token(
                    value if kind == 'symbol' else kind,
                    value,
                    line,
                    column + position,
                )
            )
        position = match.end()
    tokens.append(Token('end', '', line, column + len(text)))
    return tokens


@dataclass(frozen=True)
class Node:
    line: int = field(default=0, compare=False, kw_only=True)
    column: int = field(default=0, compare=False, kw_only=True)


@dataclass(frozen=True)
class Number(Node):
    value: float


@dataclass(frozen=True)
class Name(Node):
    id: str


@dataclass(frozen=True)
class Unary(Node):
    op: str
    operand: Node


@dataclass(frozen=True)
class Binary(Node):
    op: str
    left: Node
    right: Node


@dataclass(frozen=True)
class Call(Node):
    function: str
    argument: Node


_primary_start = ('number', 'name', "'('", "'-'")


class Parser:
    """
    Recursive descent parser over a token list.

    The parser only consumes tokens; callers decide what may follow an
    expression.
    """

    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.position = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.position]

    def advance(self) -> Token:
        token = self.current
        if token.kind != 'end':
            self.position += 1
        return token

    def error(self, *expected: str) -> ParseError:
        token = self.current
        return ParseError(
            f'unexpected {token.describe()}',
            token.line,
            token.column,
            expected,
        )

    def expect(self, kind: str) -> Token:
        if self.current.kind != kind:
            label = kind if kind in ('number', 'name') else f"'{kind}'"
            raise self.error(label)
        return self.advance()

    def at_end(self) -> bool:
        return self.current.kind == 'end'

    def expect_end(self):
        if not self.at_end():
            raise self.error('end of line')

    def expression(self) -> Node:
        node = self.term()
        while self.current.kind in ('+', '-'):
            token = self.advance()
            node = Binary(
                token.kind,
                node,
                self.term(),
                line=token.line,
                column=token.column,
            )
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.current.kind in ('*', '/'):
            token = self.advance()
            node = Binary(
                token.kind,
                node,
                self.unary(),
                line=token.line,
                column=token.column,
            )
        return node

    def unary(self) -> Node:
        if self.current.kind == '-':
            token = self.advance()
            return Unary(
                '-', self.unary(), line=token.line, column=token.column
            )
        return self.power()

    def power(self) -> Node:
        base = self.primary()
        if self.current.kind == '^':
            token = self.advance()
            return Binary(
                '^', base, self.unary(), line=token.line, column=token.column
            )
        return base

    def primary(self) -> Node:
        token = self.current
        if token.kind == 'number':
            self.advance()
            value = float(token.text)
            if not math.isfinite(value):
                raise ParseError(
                    f'number {token.text} out of range',
                    token.line,
                    token.column,
                )
            return Number(value, line=token.line, column=token.column)
        if token.kind == 'name':
            self.advance()
            if self.current.kind == '(':
                self.advance()
                argument = self.expression()
                if self.current.kind != ')':
                    raise self.error("')'", "operator")
                self.advance()
                return Call(
                    token.text, argument, line=token.line, column=token.column
                )
            return Name(token.text, line=token.line, column=token.column)
        if token.kind == '(':
            self.advance()
            node = self.expression()
            if self.current.kind != ')':
                raise self.error("')'", 'operator')
            self.advance()
            return node
        raise self.error(*_primary_start)


def parse_expression(text: str, line: int = 1, column: int = 1) -> Node:
    """
    Parses a complete expression.

    Raises:
        LexicalError: An unexpected character was found.
        ParseError: The text is not a single well-formed expression.
    """
    parser = Parser(tokenize(text, line, column))
    node = parser.expression()
    if not parser.at_end():
        raise parser.error('operator', 'end of line')
    return node


_PRECEDENCE = {'+': 1, '-': 1, '*': 2, '/': 2}
_UNARY = 3
_POWER = 4
_ATOM = 5


def _precedence(node: Node) -> int:
    if isinstance(node, Binary):
        return _POWER if node.op == '^' else _PRECEDENCE[node.op]
    if isinstance(node, Unary):
        return _UNARY
    return _ATOM


def _wrap(node: Node, minimum: int) -> str:
    text = to_source(node)
    return f'({text})' if _precedence(node) < minimum else text


def to_source(node: Node) -> str:
    """
    Prints an expression canonically, with the fewest parentheses that
    preserve its tree.
    """
    match node:
        case Number(value=value):
            return repr(float(value))
        case Name(id=name):
            return name
        case Call(function=function, argument=argument):
            return f'{function}({to_source(argument)})'
        case Unary(operand=operand):
            return f'-{_wrap(operand, _UNARY)}'
        case Binary(op='^', left=left, right=right):
            return f'{_wrap(left, _ATOM)}^{_wrap(right, _UNARY)}'
        case Binary(op=op, left=left, right=right) if op in '+-':
            return f'{_wrap(left, 1)} {op} {_wrap(right, 2)}'
        case Binary(op=op, left=left, right=right):
            return f'{_wrap(left, 2)} {op} {_wrap(right, _UNARY)}'
    raise TypeError(f'Not an expression node: {node!r}')


def walk(node: Node) -> Iterable[Node]:
    yield node
    match node:
        case Unary(operand=operand):
            yield from walk(operand)
        case Binary(left=left, right=right):
            yield from walk(left)
            yield from walk(right)
        case Call(argument=argument):
            yield from walk(argument)


def check_names(node: Node, names: Iterable[str]):
    """
    Verifies that every name and function in `node` is known.

    Raises:
        SemanticError: An unknown name or unsupported function is used.
    """
    known = set(names) | set(CONSTANTS)
    for child in walk(node):
        if isinstance(child, Name) and child.id not in known:
            raise SemanticError(
                f'unknown name {child.id!r}', child.line, child.column
            )
        if isinstance(child, Call) and child.function not in jets.FUNCTIONS:
            raise SemanticError(
                f'unsupported function {child.function!r}, expected one of '
                f'{", ".join(FUNCTIONS)}',
                child.line,
                child.column,
            )


def _integral(value) -> int | None:
    if isinstance(value, jets.Jet):
        return None
    value = float(value)
    if value.is_integer():
        return int(value)
    return None


def _divide(left, right):
    if not isinstance(right, jets.Jet) and float(right) == 0:
        raise JetDomainError('div', 'division by zero')
    return left / right


def _power(base, exponent):
    n = _integral(exponent)
    if n is not None:
        if n < 0 and not isinstance(base, jets.Jet) and float(base) == 0:
            raise JetDomainError('div', 'zero raised to a negative power')
        return jets.pow_int(base, n)
    return jets.exp(jets.ln(base) * exponent)


def evaluate(node: Node, env: Mapping[str, object]):
    """
    Evaluates an expression over floats or jets.

    Args:
        node (Node): Parsed expression.
        env (Mapping): Values of coordinates, parameters and definitions.

    Raises:
        JetDomainError: A function was evaluated outside its domain.
    """
    match node:
        case Number(value=value):
            return value
        case Name(id=name):
            if name in env:
                return env[name]
            if name in CONSTANTS:
                return CONSTANTS[name]
            raise SemanticError(
                f'unknown name {name!r}', node.line, node.column
            )
        case Call(function=function, argument=argument):
            return jets.FUNCTIONS[function](evaluate(argument, env))
        case Unary(operand=operand):
            return -evaluate(operand, env)
        case Binary(op=op, left=left, right=right):
            a, b = evaluate(left, env), evaluate(right, env)
            if op == '+':
                return a + b
            if op == '-':
                return a - b
            if op == '*':
                return a * b
            if op == '/':
                return _divide(a, b)
            return _power(a, b)
    raise TypeError(f'Not an expression node: {node!r}')


__all__ = [
    'CONSTANTS',
    'FUNCTIONS',
    'Token',
    'tokenize',
    'Node',
    'Number',
    'Name',
    'Unary',
    'Binary',
    'Call',
    'Parser',
    'parse_expression',
    'to_source',
    'walk',
    'check_names',
    'evaluate',
]
