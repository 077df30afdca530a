"""
Recursive descent parser for vector field component expressions.

Grammar:

    expression := term (('+' | '-') term)*
    term       := unary (('*' | '/') unary)*
    unary      := ('-' | '+') unary | power
    power      := atom ('^' unary)?
    atom       := NUMBER | NAME | NAME '(' expression ')' | '(' expression ')'

`^` binds tighter than unary minus and is right associative, so `-x^2`
is `-(x^2)` and `2^-1` is `0.5`. Names resolve to chart coordinates, to
field parameters, or to the constants `pi` and `e`. Functions: sin, cos, exp.

Syntax trees evaluate on numpy arrays, so one parse serves every batch of
points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence, Union

import numpy as np

from energyforge.errors import ExpressionSyntaxError, SpecError

FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
CONSTANTS = {"pi": math.pi, "e": math.e}

Value = Union[float, np.ndarray]


class Token:
    """Lexical token with its 0-based column."""

    number = "number"
    name = "name"
    operator = "operator"
    left_paren = "("
    right_paren = ")"
    eof = "eof"

    def __init__(self, typ: str, text: str, column: int):
        self.typ = typ
        self.text = text
        self.column = column

    def __repr__(self):
        return f"Token({self.typ}, {self.text!r}, {self.column})"


def tokenize(text: str) -> List[Token]:
    tokens: List[Token] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < len(text) and text[i + 1].isdigit()):
            start = i
            while i < len(text) and (text[i].isdigit() or text[i] == "."):
                i += 1
            # exponent part: 1e-3, 2.5E+4
            if i < len(text) and text[i] in "eE":
                j = i + 1
                if j < len(text) and text[j] in "+-":
                    j += 1
                if j < len(text) and text[j].isdigit():
                    i = j
                    while i < len(text) and text[i].isdigit():
                        i += 1
            literal = text[start:i]
            try:
                float(literal)
            except ValueError:
                raise ExpressionSyntaxError(f"malformed number {literal!r}", start, text) from None
            tokens.append(Token(Token.number, literal, start))
            continue
        if ch.isalpha() or ch == "_":
            start = i
            while i < len(text) and (text[i].isalnum() or text[i] == "_"):
                i += 1
            tokens.append(Token(Token.name, text[start:i], start))
            continue
        if ch in "+-*/^":
            tokens.append(Token(Token.operator, ch, i))
        elif ch == "(":
            tokens.append(Token(Token.left_paren, ch, i))
        elif ch == ")":
            tokens.append(Token(Token.right_paren, ch, i))
        else:
            raise ExpressionSyntaxError(f"unexpected character {ch!r}", i, text)
        i += 1
    tokens.append(Token(Token.eof, "", len(text)))
    return tokens


# ── Syntax tree ────────────────────────────────────────────────


@dataclass(frozen=True)
class Number:
    value: float

    def evaluate(self, env: Mapping[str, Value]) -> Value:
        return self.value

    def names(self) -> set:
        return set()


@dataclass(frozen=True)
class Name:
    name: str
    column: int

    def evaluate(self, env: Mapping[str, Value]) -> Value:
        return env[self.name]

    def names(self) -> set:
        return {self.name}


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Node"

    def evaluate(self, env: Mapping[str, Value]) -> Value:
        value = self.operand.evaluate(env)
        return -value if self.op == "-" else value

    def names(self) -> set:
        return self.operand.names()


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"

    def evaluate(self, env: Mapping[str, Value]) -> Value:
        a = self.left.evaluate(env)
        b = self.right.evaluate(env)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if self.op == "/":
            return a / b
        return np.power(a, b)

    def names(self) -> set:
        return self.left.names() | self.right.names()


@dataclass(frozen=True)
class Call:
    function: str
    argument: "Node"

    def evaluate(self, env: Mapping[str, Value]) -> Value:
        return FUNCTIONS[self.function](self.argument.evaluate(env))

    def names(self) -> set:
        return self.argument.names()


Node = Union[Number, Name, Unary, Binary, Call]


class Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.pos = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def _advance(self) -> Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def _fail(self, message: str) -> None:
        raise ExpressionSyntaxError(message, self.current.column, self.text)

    def parse(self) -> Node:
        if self.current.typ == Token.eof:
            self._fail("empty expression")
        node = self.expression()
        if self.current.typ != Token.eof:
            self._fail(f"unexpected {self.current.text!r}")
        return node

    def expression(self) -> Node:
        node = self.term()
        while self.current.typ == Token.operator and self.current.text in "+-":
            op = self._advance().text
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.current.typ == Token.operator and self.current.text in "*/":
            op = self._advance().text
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.current.typ == Token.operator and self.current.text in "+-":
            op = self._advance().text
            return Unary(op, self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.current.typ == Token.operator and self.current.text == "^":
            self._advance()
            return Binary("^", base, self.unary())
        return base

    def atom(self) -> Node:
        token = self.current
        if token.typ == Token.number:
            self._advance()
            return Number(float(token.text))
        if token.typ == Token.name:
            self._advance()
            if self.current.typ == Token.left_paren:
                if token.text not in FUNCTIONS:
                    raise ExpressionSyntaxError(f"unknown function {token.text!r}", token.column, self.text)
                self._advance()
                argument = self.expression()
                self._expect_right_paren()
                return Call(token.text, argument)
            return Name(token.text, token.column)
        if token.typ == Token.left_paren:
            self._advance()
            node = self.expression()
            self._expect_right_paren()
            return node
        if token.typ == Token.eof:
            self._fail("unexpected end of expression")
        self._fail(f"unexpected {token.text!r}")

    def _expect_right_paren(self) -> None:
        if self.current.typ != Token.right_paren:
            self._fail("expected ')'")
        self._advance()


def parse_expression(text: str) -> Node:
    return Parser(text).parse()


def split_components(expressions: Sequence[str]) -> List[str]:
    """Flatten a list of strings into component expressions.

    Each string may hold several comma-separated components, so both
    ["x*0.6931", "-y*0.6931"] and ["x*0.6931, -y*0.6931"] give two components.
    """
    components: List[str] = []
    for text in expressions:
        components.extend(part.strip() for part in str(text).split(","))
    return components


@dataclass(frozen=True)
class CompiledComponents:
    """Parsed components of one chart of a vector field."""

    sources: tuple
    trees: tuple
    coordinates: tuple
    parameters: tuple

    @property
    def dimension(self) -> int:
        return len(self.trees)

    def evaluate(self, coords: np.ndarray) -> np.ndarray:
        """Evaluate all components at points coords of shape (m, n)."""
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        env: Dict[str, Value] = dict(CONSTANTS)
        env.update(dict(self.parameters))
        for k, name in enumerate(self.coordinates):
            env[name] = coords[:, k]
        out = np.empty((coords.shape[0], len(self.trees)))
        for k, tree in enumerate(self.trees):
            out[:, k] = np.broadcast_to(tree.evaluate(env), (coords.shape[0],))
        return out


def compile_components(
    expressions: Sequence[str],
    coordinates: Sequence[str],
    parameters: Mapping[str, float] | None = None,
) -> CompiledComponents:
    """Parse component expressions and check every name resolves.

    Raises:
        ExpressionSyntaxError: on malformed input, with the failing column.
        SpecError: on an unknown identifier or a component count that does
            not match the number of coordinates.
    """
    parameters = dict(parameters or {})
    known = set(coordinates) | set(parameters) | set(CONSTANTS)
    sources = split_components(expressions)
    trees = []
    for text in sources:
        tree = parse_expression(text)
        unknown = sorted(tree.names() - known)
        if unknown:
            raise SpecError(f"unknown identifier {unknown[0]!r} in expression {text!r}")
        trees.append(tree)
    if len(trees) != len(coordinates):
        raise SpecError(
            f"expected {len(coordinates)} component(s) for coordinates {list(coordinates)}, "
            f"got {len(trees)}: {sources!r}"
        )
    return CompiledComponents(
        sources=tuple(sources),
        trees=tuple(trees),
        coordinates=tuple(coordinates),
        parameters=tuple(sorted((str(k), float(v)) for k, v in parameters.items())),
    )
