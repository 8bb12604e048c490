"""
Campos escalares sobre T*Q×ℝ definidos por expresiones
======================================================

Este módulo implementa:

- Un parser descendente recursivo para expresiones infijas sobre
  q1..qn, p1..pn, z, parámetros con nombre y las funciones
  sin, cos, exp, log, sqrt, abs.
- Una impresión canónica (totalmente parentizada) que vuelve a parsear al
  mismo árbol.
- La abstracción ``Observable``: valor y diferencial exacto (modo directo,
  números duales) de cualquier función de (q, p, z).

Gramática:
----------
    expr   = term, { ("+" | "-"), term }
    term   = power, { ("*" | "/"), power }
    power  = unary, [ "^", power ]          (asociativa a derecha)
    unary  = "-", unary | "+", unary | atom
    atom   = número | variable | parámetro | función, "(", expr, ")" | "(", expr, ")"

El menos unario liga más fuerte que la base de ``^``: ``-x^2`` es ``(-x)^2``.
"""

import logging
import re
from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Union

import numpy as np

from . import dual
from .dual import DualScalar, Scalar
from .exceptions import (
    BadIndex,
    EmptyInput,
    MechanicalTypeViolation,
    ParseError,
    UnbalancedParen,
    UnknownIdentifier,
)
from .phase import CotangentVector, PhasePoint

logger = logging.getLogger(__name__)

ALL_VARIABLES = frozenset('qpz')


# Árbol de sintaxis ##########################################################

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    kind: str   # 'q', 'p' o 'z'
    index: int  # 1..n para q/p, 0 para z


@dataclass(frozen=True)
class Neg:
    operand: 'Expr'


@dataclass(frozen=True)
class BinOp:
    op: str
    left: 'Expr'
    right: 'Expr'


@dataclass(frozen=True)
class Call:
    func: str
    arg: 'Expr'


Expr = Union[Num, Var, Neg, BinOp, Call]


def variables_of(expr: Expr) -> FrozenSet[str]:
    """Clases de variables ({'q', 'p', 'z'}) que aparecen en la expresión."""
    if isinstance(expr, Var):
        return frozenset(expr.kind)
    if isinstance(expr, Num):
        return frozenset()
    if isinstance(expr, Neg):
        return variables_of(expr.operand)
    if isinstance(expr, Call):
        return variables_of(expr.arg)
    return variables_of(expr.left) | variables_of(expr.right)


# Tokenizador ################################################################

_TOKEN_RE = re.compile(
    r'(?P<ws>\s+)'
    r'|(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)'
    r'|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)'
    r'|(?P<op>[-+*/^()])'
)
_VARIABLE_RE = re.compile(r'^([qp])(\d+)$')


@dataclass(frozen=True)
class Token:
    kind: str     # 'number', 'ident', 'op', 'eof'
    text: str
    column: int   # 1-based


def tokenize(source: str) -> List[Token]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if not m:
            raise ParseError(f"Carácter inesperado {source[pos]!r}", column=pos + 1)
        if m.lastgroup != 'ws':
            tokens.append(Token(m.lastgroup, m.group(), pos + 1))
        pos = m.end()
    tokens.append(Token('eof', '', len(source) + 1))
    return tokens


# Parser #####################################################################

class _Parser:
    def __init__(self, source: str, n: int, params: Dict[str, float], allowed: FrozenSet[str]):
        self.tokens = tokenize(source)
        self.pos = 0
        self.n = n
        self.params = params
        self.allowed = allowed

    def look(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_close(self, opening: Token):
        tok = self.look()
        if tok.kind == 'op' and tok.text == ')':
            self.advance()
            return
        if tok.kind == 'eof':
            raise UnbalancedParen(
                f"Falta ')' para el '(' de la columna {opening.column}", column=tok.column
            )
        raise ParseError(f"Se esperaba ')' y se encontró {tok.text!r}", column=tok.column)

    def parse(self) -> Expr:
        if self.look().kind == 'eof':
            raise EmptyInput("Expresión vacía", column=1)
        tree = self.expression()
        tok = self.look()
        if tok.kind != 'eof':
            if tok.text == ')':
                raise UnbalancedParen("')' sin '(' correspondiente", column=tok.column)
            raise ParseError(f"Token inesperado {tok.text!r}", column=tok.column)
        return tree

    def expression(self) -> Expr:
        tree = self.term()
        while self.look().kind == 'op' and self.look().text in '+-':
            op = self.advance().text
            tree = BinOp(op, tree, self.term())
        return tree

    def term(self) -> Expr:
        tree = self.power()
        while self.look().kind == 'op' and self.look().text in '*/':
            op = self.advance().text
            tree = BinOp(op, tree, self.power())
        return tree

    def power(self) -> Expr:
        base = self.unary()
        if self.look().kind == 'op' and self.look().text == '^':
            self.advance()
            return BinOp('^', base, self.power())
        return base

    def unary(self) -> Expr:
        tok = self.look()
        if tok.kind == 'op' and tok.text == '-':
            self.advance()
            operand = self.unary()
            if isinstance(operand, Num):
                return Num(-operand.value)
            return Neg(operand)
        if tok.kind == 'op' and tok.text == '+':
            self.advance()
            return self.unary()
        return self.atom()

    def atom(self) -> Expr:
        tok = self.advance()
        if tok.kind == 'number':
            return Num(float(tok.text))
        if tok.kind == 'op' and tok.text == '(':
            tree = self.expression()
            self.expect_close(tok)
            return tree
        if tok.kind == 'ident':
            return self.identifier(tok)
        if tok.kind == 'eof':
            raise ParseError("Fin de expresión inesperado", column=tok.column)
        raise ParseError(f"Token inesperado {tok.text!r}", column=tok.column)

    def identifier(self, tok: Token) -> Expr:
        name = tok.text
        if name in dual.FUNCTIONS:
            opening = self.look()
            if not (opening.kind == 'op' and opening.text == '('):
                raise ParseError(f"La función {name} requiere '('", column=opening.column)
            self.advance()
            arg = self.expression()
            self.expect_close(opening)
            return Call(name, arg)
        m = _VARIABLE_RE.match(name)
        if m or name == 'z':
            kind = m.group(1) if m else 'z'
            index = int(m.group(2)) if m else 0
            if m and not 1 <= index <= self.n:
                raise BadIndex(f"Índice fuera de rango en {name} (n={self.n})", column=tok.column)
            if kind not in self.allowed:
                raise MechanicalTypeViolation(
                    f"La variable {name} no está permitida aquí (permitidas: {sorted(self.allowed)})",
                    column=tok.column,
                )
            return Var(kind, index)
        if name in self.params:
            return Num(float(self.params[name]))
        raise UnknownIdentifier(f"Identificador desconocido {name!r}", column=tok.column)


def parse_expr(
    source: str,
    n: int,
    params: Optional[Dict[str, float]] = None,
    allowed: FrozenSet[str] = ALL_VARIABLES,
) -> Expr:
    """
    Parsea una expresión escalar sobre T*Q×ℝ.

    Args:
        source: Texto de la expresión.
        n: Dimensión de Q (índices válidos 1..n).
        params: Parámetros con nombre; se sustituyen como literales.
        allowed: Clases de variables permitidas (subconjunto de {'q','p','z'}).

    Raises:
        EmptyInput, UnbalancedParen, UnknownIdentifier, BadIndex,
        MechanicalTypeViolation, ParseError
    """
    if n < 1:
        raise ValueError("La dimensión debe ser al menos 1")
    if source is None:
        raise EmptyInput("Expresión vacía", column=1)
    return _Parser(str(source), n, dict(params or {}), frozenset(allowed)).parse()


def print_expr(expr: Expr) -> str:
    """Impresión canónica: cada operación entre paréntesis."""
    if isinstance(expr, Num):
        text = repr(float(expr.value))
        return f"({text})" if expr.value < 0 or text.startswith('-') else text
    if isinstance(expr, Var):
        return 'z' if expr.kind == 'z' else f"{expr.kind}{expr.index}"
    if isinstance(expr, Neg):
        return f"(-{print_expr(expr.operand)})"
    if isinstance(expr, Call):
        return f"{expr.func}({print_expr(expr.arg)})"
    return f"({print_expr(expr.left)} {expr.op} {print_expr(expr.right)})"


# Compilación a clausuras ####################################################

Evaluator = Callable[[Sequence[Scalar], Sequence[Scalar], Scalar], Scalar]

_BINARY = {
    '+': lambda a, b: a + b,
    '-': lambda a, b: a - b,
    '*': lambda a, b: a * b,
    '/': dual.divide,
    '^': dual.power,
}


def compile_expr(expr: Expr) -> Evaluator:
    """Convierte el árbol en una clausura ``f(q, p, z)`` sobre reales o duales."""
    if isinstance(expr, Num):
        value = float(expr.value)
        return lambda q, p, z: value
    if isinstance(expr, Var):
        i = expr.index - 1
        if expr.kind == 'q':
            return lambda q, p, z: q[i]
        if expr.kind == 'p':
            return lambda q, p, z: p[i]
        return lambda q, p, z: z
    if isinstance(expr, Neg):
        inner = compile_expr(expr.operand)
        return lambda q, p, z: -inner(q, p, z)
    if isinstance(expr, Call):
        func = dual.FUNCTIONS[expr.func]
        inner = compile_expr(expr.arg)
        return lambda q, p, z: func(inner(q, p, z))
    op = _BINARY[expr.op]
    left, right = compile_expr(expr.left), compile_expr(expr.right)
    return lambda q, p, z: op(left(q, p, z), right(q, p, z))


# Observables ################################################################

class Observable:
    """
    Función escalar sobre T*Q×ℝ.

    Las subclases implementan ``jet(q, p, z)``, que debe aceptar tanto reales
    como ``DualScalar``; el diferencial se obtiene sembrando las 2n+1
    coordenadas en una sola pasada.
    """

    def __init__(self, n: int, label: str = ''):
        self.n = n
        self.label = label

    def jet(self, q: Sequence[Scalar], p: Sequence[Scalar], z: Scalar) -> Scalar:
        raise NotImplementedError

    def _check(self, x: PhasePoint):
        if x.n != self.n:
            raise ValueError(f"Punto de dimensión {x.n} para un observable de dimensión {self.n}")

    def value(self, x: PhasePoint) -> float:
        self._check(x)
        return dual.value_of(self.jet(list(x.q), list(x.p), x.z))

    def differential(self, x: PhasePoint) -> CotangentVector:
        self._check(x)
        n = self.n
        seeds = dual.seed(x.as_array())
        result = self.jet(seeds[:n], seeds[n:2 * n], seeds[2 * n])
        return CotangentVector.from_array(dual.tangent_of(result, 2 * n + 1))

    def value_and_differential(self, x: PhasePoint):
        self._check(x)
        n = self.n
        seeds = dual.seed(x.as_array())
        result = self.jet(seeds[:n], seeds[n:2 * n], seeds[2 * n])
        return dual.value_of(result), CotangentVector.from_array(dual.tangent_of(result, 2 * n + 1))

    def __repr__(self):
        return f"{self.__class__.__name__}({self.label!r})"


class ExprObservable(Observable):
    """Observable definido por una expresión parseada."""

    def __init__(self, expr: Expr, n: int, allowed: FrozenSet[str] = ALL_VARIABLES, label: str = ''):
        used = variables_of(expr)
        if not used <= frozenset(allowed):
            raise MechanicalTypeViolation(
                f"La expresión usa {sorted(used - frozenset(allowed))} fuera de {sorted(allowed)}"
            )
        super().__init__(n, label or print_expr(expr))
        self.expr = expr
        self.allowed = frozenset(allowed)
        self._evaluate = compile_expr(expr)

    def jet(self, q, p, z):
        return self._evaluate(q, p, z)


class ConstantObservable(Observable):
    def __init__(self, n: int, constant: float):
        super().__init__(n, repr(float(constant)))
        self.constant = float(constant)

    def jet(self, q, p, z):
        return self.constant


def observable(
    source: str,
    n: int,
    params: Optional[Dict[str, float]] = None,
    allowed: FrozenSet[str] = ALL_VARIABLES,
) -> ExprObservable:
    """Atajo: parsea ``source`` y devuelve el observable correspondiente."""
    expr = parse_expr(source, n, params, allowed)
    return ExprObservable(expr, n, allowed, label=source.strip())


def evaluate(f: Observable, x: PhasePoint) -> float:
    return f.value(x)


def differential(f: Observable, x: PhasePoint) -> CotangentVector:
    return f.differential(x)


def finite_difference_differential(f: Observable, x: PhasePoint, step: float = 1e-6) -> CotangentVector:
    """Diferencial por diferencias centrales con paso h = step·(1+|x_i|)."""
    base = x.as_array()
    grad = np.zeros_like(base)
    for i in range(base.shape[0]):
        h = step * (1.0 + abs(base[i]))
        forward, backward = base.copy(), base.copy()
        forward[i] += h
        backward[i] -= h
        grad[i] = (f.value(PhasePoint.from_array(forward)) - f.value(PhasePoint.from_array(backward))) / (2.0 * h)
    return CotangentVector.from_array(grad)


def random_polynomial(
    rng: np.random.Generator,
    n: int,
    terms: int = 4,
    max_degree: int = 2,
    allowed: FrozenSet[str] = ALL_VARIABLES,
) -> ExprObservable:
    """
    Polinomio aleatorio en las variables permitidas, construido como texto y
    parseado (así el parser también queda ejercitado).
    """
    names = []
    if 'q' in allowed:
        names += [f"q{i}" for i in range(1, n + 1)]
    if 'p' in allowed:
        names += [f"p{i}" for i in range(1, n + 1)]
    if 'z' in allowed:
        names.append('z')
    pieces = [repr(round(float(rng.uniform(-1.0, 1.0)), 3))]
    for _ in range(terms):
        coeff = round(float(rng.uniform(-1.0, 1.0)), 3)
        factors = [repr(coeff)]
        for _ in range(int(rng.integers(1, max_degree + 1))):
            factors.append(names[int(rng.integers(0, len(names)))])
        pieces.append('*'.join(factors))
    return observable(' + '.join(pieces), n, allowed=allowed)
