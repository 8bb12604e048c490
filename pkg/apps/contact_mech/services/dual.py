"""
Números duales de primer orden y álgebra lineal diferenciada.

``DualScalar`` lleva un valor y un vector tangente completo (una entrada por
dirección activa), de modo que una sola evaluación entrega el diferencial
entero. ``Jet`` es la versión matricial: un arreglo de valores más un arreglo
de tangentes con un eje final extra, suficiente para diferenciar la inversión
de la métrica y el ensamblado del proyector.
"""

import math
from dataclasses import dataclass
from typing import Callable, List, Sequence, Union

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .exceptions import DomainError, NumericalError


class DualScalar:
    """Escalar dual ``value + tangent·ε`` con ε² = 0."""

    __slots__ = ('value', 'tangent')
    # los escalares de numpy deben delegar en __radd__/__rmul__
    __array_ufunc__ = None

    def __init__(self, value: float, tangent):
        self.value = float(value)
        self.tangent = np.asarray(tangent, dtype=float)

    def __repr__(self):
        return f"DualScalar({self.value!r}, {self.tangent!r})"

    def __add__(self, other):
        if isinstance(other, DualScalar):
            return DualScalar(self.value + other.value, self.tangent + other.tangent)
        return DualScalar(self.value + other, self.tangent)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, DualScalar):
            return DualScalar(self.value - other.value, self.tangent - other.tangent)
        return DualScalar(self.value - other, self.tangent)

    def __rsub__(self, other):
        return DualScalar(other - self.value, -self.tangent)

    def __mul__(self, other):
        if isinstance(other, DualScalar):
            return DualScalar(
                self.value * other.value,
                self.value * other.tangent + other.value * self.tangent,
            )
        return DualScalar(self.value * other, self.tangent * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return divide(self, other)

    def __rtruediv__(self, other):
        return divide(other, self)

    def __neg__(self):
        return DualScalar(-self.value, -self.tangent)

    def __pos__(self):
        return self

    def __pow__(self, other):
        return power(self, other)

    def __rpow__(self, other):
        return power(other, self)

    def __abs__(self):
        return fabs(self)


Scalar = Union[float, DualScalar]


def value_of(x: Scalar) -> float:
    return x.value if isinstance(x, DualScalar) else float(x)


def width_of(values) -> int:
    """Ancho del tangente del primer dual encontrado (0 si todo es real)."""
    for v in values:
        if isinstance(v, DualScalar):
            return v.tangent.shape[0]
    return 0


def tangent_of(x: Scalar, width: int) -> np.ndarray:
    if isinstance(x, DualScalar):
        return x.tangent
    return np.zeros(width)


def seed(values: Sequence[float]) -> List[DualScalar]:
    """Variables independientes: el i-ésimo dual lleva el i-ésimo vector canónico."""
    eye = np.eye(len(values))
    return [DualScalar(v, eye[i]) for i, v in enumerate(values)]


def _is_constant(x: Scalar) -> bool:
    return not isinstance(x, DualScalar) or not np.any(x.tangent)


def divide(a: Scalar, b: Scalar) -> Scalar:
    bv = value_of(b)
    if bv == 0.0:
        raise DomainError("División por cero")
    if not isinstance(a, DualScalar) and not isinstance(b, DualScalar):
        return float(a) / bv
    av = value_of(a)
    width = width_of((a, b))
    tangent = (tangent_of(a, width) * bv - av * tangent_of(b, width)) / (bv * bv)
    return DualScalar(av / bv, tangent)


def _real_power(base: float, exponent: float) -> float:
    if base < 0.0 and not float(exponent).is_integer():
        raise DomainError(f"Potencia no real: ({base})^{exponent}")
    if base == 0.0 and exponent < 0.0:
        raise DomainError("División por cero en potencia negativa")
    try:
        return math.pow(base, exponent)
    except OverflowError as exc:
        raise DomainError(f"Desbordamiento en ({base})^{exponent}") from exc


def power(a: Scalar, b: Scalar) -> Scalar:
    if not isinstance(a, DualScalar) and not isinstance(b, DualScalar):
        return _real_power(float(a), float(b))
    av, bv = value_of(a), value_of(b)
    if _is_constant(b):
        # exponente constante: d(a^c) = c·a^(c-1)·da
        value = _real_power(av, bv)
        if bv == 0.0:
            return DualScalar(value, np.zeros(width_of((a, b))))
        if av == 0.0 and bv < 1.0:
            raise DomainError("Derivada no acotada de la potencia en 0")
        slope = bv * _real_power(av, bv - 1.0)
        return DualScalar(value, slope * tangent_of(a, width_of((a, b))))
    if av <= 0.0:
        raise DomainError(f"Potencia con exponente variable y base no positiva ({av})")
    return exp(b * log(a))


def sin(x: Scalar) -> Scalar:
    if isinstance(x, DualScalar):
        return DualScalar(math.sin(x.value), math.cos(x.value) * x.tangent)
    return math.sin(x)


def cos(x: Scalar) -> Scalar:
    if isinstance(x, DualScalar):
        return DualScalar(math.cos(x.value), -math.sin(x.value) * x.tangent)
    return math.cos(x)


def exp(x: Scalar) -> Scalar:
    try:
        value = math.exp(value_of(x))
    except OverflowError as exc:
        raise DomainError(f"Desbordamiento en exp({value_of(x)})") from exc
    if isinstance(x, DualScalar):
        return DualScalar(value, value * x.tangent)
    return value


def log(x: Scalar) -> Scalar:
    v = value_of(x)
    if v <= 0.0:
        raise DomainError(f"log de argumento no positivo ({v})")
    if isinstance(x, DualScalar):
        return DualScalar(math.log(v), x.tangent / v)
    return math.log(v)


def sqrt(x: Scalar) -> Scalar:
    v = value_of(x)
    if v < 0.0:
        raise DomainError(f"sqrt de argumento negativo ({v})")
    root = math.sqrt(v)
    if isinstance(x, DualScalar):
        if root == 0.0:
            raise DomainError("Derivada no acotada de sqrt en 0")
        return DualScalar(root, x.tangent / (2.0 * root))
    return root


def fabs(x: Scalar) -> Scalar:
    if isinstance(x, DualScalar):
        sign = math.copysign(1.0, x.value) if x.value != 0.0 else 0.0
        return DualScalar(abs(x.value), sign * x.tangent)
    return abs(x)


FUNCTIONS = {
    'sin': sin,
    'cos': cos,
    'exp': exp,
    'log': log,
    'sqrt': sqrt,
    'abs': fabs,
}


@dataclass(frozen=True, eq=False)
class Jet:
    """Arreglo de valores con sus tangentes (``tangent.shape == value.shape + (width,)``)."""

    value: np.ndarray
    tangent: np.ndarray

    @property
    def width(self) -> int:
        return self.tangent.shape[-1]

    @property
    def shape(self):
        return self.value.shape

    @classmethod
    def constant(cls, value, width: int = 0) -> 'Jet':
        value = np.asarray(value, dtype=float)
        return cls(value, np.zeros(value.shape + (width,)))

    @classmethod
    def from_scalars(cls, rows: Sequence[Sequence[Scalar]]) -> 'Jet':
        """Construye un Jet 2-D desde una matriz (lista de filas) de escalares."""
        flat = [entry for row in rows for entry in row]
        width = width_of(flat)
        n_rows = len(rows)
        n_cols = len(rows[0]) if n_rows else 0
        value = np.array([value_of(e) for e in flat], dtype=float).reshape(n_rows, n_cols)
        tangent = np.array(
            [tangent_of(e, width) for e in flat], dtype=float
        ).reshape(n_rows, n_cols, width)
        return cls(value, tangent)

    @classmethod
    def column(cls, entries: Sequence[Scalar]) -> 'Jet':
        return cls.from_scalars([[e] for e in entries])

    def widen(self, width: int) -> 'Jet':
        if self.width == width:
            return self
        if self.width != 0:
            raise ValueError(f"Anchos de tangente incompatibles: {self.width} vs {width}")
        return Jet(self.value, np.zeros(self.value.shape + (width,)))

    def entry(self, i: int, j: int = 0) -> Scalar:
        if self.width == 0:
            return float(self.value[i, j])
        return DualScalar(self.value[i, j], self.tangent[i, j])

    def item(self) -> Scalar:
        return self.entry(0, 0)

    def column_entries(self, j: int = 0) -> List[Scalar]:
        return [self.entry(i, j) for i in range(self.value.shape[0])]

    def transpose(self) -> 'Jet':
        return Jet(self.value.T, np.transpose(self.tangent, (1, 0, 2)))

    def __matmul__(self, other: 'Jet') -> 'Jet':
        a, b = _align(self, other)
        value = a.value @ b.value
        tangent = np.einsum('ijt,jk->ikt', a.tangent, b.value) + np.einsum('ij,jkt->ikt', a.value, b.tangent)
        return Jet(value, tangent)

    def __add__(self, other: 'Jet') -> 'Jet':
        a, b = _align(self, other)
        return Jet(a.value + b.value, a.tangent + b.tangent)

    def __sub__(self, other: 'Jet') -> 'Jet':
        a, b = _align(self, other)
        return Jet(a.value - b.value, a.tangent - b.tangent)

    def scale(self, factor: float) -> 'Jet':
        return Jet(self.value * factor, self.tangent * factor)


def _align(a: Jet, b: Jet):
    width = max(a.width, b.width)
    return a.widen(width), b.widen(width)


def identity(n: int, width: int = 0) -> Jet:
    return Jet.constant(np.eye(n), width)


def solve_spd(a: Jet, b: Jet, on_failure: Callable[[], NumericalError]) -> Jet:
    """
    Resuelve ``A X = B`` con A simétrica definida positiva (Cholesky).

    Tangente: dX = A⁻¹ (dB − dA·X).

    Args:
        a: Jet n×n.
        b: Jet n×m.
        on_failure: fábrica de la excepción a lanzar si Cholesky falla.
    """
    a, b = _align(a, b)
    try:
        factor = cho_factor(a.value, lower=True, check_finite=True)
    except (LinAlgError, ValueError) as exc:
        raise on_failure() from exc
    x = cho_solve(factor, b.value)
    if a.width == 0:
        return Jet(x, np.zeros(x.shape + (0,)))
    n, m = x.shape
    rhs = b.tangent - np.einsum('ijt,jk->ikt', a.tangent, x)
    dx = cho_solve(factor, rhs.reshape(n, m * a.width)).reshape(n, m, a.width)
    return Jet(x, dx)
