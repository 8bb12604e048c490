"""
Excepciones del dominio.

Todas las capas (parser, geometría, dinámica) lanzan subclases de
``ContactMechError``; los comandos de gestión las traducen a códigos de
salida.
"""

from typing import Optional, Sequence

from django.core.exceptions import ValidationError


class ContactMechError(Exception):
    """Excepción base del paquete."""
    pass


class ExpressionError(ContactMechError):
    """Error asociado a una expresión escalar."""

    def __init__(self, message: str, column: Optional[int] = None):
        self.column = column
        if column is not None:
            message = f"{message} (columna {column})"
        super().__init__(message)


class ParseError(ExpressionError):
    """Error de sintaxis genérico."""
    pass


class UnbalancedParen(ParseError):
    pass


class UnknownIdentifier(ParseError):
    pass


class BadIndex(ParseError):
    """Índice de variable fuera de 1..n (ej: q0)."""
    pass


class EmptyInput(ParseError):
    pass


class MechanicalTypeViolation(ParseError):
    """La expresión usa una variable prohibida (ej: p en la métrica)."""
    pass


class NumericalError(ContactMechError):
    """Fallo numérico durante una evaluación."""
    pass


class DomainError(NumericalError):
    """log/sqrt de negativo, división por cero, potencia no real."""
    pass


class NotSPD(NumericalError):
    """La métrica no es simétrica definida positiva en q."""

    def __init__(self, message: str, q: Optional[Sequence[float]] = None):
        self.q = None if q is None else [float(v) for v in q]
        super().__init__(message)


class RankDeficient(NumericalError):
    """Las filas de Φ(q) no son linealmente independientes."""

    def __init__(self, message: str, q: Optional[Sequence[float]] = None):
        self.q = None if q is None else [float(v) for v in q]
        super().__init__(message)


class StepFailure(NumericalError):
    """El integrador produjo un estado no finito."""

    def __init__(self, message: str, t: Optional[float] = None):
        self.t = t
        super().__init__(message)


class NotOnConstraint(ContactMechError):
    """El punto no pertenece a M×ℝ dentro de la tolerancia."""

    def __init__(self, message: str, residual: float = float('nan')):
        self.residual = residual
        super().__init__(message)


class ConfigError(ValidationError):
    """Configuración de sistema inválida."""
    pass
