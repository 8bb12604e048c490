from django.core.exceptions import ValidationError
import math
import re

from .services.phase import PhasePoint

_NAME_RE = re.compile(r'^[A-Za-z_][A-Za-z_0-9]*$')
_PROPERTY_RE = re.compile(r'^P\d+$')


def _parse_float(text: str, what: str) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ValidationError(f"{what} no es un número: {text!r}")
    if not math.isfinite(value):
        raise ValidationError(f"{what} debe ser finito: {text!r}")
    return value


def _parse_block(text: str, what: str):
    text = text.strip()
    if not text:
        return []
    return [_parse_float(part.strip(), what) for part in text.split(',')]


def validate_point(text: str, n: int) -> PhasePoint:
    """
    Valida y convierte un punto "q1,..,qn;p1,..,pn;z".
    """
    if not text:
        raise ValidationError("El punto no puede estar vacío.")
    blocks = text.split(';')
    if len(blocks) != 3:
        raise ValidationError(f"El punto debe tener la forma 'q;p;z' (se recibió {text!r}).")
    q = _parse_block(blocks[0], 'q')
    p = _parse_block(blocks[1], 'p')
    z = _parse_block(blocks[2], 'z')
    if len(q) != n or len(p) != n or len(z) != 1:
        raise ValidationError(
            f"Aridad incorrecta: se esperaban {n} valores de q, {n} de p y 1 de z "
            f"(se recibieron {len(q)}, {len(p)}, {len(z)})."
        )
    return PhasePoint(q, p, z[0])


def validate_param(text: str):
    """
    Valida un parámetro "nombre=valor".
    """
    if not text or '=' not in text:
        raise ValidationError(f"Parámetro inválido {text!r}: use nombre=valor.")
    name, value = (part.strip() for part in text.split('=', 1))
    if not _NAME_RE.match(name):
        raise ValidationError(f"Nombre de parámetro inválido: {name!r}.")
    return name, _parse_float(value, f"El parámetro {name}")


def validate_tolerance_override(text: str):
    """
    Valida una tolerancia "P7=1e-9".
    """
    if not text or '=' not in text:
        raise ValidationError(f"Tolerancia inválida {text!r}: use ID=VALOR (ej: P7=1e-9).")
    prop, value = (part.strip() for part in text.split('=', 1))
    if not _PROPERTY_RE.match(prop):
        raise ValidationError(f"Identificador de propiedad inválido: {prop!r}.")
    tolerance = _parse_float(value, f"La tolerancia de {prop}")
    if tolerance <= 0:
        raise ValidationError(f"La tolerancia de {prop} debe ser positiva.")
    return prop, tolerance


def validate_seed(value: int) -> int:
    """
    La semilla debe ser un entero no negativo.
    """
    if value < 0:
        raise ValidationError("La semilla debe ser no negativa.")
    return value
