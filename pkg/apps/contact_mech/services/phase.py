"""
Puntos y vectores de T*Q×ℝ en coordenadas canónicas (q, p, z).
"""

from dataclasses import dataclass

import numpy as np


def _as_vector(values, n: int = None) -> np.ndarray:
    array = np.array(values, dtype=float).reshape(-1)
    if n is not None and array.shape[0] != n:
        raise ValueError(f"Se esperaban {n} componentes, se recibieron {array.shape[0]}")
    return array


@dataclass(frozen=True, eq=False)
class PhasePoint:
    """Punto (q, p, z) de T*Q×ℝ."""

    q: np.ndarray
    p: np.ndarray
    z: float

    def __post_init__(self):
        q = _as_vector(self.q)
        p = _as_vector(self.p, q.shape[0])
        if q.shape[0] < 1:
            raise ValueError("La dimensión debe ser al menos 1")
        z = float(self.z)
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p)) and np.isfinite(z)):
            raise ValueError("PhasePoint con entradas no finitas")
        object.__setattr__(self, 'q', q)
        object.__setattr__(self, 'p', p)
        object.__setattr__(self, 'z', z)

    @property
    def n(self) -> int:
        return self.q.shape[0]

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.q, self.p, [self.z]])

    @classmethod
    def from_array(cls, values) -> 'PhasePoint':
        values = _as_vector(values)
        n = (values.shape[0] - 1) // 2
        if 2 * n + 1 != values.shape[0]:
            raise ValueError(f"Longitud {values.shape[0]} no es de la forma 2n+1")
        return cls(values[:n], values[n:2 * n], values[2 * n])

    def with_momentum(self, p) -> 'PhasePoint':
        return PhasePoint(self.q, p, self.z)

    def __repr__(self):
        return f"PhasePoint(q={self.q.tolist()}, p={self.p.tolist()}, z={self.z!r})"


@dataclass(frozen=True, eq=False)
class _Components:
    """Base común de vectores y covectores: tres bloques (n, n, 1)."""

    def as_array(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def n(self) -> int:
        return (self.as_array().shape[0] - 1) // 2


@dataclass(frozen=True, eq=False)
class TangentVector(_Components):
    dq: np.ndarray
    dp: np.ndarray
    dz: float

    def __post_init__(self):
        dq = _as_vector(self.dq)
        object.__setattr__(self, 'dq', dq)
        object.__setattr__(self, 'dp', _as_vector(self.dp, dq.shape[0]))
        object.__setattr__(self, 'dz', float(self.dz))

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.dq, self.dp, [self.dz]])

    @classmethod
    def from_array(cls, values) -> 'TangentVector':
        values = _as_vector(values)
        n = (values.shape[0] - 1) // 2
        return cls(values[:n], values[n:2 * n], values[2 * n])

    def __repr__(self):
        return f"TangentVector(dq={self.dq.tolist()}, dp={self.dp.tolist()}, dz={self.dz!r})"


@dataclass(frozen=True, eq=False)
class CotangentVector(_Components):
    a_q: np.ndarray
    a_p: np.ndarray
    a_z: float

    def __post_init__(self):
        a_q = _as_vector(self.a_q)
        object.__setattr__(self, 'a_q', a_q)
        object.__setattr__(self, 'a_p', _as_vector(self.a_p, a_q.shape[0]))
        object.__setattr__(self, 'a_z', float(self.a_z))

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.a_q, self.a_p, [self.a_z]])

    @classmethod
    def from_array(cls, values) -> 'CotangentVector':
        values = _as_vector(values)
        n = (values.shape[0] - 1) // 2
        return cls(values[:n], values[n:2 * n], values[2 * n])

    def pair(self, v: TangentVector) -> float:
        """Evaluación del covector sobre un vector tangente."""
        return float(self.as_array() @ v.as_array())

    def __repr__(self):
        return f"CotangentVector(a_q={self.a_q.tolist()}, a_p={self.a_p.tolist()}, a_z={self.a_z!r})"
