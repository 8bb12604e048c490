"""
Estructura de contacto canónica de T*Q×ℝ
========================================

Forma de contacto η = dz − p_i dq^i, campo de Reeb ∂/∂z, el tensor
ω = dη + η⊗η, los isomorfismos ♭/♯, campos hamiltonianos de contacto y el
corchete de Jacobi canónico.

Convención de coordenadas: los vectores y covectores se ordenan como
(q_1..q_n, p_1..p_n, z). Con esa convención dη = dq^i ∧ dp_i.
"""

import logging

import numpy as np
from scipy.linalg import null_space

from . import dual
from .exprfield import Observable, finite_difference_differential
from .phase import CotangentVector, PhasePoint, TangentVector

logger = logging.getLogger(__name__)

SHARP_ROUTE = 'sharp'
COORDINATE_ROUTE = 'coordinates'


def eta_at(x: PhasePoint) -> CotangentVector:
    """η_Q en x: (a_q = −p, a_p = 0, a_z = 1)."""
    return CotangentVector(-x.p, np.zeros(x.n), 1.0)


def reeb(n: int) -> TangentVector:
    """ℛ_Q = ∂/∂z."""
    return TangentVector(np.zeros(n), np.zeros(n), 1.0)


def flat_matrix(x: PhasePoint) -> np.ndarray:
    """
    Matriz (2n+1)×(2n+1) de ♭_Q en x, de modo que ♭(v) = M·v.

    Con s = dz − p·dq: a_q = −dp − s·p, a_p = dq, a_z = s.
    """
    n, p = x.n, x.p
    m = np.zeros((2 * n + 1, 2 * n + 1))
    m[:n, :n] = np.outer(p, p)
    m[:n, n:2 * n] = -np.eye(n)
    m[:n, 2 * n] = -p
    m[n:2 * n, :n] = np.eye(n)
    m[2 * n, :n] = -p
    m[2 * n, 2 * n] = 1.0
    return m


def flat(x: PhasePoint, v: TangentVector) -> CotangentVector:
    """♭_Q(v) = ι_v dη + η(v) η."""
    return CotangentVector.from_array(flat_matrix(x) @ v.as_array())


def sharp(x: PhasePoint, a: CotangentVector) -> TangentVector:
    """♯_Q = ♭_Q⁻¹ en forma cerrada."""
    dq = a.a_p
    return TangentVector(dq, -a.a_q - a.a_z * x.p, a.a_z + x.p @ dq)


def sharp_by_solve(x: PhasePoint, a: CotangentVector) -> TangentVector:
    """♯_Q por resolución lineal de la matriz de ♭ (control cruzado)."""
    return TangentVector.from_array(np.linalg.solve(flat_matrix(x), a.as_array()))


def d_eta(u: TangentVector, v: TangentVector) -> float:
    """dη(u, v) = u_q·v_p − u_p·v_q."""
    return float(u.dq @ v.dp - u.dp @ v.dq)


def omega(x: PhasePoint, u: TangentVector, v: TangentVector) -> float:
    """ω_Q(u, v) = ♭_Q(u)(v), con ω_Q = dη + η⊗η."""
    return flat(x, u).pair(v)


def field_from_differential(x: PhasePoint, h: float, dh: CotangentVector) -> TangentVector:
    """X_H a partir del valor y del diferencial de H en x."""
    return TangentVector(
        dh.a_p,
        -dh.a_q - x.p * dh.a_z,
        float(x.p @ dh.a_p) - h,
    )


def hamiltonian_field(H: Observable, x: PhasePoint) -> TangentVector:
    """
    Campo hamiltoniano de contacto X_H:
    dq = H_p, dp = −H_q − p·H_z, dz = p·H_p − H.
    """
    h, dh = H.value_and_differential(x)
    return field_from_differential(x, h, dh)


def defining_residual(x: PhasePoint, v: TangentVector, h: float, dh: CotangentVector) -> np.ndarray:
    """♭(v) − dH + (ℛ(H) + H)·η; se anula exactamente cuando v = X_H."""
    return flat(x, v).as_array() - dh.as_array() + (dh.a_z + h) * eta_at(x).as_array()


def evolution(H: Observable, f: Observable, x: PhasePoint) -> float:
    """X_H(f) = ⟨df, X_H⟩."""
    return f.differential(x).pair(hamiltonian_field(H, x))


def bracket_from_differentials(
    x: PhasePoint,
    f: float,
    df: CotangentVector,
    g: float,
    dg: CotangentVector,
    route: str = SHARP_ROUTE,
) -> float:
    """
    Corchete de contacto a partir de valores y diferenciales.

    Ruta ``sharp``: −dη(♯df, ♯dg) − f ℛ(g) + g ℛ(f).
    Ruta ``coordinates``: f_p·g_q − f_q·g_p − (p·g_p) f_z + (p·f_p) g_z − f g_z + g f_z.
    """
    if route == SHARP_ROUTE:
        return -d_eta(sharp(x, df), sharp(x, dg)) - f * dg.a_z + g * df.a_z
    if route == COORDINATE_ROUTE:
        p = x.p
        return float(
            df.a_p @ dg.a_q - df.a_q @ dg.a_p
            - (p @ dg.a_p) * df.a_z + (p @ df.a_p) * dg.a_z
            - f * dg.a_z + g * df.a_z
        )
    raise ValueError(f"Ruta de corchete desconocida: {route}")


def contact_bracket(f: Observable, g: Observable, x: PhasePoint, route: str = SHARP_ROUTE) -> float:
    """Corchete de Jacobi canónico {f, g}(x)."""
    fv, df = f.value_and_differential(x)
    gv, dg = g.value_and_differential(x)
    return bracket_from_differentials(x, fv, df, gv, dg, route)


def right_orthogonal(x: PhasePoint, basis: np.ndarray) -> np.ndarray:
    """
    Complemento ortogonal derecho {v : ω(w, v) = 0 ∀ w ∈ S} = ann(♭S).

    Args:
        basis: matriz (2n+1)×r cuyas columnas generan S.

    Returns:
        Matriz cuyas columnas son una base ortonormal del complemento.
    """
    images = flat_matrix(x) @ basis
    return null_space(images.T)


def left_orthogonal(x: PhasePoint, basis: np.ndarray) -> np.ndarray:
    """Complemento ortogonal izquierdo {v : ω(v, w) = 0 ∀ w ∈ S} = ♭⁻¹(ann S)."""
    return null_space(basis.T @ flat_matrix(x))


class BracketObservable(Observable):
    """
    {f, g} como observable.

    El valor sale por AD; el diferencial por diferencias centrales de esos
    valores (solo se usa para comprobar la identidad de Jacobi).
    """

    def __init__(self, f: Observable, g: Observable, step: float = 1e-6):
        super().__init__(f.n, f"{{{f.label}, {g.label}}}")
        self.f = f
        self.g = g
        self.step = step

    def jet(self, q, p, z):
        if dual.width_of(list(q) + list(p) + [z]):
            raise TypeError("BracketObservable no admite entradas duales")
        return contact_bracket(self.f, self.g, PhasePoint(q, p, z))

    def differential(self, x: PhasePoint) -> CotangentVector:
        return finite_difference_differential(self, x, self.step)

    def value_and_differential(self, x: PhasePoint):
        return self.value(x), self.differential(x)


def jacobi_identity_residual(f: Observable, g: Observable, h: Observable, x: PhasePoint) -> float:
    """{f,{g,h}} + {g,{h,f}} + {h,{f,g}} en x (diferencias finitas sobre AD)."""
    return (
        contact_bracket(f, BracketObservable(g, h), x)
        + contact_bracket(g, BracketObservable(h, f), x)
        + contact_bracket(h, BracketObservable(f, g), x)
    )
