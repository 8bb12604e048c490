"""
Corchete de Eden de contacto y observables restringidos.

{f, g}_E = {f∘γ, g∘γ} restringido a M×ℝ. Aquí viven también la condición
mecánica (Φ^a_i ∂f/∂p_i = 0 sobre M), los Casimires construidos a partir de
las funciones de restricción y la evolución de observables bajo X_{H,M}.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from scipy.linalg import null_space

from .contact_core import contact_bracket, sharp
from .dual import Jet
from .exprfield import Observable
from .mech_system import MEMBERSHIP_TOL, MechanicalSystem
from .nh_dynamics import Route, constrained_field, require_on_constraint
from .phase import CotangentVector, PhasePoint

logger = logging.getLogger(__name__)

MECHANICAL_TOL = 1e-8


class ComposedObservable(Observable):
    """f∘Γ, con Γ(q, p, z) = (q, P(q) p, z)."""

    def __init__(self, system: MechanicalSystem, base: Observable):
        super().__init__(system.n, f"{base.label}∘γ")
        self.system = system
        self.base = base

    def jet(self, q, p, z):
        projected = (self.system.projector_jet(q) @ Jet.column(p)).column_entries()
        return self.base.jet(q, projected, z)


def compose_with_gamma(system: MechanicalSystem, f: Observable) -> ComposedObservable:
    return ComposedObservable(system, f)


def eden_bracket(
    system: MechanicalSystem,
    f: Observable,
    g: Observable,
    x: PhasePoint,
    tol: float = MEMBERSHIP_TOL,
) -> float:
    """
    {f, g}_E(x) = {f∘Γ, g∘Γ}(x).

    Raises:
        NotOnConstraint: x fuera de M×ℝ; no se proyecta en silencio.
    """
    require_on_constraint(system, x, tol)
    return contact_bracket(compose_with_gamma(system, f), compose_with_gamma(system, g), x)


def lifted_distribution(system: MechanicalSystem, x: PhasePoint) -> np.ndarray:
    """Base (columnas) de 𝔇ˡ = {v : Φ(q) v_q = 0} ⊂ T(T*Q×ℝ)."""
    n, k = system.n, system.k
    if k == 0:
        return np.eye(2 * n + 1)
    rows = np.hstack([system.constraints_at(x.q), np.zeros((k, n + 1))])
    return null_space(rows)


def constraint_left_complement(system: MechanicalSystem, x: PhasePoint) -> np.ndarray:
    """
    ⊥ˡ𝔇ˡ = ♯(span{Φ^a_i dq^i}): una columna por restricción, con
    v_q = 0, v_z = 0 y v_p = −Φ^a.
    """
    n = system.n
    phi = system.constraints_at(x.q)
    columns = [
        sharp(x, CotangentVector(row, np.zeros(n), 0.0)).as_array()
        for row in phi
    ]
    return np.array(columns).T if columns else np.zeros((2 * n + 1, 0))


def mechanical_residual(
    system: MechanicalSystem,
    f: Observable,
    x: PhasePoint,
    definitional: bool = False,
) -> float:
    """
    max_a |Φ^a_i ∂f/∂p_i| en x.

    Con ``definitional=True`` se evalúa df sobre la base de ⊥ˡ𝔇ˡ, que da el
    mismo número.
    """
    if system.k == 0:
        return 0.0
    df = f.differential(x)
    if definitional:
        return float(np.max(np.abs(df.as_array() @ constraint_left_complement(system, x))))
    return float(np.max(np.abs(system.constraints_at(x.q) @ df.a_p)))


@dataclass(frozen=True)
class MechanicalSubspaceTag:
    verdict: bool
    residual: float
    samples: int
    tolerance: float


def mechanical_condition(
    system: MechanicalSystem,
    f: Observable,
    samples: Union[int, Iterable[PhasePoint]] = 100,
    tol: float = MECHANICAL_TOL,
    rng: Optional[np.random.Generator] = None,
) -> MechanicalSubspaceTag:
    """
    Comprueba la condición mecánica sobre puntos de M×ℝ.

    Args:
        samples: número de puntos a muestrear o puntos explícitos (se
            proyectan sobre M×ℝ antes de evaluar).
    """
    if isinstance(samples, int):
        rng = rng if rng is not None else np.random.default_rng(0)
        points = [system.sample_constrained_point(rng) for _ in range(samples)]
    else:
        points = [system.project_point(x) for x in samples]
    residual = max((mechanical_residual(system, f, x) for x in points), default=0.0)
    verdict = residual < tol
    if not verdict:
        logger.debug(f"{f.label} no cumple la condición mecánica (residuo {residual:.3e})")
    return MechanicalSubspaceTag(verdict, residual, len(points), tol)


def constrained_evolution(
    system: MechanicalSystem,
    H: Observable,
    f: Observable,
    x: PhasePoint,
    route: Route = Route.MULTIPLIERS,
    tol: float = MEMBERSHIP_TOL,
) -> float:
    """X_{H,M}(f)(x) = ⟨df, X_{H,M}(x)⟩."""
    field_value = constrained_field(system, H, x, route, tol)
    return f.differential(x).pair(field_value)


class CasimirObservable(Observable):
    """Σ_a φ^a h_a + c. Su composición con Γ es la constante c."""

    def __init__(self, system: MechanicalSystem, hs: Sequence[Observable], const: float = 0.0):
        if len(hs) != system.k:
            raise ValueError(f"Se esperaban {system.k} factores h_a, se recibieron {len(hs)}")
        labels = ' + '.join(f"phi{a + 1}*({h.label})" for a, h in enumerate(hs)) or '0'
        super().__init__(system.n, f"{labels} + {const!r}")
        self.system = system
        self.hs = list(hs)
        self.const = float(const)

    def jet(self, q, p, z):
        total = self.const
        for phi, h in zip(self.system.momentum_constraint_jet(q, p), self.hs):
            total = total + phi * h.jet(q, p, z)
        return total


def casimir_observable(system: MechanicalSystem, hs: Sequence[Observable], const: float = 0.0) -> CasimirObservable:
    return CasimirObservable(system, hs, const)


class MechanicalObservable(Observable):
    """f = (P(q) c(q))ᵀ g(q)⁻¹ p + h(q, z); cumple Φ ∂f/∂p ≡ 0."""

    def __init__(self, system: MechanicalSystem, c: Sequence[Observable], h: Observable):
        if len(c) != system.n:
            raise ValueError(f"c debe tener {system.n} componentes")
        super().__init__(system.n, f"mech[{', '.join(ci.label for ci in c)}; {h.label}]")
        self.system = system
        self.c = list(c)
        self.h = h

    def jet(self, q, p, z):
        column = Jet.column([ci.jet(q, p, z) for ci in self.c])
        covector = self.system.projector_jet(q) @ column
        return (covector.transpose() @ self.system.velocity_jet(q, p)).item() + self.h.jet(q, p, z)


def mechanical_observable(system: MechanicalSystem, c: Sequence[Observable], h: Observable) -> MechanicalObservable:
    return MechanicalObservable(system, c, h)


class MechanicalFunction(Observable):
    """
    f = F(q, m_1(x), ..., m_r(x), z) con m_a mecánicos y r ≤ n.

    ``outer`` es un observable de dimensión n cuyas ranuras p_a reciben m_a
    (las sobrantes valen 0). Si los m_a cumplen Φ ∂m_a/∂p ≡ 0, f también,
    aunque sea no lineal en p.
    """

    def __init__(self, system: MechanicalSystem, outer: Observable, parts: Sequence[Observable]):
        if outer.n != system.n:
            raise ValueError(f"outer debe tener dimensión {system.n}")
        if not 1 <= len(parts) <= system.n:
            raise ValueError(f"Se esperaban entre 1 y {system.n} observables mecánicos, se recibieron {len(parts)}")
        labels = ', '.join(m.label for m in parts)
        super().__init__(system.n, f"{outer.label} | p <- ({labels})")
        self.system = system
        self.outer = outer
        self.parts = list(parts)

    def jet(self, q, p, z):
        slots = [m.jet(q, p, z) for m in self.parts]
        slots += [0.0] * (self.n - len(slots))
        return self.outer.jet(q, slots, z)


def mechanical_function(
    system: MechanicalSystem, outer: Observable, parts: Sequence[Observable]
) -> MechanicalFunction:
    return MechanicalFunction(system, outer, parts)
