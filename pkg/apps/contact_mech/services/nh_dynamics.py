"""
Dinámica hamiltoniana de contacto con restricciones no holónomas
================================================================

El campo restringido X_{H,M} se construye por dos vías independientes:

- ``multipliers``: ṗ = −H_q − p H_z − λ_a Φ^a, con λ elegido para que
  d/dt(Φ g⁻¹ p) = 0 (sistema k×k SPD resuelto con Cholesky).
- ``pushforward``: Tγ aplicado a X_H, es decir
  dp′ = P·dp + (∂P/∂q^j · dq^j)·p.

Ambas coinciden sobre M×ℝ. La integración usa RK4 de paso fijo (o RK45
adaptativo de scipy) y registra diagnósticos en cada paso.
"""

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from . import dual
from .contact_core import defining_residual, field_from_differential, hamiltonian_field
from .exceptions import NotOnConstraint, RankDeficient, StepFailure
from .exprfield import Observable
from .mech_system import MEMBERSHIP_TOL, MechanicalSystem
from .phase import PhasePoint, TangentVector

logger = logging.getLogger(__name__)

SNAP_TOL = 1e-6


class Route(str, enum.Enum):
    MULTIPLIERS = 'multipliers'
    PUSHFORWARD = 'pushforward'


class FieldKind(str, enum.Enum):
    FREE = 'free'
    CONSTRAINED = 'constrained'


def require_on_constraint(system: MechanicalSystem, x: PhasePoint, tol: float = MEMBERSHIP_TOL) -> None:
    """Lanza NotOnConstraint si |Φ g⁻¹ p|∞ > tol."""
    residual = system.constraint_residual(x)
    if residual > tol:
        raise NotOnConstraint(
            f"El punto no está en M×ℝ: |Φg⁻¹p|∞ = {residual:.3e} > {tol:.1e}",
            residual=residual,
        )


def multipliers(
    system: MechanicalSystem,
    H: Observable,
    x: PhasePoint,
    tol: float = MEMBERSHIP_TOL,
    check: bool = True,
) -> np.ndarray:
    """
    λ = A⁻¹ [J_q(Φ g⁻¹ p)·H_p + Φ g⁻¹ b], con A = Φ g⁻¹ Φᵀ y b = −H_q − p H_z.

    Raises:
        NotOnConstraint: x fuera de M×ℝ (si ``check``).
        RankDeficient: A no es definida positiva.
    """
    if system.k == 0:
        return np.zeros(0)
    if check:
        require_on_constraint(system, x, tol)
    _, dh = H.value_and_differential(x)
    return _multipliers_from_differential(system, x, dh)


def _multipliers_from_differential(system, x, dh) -> np.ndarray:
    n = system.n
    values = system.momentum_constraint_jet(dual.seed(x.q), list(x.p))
    jacobian = np.array([dual.tangent_of(v, n) for v in values])
    b = -dh.a_q - x.p * dh.a_z
    phi = system.constraints_at(x.q)
    w = system.legendre_sharp(x.q, phi.T)
    a = phi @ w
    try:
        factor = cho_factor(a, lower=True)
    except (LinAlgError, ValueError) as exc:
        raise RankDeficient(f"Φ g⁻¹ Φᵀ singular en q={x.q.tolist()}", x.q) from exc
    return cho_solve(factor, jacobian @ dh.a_p + w.T @ b)


def constrained_field_multipliers(
    system: MechanicalSystem,
    H: Observable,
    x: PhasePoint,
    tol: float = MEMBERSHIP_TOL,
    check: bool = True,
) -> TangentVector:
    """dq = H_p; dp = −H_q − p H_z − Φᵀλ; dz = p·H_p − H."""
    if check:
        require_on_constraint(system, x, tol)
    h, dh = H.value_and_differential(x)
    v = field_from_differential(x, h, dh)
    if system.k == 0:
        return v
    lam = _multipliers_from_differential(system, x, dh)
    phi = system.constraints_at(x.q)
    return TangentVector(v.dq, v.dp - phi.T @ lam, v.dz)


def constrained_field_pushforward(
    system: MechanicalSystem,
    H: Observable,
    x: PhasePoint,
    tol: float = MEMBERSHIP_TOL,
    check: bool = True,
) -> TangentVector:
    """Tγ(X_H): dp′_i = P_il dp_l + ∂_j P_il dq^j p_l."""
    if check:
        require_on_constraint(system, x, tol)
    v = hamiltonian_field(H, x)
    if system.k == 0:
        return v
    projector = system.projector(x.q)
    dp = projector.P @ v.dp + np.einsum('ilj,j,l->i', projector.dP, v.dq, x.p)
    return TangentVector(v.dq, dp, v.dz)


_ROUTES = {
    Route.MULTIPLIERS: constrained_field_multipliers,
    Route.PUSHFORWARD: constrained_field_pushforward,
}


def constrained_field(
    system: MechanicalSystem,
    H: Observable,
    x: PhasePoint,
    route: Route = Route.MULTIPLIERS,
    tol: float = MEMBERSHIP_TOL,
    check: bool = True,
) -> TangentVector:
    """X_{H,M}(x) por la vía indicada."""
    return _ROUTES[Route(route)](system, H, x, tol=tol, check=check)


class HamiltonianField:
    """Campo libre X_H (sin restricciones)."""

    kind = FieldKind.FREE

    def __init__(self, system: MechanicalSystem, H: Observable):
        self.system = system
        self.H = H

    @property
    def constrained(self) -> bool:
        return self.kind == FieldKind.CONSTRAINED

    def __call__(self, x: PhasePoint, check: bool = True) -> TangentVector:
        return hamiltonian_field(self.H, x)

    def __repr__(self):
        return f"{self.__class__.__name__}({self.system.name!r})"


class ConstrainedField(HamiltonianField):
    """X_{H,M} por la vía elegida."""

    kind = FieldKind.CONSTRAINED

    def __init__(self, system: MechanicalSystem, H: Observable, route: Route = Route.MULTIPLIERS,
                 tol: float = MEMBERSHIP_TOL):
        super().__init__(system, H)
        self.route = Route(route)
        self.tol = tol

    def __call__(self, x: PhasePoint, check: bool = True) -> TangentVector:
        return constrained_field(self.system, self.H, x, self.route, self.tol, check)

    def __repr__(self):
        return f"ConstrainedField({self.system.name!r}, route={self.route.value})"


def make_field(
    kind,
    system: MechanicalSystem,
    H: Observable,
    route: Route = Route.MULTIPLIERS,
    tol: float = MEMBERSHIP_TOL,
) -> HamiltonianField:
    if FieldKind(kind) == FieldKind.CONSTRAINED:
        return ConstrainedField(system, H, route, tol)
    return HamiltonianField(system, H)


@dataclass
class Trajectory:
    """Estados muestreados y diagnósticos por paso."""

    system: MechanicalSystem
    times: np.ndarray
    states: List[PhasePoint]
    hamiltonian: np.ndarray
    constraint_values: np.ndarray       # N×k, Φ g⁻¹ p con signo
    constraint_residual: np.ndarray     # |Φ g⁻¹ p|∞
    dissipation_residual: np.ndarray    # X(H) + H·H_z
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.states)

    @property
    def final(self) -> PhasePoint:
        return self.states[-1]

    def state_matrix(self) -> np.ndarray:
        return np.array([x.as_array() for x in self.states])

    def columns(self) -> List[str]:
        n, k = self.system.n, self.system.k
        return (
            ['t']
            + [f"q{i}" for i in range(1, n + 1)]
            + [f"p{i}" for i in range(1, n + 1)]
            + ['z', 'H']
            + [f"phi{a}" for a in range(1, k + 1)]
        )

    def to_frame(self) -> pd.DataFrame:
        data = np.column_stack([
            self.times,
            self.state_matrix(),
            self.hamiltonian,
            self.constraint_values.reshape(len(self), self.system.k),
        ])
        return pd.DataFrame(data, columns=self.columns())

    def summary(self) -> dict:
        return {
            'steps': len(self) - 1,
            'final_H': float(self.hamiltonian[-1]),
            'max_constraint_residual': float(np.max(self.constraint_residual)),
            'max_dissipation_residual': float(np.max(np.abs(self.dissipation_residual))),
        }


def _time_grid(t1: float, dt: float) -> np.ndarray:
    if not (dt > 0.0 and math.isfinite(dt)):
        raise ValueError(f"dt debe ser positivo y finito (dt={dt})")
    if not (t1 > 0.0 and math.isfinite(t1)):
        raise ValueError(f"t1 debe ser positivo y finito (t1={t1})")
    steps = max(1, int(math.ceil(t1 / dt - 1e-9)))
    times = np.arange(steps + 1, dtype=float) * dt
    times[-1] = t1
    return times


def _rk4_step(rhs, y: np.ndarray, h: float) -> np.ndarray:
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * h * k1)
    k3 = rhs(y + 0.5 * h * k2)
    k4 = rhs(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _prepare_initial(field_: HamiltonianField, x0: PhasePoint, snap_tol: float) -> PhasePoint:
    if not field_.constrained:
        return x0
    system = field_.system
    residual = system.constraint_residual(x0)
    if residual <= field_.tol:
        return x0
    if residual <= snap_tol:
        logger.warning(f"Condición inicial proyectada sobre M×ℝ (residuo {residual:.3e})")
        return system.project_point(x0)
    raise NotOnConstraint(
        f"La condición inicial está fuera de M×ℝ: residuo {residual:.3e} > {snap_tol:.1e}",
        residual=residual,
    )


def integrate(
    field_: HamiltonianField,
    x0: PhasePoint,
    t1: float,
    dt: float,
    reproject: bool = False,
    method: str = 'rk4',
    snap_tol: float = SNAP_TOL,
) -> Trajectory:
    """
    Integra el campo desde x0 hasta t1.

    Args:
        field_: ``HamiltonianField`` o ``ConstrainedField``.
        reproject: p ← P(q) p tras cada paso (solo campo restringido, solo rk4).
        method: ``'rk4'`` (paso fijo) o ``'rk45'`` (adaptativo, salida en la
            misma malla).
        snap_tol: condiciones iniciales con residuo ≤ snap_tol se proyectan.

    Raises:
        NotOnConstraint, StepFailure
    """
    system = field_.system
    times = _time_grid(t1, dt)
    x0 = _prepare_initial(field_, x0, snap_tol)
    reproject = reproject and field_.constrained

    def rhs(y):
        try:
            x = PhasePoint.from_array(y)
        except ValueError as exc:
            raise StepFailure("Estado no finito durante una etapa", t=None) from exc
        return field_(x, check=False).as_array()

    if method == 'rk4':
        rows = [x0.as_array()]
        y = rows[0]
        for i in range(1, len(times)):
            h = times[i] - times[i - 1]
            try:
                y = _rk4_step(rhs, y, h)
            except StepFailure as exc:
                raise StepFailure(f"Fallo de paso en t={times[i - 1]:.6g}", t=float(times[i - 1])) from exc
            if not np.all(np.isfinite(y)):
                raise StepFailure(f"Estado no finito en t={times[i]:.6g}", t=float(times[i]))
            if reproject:
                y = system.project_point(PhasePoint.from_array(y)).as_array()
            rows.append(y)
    elif method == 'rk45':
        solution = solve_ivp(
            lambda t, y: rhs(y), (0.0, float(times[-1])), x0.as_array(),
            method='RK45', t_eval=times, rtol=1e-10, atol=1e-12,
        )
        if not solution.success or solution.y.shape[1] != len(times):
            raise StepFailure(f"RK45 falló: {solution.message}", t=float(solution.t[-1]) if solution.t.size else 0.0)
        rows = list(solution.y.T)
        if not np.all(np.isfinite(solution.y)):
            raise StepFailure("Estado no finito en RK45")
    else:
        raise ValueError(f"Método de integración desconocido: {method}")

    trajectory = _diagnose(field_, times, [PhasePoint.from_array(r) for r in rows])
    trajectory.metadata.update({
        'field': field_.kind.value,
        'route': getattr(field_, 'route', None) and field_.route.value,
        'method': method,
        'reproject': reproject,
        'dt': dt,
    })
    logger.debug(f"Trayectoria integrada: {len(times) - 1} pasos, {trajectory.summary()}")
    return trajectory


def _diagnose(field_: HamiltonianField, times: np.ndarray, states: List[PhasePoint]) -> Trajectory:
    system, H = field_.system, field_.H
    energies, values, residuals, dissipation = [], [], [], []
    for x in states:
        h, dh = H.value_and_differential(x)
        phi = system.constraint_values(x)
        energies.append(h)
        values.append(phi)
        residuals.append(float(np.max(np.abs(phi))) if phi.size else 0.0)
        dissipation.append(dh.pair(field_(x, check=False)) + h * dh.a_z)
    return Trajectory(
        system=system,
        times=times,
        states=states,
        hamiltonian=np.array(energies),
        constraint_values=np.array(values, dtype=float).reshape(len(states), system.k),
        constraint_residual=np.array(residuals),
        dissipation_residual=np.array(dissipation),
    )


@dataclass(frozen=True)
class ConstraintDefect:
    """♭(X_{H,M}) − dH + (H + ℛ(H))η descompuesto por bloques."""

    a_q: np.ndarray
    a_p: np.ndarray
    a_z: float
    coefficients: np.ndarray   # c con Φᵀc ≈ a_q
    rowspace_residual: float   # |a_q − Φᵀc|∞

    @property
    def residual(self) -> float:
        """Distancia total a span{Φ^a dq}."""
        return max(self.rowspace_residual, float(np.max(np.abs(self.a_p), initial=0.0)), abs(self.a_z))


def constraint_defect(
    system: MechanicalSystem,
    H: Observable,
    x: PhasePoint,
    route: Route = Route.MULTIPLIERS,
    tol: float = MEMBERSHIP_TOL,
) -> ConstraintDefect:
    v = constrained_field(system, H, x, route, tol)
    h, dh = H.value_and_differential(x)
    r = defining_residual(x, v, h, dh)
    n = system.n
    a_q, a_p, a_z = r[:n], r[n:2 * n], float(r[2 * n])
    if system.k:
        phi = system.constraints_at(x.q)
        coefficients = np.linalg.lstsq(phi.T, a_q, rcond=None)[0]
        rest = a_q - phi.T @ coefficients
    else:
        coefficients, rest = np.zeros(0), a_q
    return ConstraintDefect(a_q, a_p, a_z, coefficients, float(np.max(np.abs(rest))))
