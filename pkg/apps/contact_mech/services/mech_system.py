"""
Sistemas de tipo mecánico con restricciones no holónomas lineales
=================================================================

Un sistema queda dado por:

- una métrica g(q) simétrica definida positiva (entradas solo en q),
- un potencial V(q, z),
- una matriz de restricciones Φ(q) de k×n (entradas solo en q, rango k < n).

A partir de ellos se construyen el hamiltoniano H = ½ pᵀg⁻¹p + V, la
variedad de momentos restringidos M = {Φ g⁻¹ p = 0} y el proyector
P = I − Φᵀ A⁻¹ Φ g⁻¹ (A = Φ g⁻¹ Φᵀ), cuyo rango es M y cuyo núcleo es
ann 𝒟 = span{filas de Φ}. Todo el ensamblado pasa por ``dual.Jet``, así
que ∂P/∂q sale exacto.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ..serializers import SystemConfigSerializer
from . import dual
from .catalog import merge_config
from .dual import Jet, Scalar
from .exceptions import ConfigError, NotSPD, RankDeficient
from .exprfield import ConstantObservable, Observable, observable
from .phase import PhasePoint

logger = logging.getLogger(__name__)

MEMBERSHIP_TOL = 1e-9
FD_STEP = 1e-6
DEFAULT_BOX = (-1.0, 1.0)
DEFAULT_VALIDATION_SAMPLES = 32
VALIDATION_SEED = 0

Q_ONLY = frozenset('q')
Q_AND_Z = frozenset('qz')


@dataclass(frozen=True, eq=False)
class ProjectorAtQ:
    """P(q) y su derivada, con ``dP[i, l, j] = ∂P_il/∂q^j``."""

    q: np.ndarray
    P: np.ndarray
    dP: np.ndarray

    def apply(self, p) -> np.ndarray:
        return self.P @ np.asarray(p, dtype=float)


class MechanicalSystem:
    """
    Descripción inmutable de un sistema mecánico restringido.

    Los métodos que reciben listas de escalares (``*_jet``) aceptan reales o
    ``DualScalar``; son la base de la diferenciación exacta de H, de las
    funciones de restricción y de f∘Γ.
    """

    def __init__(
        self,
        n: int,
        metric: Sequence[Sequence[Observable]],
        potential: Observable,
        constraints: Sequence[Sequence[Observable]],
        params: Optional[Dict[str, float]] = None,
        sample_box: Optional[np.ndarray] = None,
        name: str = 'custom',
    ):
        self.n = n
        self.metric = [list(row) for row in metric]
        self.potential = potential
        self.constraints = [list(row) for row in constraints]
        self.params = dict(params or {})
        if sample_box is None:
            sample_box = np.tile(DEFAULT_BOX, (n, 1))
        self.sample_box = np.asarray(sample_box, dtype=float)
        self.name = name

    def __repr__(self):
        return f"MechanicalSystem({self.name!r}, n={self.n}, k={self.k})"

    @property
    def k(self) -> int:
        return len(self.constraints)

    # Bloques con jets ###################################################

    def _placeholders(self):
        return [0.0] * self.n, 0.0

    def metric_jet(self, q: Sequence[Scalar]) -> Jet:
        p0, z0 = self._placeholders()
        return Jet.from_scalars([[entry.jet(q, p0, z0) for entry in row] for row in self.metric])

    def constraint_jet(self, q: Sequence[Scalar]) -> Jet:
        if self.k == 0:
            width = dual.width_of(q)
            return Jet(np.zeros((0, self.n)), np.zeros((0, self.n, width)))
        p0, z0 = self._placeholders()
        return Jet.from_scalars([[entry.jet(q, p0, z0) for entry in row] for row in self.constraints])

    def _not_spd(self, q):
        return lambda: NotSPD(f"La métrica no es definida positiva en q={_values(q)}", _values(q))

    def _rank_deficient(self, q):
        return lambda: RankDeficient(f"Φ(q) no tiene rango completo en q={_values(q)}", _values(q))

    def velocity_jet(self, q: Sequence[Scalar], p: Sequence[Scalar]) -> Jet:
        """g(q)⁻¹ p como columna."""
        return dual.solve_spd(self.metric_jet(q), Jet.column(p), self._not_spd(q))

    def momentum_constraint_jet(self, q: Sequence[Scalar], p: Sequence[Scalar]) -> List[Scalar]:
        """Componentes de Φ(q) g(q)⁻¹ p."""
        if self.k == 0:
            return []
        return (self.constraint_jet(q) @ self.velocity_jet(q, p)).column_entries()

    def projector_jet(self, q: Sequence[Scalar]) -> Jet:
        """P = I − Φᵀ A⁻¹ Φ g⁻¹ ensamblado sobre jets."""
        width = dual.width_of(q)
        identity = dual.identity(self.n, width)
        if self.k == 0:
            return identity
        g = self.metric_jet(q)
        phi = self.constraint_jet(q)
        w = dual.solve_spd(g, phi.transpose(), self._not_spd(q))
        a = phi @ w
        y = dual.solve_spd(a, w.transpose(), self._rank_deficient(q))
        return identity - phi.transpose() @ y

    def kinetic_jet(self, q: Sequence[Scalar], p: Sequence[Scalar]) -> Scalar:
        column = Jet.column(p)
        return (column.transpose() @ self.velocity_jet(q, p)).scale(0.5).item()

    # Operaciones numéricas ##############################################

    def metric_at(self, q) -> np.ndarray:
        return self.metric_jet(list(np.asarray(q, dtype=float))).value

    def constraints_at(self, q) -> np.ndarray:
        return self.constraint_jet(list(np.asarray(q, dtype=float))).value

    def _factor(self, q):
        try:
            return cho_factor(self.metric_at(q), lower=True)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise self._not_spd(list(q))() from exc

    def hamiltonian(self) -> 'HamiltonianFn':
        return HamiltonianFn(self)

    def legendre_flat(self, q, v) -> np.ndarray:
        """p = g(q) v."""
        return self.metric_at(q) @ np.asarray(v, dtype=float)

    def legendre_sharp(self, q, p) -> np.ndarray:
        """v = g(q)⁻¹ p."""
        return cho_solve(self._factor(q), np.asarray(p, dtype=float))

    def constraint_values(self, x: PhasePoint) -> np.ndarray:
        """Φ(q) g(q)⁻¹ p."""
        if self.k == 0:
            return np.zeros(0)
        return self.constraints_at(x.q) @ self.legendre_sharp(x.q, x.p)

    def constraint_residual(self, x: PhasePoint) -> float:
        values = self.constraint_values(x)
        return float(np.max(np.abs(values))) if values.size else 0.0

    def in_constraint_manifold(self, x: PhasePoint, tol: float = MEMBERSHIP_TOL) -> bool:
        return self.constraint_residual(x) <= tol

    def projector(self, q, method: str = 'ad') -> ProjectorAtQ:
        """
        P(q) y ∂P/∂q.

        Args:
            method: ``'ad'`` (números duales a través del ensamblado) o
                ``'fd'`` (diferencias centrales con h = 1e-6).

        Raises:
            NotSPD, RankDeficient
        """
        q = np.asarray(q, dtype=float)
        if method == 'ad':
            jet = self.projector_jet(dual.seed(q))
            return ProjectorAtQ(q, jet.value, jet.tangent)
        if method == 'fd':
            P = self.projector_jet(list(q)).value
            dP = np.zeros((self.n, self.n, self.n))
            for j in range(self.n):
                forward, backward = q.copy(), q.copy()
                forward[j] += FD_STEP
                backward[j] -= FD_STEP
                dP[:, :, j] = (
                    self.projector_jet(list(forward)).value - self.projector_jet(list(backward)).value
                ) / (2.0 * FD_STEP)
            return ProjectorAtQ(q, P, dP)
        raise ValueError(f"Método de proyector desconocido: {method}")

    def project_point(self, x: PhasePoint) -> PhasePoint:
        """γ(q, p, z) = (q, P(q) p, z)."""
        return x.with_momentum(self.projector(x.q).apply(x.p))

    def constraint_functions(self) -> List['ConstraintFunction']:
        """Observables φ^a(q, p) = (Φ g⁻¹ p)_a."""
        return [ConstraintFunction(self, a) for a in range(self.k)]

    # Lado lagrangiano ###################################################

    def lagrangian(self, q, v, z) -> float:
        """L(q, v, z) = ½ vᵀ g v − V(q, z)."""
        v = np.asarray(v, dtype=float)
        return float(0.5 * v @ self.legendre_flat(q, v)) - self._potential(q, z)

    def energy(self, q, v, z) -> float:
        """E_L = ½ vᵀ g v + V(q, z)."""
        v = np.asarray(v, dtype=float)
        return float(0.5 * v @ self.legendre_flat(q, v)) + self._potential(q, z)

    def legendre_map(self, q, v, z) -> PhasePoint:
        """FL(q, v, z) = (q, g(q) v, z)."""
        return PhasePoint(q, self.legendre_flat(q, v), z)

    def _potential(self, q, z) -> float:
        return dual.value_of(self.potential.jet(list(np.asarray(q, dtype=float)), [0.0] * self.n, float(z)))

    # Muestreo ###########################################################

    def sample_q(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.sample_box[:, 0], self.sample_box[:, 1])

    def sample_point(self, rng: np.random.Generator) -> PhasePoint:
        q = self.sample_q(rng)
        p = rng.standard_normal(self.n)
        z = rng.uniform(-1.0, 1.0)
        return PhasePoint(q, p, z)

    def sample_constrained_point(self, rng: np.random.Generator) -> PhasePoint:
        return self.project_point(self.sample_point(rng))

    def validate(self, samples: int = DEFAULT_VALIDATION_SAMPLES, seed: int = VALIDATION_SEED) -> None:
        """
        Comprueba simetría/Cholesky de g y rango completo de Φ en ``samples``
        puntos de la caja.

        Raises:
            NotSPD, RankDeficient
        """
        rng = np.random.default_rng(seed)
        for _ in range(samples):
            q = self.sample_q(rng)
            g = self.metric_at(q)
            if not np.allclose(g, g.T, rtol=0.0, atol=1e-12 * (1.0 + np.max(np.abs(g)))):
                raise NotSPD(f"La métrica no es simétrica en q={q.tolist()}", q)
            self._factor(q)
            if self.k:
                phi = self.constraints_at(q)
                if np.linalg.matrix_rank(phi) < self.k:
                    raise RankDeficient(f"Φ(q) tiene rango {np.linalg.matrix_rank(phi)} < {self.k} en q={q.tolist()}", q)
        logger.debug(f"Sistema {self.name} validado en {samples} puntos")


class HamiltonianFn(Observable):
    """H(q, p, z) = ½ pᵀ g(q)⁻¹ p + V(q, z)."""

    def __init__(self, system: MechanicalSystem):
        super().__init__(system.n, 'H')
        self.system = system

    def jet(self, q, p, z):
        return self.system.kinetic_jet(q, p) + self.system.potential.jet(q, p, z)


class ConstraintFunction(Observable):
    """φ^a(q, p) = (Φ(q) g(q)⁻¹ p)_a."""

    def __init__(self, system: MechanicalSystem, index: int):
        super().__init__(system.n, f"phi{index + 1}")
        self.system = system
        self.index = index

    def jet(self, q, p, z):
        return self.system.momentum_constraint_jet(q, p)[self.index]


def _values(q) -> List[float]:
    return [dual.value_of(v) for v in q]


def _sample_box(box, n: int) -> np.ndarray:
    if box is None:
        return np.tile(DEFAULT_BOX, (n, 1))
    if box and isinstance(box[0], (list, tuple)):
        if len(box) != n:
            raise ConfigError(f"sample_box necesita {n} cajas, tiene {len(box)}")
        return np.asarray(box, dtype=float)
    return np.tile(np.asarray(box, dtype=float), (n, 1))


def _metric_entries(metric, n: int, params: Dict[str, float]) -> List[List[Observable]]:
    if metric == 'identity':
        return [[ConstantObservable(n, 1.0 if i == j else 0.0) for j in range(n)] for i in range(n)]
    kind, entries = next(iter(metric.items()))
    if kind == 'diagonal':
        diagonal = [observable(e, n, params, Q_ONLY) for e in entries]
        return [[diagonal[i] if i == j else ConstantObservable(n, 0.0) for j in range(n)] for i in range(n)]
    return [[observable(e, n, params, Q_ONLY) for e in row] for row in entries]


def build_system(
    config: dict,
    validation_samples: int = DEFAULT_VALIDATION_SAMPLES,
) -> MechanicalSystem:
    """
    Construye y valida un sistema a partir de un SystemConfig (dict JSON).

    Raises:
        ConfigError: el JSON no respeta el esquema.
        ParseError (y subclases): alguna expresión no parsea o usa variables
            prohibidas (MechanicalTypeViolation).
        NotSPD, RankDeficient: fallo en la validación muestreada.
    """
    serializer = SystemConfigSerializer(data=config)
    if not serializer.is_valid():
        raise ConfigError(serializer.errors)
    merged = merge_config(dict(serializer.validated_data))
    n = int(merged['dimension'])
    params = dict(merged.get('parameters') or {})
    name = merged.get('template', 'custom')

    metric = _metric_entries(merged.get('metric', 'identity'), n, params)
    potential = observable(merged.get('potential') or '0', n, params, Q_AND_Z)
    constraints = [[observable(e, n, params, Q_ONLY) for e in row] for row in merged.get('constraints') or []]
    if len(constraints) >= n:
        raise ConfigError(f"Se requieren k < n restricciones (k={len(constraints)}, n={n})")

    system = MechanicalSystem(
        n, metric, potential, constraints, params,
        sample_box=_sample_box(merged.get('sample_box'), n),
        name=name,
    )
    system.validate(validation_samples)
    logger.info(f"Sistema construido: {system!r} parámetros={params}")
    return system
