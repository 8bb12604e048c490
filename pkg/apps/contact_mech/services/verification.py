"""
Servicio de Verificación de Propiedades
=======================================

Evalúa numéricamente cada identidad de la teoría sobre puntos muestreados
de un sistema y arma un informe JSON determinista:

- P1–P6: estructura de contacto (isomorfismos, Reeb, X_H, evolución,
  disipación, corchete).
- P7–P11: proyector γ, ecuaciones de compatibilidad y campo restringido.
- P12–P14: corchete de Eden (Casimires, evolución, subespacio mecánico).
- P15: identidad de Jacobi del corchete de contacto (tolerancia relajada,
  diferencias finitas sobre AD).

Cada propiedad usa su propio generador ``default_rng([seed, índice])``, así
que el resultado no depende del orden de evaluación ni del número de hilos.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np
from django.conf import settings

from .contact_core import (
    bracket_from_differentials,
    contact_bracket,
    d_eta,
    defining_residual,
    eta_at,
    evolution,
    flat,
    hamiltonian_field,
    jacobi_identity_residual,
    reeb,
    sharp,
    COORDINATE_ROUTE,
)
from .eden import (
    casimir_observable,
    compose_with_gamma,
    constrained_evolution,
    eden_bracket,
    mechanical_function,
    mechanical_observable,
    mechanical_residual,
)
from .exceptions import ConfigError, NotOnConstraint
from .exprfield import random_polynomial
from .mech_system import MechanicalSystem, Q_AND_Z, Q_ONLY
from .nh_dynamics import (
    constrained_field,
    constrained_field_multipliers,
    constrained_field_pushforward,
    constraint_defect,
)
from .phase import CotangentVector, TangentVector

logger = logging.getLogger(__name__)

JACOBI_MAX_SAMPLES = 20
POLYNOMIAL_POOL = 10


@dataclass(frozen=True)
class PropertyDefinition:
    property_id: str
    description: str
    anchor: str
    tolerance: float
    check: str            # nombre del método de VerificationService
    max_samples: Optional[int] = None


PROPERTIES: List[PropertyDefinition] = [
    PropertyDefinition(
        'P1', "♯∘♭ = id y ♭∘♯ = id", "♭_Q es la contracción de ω_Q = dη + η⊗η", 1e-12, '_check_isomorphism',
    ),
    PropertyDefinition(
        'P2', "♭(ℛ) = η, η(ℛ) = 1, ι_ℛ dη = 0", "ℛ_Q = ∂/∂z es el campo de Reeb", 1e-12, '_check_reeb',
    ),
    PropertyDefinition(
        'P3', "♭(X_H) − dH + (ℛ(H)+H)η = 0 y η(X_H) = −H",
        "X_H está definido por ♭(X_H) = dH − (ℛ(H)+H)η", 1e-9, '_check_defining_equation',
    ),
    PropertyDefinition(
        'P4', "X_H(f) = {H,f} − f ℛ(H)", "el corchete de Jacobi da la evolución de los observables",
        1e-9, '_check_evolution',
    ),
    PropertyDefinition(
        'P5', "X_H(H) = −H ℛ(H)", "disipación de la energía", 1e-9, '_check_dissipation',
    ),
    PropertyDefinition(
        'P6', "{f,g} = −{g,f}; vía ♯ = vía coordenadas", "corchete de Jacobi canónico", 1e-9, '_check_antisymmetry',
    ),
    PropertyDefinition(
        'P7', "P² = P, Φg⁻¹P = 0, PΦᵀ = 0, Pg simétrica",
        "γ es la proyección de T*Q×ℝ sobre M×ℝ a lo largo de ann 𝒟", 1e-10, '_check_projector',
    ),
    PropertyDefinition(
        'P8', "Φ H_p = 0 y Pᵀg⁻¹p = g⁻¹p en M", "relaciones evaluadas en elementos de M", 1e-8, '_check_on_manifold',
    ),
    PropertyDefinition(
        'P9', "H_pᵀ(∂_i P)p = 0 y d(H∘Γ) = dH en M", "H∘γ y H tienen el mismo diferencial sobre M×ℝ",
        1e-8, '_check_composed_differential',
    ),
    PropertyDefinition(
        'P10', "multiplicadores = Tγ(X_H); X_H = X_{H∘Γ}; defecto en span{Φ^a dq}",
        "el campo restringido es la imagen por Tγ de X_H", 1e-8, '_check_two_routes',
    ),
    PropertyDefinition(
        'P11', "X_{H,M}(φ^a) = 0 y X_{H,M}(H) = −H H_z", "X_{H,M} es tangente a M×ℝ", 1e-8, '_check_tangency',
    ),
    PropertyDefinition(
        'P12', "{f, Σφ^a h_a}_E = 0 y {f, φ^a}_E = 0", "las funciones de restricción son Casimires",
        1e-8, '_check_casimir',
    ),
    PropertyDefinition(
        'P13', "X_{H,M}(f) = X_H(f∘Γ) = {H,f}_E − f H_z; {H,f}_E = {H,f∘Γ}",
        "evolución de observables bajo la dinámica restringida", 1e-8, '_check_proposition',
    ),
    PropertyDefinition(
        'P14', "condición mecánica ⇒ X_{H,M}(f) = X_H(f), {f,g}_E = {f,g}, d(f∘Γ) = df",
        "en el subespacio mecánico la dinámica es la no restringida", 1e-8, '_check_mechanical_subspace',
    ),
    PropertyDefinition(
        'P15', "identidad de Jacobi del corchete de contacto", "el corchete de contacto es de Jacobi",
        1e-4, '_check_jacobi', max_samples=JACOBI_MAX_SAMPLES,
    ),
]

PROPERTY_IDS = [definition.property_id for definition in PROPERTIES]


@dataclass(frozen=True)
class PropertyResult:
    property_id: str
    description: str
    anchor: str
    samples: int
    max_residual: float
    tolerance: float
    passed: bool
    note: str = ''

    def to_dict(self) -> dict:
        row = {
            'property_id': self.property_id,
            'description': self.description,
            'anchor': self.anchor,
            'samples': self.samples,
            'max_residual': self.max_residual,
            'tolerance': self.tolerance,
            'pass': self.passed,
        }
        if self.note:
            row['note'] = self.note
        return row


@dataclass
class VerifyReport:
    system: str
    seed: int
    samples: int
    rows: List[PropertyResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)

    @property
    def failures(self) -> List[PropertyResult]:
        return [row for row in self.rows if not row.passed]

    def to_dict(self) -> dict:
        return {
            'system': self.system,
            'seed': self.seed,
            'samples': self.samples,
            'pass': self.passed,
            'properties': [row.to_dict() for row in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False)


def _max_abs(values) -> float:
    array = np.abs(np.asarray(values, dtype=float))
    return float(np.max(array)) if array.size else 0.0


class VerificationService:
    """
    Ejecuta las propiedades P1–P15 sobre un sistema.

    Configuración por settings:
    - EDENMECH_SAMPLES: puntos por propiedad
    - EDENMECH_SEED: semilla por defecto
    """

    def __init__(
        self,
        system: MechanicalSystem,
        samples: Optional[int] = None,
        seed: Optional[int] = None,
        tolerances: Optional[Dict[str, float]] = None,
        workers: int = 1,
        include_jacobi: bool = True,
    ):
        self.system = system
        self.samples = getattr(settings, 'EDENMECH_SAMPLES', 200) if samples is None else int(samples)
        self.seed = getattr(settings, 'EDENMECH_SEED', 42) if seed is None else int(seed)
        if self.samples < 1:
            raise ConfigError(f"samples debe ser positivo (samples={self.samples})")
        unknown = set(tolerances or {}) - set(PROPERTY_IDS)
        if unknown:
            raise ConfigError(f"Propiedades desconocidas en --tol: {sorted(unknown)}")
        self.tolerances = dict(tolerances or {})
        self.workers = max(1, int(workers))
        self.definitions = [d for d in PROPERTIES if include_jacobi or d.property_id != 'P15']
        self.H = system.hamiltonian()

    def run(self) -> VerifyReport:
        logger.info(
            f"Verificando {self.system!r}: {len(self.definitions)} propiedades, "
            f"{self.samples} muestras, seed={self.seed}, workers={self.workers}"
        )
        if self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                rows = list(pool.map(self.run_property, self.definitions))
        else:
            rows = [self.run_property(d) for d in self.definitions]
        report = VerifyReport(self.system.name, self.seed, self.samples, rows)
        for row in report.failures:
            logger.warning(
                f"{row.property_id} falló: residuo {row.max_residual:.3e} > tolerancia {row.tolerance:.1e}"
            )
        return report

    def run_property(self, definition: PropertyDefinition) -> PropertyResult:
        index = PROPERTY_IDS.index(definition.property_id)
        rng = np.random.default_rng([self.seed, index])
        samples = self.samples
        if definition.max_samples is not None:
            samples = min(samples, definition.max_samples)
        tolerance = float(self.tolerances.get(definition.property_id, definition.tolerance))
        check: Callable = getattr(self, definition.check)
        note = ''
        try:
            residual = check(rng, samples)
        except NotOnConstraint as exc:
            residual, note = float('inf'), str(exc)
        passed = bool(residual <= tolerance)
        logger.debug(f"{definition.property_id}: residuo {residual:.3e} (tol {tolerance:.1e})")
        return PropertyResult(
            definition.property_id, definition.description, definition.anchor,
            samples, float(residual), tolerance, passed, note,
        )

    # Muestreo #############################################################

    def _polynomials(self, rng, count=POLYNOMIAL_POOL, allowed=frozenset('qpz'), terms=4):
        return [random_polynomial(rng, self.system.n, terms=terms, allowed=allowed) for _ in range(count)]

    def _points(self, rng, samples):
        return [self.system.sample_point(rng) for _ in range(samples)]

    def _constrained_points(self, rng, samples):
        return [self.system.sample_constrained_point(rng) for _ in range(samples)]

    # Estructura de contacto ###############################################

    def _check_isomorphism(self, rng, samples) -> float:
        dim = 2 * self.system.n + 1
        residual = 0.0
        for x in self._points(rng, samples):
            v = TangentVector.from_array(rng.standard_normal(dim))
            a = CotangentVector.from_array(rng.standard_normal(dim))
            residual = max(
                residual,
                _max_abs(sharp(x, flat(x, v)).as_array() - v.as_array()),
                _max_abs(flat(x, sharp(x, a)).as_array() - a.as_array()),
            )
        return residual

    def _check_reeb(self, rng, samples) -> float:
        dim = 2 * self.system.n + 1
        r = reeb(self.system.n)
        residual = 0.0
        for x in self._points(rng, samples):
            u = TangentVector.from_array(rng.standard_normal(dim))
            residual = max(
                residual,
                _max_abs(flat(x, r).as_array() - eta_at(x).as_array()),
                abs(eta_at(x).pair(r) - 1.0),
                abs(d_eta(r, u)),
            )
        return residual

    def _check_defining_equation(self, rng, samples) -> float:
        residual = 0.0
        for x in self._points(rng, samples):
            h, dh = self.H.value_and_differential(x)
            v = hamiltonian_field(self.H, x)
            residual = max(residual, _max_abs(defining_residual(x, v, h, dh)), abs(eta_at(x).pair(v) + h))
        return residual

    def _check_evolution(self, rng, samples) -> float:
        fs = self._polynomials(rng)
        residual = 0.0
        for i, x in enumerate(self._points(rng, samples)):
            f = fs[i % len(fs)]
            _, dh = self.H.value_and_differential(x)
            expected = contact_bracket(self.H, f, x) - f.value(x) * dh.a_z
            residual = max(residual, abs(evolution(self.H, f, x) - expected))
        return residual

    def _check_dissipation(self, rng, samples) -> float:
        residual = 0.0
        for x in self._points(rng, samples):
            h, dh = self.H.value_and_differential(x)
            residual = max(residual, abs(dh.pair(hamiltonian_field(self.H, x)) + h * dh.a_z))
        return residual

    def _check_antisymmetry(self, rng, samples) -> float:
        fs = self._polynomials(rng)
        gs = self._polynomials(rng)
        residual = 0.0
        for i, x in enumerate(self._points(rng, samples)):
            f, g = fs[i % len(fs)], gs[i % len(gs)]
            fv, df = f.value_and_differential(x)
            gv, dg = g.value_and_differential(x)
            fg = bracket_from_differentials(x, fv, df, gv, dg)
            residual = max(
                residual,
                abs(fg + bracket_from_differentials(x, gv, dg, fv, df)),
                abs(bracket_from_differentials(x, fv, df, fv, df)),
                abs(fg - bracket_from_differentials(x, fv, df, gv, dg, COORDINATE_ROUTE)),
            )
        return residual

    # Proyector y campo restringido ########################################

    def _check_projector(self, rng, samples) -> float:
        system = self.system
        residual = 0.0
        for _ in range(samples):
            q = system.sample_q(rng)
            P = system.projector(q).P
            if system.k == 0:
                residual = max(residual, _max_abs(P - np.eye(system.n)))
                continue
            g = system.metric_at(q)
            phi = system.constraints_at(q)
            pg = P @ g
            residual = max(
                residual,
                _max_abs(P @ P - P),
                _max_abs(phi @ np.linalg.solve(g, P)),
                _max_abs(P @ phi.T),
                _max_abs(pg - pg.T),
            )
        return residual

    def _check_on_manifold(self, rng, samples) -> float:
        system = self.system
        residual = 0.0
        for x in self._constrained_points(rng, samples):
            _, dh = self.H.value_and_differential(x)
            velocity = system.legendre_sharp(x.q, x.p)
            P = system.projector(x.q).P
            residual = max(
                residual,
                _max_abs(system.constraints_at(x.q) @ dh.a_p),
                _max_abs(P.T @ velocity - velocity),
            )
        return residual

    def _check_composed_differential(self, rng, samples) -> float:
        system = self.system
        composed = compose_with_gamma(system, self.H)
        residual = 0.0
        for x in self._constrained_points(rng, samples):
            _, dh = self.H.value_and_differential(x)
            dP = system.projector(x.q).dP
            # componente i: H_pᵀ (∂_i P) p
            contraction = np.einsum('k,klj,l->j', dh.a_p, dP, x.p)
            residual = max(
                residual,
                _max_abs(contraction),
                _max_abs(composed.differential(x).as_array() - dh.as_array()),
            )
        return residual

    def _check_two_routes(self, rng, samples) -> float:
        system = self.system
        composed = compose_with_gamma(system, self.H)
        residual = 0.0
        for x in self._constrained_points(rng, samples):
            multipliers_route = constrained_field_multipliers(system, self.H, x)
            pushforward_route = constrained_field_pushforward(system, self.H, x)
            residual = max(
                residual,
                _max_abs(multipliers_route.as_array() - pushforward_route.as_array()),
                _max_abs(hamiltonian_field(self.H, x).as_array() - hamiltonian_field(composed, x).as_array()),
                constraint_defect(system, self.H, x).residual,
            )
        return residual

    def _check_tangency(self, rng, samples) -> float:
        system = self.system
        phis = system.constraint_functions()
        residual = 0.0
        for x in self._constrained_points(rng, samples):
            v = constrained_field(system, self.H, x)
            h, dh = self.H.value_and_differential(x)
            residual = max(
                residual,
                _max_abs([phi.differential(x).pair(v) for phi in phis]),
                abs(dh.pair(v) + h * dh.a_z),
            )
        return residual

    # Corchete de Eden #####################################################

    def _check_casimir(self, rng, samples) -> float:
        system = self.system
        fs = self._polynomials(rng)
        hs = [self._polynomials(rng, count=system.k) for _ in range(POLYNOMIAL_POOL)]
        phis = system.constraint_functions()
        residual = 0.0
        for i, x in enumerate(self._constrained_points(rng, samples)):
            f = fs[i % len(fs)]
            casimir = casimir_observable(system, hs[i % len(hs)])
            values = [eden_bracket(system, f, casimir, x)]
            values += [eden_bracket(system, f, phi, x) for phi in phis]
            residual = max(residual, _max_abs(values))
        return residual

    def _check_proposition(self, rng, samples) -> float:
        system = self.system
        fs = self._polynomials(rng)
        residual = 0.0
        for i, x in enumerate(self._constrained_points(rng, samples)):
            f = fs[i % len(fs)]
            composed = compose_with_gamma(system, f)
            _, dh = self.H.value_and_differential(x)
            evolved = constrained_evolution(system, self.H, f, x)
            eden = eden_bracket(system, self.H, f, x)
            residual = max(
                residual,
                abs(evolved - evolution(self.H, composed, x)),
                abs(eden - contact_bracket(self.H, composed, x)),
                abs(evolved - (eden - f.value(x) * dh.a_z)),
            )
        return residual

    def _linear_mechanical(self, rng):
        n = self.system.n
        return mechanical_observable(
            self.system,
            self._polynomials(rng, count=n, allowed=Q_ONLY, terms=2),
            random_polynomial(rng, n, terms=3, allowed=Q_AND_Z),
        )

    def _mechanical_pool(self, rng):
        # mitad lineales en p, mitad polinomios de grado 2 en ellos
        pool = []
        for i in range(POLYNOMIAL_POOL):
            if i % 2 == 0:
                pool.append(self._linear_mechanical(rng))
                continue
            parts = [self._linear_mechanical(rng) for _ in range(min(2, self.system.n))]
            outer = random_polynomial(rng, self.system.n, terms=4, max_degree=2)
            pool.append(mechanical_function(self.system, outer, parts))
        return pool

    def _check_mechanical_subspace(self, rng, samples) -> float:
        system = self.system
        fs = self._mechanical_pool(rng)
        gs = self._mechanical_pool(rng)
        residual = 0.0
        for i, x in enumerate(self._constrained_points(rng, samples)):
            f, g = fs[i % len(fs)], gs[i % len(gs)]
            residual = max(
                residual,
                mechanical_residual(system, f, x),
                mechanical_residual(system, g, x),
                abs(constrained_evolution(system, self.H, f, x) - evolution(self.H, f, x)),
                abs(eden_bracket(system, f, g, x) - contact_bracket(f, g, x)),
                _max_abs(compose_with_gamma(system, f).differential(x).as_array() - f.differential(x).as_array()),
            )
        return residual

    def _check_jacobi(self, rng, samples) -> float:
        fs = self._polynomials(rng, terms=3)
        gs = self._polynomials(rng, terms=3)
        hs = self._polynomials(rng, terms=3)
        residual = 0.0
        for i, x in enumerate(self._points(rng, samples)):
            j = i % POLYNOMIAL_POOL
            residual = max(residual, abs(jacobi_identity_residual(fs[j], gs[j], hs[j], x)))
        return residual


def verify_system(system: MechanicalSystem, **kwargs) -> VerifyReport:
    """Atajo: ``VerificationService(system, **kwargs).run()``."""
    return VerificationService(system, **kwargs).run()

