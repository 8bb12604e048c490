import numpy as np

from apps.contact_mech.services.mech_system import MechanicalSystem, ProjectorAtQ, build_system
from apps.contact_mech.services.phase import PhasePoint

_projector = MechanicalSystem.projector


def template(name, **params):
    config = {'template': name}
    if params:
        config['parameters'] = params
    return build_system(config)


def custom(dimension, **fields):
    return build_system({'template': 'custom', 'dimension': dimension, **fields})


def point(q, p, z=0.0):
    return PhasePoint(np.array(q, dtype=float), np.array(p, dtype=float), z)


def rng(seed=0):
    return np.random.default_rng(seed)


def corrupted_projector(self, q, method='ad'):
    """Sustituto de MechanicalSystem.projector que escala P (control negativo)."""
    projector = _projector(self, q, method)
    return ProjectorAtQ(projector.q, 0.9 * projector.P, projector.dP)
