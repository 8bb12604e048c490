"""
Plantillas de sistemas mecánicos incluidas.

Cada plantilla es un SystemConfig parcial; los parámetros se pueden
sobrescribir con ``--param`` o desde el JSON del usuario.
"""

import copy
from typing import Dict

TEMPLATES: Dict[str, dict] = {
    # Distribución de Heisenberg: ż = q2·ẋ
    'heisenberg': {
        'dimension': 3,
        'metric': 'identity',
        'potential': 'alpha*z',
        'constraints': [['-q2', '0', '1']],
        'parameters': {'alpha': 0.5},
    },
    # Patín (knife edge): la velocidad es paralela a la cuchilla
    'knife_edge': {
        'dimension': 3,
        'metric': {'diagonal': ['m', 'm', 'J']},
        'potential': 'alpha*z',
        'constraints': [['sin(q3)', '-cos(q3)', '0']],
        'parameters': {'m': 1.0, 'J': 0.5, 'alpha': 0.5},
    },
    'free_particle': {
        'dimension': 3,
        'metric': 'identity',
        'potential': 'alpha*z',
        'constraints': [],
        'parameters': {'alpha': 0.0},
    },
}

TEMPLATE_NAMES = tuple(TEMPLATES)
CUSTOM = 'custom'

# Campos que una plantilla no deja sobrescribir
TEMPLATE_FIXED_KEYS = ('dimension', 'metric', 'potential', 'constraints')


def get_template(name: str) -> dict:
    """Copia profunda de la plantilla (los llamadores la modifican)."""
    if name not in TEMPLATES:
        raise KeyError(f"Plantilla desconocida: {name}")
    return copy.deepcopy(TEMPLATES[name])


def merge_config(config: dict) -> dict:
    """
    Combina un SystemConfig validado con su plantilla.

    La plantilla aporta dimensión, métrica, potencial y restricciones; los
    parámetros del usuario se superponen a los de la plantilla. El serializer
    ya rechazó cualquier campo de TEMPLATE_FIXED_KEYS.
    """
    name = config.get('template', CUSTOM)
    if name == CUSTOM:
        return copy.deepcopy(config)
    merged = get_template(name)
    merged['template'] = name
    merged['parameters'].update(config.get('parameters') or {})
    if config.get('sample_box') is not None:
        merged['sample_box'] = config['sample_box']
    return merged
