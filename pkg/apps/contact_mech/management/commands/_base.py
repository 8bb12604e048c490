"""
Base común de los comandos de gestión.

Resuelve ``--system FILE`` / ``--template NAME`` / ``--param k=v`` en un
``MechanicalSystem`` y traduce las excepciones del dominio a códigos de
salida:

    0 ok · 1 verificación fallida · 2 uso/configuración ·
    3 fallo numérico · 4 guarda de dominio (punto fuera de M×ℝ)
"""

import json
import logging

from django.conf import settings
from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError

from apps.contact_mech.services.catalog import TEMPLATE_NAMES
from apps.contact_mech.services.exceptions import (
    ContactMechError,
    NotOnConstraint,
    NumericalError,
    ParseError,
)
from apps.contact_mech.services.export_service import ExportLimitExceeded
from apps.contact_mech.services.mech_system import MechanicalSystem, build_system
from apps.contact_mech.validators import validate_param

logger = logging.getLogger(__name__)

EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_DOMAIN = 4


def _message(exc: Exception) -> str:
    if isinstance(exc, ValidationError):
        if hasattr(exc, 'message_dict'):
            return json.dumps(exc.message_dict, ensure_ascii=False)
        return '; '.join(exc.messages)
    return str(exc)


class SystemCommand(BaseCommand):
    """Comando que opera sobre un sistema mecánico."""

    def add_system_arguments(self, parser):
        parser.add_argument('--system', help='Archivo JSON con el SystemConfig')
        parser.add_argument('--template', help=f"Plantilla incluida: {', '.join(TEMPLATE_NAMES)}")
        parser.add_argument(
            '--param',
            action='append',
            default=[],
            help='Parámetro nombre=valor (repetible)',
        )

    def require(self, options, *names):
        for name in names:
            if options.get(name) in (None, ''):
                raise CommandError(f"Falta el argumento --{name.replace('_', '-')}", returncode=EXIT_USAGE)

    @property
    def membership_tol(self) -> float:
        return getattr(settings, 'EDENMECH_MEMBERSHIP_TOL', 1e-9)

    def load_config(self, options) -> dict:
        system_file, template = options.get('system'), options.get('template')
        if system_file and template:
            raise CommandError("Use --system o --template, no ambos", returncode=EXIT_USAGE)
        if system_file:
            try:
                with open(system_file, encoding='utf-8') as handle:
                    config = json.load(handle)
            except (OSError, json.JSONDecodeError) as exc:
                raise CommandError(f"No se pudo leer {system_file}: {exc}", returncode=EXIT_USAGE)
            if not isinstance(config, dict):
                raise CommandError("El SystemConfig debe ser un objeto JSON", returncode=EXIT_USAGE)
        elif template:
            if template not in TEMPLATE_NAMES:
                raise CommandError(
                    f"Plantilla desconocida {template!r} (disponibles: {', '.join(TEMPLATE_NAMES)})",
                    returncode=EXIT_USAGE,
                )
            config = {'template': template}
        else:
            raise CommandError("Se requiere --system o --template", returncode=EXIT_USAGE)
        overrides = dict(validate_param(item) for item in options.get('param') or [])
        if overrides:
            config['parameters'] = {**(config.get('parameters') or {}), **overrides}
        return config

    def load_system(self, options) -> MechanicalSystem:
        config = self.load_config(options)
        samples = getattr(settings, 'EDENMECH_VALIDATION_SAMPLES', 32)
        try:
            return build_system(config, validation_samples=samples)
        except NumericalError as exc:
            # NotSPD / RankDeficient al construir son errores de configuración
            raise CommandError(f"Sistema inválido: {exc}", returncode=EXIT_USAGE)

    def handle(self, *args, **options):
        try:
            return self.run(**options)
        except CommandError:
            raise
        except NotOnConstraint as exc:
            raise CommandError(str(exc), returncode=EXIT_DOMAIN)
        except NumericalError as exc:
            logger.error(f"Fallo numérico en {self.__module__}: {exc}")
            raise CommandError(f"Fallo numérico: {exc}", returncode=EXIT_NUMERICAL)
        except (ValidationError, ParseError, ExportLimitExceeded, ValueError, OSError) as exc:
            raise CommandError(_message(exc), returncode=EXIT_USAGE)
        except ContactMechError as exc:
            raise CommandError(str(exc), returncode=EXIT_USAGE)

    def run(self, **options):
        raise NotImplementedError
