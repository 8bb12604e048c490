"""
Verifica numéricamente las propiedades P1–P15 sobre un sistema.

Uso:
    python manage.py verify --template heisenberg --samples 200 --seed 42 --report report.json
    python manage.py verify --template knife_edge --tol P7=1e-9 --workers 4 --report r.json

Sale con código 0 si todas las propiedades pasan y 1 si alguna falla.
"""

from django.conf import settings
from django.core.management.base import CommandError

from apps.contact_mech.services.export_service import ExportService
from apps.contact_mech.services.verification import VerificationService
from apps.contact_mech.validators import validate_seed, validate_tolerance_override

from ._base import EXIT_VERIFY_FAILED, SystemCommand


class Command(SystemCommand):
    help = 'Verifica las identidades de la mecánica de contacto no holónoma'

    def add_arguments(self, parser):
        self.add_system_arguments(parser)
        parser.add_argument(
            '--samples',
            type=int,
            default=None,
            help='Puntos por propiedad (default: EDENMECH_SAMPLES)',
        )
        parser.add_argument(
            '--seed',
            type=int,
            default=None,
            help='Semilla del muestreo (default: EDENMECH_SEED)',
        )
        parser.add_argument('--tol', action='append', default=[], help='Tolerancia ID=VALOR (repetible)')
        parser.add_argument('--workers', type=int, default=1, help='Hilos para evaluar propiedades')
        parser.add_argument('--no-jacobi', action='store_true', help='Omite P15 (identidad de Jacobi)')
        parser.add_argument('--report', help='Ruta del informe JSON')

    def run(self, **options):
        self.require(options, 'report')
        seed = options['seed']
        if seed is None:
            seed = getattr(settings, 'EDENMECH_SEED', 42)
        seed = validate_seed(seed)
        tolerances = dict(validate_tolerance_override(item) for item in options['tol'])

        system = self.load_system(options)
        service = VerificationService(
            system,
            samples=options['samples'],
            seed=seed,
            tolerances=tolerances,
            workers=options['workers'],
            include_jacobi=not options['no_jacobi'],
        )
        report = service.run()
        path = ExportService().write_report(report, options['report'])

        for row in report.rows:
            style = self.style.SUCCESS if row.passed else self.style.ERROR
            status = 'OK  ' if row.passed else 'FAIL'
            self.stdout.write(style(
                f"{status} {row.property_id:<4} residuo={row.max_residual:.3e} "
                f"tol={row.tolerance:.1e}  {row.description}"
            ))
        self.stdout.write(f"Informe escrito en {path}")

        if not report.passed:
            failed = ', '.join(row.property_id for row in report.failures)
            raise CommandError(f"Verificación fallida: {failed}", returncode=EXIT_VERIFY_FAILED)
        self.stdout.write(self.style.SUCCESS('Todas las propiedades pasan'))
