"""
Integra una trayectoria libre o restringida y la escribe como CSV.

Uso:
    python manage.py simulate --template free_particle --initial "0,0,0;1,0,0;0" \
        --t1 1 --dt 1e-3 --output traj.csv
    python manage.py simulate --template heisenberg --constrained --reproject ...
"""

from django.conf import settings
from django.core.management.base import CommandError

from apps.contact_mech.services.export_service import ExportService
from apps.contact_mech.services.nh_dynamics import FieldKind, Route, integrate, make_field
from apps.contact_mech.validators import validate_point

from ._base import EXIT_USAGE, SystemCommand

METHODS = ('rk4', 'rk45')


class Command(SystemCommand):
    help = 'Integra la dinámica hamiltoniana de contacto (libre o restringida)'

    def add_arguments(self, parser):
        self.add_system_arguments(parser)
        parser.add_argument('--initial', help='Condición inicial "q1,..,qn;p1,..,pn;z"')
        parser.add_argument('--t1', type=float, help='Tiempo final')
        parser.add_argument('--dt', type=float, help='Paso de integración')
        parser.add_argument('--constrained', action='store_true', help='Usa el campo restringido X_{H,M}')
        parser.add_argument('--reproject', action='store_true', help='Proyecta p sobre M tras cada paso')
        parser.add_argument('--method', default='rk4', help=f"Integrador: {', '.join(METHODS)} (default: rk4)")
        parser.add_argument(
            '--route',
            default=Route.MULTIPLIERS.value,
            help='Construcción del campo restringido: multipliers o pushforward',
        )
        parser.add_argument('--output', help='Ruta del CSV de salida')

    def run(self, **options):
        self.require(options, 'initial', 't1', 'dt', 'output')
        if options['method'] not in METHODS:
            raise CommandError(f"Método desconocido: {options['method']}", returncode=EXIT_USAGE)
        if options['route'] not in {r.value for r in Route}:
            raise CommandError(f"Vía desconocida: {options['route']}", returncode=EXIT_USAGE)

        system = self.load_system(options)
        x0 = validate_point(options['initial'], system.n)
        kind = FieldKind.CONSTRAINED if options['constrained'] else FieldKind.FREE
        field_ = make_field(kind, system, system.hamiltonian(), Route(options['route']), self.membership_tol)

        trajectory = integrate(
            field_, x0, options['t1'], options['dt'],
            reproject=options['reproject'],
            method=options['method'],
            snap_tol=getattr(settings, 'EDENMECH_SNAP_TOL', 1e-6),
        )
        path = ExportService().write_trajectory(trajectory, options['output'])

        summary = trajectory.summary()
        self.stdout.write(self.style.SUCCESS(f"Trayectoria escrita en {path} ({summary['steps']} pasos)"))
        self.stdout.write(f"final_H={summary['final_H']:.17g}")
        self.stdout.write(f"max_constraint_residual={summary['max_constraint_residual']:.17g}")
        self.stdout.write(f"max_dissipation_residual={summary['max_dissipation_residual']:.17g}")
