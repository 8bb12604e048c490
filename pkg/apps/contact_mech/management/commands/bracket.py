"""
Evalúa el corchete de contacto o el de Eden en un punto.

Uso:
    python manage.py bracket --f q1 --g p1 --point "0,0,0;1,0,0;0" --kind contact
    python manage.py bracket --f q1 --g p1 --point "0,0,0;1,0,0;0" --kind eden --template heisenberg
"""

from django.core.management.base import CommandError

from apps.contact_mech.services.contact_core import contact_bracket
from apps.contact_mech.services.eden import eden_bracket
from apps.contact_mech.services.exprfield import observable
from apps.contact_mech.validators import validate_point

from ._base import EXIT_USAGE, SystemCommand

KINDS = ('contact', 'eden')


class Command(SystemCommand):
    help = 'Evalúa {f, g} (contacto) o {f, g}_E (Eden) en un punto'

    def add_arguments(self, parser):
        self.add_system_arguments(parser)
        parser.add_argument('--f', help='Expresión de f')
        parser.add_argument('--g', help='Expresión de g')
        parser.add_argument('--point', help='Punto "q1,..,qn;p1,..,pn;z"')
        parser.add_argument('--kind', default='contact', help='contact o eden (default: contact)')

    def run(self, **options):
        self.require(options, 'f', 'g', 'point')
        kind = options['kind']
        if kind not in KINDS:
            raise CommandError(f"Tipo de corchete desconocido: {kind}", returncode=EXIT_USAGE)

        system, params = None, {}
        if options.get('system') or options.get('template'):
            system = self.load_system(options)
            params = system.params
        elif kind == 'eden':
            raise CommandError("El corchete de Eden requiere --system o --template", returncode=EXIT_USAGE)

        n = system.n if system else len(options['point'].split(';')[0].split(','))
        x = validate_point(options['point'], n)
        f = observable(options['f'], n, params)
        g = observable(options['g'], n, params)

        if kind == 'eden':
            value = eden_bracket(system, f, g, x, tol=self.membership_tol)
        else:
            value = contact_bracket(f, g, x)
        self.stdout.write(f"{value:.17g}")
