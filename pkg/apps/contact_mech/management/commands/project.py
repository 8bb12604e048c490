"""
Proyecta un punto sobre M×ℝ e imprime la matriz P(q).

Uso:
    python manage.py project --template heisenberg --point "0,0,0;1,2,3;0"
"""

import json

from apps.contact_mech.services.export_service import ExportService
from apps.contact_mech.validators import validate_point

from ._base import SystemCommand


class Command(SystemCommand):
    help = 'Aplica γ(q, p, z) = (q, P(q)p, z) y muestra P(q)'

    def add_arguments(self, parser):
        self.add_system_arguments(parser)
        parser.add_argument('--point', help='Punto "q1,..,qn;p1,..,pn;z"')
        parser.add_argument('--output', help='Ruta opcional del JSON de salida')

    def run(self, **options):
        self.require(options, 'point')
        system = self.load_system(options)
        x = validate_point(options['point'], system.n)
        projector = system.projector(x.q)
        projected = x.with_momentum(projector.apply(x.p))

        payload = {
            'q': projected.q.tolist(),
            'p': projected.p.tolist(),
            'z': projected.z,
            'P': projector.P.tolist(),
            'residual_before': system.constraint_residual(x),
            'residual_after': system.constraint_residual(projected),
        }
        self.stdout.write(json.dumps(payload, indent=2))
        if options.get('output'):
            ExportService().write_json(payload, options['output'], kind='projection')
