import os
import tempfile

import numpy as np
from django.test import SimpleTestCase
from pandas.testing import assert_frame_equal

from apps.contact_mech.services.contact_core import hamiltonian_field
from apps.contact_mech.services.eden import compose_with_gamma
from apps.contact_mech.services.exceptions import NotOnConstraint, StepFailure
from apps.contact_mech.services.export_service import ExportService
from apps.contact_mech.services.nh_dynamics import (
    ConstrainedField,
    FieldKind,
    HamiltonianField,
    Route,
    constrained_field,
    constraint_defect,
    integrate,
    make_field,
    multipliers,
)

from .helpers import custom, point, rng, template

ON_M = point([0.1, 0.3, 0.0], [1.0, 0.5, 0.3], 0.0)


class MultiplierTests(SimpleTestCase):
    def test_unconstrained_system_has_no_multipliers(self):
        system = template('free_particle')
        lam = multipliers(system, system.hamiltonian(), point([0, 0, 0], [1, 2, 3]))
        self.assertEqual(lam.shape, (0,))

    def test_multipliers_keep_constraint_constant(self):
        generator = rng(20)
        for name in ('heisenberg', 'knife_edge'):
            system = template(name)
            H = system.hamiltonian()
            (phi,) = system.constraint_functions()
            for _ in range(20):
                x = system.sample_constrained_point(generator)
                v = constrained_field(system, H, x)
                self.assertLess(abs(phi.differential(x).pair(v)), 1e-10)

    def test_constant_constraints_need_no_multiplier(self):
        system = custom(2, constraints=[['1', '1']], potential='0')
        x = point([0.3, -0.2], [1.0, -1.0], 0.0)
        np.testing.assert_allclose(multipliers(system, system.hamiltonian(), x), [0.0], atol=1e-15)

    def test_off_manifold_point_is_rejected(self):
        system = template('heisenberg')
        with self.assertRaises(NotOnConstraint) as ctx:
            multipliers(system, system.hamiltonian(), point([0, 0, 0], [0, 0, 1]))
        self.assertEqual(ctx.exception.residual, 1.0)
        with self.assertRaises(NotOnConstraint):
            constrained_field(system, system.hamiltonian(), point([0, 0, 0], [0, 0, 1]), Route.PUSHFORWARD)


class ConstrainedFieldTests(SimpleTestCase):
    def test_routes_agree(self):
        generator = rng(21)
        for name in ('heisenberg', 'knife_edge'):
            system = template(name)
            H = system.hamiltonian()
            for _ in range(50):
                x = system.sample_constrained_point(generator)
                by_multipliers = constrained_field(system, H, x, Route.MULTIPLIERS)
                by_pushforward = constrained_field(system, H, x, Route.PUSHFORWARD)
                np.testing.assert_allclose(by_multipliers.as_array(), by_pushforward.as_array(), atol=1e-8)

    def test_free_field_of_composed_hamiltonian(self):
        generator = rng(22)
        system = template('knife_edge')
        H = system.hamiltonian()
        composed = compose_with_gamma(system, H)
        for _ in range(20):
            x = system.sample_constrained_point(generator)
            np.testing.assert_allclose(
                hamiltonian_field(H, x).as_array(), hamiltonian_field(composed, x).as_array(), atol=1e-8
            )

    def test_defect_lies_in_constraint_rowspace(self):
        generator = rng(23)
        system = template('heisenberg')
        H = system.hamiltonian()
        for _ in range(20):
            x = system.sample_constrained_point(generator)
            defect = constraint_defect(system, H, x)
            self.assertLess(defect.residual, 1e-8)
            np.testing.assert_allclose(defect.coefficients, multipliers(system, H, x), atol=1e-8)

    def test_make_field(self):
        system = template('heisenberg')
        H = system.hamiltonian()
        free = make_field(FieldKind.FREE, system, H)
        constrained = make_field('constrained', system, H, route='pushforward')
        self.assertIsInstance(free, HamiltonianField)
        self.assertFalse(free.constrained)
        self.assertIsInstance(constrained, ConstrainedField)
        self.assertTrue(constrained.constrained)
        self.assertEqual(constrained.route, Route.PUSHFORWARD)


class IntegrateTests(SimpleTestCase):
    def test_free_flow(self):
        system = template('free_particle')
        field_ = make_field(FieldKind.FREE, system, system.hamiltonian())
        trajectory = integrate(field_, point([0, 0, 0], [1, 0, 0], 0.0), t1=1.0, dt=1e-3)
        self.assertEqual(len(trajectory), 1001)
        self.assertEqual(trajectory.times[-1], 1.0)
        np.testing.assert_allclose(trajectory.final.q, [1.0, 0.0, 0.0], atol=1e-12)
        self.assertAlmostEqual(trajectory.final.z, 0.5, places=12)
        np.testing.assert_allclose(trajectory.hamiltonian, 0.5, atol=1e-14)

    def test_exponential_energy_decay(self):
        system = template('free_particle', alpha=0.5)
        field_ = make_field(FieldKind.FREE, system, system.hamiltonian())
        trajectory = integrate(field_, point([0, 0, 0], [1, 0, 0], 0.0), t1=2.0, dt=1e-3)
        expected = 0.5 * np.exp(-0.5 * trajectory.times)
        self.assertLess(np.max(np.abs(trajectory.hamiltonian - expected)), 1e-8)
        self.assertLess(trajectory.summary()['max_dissipation_residual'], 1e-12)

    def test_momenta_decay_componentwise(self):
        system = template('free_particle', alpha=0.5)
        field_ = make_field(FieldKind.FREE, system, system.hamiltonian())
        p0 = np.array([1.0, 0.3, -0.2])
        trajectory = integrate(field_, point([0.2, -0.1, 0.4], p0, 0.3), t1=1.0, dt=1e-3)
        frame = trajectory.to_frame()
        expected = np.outer(np.exp(-0.5 * frame['t'].to_numpy()), p0)
        self.assertLess(np.max(np.abs(frame[['p1', 'p2', 'p3']].to_numpy() - expected)), 1e-8)
        self.assertLess(np.max(np.abs(trajectory.final.p - p0 * np.exp(-0.5))), 1e-8)

    def test_last_step_lands_on_final_time(self):
        system = template('free_particle')
        field_ = make_field(FieldKind.FREE, system, system.hamiltonian())
        trajectory = integrate(field_, point([0, 0, 0], [1, 0, 0]), t1=0.25, dt=0.1)
        np.testing.assert_allclose(trajectory.times, [0.0, 0.1, 0.2, 0.25])

    def test_invalid_step(self):
        system = template('free_particle')
        field_ = make_field(FieldKind.FREE, system, system.hamiltonian())
        for t1, dt in ((1.0, 0.0), (1.0, -1e-3), (0.0, 1e-3), (float('inf'), 1e-3)):
            with self.assertRaises(ValueError):
                integrate(field_, point([0, 0, 0], [1, 0, 0]), t1=t1, dt=dt)

    def test_constrained_drift(self):
        system = template('heisenberg')
        field_ = make_field(FieldKind.CONSTRAINED, system, system.hamiltonian())
        trajectory = integrate(field_, ON_M, t1=1.0, dt=1e-3)
        self.assertLess(trajectory.summary()['max_constraint_residual'], 1e-6)
        self.assertEqual(trajectory.constraint_values.shape, (1001, 1))

    def test_reprojection_keeps_trajectory_on_manifold(self):
        system = template('heisenberg')
        field_ = make_field(FieldKind.CONSTRAINED, system, system.hamiltonian(), Route.PUSHFORWARD)
        trajectory = integrate(field_, ON_M, t1=1.0, dt=1e-3, reproject=True)
        self.assertLess(trajectory.summary()['max_constraint_residual'], 1e-12)
        self.assertTrue(trajectory.metadata['reproject'])
        self.assertEqual(trajectory.metadata['route'], 'pushforward')

    def test_nearby_initial_condition_is_snapped(self):
        system = template('heisenberg')
        field_ = make_field(FieldKind.CONSTRAINED, system, system.hamiltonian())
        x0 = point([0.1, 0.3, 0.0], [1.0, 0.5, 0.3 + 1e-7], 0.0)
        with self.assertLogs('apps.contact_mech.services.nh_dynamics', level='WARNING'):
            trajectory = integrate(field_, x0, t1=0.01, dt=1e-3)
        self.assertLess(trajectory.constraint_residual[0], 1e-12)

    def test_far_initial_condition_is_rejected(self):
        system = template('heisenberg')
        field_ = make_field(FieldKind.CONSTRAINED, system, system.hamiltonian())
        with self.assertRaises(NotOnConstraint):
            integrate(field_, point([0.1, 0.3, 0.0], [1.0, 0.5, 0.5]), t1=0.01, dt=1e-3)

    def test_blow_up_raises_step_failure(self):
        system = custom(1, potential='q1*q1*q1*q1')
        field_ = make_field(FieldKind.FREE, system, system.hamiltonian())
        with self.assertRaises(StepFailure):
            integrate(field_, point([1e100], [0.0]), t1=1.0, dt=0.1)

    def test_adaptive_method_matches_rk4(self):
        system = template('knife_edge')
        field_ = make_field(FieldKind.CONSTRAINED, system, system.hamiltonian())
        x0 = system.project_point(point([0.1, -0.2, 0.4], [0.7, 0.3, 0.2], 0.1))
        fixed = integrate(field_, x0, t1=0.5, dt=1e-3)
        adaptive = integrate(field_, x0, t1=0.5, dt=1e-3, method='rk45')
        self.assertEqual(len(adaptive), len(fixed))
        np.testing.assert_allclose(adaptive.state_matrix(), fixed.state_matrix(), atol=1e-8)

    def test_unknown_method(self):
        system = template('free_particle')
        field_ = make_field(FieldKind.FREE, system, system.hamiltonian())
        with self.assertRaises(ValueError):
            integrate(field_, point([0, 0, 0], [1, 0, 0]), t1=0.1, dt=1e-2, method='euler')

    def test_csv_round_trip_is_exact(self):
        system = template('heisenberg')
        field_ = make_field(FieldKind.CONSTRAINED, system, system.hamiltonian())
        trajectory = integrate(field_, ON_M, t1=0.05, dt=1e-2)
        with tempfile.TemporaryDirectory() as tmp:
            path = ExportService().write_trajectory(trajectory, os.path.join(tmp, 'traj.csv'))
            frame = ExportService().read_trajectory(path)
        self.assertEqual(list(frame.columns), ['t', 'q1', 'q2', 'q3', 'p1', 'p2', 'p3', 'z', 'H', 'phi1'])
        assert_frame_equal(frame, trajectory.to_frame(), check_exact=True)
