import numpy as np
from django.test import SimpleTestCase

from apps.contact_mech.services.exceptions import (
    ConfigError,
    MechanicalTypeViolation,
    NotSPD,
    RankDeficient,
    UnknownIdentifier,
)
from apps.contact_mech.services.mech_system import build_system

from .helpers import custom, point, rng, template


class BuildSystemTests(SimpleTestCase):
    def test_templates_build(self):
        for name, k in (('heisenberg', 1), ('knife_edge', 1), ('free_particle', 0)):
            system = template(name)
            self.assertEqual(system.n, 3)
            self.assertEqual(system.k, k)
            self.assertEqual(system.name, name)

    def test_user_parameters_override_template(self):
        system = template('knife_edge', m=2.0)
        self.assertEqual(system.params['m'], 2.0)
        self.assertEqual(system.params['J'], 0.5)
        np.testing.assert_array_equal(system.metric_at([0.0, 0.0, 0.0]), np.diag([2.0, 2.0, 0.5]))

    def test_duplicate_constraints_are_rank_deficient(self):
        with self.assertRaises(RankDeficient):
            custom(3, constraints=[['1', '0', '0'], ['1', '0', '0']])

    def test_metric_cannot_depend_on_momenta(self):
        with self.assertRaises(MechanicalTypeViolation):
            custom(2, metric={'diagonal': ['p1', '1']})

    def test_constraints_cannot_depend_on_action(self):
        with self.assertRaises(MechanicalTypeViolation):
            custom(2, constraints=[['z', '1']])

    def test_template_rejects_structural_overrides(self):
        for key, value in (('potential', 'z'), ('constraints', [['1', '0', '0']]), ('dimension', 3)):
            with self.assertRaises(ConfigError, msg=key) as ctx:
                build_system({'template': 'heisenberg', key: value})
            self.assertIn(key, ctx.exception.message_dict)

    def test_missing_dimension(self):
        with self.assertRaises(ConfigError):
            build_system({'template': 'custom'})

    def test_too_many_constraints(self):
        with self.assertRaises(ConfigError):
            custom(2, constraints=[['1', '0'], ['0', '1']])

    def test_negative_metric_is_not_spd(self):
        with self.assertRaises(NotSPD) as ctx:
            custom(2, metric={'diagonal': ['-1', '1']})
        self.assertEqual(len(ctx.exception.q), 2)

    def test_unknown_parameter(self):
        with self.assertRaises(UnknownIdentifier):
            custom(2, potential='beta*z')

    def test_sample_box(self):
        system = custom(2, sample_box=[[0.0, 1.0], [2.0, 3.0]])
        generator = rng(0)
        for _ in range(20):
            q = system.sample_q(generator)
            self.assertTrue(0.0 <= q[0] <= 1.0)
            self.assertTrue(2.0 <= q[1] <= 3.0)


class HamiltonianTests(SimpleTestCase):
    def test_hamiltonian_values(self):
        self.assertAlmostEqual(template('free_particle').hamiltonian().value(point([0, 0, 0], [3, 4, 0])), 12.5, places=12)
        self.assertAlmostEqual(template('heisenberg').hamiltonian().value(point([0, 0, 0], [1, 0, 1], 0.0)), 1.0, places=12)
        self.assertAlmostEqual(template('knife_edge').hamiltonian().value(point([0, 0, 0], [1, 0, 0], 1.0)), 1.0, places=12)

    def test_legendre(self):
        system = custom(2, metric={'diagonal': ['2', '1']})
        np.testing.assert_array_equal(system.legendre_flat([0, 0], [1, 1]), [2.0, 1.0])
        np.testing.assert_allclose(system.legendre_sharp([0, 0], [2, 1]), [1.0, 1.0])
        x = system.legendre_map([0.0, 0.0], [1.0, 1.0], 0.5)
        np.testing.assert_array_equal(x.p, [2.0, 1.0])
        self.assertEqual(x.z, 0.5)

    def test_lagrangian_and_energy(self):
        system = template('heisenberg')
        self.assertEqual(system.lagrangian([0, 0, 0], [1, 0, 0], 1.0), 0.0)
        self.assertEqual(system.energy([0, 0, 0], [1, 0, 0], 1.0), 1.0)
        x = system.legendre_map([0.1, 0.2, 0.3], [0.4, -0.5, 0.6], 0.7)
        self.assertAlmostEqual(system.hamiltonian().value(x), system.energy([0.1, 0.2, 0.3], [0.4, -0.5, 0.6], 0.7))


class ConstraintManifoldTests(SimpleTestCase):
    def test_membership(self):
        system = template('heisenberg')
        self.assertTrue(system.in_constraint_manifold(point([0, 0, 0], [1, 0, 0])))
        self.assertFalse(system.in_constraint_manifold(point([0, 0, 0], [0, 0, 1])))
        self.assertTrue(system.in_constraint_manifold(point([0.1, 0.3, 0], [1, 0.5, 0.3])))
        self.assertEqual(system.constraint_residual(point([0, 2, 0], [1, 0, 0])), 2.0)

    def test_free_system_has_no_constraints(self):
        system = template('free_particle')
        x = point([0.1, 0.2, 0.3], [1, 2, 3])
        self.assertEqual(system.constraint_values(x).shape, (0,))
        self.assertTrue(system.in_constraint_manifold(x))
        projector = system.projector(x.q)
        np.testing.assert_array_equal(projector.P, np.eye(3))
        np.testing.assert_array_equal(projector.dP, np.zeros((3, 3, 3)))

    def test_constraint_functions(self):
        system = template('heisenberg')
        (phi,) = system.constraint_functions()
        x = point([0, 2, 0], [1, 0, 5])
        self.assertEqual(phi.value(x), 3.0)
        np.testing.assert_allclose(phi.differential(x).a_p, [-2.0, 0.0, 1.0])


class ProjectorTests(SimpleTestCase):
    def test_projector_at_origin_is_exact(self):
        P = template('heisenberg').projector([0.0, 0.0, 0.0]).P
        np.testing.assert_array_equal(P, np.diag([1.0, 1.0, 0.0]))

    def test_closed_form(self):
        system = template('heisenberg')
        for q2 in (-0.8, 0.3, 1.7):
            Pp = system.projector([0.2, q2, -0.4]).apply([1.0, 0.0, 0.0])
            np.testing.assert_allclose(Pp, [1.0 / (1 + q2 ** 2), 0.0, q2 / (1 + q2 ** 2)], atol=1e-14)

    def test_projector_invariants(self):
        generator = rng(12)
        for name in ('heisenberg', 'knife_edge'):
            system = template(name)
            for _ in range(100):
                q = system.sample_q(generator)
                P = system.projector(q).P
                g = system.metric_at(q)
                phi = system.constraints_at(q)
                np.testing.assert_allclose(P @ P, P, atol=1e-10)
                np.testing.assert_allclose(phi @ np.linalg.solve(g, P), 0.0, atol=1e-10)
                np.testing.assert_allclose(P @ phi.T, 0.0, atol=1e-10)
                np.testing.assert_allclose(P @ g, (P @ g).T, atol=1e-10)

    def test_exact_derivative_matches_finite_differences(self):
        generator = rng(13)
        for name in ('heisenberg', 'knife_edge'):
            system = template(name)
            for _ in range(10):
                q = system.sample_q(generator)
                np.testing.assert_allclose(system.projector(q).dP, system.projector(q, method='fd').dP, atol=1e-7)

    def test_unknown_method(self):
        with self.assertRaises(ValueError):
            template('heisenberg').projector([0, 0, 0], method='symbolic')

    def test_project_point(self):
        system = template('heisenberg')
        x = system.project_point(point([0, 0, 0], [1, 2, 3], 0.25))
        np.testing.assert_array_equal(x.p, [1.0, 2.0, 0.0])
        self.assertEqual(x.z, 0.25)

    def test_projection_is_idempotent(self):
        generator = rng(14)
        system = template('knife_edge')
        for _ in range(20):
            once = system.project_point(system.sample_point(generator))
            twice = system.project_point(once)
            self.assertLess(system.constraint_residual(once), 1e-12)
            np.testing.assert_allclose(twice.p, once.p, atol=1e-12)
