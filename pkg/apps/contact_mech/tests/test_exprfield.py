import numpy as np
from django.test import SimpleTestCase

from apps.contact_mech.services import dual
from apps.contact_mech.services.dual import DualScalar
from apps.contact_mech.services.exceptions import (
    BadIndex,
    DomainError,
    EmptyInput,
    MechanicalTypeViolation,
    ParseError,
    UnbalancedParen,
    UnknownIdentifier,
)
from apps.contact_mech.services.exprfield import (
    BinOp,
    Call,
    Num,
    Var,
    differential,
    evaluate,
    finite_difference_differential,
    observable,
    parse_expr,
    print_expr,
    random_polynomial,
)

from .helpers import point, rng


class ParseExprTests(SimpleTestCase):
    def test_precedence_of_division_and_power(self):
        tree = parse_expr("p1^2/2 + z", 3)
        expected = BinOp('+', BinOp('/', BinOp('^', Var('p', 1), Num(2.0)), Num(2.0)), Var('z', 0))
        self.assertEqual(tree, expected)

    def test_parameters_are_substituted(self):
        self.assertEqual(parse_expr("alpha*z", 3, {'alpha': 0.5}), BinOp('*', Num(0.5), Var('z', 0)))

    def test_unbalanced_paren_reports_column(self):
        with self.assertRaises(UnbalancedParen) as ctx:
            parse_expr("q1*(p2", 2)
        self.assertEqual(ctx.exception.column, 7)

    def test_stray_closing_paren(self):
        with self.assertRaises(UnbalancedParen):
            parse_expr("q1)", 2)

    def test_bad_indices(self):
        with self.assertRaises(BadIndex):
            parse_expr("q0", 3)
        with self.assertRaises(BadIndex):
            parse_expr("p4 + 1", 3)

    def test_unknown_identifier(self):
        with self.assertRaises(UnknownIdentifier) as ctx:
            parse_expr("q1 + beta", 2)
        self.assertEqual(ctx.exception.column, 6)

    def test_empty_input(self):
        for source in ("", "   "):
            with self.assertRaises(EmptyInput):
                parse_expr(source, 2)

    def test_forbidden_variable(self):
        with self.assertRaises(MechanicalTypeViolation):
            parse_expr("p1*q1", 2, allowed=frozenset('q'))
        with self.assertRaises(MechanicalTypeViolation):
            parse_expr("z", 2, allowed=frozenset('q'))

    def test_generic_syntax_errors(self):
        for source in ("q1 +", "*q1", "sin q1", "q1 # 2"):
            with self.assertRaises(ParseError):
                parse_expr(source, 2)

    def test_function_call(self):
        self.assertEqual(parse_expr("sin(q3)", 3), Call('sin', Var('q', 3)))

    def test_power_is_right_associative(self):
        self.assertEqual(evaluate(observable("2^3^2", 1), point([0], [0])), 512.0)

    def test_unary_minus_binds_to_the_base(self):
        self.assertEqual(evaluate(observable("-q1^2", 1), point([3.0], [0])), 9.0)
        self.assertEqual(evaluate(observable("-(q1^2)", 1), point([3.0], [0])), -9.0)

    def test_printer_round_trip(self):
        sources = ["p1^2/2 + z", "-q1^2", "sin(q3) - -cos(q2)*alpha", "2^3^2", "(q1 - q2) - q3", "-0.5*z"]
        for source in sources:
            tree = parse_expr(source, 3, {'alpha': -0.25})
            self.assertEqual(parse_expr(print_expr(tree), 3), tree, source)

    def test_printer_round_trip_random_polynomials(self):
        generator = rng(3)
        for _ in range(25):
            f = random_polynomial(generator, 3, terms=5, max_degree=3)
            self.assertEqual(parse_expr(print_expr(f.expr), 3), f.expr)


class EvaluateTests(SimpleTestCase):
    def test_domain_errors(self):
        x = point([1.0, 2.0], [0.5, -1.0], 0.0)
        for source in ("log(-q1)", "sqrt(p2)", "1/(q1 - q1)", "(-8)^0.5", "0^(-1)"):
            with self.assertRaises(DomainError, msg=source):
                evaluate(observable(source, 2), x)

    def test_evaluation_is_repeatable(self):
        f = observable("exp(q1)*sin(p2) + z^3/(1 + q2^2)", 2)
        x = point([0.3, -0.7], [1.1, 0.2], 0.4)
        self.assertEqual(evaluate(f, x), evaluate(f, x))

    def test_differential_of_kinetic_energy(self):
        df = differential(observable("p1^2/2 + z", 3), point([0.1, 0.2, 0.3], [1.5, 0.0, 0.0], 2.0))
        np.testing.assert_array_equal(df.a_q, [0.0, 0.0, 0.0])
        np.testing.assert_array_equal(df.a_p, [1.5, 0.0, 0.0])
        self.assertEqual(df.a_z, 1.0)

    def test_pythagorean_identity_is_flat(self):
        f = observable("sin(q1)^2+cos(q1)^2", 1)
        generator = rng(8)
        for _ in range(20):
            x = point(generator.uniform(-3, 3, 1), generator.uniform(-1, 1, 1), generator.uniform(-1, 1))
            value, df = f.value_and_differential(x)
            self.assertAlmostEqual(value, 1.0, places=14)
            np.testing.assert_allclose(df.as_array(), 0.0, atol=1e-15)

    def test_ad_agrees_with_finite_differences(self):
        sources = [
            "exp(q1)*sin(p2) + z^3/(1 + q2^2)",
            "sqrt(1 + p1^2) * cos(q2 - z)",
            "log(2 + q1^2) - abs(p2 + 3) / (1 + z^2)",
            "q1^2.5 + p1*p2*z",
        ]
        generator = rng(7)
        for source in sources:
            f = observable(source, 2)
            for _ in range(20):
                x = point(generator.uniform(0.1, 1.0, 2), generator.uniform(-1, 1, 2), generator.uniform(-1, 1))
                ad = f.differential(x).as_array()
                fd = finite_difference_differential(f, x).as_array()
                np.testing.assert_array_less(np.abs(ad - fd), 1e-8 * (1.0 + np.abs(fd)))

    def test_value_and_differential_match_separate_calls(self):
        f = observable("q1*p1 - z*q2", 2)
        x = point([1.0, 2.0], [3.0, 4.0], 5.0)
        value, df = f.value_and_differential(x)
        self.assertEqual(value, f.value(x))
        np.testing.assert_array_equal(df.as_array(), f.differential(x).as_array())


class DualScalarTests(SimpleTestCase):
    def test_leibniz_rule(self):
        generator = rng(11)
        for _ in range(50):
            u = DualScalar(generator.normal(), generator.normal(size=4))
            v = DualScalar(generator.normal(), generator.normal(size=4))
            product = u * v
            np.testing.assert_allclose(
                product.tangent, u.value * v.tangent + v.value * u.tangent, rtol=0, atol=1e-15
            )

    def test_numpy_scalars_delegate(self):
        x = DualScalar(2.0, [1.0])
        result = np.float64(3.0) * x
        self.assertIsInstance(result, DualScalar)
        self.assertEqual(result.tangent[0], 3.0)

    def test_quotient_rule(self):
        x, y = dual.seed([3.0, 2.0])
        q = x / y
        np.testing.assert_allclose(q.tangent, [0.5, -0.75])

    def test_solve_spd_tangent(self):
        a_entries = [[DualScalar(4.0, [1.0]), DualScalar(1.0, [0.0])], [DualScalar(1.0, [0.0]), DualScalar(3.0, [2.0])]]
        a = dual.Jet.from_scalars(a_entries)
        b = dual.Jet.constant(np.array([[1.0], [2.0]]), 1)
        x = dual.solve_spd(a, b, lambda: AssertionError("no SPD"))
        np.testing.assert_allclose(a.value @ x.value, b.value)
        # d(A X) = 0  ⇒  dA X + A dX = 0
        np.testing.assert_allclose(
            a.tangent[..., 0] @ x.value + a.value @ x.tangent[..., 0], np.zeros((2, 1)), atol=1e-14
        )
