import math
import random

from django.test import SimpleTestCase

from kkweyl.core import jets
from kkweyl.core.exceptions import (
    JetDomainError,
    LexicalError,
    MetricFileError,
    ParseError,
    SemanticError,
)
from kkweyl.core.expressions import (
    Binary,
    Name,
    Number,
    Unary,
    check_names,
    evaluate,
    parse_expression,
    to_source,
    tokenize,
)


class TestTokenize(SimpleTestCase):
    def test_kinds(self):
        tokens = tokenize('g[1,2] = 2.5e-1*r^2')
        self.assertEqual(
            [t.kind for t in tokens],
            [
                'name', '[', 'number', ',', 'number', ']', '=', 'number',
                '*', 'name', '^', 'number', 'end',
            ],
        )

    def test_columns(self):
        tokens = tokenize('a +  bb', line=3, column=5)
        self.assertEqual([(t.line, t.column) for t in tokens[:3]], [
            (3, 5), (3, 7), (3, 10)
        ])

    def test_unexpected_character(self):
        with self.assertRaises(LexicalError) as raised:
            tokenize('x $ y')
        self.assertEqual(raised.exception.column, 3)
        self.assertIn('1:3', str(raised.exception))


class TestParse(SimpleTestCase):
    def test_precedence(self):
        self.assertEqual(evaluate(parse_expression('1 + 2*3^2'), {}), 19.0)

    def test_power_binds_tighter_than_minus(self):
        self.assertEqual(
            parse_expression('-x^2'),
            Unary('-', Binary('^', Name('x'), Number(2.0))),
        )

    def test_power_is_right_associative(self):
        self.assertEqual(evaluate(parse_expression('2^3^2'), {}), 512.0)

    def test_parameters(self):
        node = parse_expression('(1 + m/r)^2')
        self.assertAlmostEqual(evaluate(node, {'m': 1.0, 'r': 2.0}), 2.25)

    def test_missing_parenthesis(self):
        with self.assertRaises(ParseError) as raised:
            parse_expression('sin(x')
        self.assertEqual(raised.exception.column, 6)
        self.assertIn("')'", raised.exception.expected)

    def test_trailing_tokens(self):
        with self.assertRaisesRegex(ParseError, 'unexpected'):
            parse_expression('x y')

    def test_empty(self):
        with self.assertRaisesRegex(ParseError, 'end of line'):
            parse_expression('')

    def test_canonical_source_reparses(self):
        for text in ('-x^2', '(a - b) - (c - d)', 'a/(b*c)', '2^-1', '-(-x)'):
            node = parse_expression(text)
            self.assertEqual(parse_expression(to_source(node)), node, text)


class TestNames(SimpleTestCase):
    def test_unknown_name(self):
        with self.assertRaisesRegex(SemanticError, "unknown name 'q'"):
            check_names(parse_expression('r + q'), ['r'])

    def test_unsupported_function(self):
        with self.assertRaisesRegex(SemanticError, 'unsupported function'):
            check_names(parse_expression('sinh(r)'), ['r'])

    def test_pi_is_known(self):
        check_names(parse_expression('2*pi*r'), ['r'])


class TestEvaluate(SimpleTestCase):
    def test_division_by_zero(self):
        with self.assertRaises(JetDomainError):
            evaluate(parse_expression('1/(x - 1)'), {'x': 1.0})

    def test_ln_domain(self):
        with self.assertRaises(JetDomainError):
            evaluate(parse_expression('ln(x)'), {'x': -1.0})

    def test_non_integer_power(self):
        self.assertAlmostEqual(
            evaluate(parse_expression('x^0.5'), {'x': 4.0}), 2.0
        )

    def test_large_integral_power_of_negative_base(self):
        node = parse_expression('(-2)^65')
        self.assertEqual(evaluate(node, {}), -(2.0**65))
        node = parse_expression('x^-65')
        self.assertEqual(evaluate(node, {'x': -2.0}), -(2.0**-65))

    def test_jets(self):
        x = jets.variables([0.5, 2.0, 0.0])
        node = parse_expression('sin(a)*b^2')
        value = evaluate(node, {'a': x[0], 'b': x[1]})
        self.assertAlmostEqual(value.value, math.sin(0.5) * 4)
        self.assertAlmostEqual(value.partial((1, 0, 0)), math.cos(0.5) * 4)
        self.assertAlmostEqual(value.partial((0, 1, 0)), math.sin(0.5) * 4)


_ALPHABET = 'xyr0123456789.+-*/^() ,[]=:$#sinecolpqt_'


class TestFuzz(SimpleTestCase):
    def test_random_input_fails_with_a_position(self):
        rng = random.Random(1234)
        for _ in range(1000):
            text = ''.join(
                rng.choice(_ALPHABET) for _ in range(rng.randint(0, 24))
            )
            try:
                node = parse_expression(text)
            except MetricFileError as e:
                self.assertGreaterEqual(e.line, 1)
                self.assertTrue(1 <= e.column <= len(text) + 1, text)
                continue
            self.assertEqual(parse_expression(to_source(node)), node)
