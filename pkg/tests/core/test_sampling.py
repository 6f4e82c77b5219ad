from django.test import SimpleTestCase

from kkweyl.core.sampling import (
    GridAxis,
    SplitMix64,
    Xoshiro256StarStar,
    grid_points,
    parse_grid,
    sample_points,
    stream_seed,
)


class TestGenerators(SimpleTestCase):
    def test_splitmix64_reference_output(self):
        mixer = SplitMix64(0)
        self.assertEqual(mixer.next(), 0xE220A8397B1DCDAF)

    def test_xoshiro_is_deterministic(self):
        a = Xoshiro256StarStar(42)
        b = Xoshiro256StarStar(42)
        self.assertEqual(
            [a.next() for _ in range(5)], [b.next() for _ in range(5)]
        )

    def test_xoshiro_doubles_in_unit_interval(self):
        rng = Xoshiro256StarStar(7)
        for _ in range(1000):
            value = rng.random()
            self.assertTrue(0.0 <= value < 1.0)

    def test_stream_seeds_differ(self):
        self.assertNotEqual(stream_seed('points', 0), stream_seed('points', 1))
        self.assertNotEqual(stream_seed('points', 0), stream_seed('other', 0))


class TestSamplePoints(SimpleTestCase):
    domain = [(0.0, 1.0), (2.0, 4.0), (-1.0, 1.0)]

    def test_seed_determines_points(self):
        first = sample_points(self.domain, 10, seed=3)
        second = sample_points(self.domain, 10, seed=3)
        self.assertEqual(first, second)
        self.assertNotEqual(first, sample_points(self.domain, 10, seed=4))

    def test_points_lie_in_domain(self):
        for point in sample_points(self.domain, 50, seed=0):
            for x, (lo, hi) in zip(point, self.domain):
                self.assertTrue(lo <= x <= hi)

    def test_prefix_is_stable(self):
        short = sample_points(self.domain, 3, seed=9)
        long = sample_points(self.domain, 8, seed=9)
        self.assertEqual(long[:3], short)

    def test_negative_count(self):
        with self.assertRaises(ValueError):
            sample_points(self.domain, -1, seed=0)


class TestGrid(SimpleTestCase):
    coordinates = ('r', 'theta', 'phi')
    domain = [(2.5, 10.0), (0.3, 2.8), (0.0, 6.0)]

    def test_parse(self):
        axes = parse_grid('r=3:9:4; theta=pi/4:pi/2:2', self.coordinates)
        self.assertEqual(axes[0], GridAxis('r', 3.0, 9.0, 4))
        self.assertAlmostEqual(axes[1].hi, 1.5707963267948966)

    def test_parameters_in_bounds(self):
        axes = parse_grid('r=2*M:4*M:3', self.coordinates, {'M': 1.5})
        self.assertEqual(axes[0].values(), [3.0, 4.5, 6.0])

    def test_points(self):
        axes = parse_grid('r=3:9:4;theta=1:2:2', self.coordinates)
        points = grid_points(axes, self.coordinates, self.domain)
        self.assertEqual(len(points), 8)
        self.assertEqual(points[0], (3.0, 1.0, 3.0))
        self.assertEqual(points[-1], (9.0, 2.0, 3.0))

    def test_single_value_is_midpoint(self):
        self.assertEqual(GridAxis('r', 2.0, 4.0, 1).values(), [3.0])

    def test_errors(self):
        for text in (
            '',
            'q=1:2:3',
            'r=1:2',
            'r=1:2:0',
            'r=2:1:3',
            'r=1:2:3;r=1:2:3',
            'r=1:x:3',
            'r 1:2:3',
        ):
            with self.assertRaises(ValueError, msg=text):
                parse_grid(text, self.coordinates)
