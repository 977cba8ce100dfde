"""
Unit tests for the Monte Carlo membership test simulator.

The agreement tests compare hundreds of correlated thresholds from one run,
so their tolerance band is family-wise (BAND standard errors) rather than the
3 SE that holds at a single point.
"""

import math
import unittest
import sys
from pathlib import Path

# Add parent to path
sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
from scipy import special

from models.bounds import kappa_shuf_lower, poisson_mixing_weight, sigma_threshold
from models.tradeoff import eval_curve, sub_shuffled
from simulation.adversary_sim import (
    DEFAULT_THRESHOLD_COUNT,
    EmpiricalTradeoffPoint,
    ObservationModel,
    analytic_max_test_point,
    compute_statistic,
    default_thresholds,
    draw_observation,
    draw_observations,
    estimate_separation,
    estimate_tradeoff,
    max_statistic,
    np_log_statistic,
    np_statistic,
    points_frame,
    poisson_np_statistic,
    simulate_statistics,
    tradeoff_points,
)
from utils.errors import InvalidArgumentError
from utils.rng import make_rng

BAND = 5.0
TRIALS = 10**6


def binomial_se(p, n):
    return np.sqrt(p * (1.0 - p) / n)


class TestStatistics(unittest.TestCase):

    def test_max_statistic(self):
        """Test max of [0] and [-1, 2, 0.5]"""
        self.assertEqual(max_statistic([0.0]), 0.0)
        self.assertEqual(max_statistic([-1.0, 2.0, 0.5]), 2.0)
        np.testing.assert_array_equal(max_statistic(np.array([[1.0, 3.0], [4.0, 2.0]])), [3.0, 4.0])

    def test_max_statistic_empty(self):
        """Test that an empty observation is rejected"""
        with self.assertRaises(InvalidArgumentError):
            max_statistic([])

    def test_np_statistic_at_zero(self):
        """Test all-zero observations give exp(-1/(2 sigma^2))"""
        for sigma in (0.3, 1.0):
            self.assertAlmostEqual(np_statistic(np.zeros(5), 5, sigma), math.exp(-0.5 / sigma**2), delta=1e-15)

    def test_np_statistic_direct_sum(self):
        """Test the log-sum-exp path against the direct mean"""
        x = np.array([0.3, -1.2, 2.0, 0.7])
        direct = np.mean(np.exp(x / 0.8 - 0.5 / 0.64))
        self.assertAlmostEqual(np_statistic(x, 4, 0.8), direct, delta=1e-12)

    def test_np_statistic_small_sigma(self):
        """Test no overflow at sigma=0.05"""
        value = np_statistic(np.array([1.0, 2.0]), 2, 0.05)
        self.assertTrue(math.isfinite(value))

    def test_np_statistic_single_round_monotone(self):
        """Test M=1 gives a strictly increasing transform of x"""
        x = np.linspace(-4.0, 4.0, 101)
        values = np_statistic(x[:, None], 1, 0.7)
        self.assertTrue((np.diff(values) > 0).all())

    def test_np_statistic_length_mismatch(self):
        """Test that the length must equal M"""
        with self.assertRaises(InvalidArgumentError):
            np_statistic(np.zeros(3), 4, 1.0)

    def test_poisson_np_statistic(self):
        """Test the Poisson log likelihood ratio against its direct form"""
        x = np.array([0.1, 1.5, -0.4])
        q, sigma = 0.2, 0.6
        direct = np.sum(np.log((1 - q) + q * np.exp(x / sigma - 0.5 / sigma**2)))
        self.assertAlmostEqual(poisson_np_statistic(x, q, sigma), direct, delta=1e-12)

    def test_np_mean_under_h0(self):
        """Test E[np statistic | H0] = 1 at M=10, sigma=0.5"""
        model = ObservationModel('shuffled', 10, 0.5)
        h0, _ = simulate_statistics(model, 'np', TRIALS, seed=21, threads=4)
        # lognormal variance of one term is e^(1/sigma^2) - 1
        se = math.sqrt(math.expm1(1.0 / 0.25) / (10 * TRIALS))
        # the simulated NP statistic is the log of the ratio
        self.assertLess(abs(np.exp(h0).mean() - 1.0), 4 * se)

    def test_np_log_statistic_matches_ratio(self):
        """Test the log statistic is the log of np_statistic where both are finite"""
        x = np.random.default_rng(3).normal(size=(50, 6))
        np.testing.assert_allclose(np_log_statistic(x, 6, 0.6), np.log(np_statistic(x, 6, 0.6)), rtol=1e-12)
        model = ObservationModel('shuffled', 6, 0.6)
        np.testing.assert_array_equal(compute_statistic(model, 'np', x), np_log_statistic(x, 6, 0.6))

    def test_np_log_statistic_tiny_sigma(self):
        """Test the log statistic stays finite where the ratio overflows or underflows"""
        sigma = 0.02
        # x/sigma - 1/(2 sigma^2) = 1250 for the first coordinate, far beyond exp's range
        self.assertAlmostEqual(np_log_statistic(np.array([50.0, 0.0]), 2, sigma), 1250.0 - math.log(2.0), delta=1e-9)
        self.assertAlmostEqual(np_log_statistic(np.array([-1.0, -1.0]), 2, sigma), -1300.0, delta=1e-9)
        self.assertEqual(np_statistic(np.array([-1.0, -1.0]), 2, sigma), 0.0)

    def test_single_round_np_equals_max(self):
        """Test at M=1 and sigma=0.02 the NP test makes the same decisions as the max test"""
        model = ObservationModel('shuffled', 1, 0.02)
        max_stats = simulate_statistics(model, 'max', 100_000, seed=13)
        np_stats = simulate_statistics(model, 'np', 100_000, seed=13)
        self.assertTrue(np.isfinite(np_stats[0]).all() and np.isfinite(np_stats[1]).all())

        h = np.array([-1.0, 0.0, 0.5, 1.0, 2.0, 40.0, 50.0, 60.0])
        np_h = compute_statistic(model, 'np', h[:, None])
        for max_point, np_point in zip(tradeoff_points(*max_stats, h), tradeoff_points(*np_stats, np_h)):
            self.assertEqual(np_point.alpha_hat, max_point.alpha_hat)
            self.assertEqual(np_point.beta_hat, max_point.beta_hat)

    def test_np_tradeoff_tiny_sigma(self):
        """Test estimate_tradeoff with the NP test at M=20, sigma=0.025 gives finite thresholds"""
        model = ObservationModel('shuffled', 20, 0.025)
        points = estimate_tradeoff(model, 'np', trials=20_000, seed=1)
        thresholds = np.array([p.threshold for p in points])
        self.assertTrue(np.isfinite(thresholds).all())
        self.assertGreater(len(points), 100)
        alphas = np.array([p.alpha_hat for p in points])
        self.assertTrue((np.diff(alphas) <= 0).all())
        # 1/sigma = 40 is far above the H0 maximum, so the test nearly separates
        self.assertGreater(estimate_separation(points), 0.6)

    def test_unknown_test(self):
        """Test the test name is validated"""
        model = ObservationModel('shuffled', 3, 1.0)
        with self.assertRaises(InvalidArgumentError):
            compute_statistic(model, 'lr', np.zeros(3))


class TestObservations(unittest.TestCase):

    def test_model_validation(self):
        """Test scheme, M, sigma and q checks"""
        with self.assertRaises(InvalidArgumentError):
            ObservationModel('subsampled', 3, 1.0)
        with self.assertRaises(InvalidArgumentError):
            ObservationModel('shuffled', 0, 1.0)
        with self.assertRaises(InvalidArgumentError):
            ObservationModel('shuffled', 3, 0.0)
        with self.assertRaises(InvalidArgumentError):
            ObservationModel('poisson', 3, 1.0)

    def test_shape(self):
        """Test one vector of length M"""
        obs = draw_observation(ObservationModel('shuffled', 7, 1.0), 'H1', make_rng(0))
        self.assertEqual(obs.shape, (7,))

    def test_shuffled_shift(self):
        """Test the shifted coordinate of shuffled H1 has mean 1/sigma"""
        model = ObservationModel('shuffled', 50, 0.3)
        count = 100_000
        h0 = draw_observations(model, 'H0', count, make_rng(4))
        h1 = draw_observations(model, 'H1', count, make_rng(4))

        # Same stream: H1 is H0 plus the shift in exactly one coordinate
        diff = h1 - h0
        self.assertTrue(((np.abs(diff) > 1e-9).sum(axis=1) == 1).all())
        shifted = np.argmax(diff, axis=1)
        self.assertEqual(len(np.unique(shifted)), 50)

        mean = h1[np.arange(count), shifted].mean()
        self.assertAlmostEqual(mean, 1.0 / 0.3, delta=4.0 / math.sqrt(count))

    def test_single_round(self):
        """Test M=1 shuffled H1 is N(1/sigma, 1)"""
        model = ObservationModel('shuffled', 1, 0.5)
        draws = draw_observations(model, 'H1', 100_000, make_rng(8))[:, 0]
        self.assertAlmostEqual(draws.mean(), 2.0, delta=4.0 / math.sqrt(100_000))
        self.assertAlmostEqual(draws.std(), 1.0, delta=0.02)

    def test_poisson_shift_rate(self):
        """Test each Poisson coordinate is shifted with probability q"""
        model = ObservationModel('poisson', 20, 0.5, q=0.1)
        count = 50_000
        h0 = draw_observations(model, 'H0', count, make_rng(6))
        h1 = draw_observations(model, 'H1', count, make_rng(6))
        rate = (np.abs(h1 - h0) > 1e-9).mean()
        self.assertAlmostEqual(rate, 0.1, delta=4 * binomial_se(0.1, count * 20))

    def test_huge_sigma_matches_h0(self):
        """Test the shift vanishes as sigma grows"""
        model = ObservationModel('shuffled', 5, 1e12)
        h0 = draw_observations(model, 'H0', 100, make_rng(1))
        h1 = draw_observations(model, 'H1', 100, make_rng(1))
        np.testing.assert_allclose(h1, h0, atol=1e-11)

    def test_hypothesis_name(self):
        """Test that only H0 and H1 are accepted"""
        with self.assertRaises(InvalidArgumentError):
            draw_observation(ObservationModel('shuffled', 2, 1.0), 'H2', make_rng(0))


class TestTradeoffPoints(unittest.TestCase):

    def test_infinite_thresholds(self):
        """Test -inf always rejects and +inf never does"""
        points = estimate_tradeoff(
            ObservationModel('shuffled', 4, 1.0), 'max',
            thresholds=[-math.inf, math.inf], trials=1000, seed=0,
        )
        self.assertEqual((points[0].alpha_hat, points[0].beta_hat), (1.0, 0.0))
        self.assertEqual((points[1].alpha_hat, points[1].beta_hat), (0.0, 1.0))

    def test_ties_reject(self):
        """Test a statistic equal to the threshold counts as a rejection"""
        point = tradeoff_points(np.array([1.0, 2.0]), np.array([1.0, 3.0]), [1.0])[0]
        self.assertEqual(point.alpha_hat, 1.0)
        self.assertEqual(point.beta_hat, 0.0)

    def test_standard_errors(self):
        """Test se = sqrt(p(1 - p)/n)"""
        h0 = np.arange(10.0)
        h1 = np.arange(10.0) + 5.0
        point = tradeoff_points(h0, h1, [7.0])[0]
        self.assertEqual(point.alpha_hat, 0.3)
        self.assertEqual(point.beta_hat, 0.2)
        self.assertAlmostEqual(point.alpha_se, math.sqrt(0.3 * 0.7 / 10), delta=1e-15)
        self.assertAlmostEqual(point.beta_se, math.sqrt(0.2 * 0.8 / 10), delta=1e-15)
        self.assertEqual((point.trials_h0, point.trials_h1), (10, 10))

    def test_threshold_validation(self):
        """Test empty and unsorted thresholds"""
        with self.assertRaises(InvalidArgumentError):
            tradeoff_points(np.zeros(3), np.zeros(3), [])
        with self.assertRaises(InvalidArgumentError):
            tradeoff_points(np.zeros(3), np.zeros(3), [1.0, 0.0])

    def test_zero_trials(self):
        """Test trials=0 is rejected"""
        with self.assertRaises(InvalidArgumentError):
            estimate_tradeoff(ObservationModel('shuffled', 2, 1.0), 'max', trials=0)

    def test_default_thresholds(self):
        """Test the quantile grid is sorted and at most 512 long"""
        model = ObservationModel('shuffled', 5, 0.5)
        points = estimate_tradeoff(model, 'max', trials=20_000, seed=2)
        self.assertLessEqual(len(points), DEFAULT_THRESHOLD_COUNT)
        self.assertGreater(len(points), 500)
        thresholds = [p.threshold for p in points]
        self.assertEqual(thresholds, sorted(thresholds))
        alphas = np.array([p.alpha_hat for p in points])
        self.assertTrue((np.diff(alphas) <= 0).all())

    def test_default_thresholds_skip_non_finite(self):
        """Test infinite statistics are left out of the quantile grid but still counted"""
        h0 = np.array([-math.inf, 0.0, 1.0, 2.0])
        h1 = np.array([1.5, 3.0, math.inf, math.inf])
        thresholds = default_thresholds(h0, h1, 16)
        self.assertTrue(np.isfinite(thresholds).all())
        self.assertGreaterEqual(thresholds.min(), 0.0)
        self.assertLessEqual(thresholds.max(), 3.0)

        points = tradeoff_points(h0, h1, thresholds)
        self.assertTrue(all(p.alpha_hat <= 0.75 for p in points))
        self.assertTrue(all(p.beta_hat <= 0.5 for p in points))

    def test_default_thresholds_all_infinite(self):
        """Test that no finite statistic is an error"""
        with self.assertRaises(InvalidArgumentError):
            default_thresholds(np.array([math.inf]), np.array([-math.inf]))

    def test_points_frame(self):
        """Test the CSV columns"""
        frame = points_frame(tradeoff_points(np.arange(4.0), np.arange(4.0), [1.0, 2.0]))
        self.assertEqual(
            list(frame.columns)[:5],
            ['threshold', 'alpha_hat', 'beta_hat', 'alpha_se', 'beta_se'],
        )

    def test_thread_count_invariance(self):
        """Test bit-identical statistics for 1 and 4 threads"""
        model = ObservationModel('poisson', 8, 0.7, q=0.2)
        single = simulate_statistics(model, 'np', 30_000, seed=5, threads=1)
        multi = simulate_statistics(model, 'np', 30_000, seed=5, threads=4)
        np.testing.assert_array_equal(single[0], multi[0])
        np.testing.assert_array_equal(single[1], multi[1])

    def test_seed_determinism(self):
        """Test identical seeds reproduce the points"""
        model = ObservationModel('shuffled', 6, 0.8)
        a = estimate_tradeoff(model, 'max', trials=5000, seed=17)
        b = estimate_tradeoff(model, 'max', trials=5000, seed=17)
        self.assertEqual([vars(p) for p in a], [vars(p) for p in b])


class TestSeparationEstimate(unittest.TestCase):

    def point(self, alpha, beta):
        return EmpiricalTradeoffPoint(0.0, alpha, beta, 0.0, 0.0, 1, 1)

    def test_on_diagonal(self):
        """Test points on 1 - alpha give zero"""
        self.assertEqual(estimate_separation([self.point(0.5, 0.5)]), 0.0)
        self.assertEqual(estimate_separation([self.point(0.2, 0.8), self.point(0.9, 0.1)]), 0.0)

    def test_maximum(self):
        """Test the largest distance wins"""
        points = [self.point(0.1, 0.5), self.point(0.2, 0.2)]
        self.assertAlmostEqual(estimate_separation(points), 0.6 / math.sqrt(2.0), delta=1e-15)

    def test_empty(self):
        """Test that no points is an error"""
        with self.assertRaises(InvalidArgumentError):
            estimate_separation([])


class TestAnalyticPoint(unittest.TestCase):

    def test_infinite_thresholds(self):
        """Test the closed form at -inf and +inf"""
        self.assertEqual(analytic_max_test_point(20, 0.3, -math.inf), (1.0, 0.0))
        self.assertEqual(analytic_max_test_point(20, 0.3, math.inf), (0.0, 1.0))

    def test_nan_threshold(self):
        """Test a NaN threshold is rejected by the log Phi wrapper"""
        with self.assertRaises(InvalidArgumentError):
            analytic_max_test_point(20, 0.3, math.nan)

    def test_matches_sub_shuffled(self):
        """Test (alpha(h), beta(h)) lies on sub_shuffled(M, sigma)"""
        alpha, beta = analytic_max_test_point(20, 0.3, np.linspace(-1.0, 5.0, 25))
        np.testing.assert_allclose(eval_curve(sub_shuffled(20, 0.3), alpha), beta, atol=1e-12)


class TestMaxTestAgreement(unittest.TestCase):
    """Shuffled model, M=20, sigma=0.3, 10^6 trials per hypothesis."""

    @classmethod
    def setUpClass(cls):
        cls.model = ObservationModel('shuffled', 20, 0.3)
        cls.max_stats = simulate_statistics(cls.model, 'max', TRIALS, seed=11, threads=4)
        cls.np_stats = simulate_statistics(cls.model, 'np', TRIALS, seed=11, threads=4)
        cls.max_points = tradeoff_points(*cls.max_stats, default_thresholds(*cls.max_stats))

    def test_closed_form(self):
        """Test every max-test point against 1 - Phi(h)^M and Phi(h - 1/sigma) Phi(h)^(M-1)"""
        for p in self.max_points:
            alpha, beta = analytic_max_test_point(20, 0.3, p.threshold)
            self.assertLessEqual(abs(p.alpha_hat - alpha), BAND * binomial_se(alpha, TRIALS) + 1e-12)
            self.assertLessEqual(abs(p.beta_hat - beta), BAND * binomial_se(beta, TRIALS) + 1e-12)

    def test_max_at_two(self):
        """Test P(max < 2 | H0) = Phi(2)^20"""
        point = tradeoff_points(*self.max_stats, [2.0])[0]
        expected = special.ndtr(2.0) ** 20
        self.assertAlmostEqual(1.0 - point.alpha_hat, expected, delta=4 * binomial_se(expected, TRIALS))

    def test_np_dominates_max(self):
        """Test the likelihood-ratio test is never worse at matched alpha"""
        h0_np, h1_np = self.np_stats
        h0_sorted = np.sort(h0_np)

        # NP threshold rejecting exactly as many H0 draws as each max-test point;
        # with none rejected it sits just above the largest H0 statistic
        rejected = np.array([round(p.alpha_hat * TRIALS) for p in self.max_points])
        np_thresholds = np.where(
            rejected > 0,
            h0_sorted[np.clip(TRIALS - rejected, 0, TRIALS - 1)],
            np.nextafter(h0_sorted[-1], math.inf),
        )
        np_points = tradeoff_points(h0_np, h1_np, np_thresholds)

        f_sub = sub_shuffled(20, 0.3)
        for count, max_point, np_point in zip(rejected, self.max_points, np_points):
            self.assertEqual(np_point.alpha_hat, max_point.alpha_hat)
            if not 100 <= count <= TRIALS - 100:
                continue

            # Both thresholds only match in empirical alpha; their true alphas
            # differ by about sqrt(2) alpha_se along the curve
            a = max_point.alpha_hat
            lo, hi = max(a - 1e-6, 0.0), min(a + 1e-6, 1.0)
            slope = abs(eval_curve(f_sub, hi) - eval_curve(f_sub, lo)) / (hi - lo)
            se = math.sqrt(np_point.beta_se**2 + max_point.beta_se**2 + 2.0 * (slope * max_point.alpha_se) ** 2)
            self.assertLessEqual(np_point.beta_hat, max_point.beta_hat + BAND * se, f"alpha={a}")

        # and strictly better somewhere
        gaps = [m.beta_hat - n.beta_hat for m, n in zip(self.max_points, np_points)]
        self.assertGreater(max(gaps), 0.0)


class TestSeparationWitness(unittest.TestCase):

    def test_threshold_noise_leaks(self):
        """Test M=100 at sigma_threshold(100) separates by at least the corrected lower bound"""
        model = ObservationModel('shuffled', 100, sigma_threshold(100))
        points = estimate_tradeoff(model, 'max', trials=TRIALS, seed=3, threads=4)
        max_se = max(max(p.alpha_se, p.beta_se) for p in points)
        self.assertGreaterEqual(
            estimate_separation(points),
            kappa_shuf_lower(100, with_correction=True) - 3 * max_se,
        )


class TestPoissonMixture(unittest.TestCase):

    def test_mixture_bound(self):
        """Test Poisson NP points stay under p(1 - a) + (1 - p) f_sub(a) with p = (1 - q)^M"""
        M = 50
        q = 1.0 / M
        sigma = sigma_threshold(M)
        points = estimate_tradeoff(ObservationModel('poisson', M, sigma, q=q), 'np', trials=TRIALS, seed=29, threads=4)

        p = poisson_mixing_weight(q, M)
        f_sub = sub_shuffled(M, sigma)

        def bound(a):
            return p * (1.0 - a) + (1.0 - p) * eval_curve(f_sub, a)

        for point in points:
            a = point.alpha_hat
            lo, hi = max(a - 1e-6, 0.0), min(a + 1e-6, 1.0)
            slope = (bound(hi) - bound(lo)) / (hi - lo)
            tolerance = BAND * math.hypot(point.beta_se, slope * point.alpha_se)
            self.assertLessEqual(point.beta_hat, bound(a) + tolerance + 1e-12, f"alpha={a}")


if __name__ == '__main__':
    unittest.main()
