import numpy as np
from django.test import SimpleTestCase, override_settings

from boltzmann import evaluation
from boltzmann.datasets import toy_distribution
from boltzmann.enumeration import configuration_bits
from boltzmann.evaluation import (
    AnnealingSchedule, ais_log_z, average_log_likelihood, bernoulli_baseline, data_base_biases, evaluate,
    exact_feasible, exact_log_z, nearest_neighbors,
)
from boltzmann.exceptions import EnumerationCapExceeded, ValidationError
from boltzmann.network import NetworkSpec, build_network
from boltzmann.tests.test_network import random_model


class ExactLogZTests(SimpleTestCase):

    def test_routes_agree(self):
        for seed, spec in enumerate([NetworkSpec.rbm(3, 4), NetworkSpec.dbm([3, 2, 3]),
                                     NetworkSpec.sdbm([3, 2, 2])]):
            model = random_model(spec, seed=seed, centered=True)
            values = [exact_log_z(model, route) for route in ('marginalize', 'full', 'visible')]
            np.testing.assert_allclose(values, values[0], atol=1e-10)

    def test_zero_weights_give_softplus_sum(self):
        spec  = NetworkSpec.rbm(3, 2)
        model = build_network(spec)
        self.assertAlmostEqual(exact_log_z(model), 5 * np.log(2.0), places=12)

    def test_probabilities_sum_to_one(self):
        model = random_model(NetworkSpec.sdbm([3, 2, 2]), seed=4)
        log_z = exact_log_z(model)
        report = evaluation.test_log_likelihood(model, configuration_bits(0, 8, 3), log_z)
        self.assertAlmostEqual(float(np.sum(np.exp(report.per_example))), 1.0, places=10)

    @override_settings(BM_EXACT_EVAL_CAP=2 ** 3)
    def test_cap(self):
        model = build_network(NetworkSpec.rbm(4, 4))
        self.assertFalse(exact_feasible(model))
        with self.assertRaises(EnumerationCapExceeded):
            exact_log_z(model)

    def test_unknown_route_rejected(self):
        with self.assertRaises(ValidationError):
            exact_log_z(build_network(NetworkSpec.rbm(2, 2)), 'sideways')


class AISTests(SimpleTestCase):

    def test_schedule_validation(self):
        with self.assertRaises(ValidationError):
            AnnealingSchedule(np.array([0.0, 0.5, 0.4, 1.0]), 10)
        with self.assertRaises(ValidationError):
            AnnealingSchedule(np.array([0.1, 1.0]), 10)
        with self.assertRaises(ValidationError):
            AnnealingSchedule.uniform(1, 10)

    def test_estimate_is_close_to_exact(self):
        model = random_model(NetworkSpec.rbm(4, 5), seed=1, sigma=0.5)
        result = ais_log_z(model, AnnealingSchedule.uniform(1000, 200), seed=3)
        exact  = exact_log_z(model)
        self.assertAlmostEqual(result.log_z_estimate, exact, delta=0.1)
        self.assertLessEqual(result.ci3[0], exact)
        self.assertGreaterEqual(result.ci3[1], exact)
        self.assertLessEqual(result.ci3[0], result.log_z_estimate)
        self.assertEqual(result.log_weights.shape, (200,))

    def test_long_schedule_on_a_wider_rbm(self):
        model  = random_model(NetworkSpec.rbm(8, 10), seed=11, sigma=0.4)
        result = ais_log_z(model, AnnealingSchedule.uniform(10_000, 500), seed=12)
        self.assertAlmostEqual(result.log_z_estimate, exact_log_z(model), delta=0.1)

    def test_interval_covers_the_exact_value(self):
        model    = random_model(NetworkSpec.rbm(8, 10), seed=13, sigma=0.3)
        exact    = exact_log_z(model)
        schedule = AnnealingSchedule.uniform(1000, 500)
        covered  = 0
        for seed in range(50):
            low, high = ais_log_z(model, schedule, seed=100 + seed).ci3
            covered += low <= exact <= high
        self.assertGreaterEqual(covered, 45)

    def test_deep_model_estimate(self):
        model = random_model(NetworkSpec.sdbm([3, 2, 2]), seed=2, sigma=0.5, centered=True)
        result = ais_log_z(model, AnnealingSchedule.uniform(1000, 300), seed=4)
        self.assertAlmostEqual(result.log_z_estimate, exact_log_z(model), delta=0.1)

    def test_thread_count_does_not_change_the_estimate(self):
        model = random_model(NetworkSpec.rbm(3, 3), seed=5, sigma=0.5)
        schedule = AnnealingSchedule.uniform(50, 600)
        one  = ais_log_z(model, schedule, seed=9, threads=1)
        four = ais_log_z(model, schedule, seed=9, threads=4)
        np.testing.assert_array_equal(one.log_weights, four.log_weights)
        self.assertEqual(one.log_z_estimate, four.log_z_estimate)

    def test_data_base_biases(self):
        model = build_network(NetworkSpec.rbm(2, 3))
        base  = data_base_biases(model, np.array([[1.0, 0.0], [1.0, 0.0]]))
        self.assertAlmostEqual(base[0][0], np.log(0.999 / 0.001))
        np.testing.assert_array_equal(base[1], np.zeros(3))


class LikelihoodTests(SimpleTestCase):

    def test_baseline_on_bars_and_stripes(self):
        patterns, _ = toy_distribution('bars-and-stripes', {'width': 3, 'height': 3})
        report = bernoulli_baseline(patterns, patterns)
        self.assertAlmostEqual(report.mean, 9 * np.log(0.5), places=12)

    def test_meanfield_likelihood_is_a_lower_bound(self):
        model = random_model(NetworkSpec.sdbm([3, 2, 2]), seed=6)
        rows  = configuration_bits(0, 8, 3)
        log_z = exact_log_z(model)
        exact = evaluation.test_log_likelihood(model, rows, log_z, 'exact')
        bound = evaluation.test_log_likelihood(model, rows, log_z, 'meanfield')
        self.assertTrue(np.all(bound.per_example <= exact.per_example + 1e-9))

    def test_non_binary_rows_rejected(self):
        model = build_network(NetworkSpec.rbm(2, 2))
        with self.assertRaises(ValidationError):
            average_log_likelihood(model, np.array([[0.5, 1.0]]))

    def test_nearest_neighbours_prefer_the_lower_index(self):
        rows = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
        index, dist = nearest_neighbors(np.array([[1.0, 0.0], [1.0, 1.0]]), rows)
        np.testing.assert_array_equal(index, [0, 0])
        np.testing.assert_allclose(dist, [0.0, 1.0])

    def test_evaluate_reports_every_feasible_mode(self):
        model  = random_model(NetworkSpec.rbm(4, 3), seed=7, sigma=0.5)
        rows   = configuration_bits(0, 16, 4)
        report = evaluate(model, rows[:12], rows[12:], AnnealingSchedule.uniform(200, 50), seed=1)
        doc = report.to_document()
        self.assertEqual(doc['log_z']['method'], 'ais')
        self.assertIn('delta', doc['log_z'])
        self.assertEqual(set(doc['ll']), {'train_exact', 'train_meanfield', 'test_exact', 'test_meanfield'})
        self.assertIsNotNone(doc['baseline'])

    def test_evaluate_without_ais_uses_enumeration(self):
        model = random_model(NetworkSpec.rbm(3, 2), seed=8)
        doc   = evaluate(model, configuration_bits(0, 8, 3), None).to_document()
        self.assertEqual(doc['log_z']['method'], 'exact')
        self.assertEqual(doc['log_z']['estimate'], doc['log_z']['exact'])
