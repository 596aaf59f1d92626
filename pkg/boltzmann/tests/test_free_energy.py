import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
from django.test import SimpleTestCase

from boltzmann.constructor import soft_deep_model
from boltzmann.enumeration import configuration_bits
from boltzmann.exceptions import ValidationError
from boltzmann.free_energy import (
    EnvelopeAxes, MeanFieldConfig, check_bounds, exact_free_energy, export_envelope, free_energy_gap,
    hardmin_free_energy, meanfield_free_energy, rbm_free_energy, residual_energy,
)
from boltzmann.network import NetworkSpec, build_network
from boltzmann.tests.test_network import random_model


class FreeEnergyTests(SimpleTestCase):

    def test_rbm_closed_form_matches_enumeration(self):
        model = random_model(NetworkSpec.rbm(3, 4), seed=1, centered=True)
        v = configuration_bits(0, 8, 3)
        np.testing.assert_allclose(rbm_free_energy(model, v), exact_free_energy(model, v), atol=1e-10)

    def test_gap_identity(self):
        model = random_model(NetworkSpec.sdbm([3, 2, 2]), seed=2)
        v = np.random.default_rng(0).normal(size=(6, 3))
        hard = hardmin_free_energy(model, v).value
        np.testing.assert_allclose(hard - exact_free_energy(model, v), free_energy_gap(model, v), atol=1e-10)

    def test_exact_sits_between_lower_bound_and_hardmin(self):
        model = random_model(NetworkSpec.dbm([2, 3, 2]), seed=3)
        v = configuration_bits(0, 4, 2)
        exact = exact_free_energy(model, v)
        hard  = hardmin_free_energy(model, v).value
        lower = hard - np.exp(hard - residual_energy(model, v))
        self.assertTrue(np.all(lower <= exact + 1e-12))
        self.assertTrue(np.all(exact <= hard + 1e-12))

    def test_hardmin_ties_go_to_the_lowest_configuration(self):
        model = build_network(NetworkSpec.rbm(2, 3))
        result = hardmin_free_energy(model, [1.0, 0.0])
        self.assertEqual(result.index, 0)
        self.assertEqual(result.value, 0.0)

    def test_meanfield_bounds_the_exact_free_energy(self):
        model = random_model(NetworkSpec.sdbm([2, 2, 2]), seed=4)
        v = configuration_bits(0, 4, 2)
        mf = meanfield_free_energy(model, v)
        self.assertTrue(mf.converged)
        self.assertTrue(np.all(exact_free_energy(model, v) <= mf.value + 1e-9))
        self.assertTrue(np.all(mf.value <= hardmin_free_energy(model, v).value + 1e-9))

    def test_sandwich_holds_on_random_models(self):
        rng = np.random.default_rng(50)
        for trial in range(100):
            spec   = (NetworkSpec.rbm(3, 3), NetworkSpec.dbm([3, 2, 2]), NetworkSpec.sdbm([3, 2, 2]))[trial % 3]
            model  = random_model(spec, seed=500 + trial, centered=bool(trial % 2))
            points = rng.uniform(-3.0, 3.0, (50, 3))
            checks = check_bounds(model, points)
            self.assertEqual(len(checks), 50)
            self.assertTrue(all(c.passed for c in checks), (trial, [c.violations for c in checks if not c.passed]))

    def test_single_point_returns_scalars(self):
        model = random_model(NetworkSpec.rbm(2, 2), seed=5)
        self.assertIsInstance(exact_free_energy(model, [1.0, 0.0]), float)
        self.assertTrue(check_bounds(model, [1.0, 0.0]).passed)

    def test_wrong_width_rejected(self):
        model = random_model(NetworkSpec.rbm(2, 2), seed=6)
        with self.assertRaises(ValidationError):
            exact_free_energy(model, [1.0, 0.0, 1.0])

    def test_meanfield_config_validation(self):
        with self.assertRaises(ValidationError):
            MeanFieldConfig(damping=1.0)
        with self.assertRaises(ValidationError):
            MeanFieldConfig(max_iters=0)


class EnvelopeExportTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_two_layer_chain_breakpoints(self):
        axes   = EnvelopeAxes(coords=(0,), lows=(-1.0,), highs=(4.0,), resolution=(501,))
        result = export_envelope(soft_deep_model(2), axes, self.dir / 'envelope.csv')
        np.testing.assert_allclose(result.breakpoints, [0.0, 1.0, 2.0], atol=1e-9)
        self.assertEqual(result.points, 501)
        self.assertEqual(result.distinct_argmins, 4)

        frame = pd.read_csv(result.path)
        self.assertEqual(list(frame.columns[:4]), ['v0', 'F', 'F_hat', 'F_MF'])
        self.assertTrue(np.all(frame['lower_bound'] <= frame['F'] + 1e-9))
        self.assertTrue(np.all(frame['F'] <= frame['F_hat'] + 1e-9))

        lines = pd.read_csv(result.lines_path, dtype={'config': str})
        self.assertEqual(len(lines), 4)
        self.assertEqual(list(lines['config']), ['00', '01', '10', '11'])

    def test_two_dimensional_slice_has_no_lines_file(self):
        model  = random_model(NetworkSpec.rbm(2, 2), seed=7)
        axes   = EnvelopeAxes(coords=(0, 1), lows=(-1.0, -1.0), highs=(1.0, 1.0), resolution=(5, 7))
        result = export_envelope(model, axes, self.dir / 'grid.csv')
        self.assertEqual(result.points, 35)
        self.assertIsNone(result.lines_path)

    def test_axes_validation(self):
        with self.assertRaises(ValidationError):
            EnvelopeAxes(coords=(0,), lows=(1.0,), highs=(0.0,), resolution=(10,))
        with self.assertRaises(ValidationError):
            EnvelopeAxes(coords=(0, 1, 2), lows=(0.0,) * 3, highs=(1.0,) * 3, resolution=(3,) * 3)
