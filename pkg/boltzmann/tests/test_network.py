import numpy as np
from django.test import SimpleTestCase
from scipy.special import expit

from boltzmann.constructor import soft_deep_model
from boltzmann.enumeration import configuration_bits
from boltzmann.evaluation import exact_log_z
from boltzmann.exceptions import ValidationError
from boltzmann.free_energy import exact_free_energy
from boltzmann.network import (
    BinaryState, NetworkSpec, ParameterInit, Parameters, build_network, energy, flatten, gibbs_sweep,
    layer_conditional, parity_schedule, sample_chain, split_rng, validate_schedule,
)


def random_model(spec: NetworkSpec, seed: int = 0, sigma: float = 1.0, centered: bool = False):
    rng = np.random.default_rng(seed)
    sizes = spec.layer_sizes
    return build_network(spec, ParameterInit.explicit(Parameters(
        weights={(k, l): rng.normal(0.0, sigma, (sizes[k], sizes[l])) for k, l in spec.pairs},
        biases=tuple(rng.normal(0.0, sigma, n) for n in sizes),
        offsets=tuple(rng.random(n) for n in sizes) if centered else None,
    )))


class NetworkSpecTests(SimpleTestCase):

    def test_topology_names(self):
        self.assertEqual(NetworkSpec.rbm(3, 2).topology, 'rbm')
        self.assertEqual(NetworkSpec.dbm([3, 2, 2]).topology, 'dbm')
        self.assertEqual(NetworkSpec.sdbm([3, 2, 2]).topology, 'sdbm')
        self.assertEqual(NetworkSpec.general([3, 2, 2], [(2, 0)]).topology, 'general')

    def test_sdbm_connects_every_pair(self):
        spec = NetworkSpec.sdbm([1, 1, 1, 1])
        self.assertEqual(spec.pairs, ((1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)))

    def test_rejects_empty_layers_and_bad_pairs(self):
        with self.assertRaises(ValidationError):
            NetworkSpec((3, 0))
        with self.assertRaises(ValidationError):
            NetworkSpec((3, 2), frozenset({(0, 1)}))


class BuildNetworkTests(SimpleTestCase):

    def test_gaussian_init_is_seeded(self):
        spec = NetworkSpec.rbm(4, 3)
        a = build_network(spec, ParameterInit.gaussian(0.1, seed=7))
        b = build_network(spec, ParameterInit.gaussian(0.1, seed=7))
        np.testing.assert_array_equal(a.params.flat_vector(), b.params.flat_vector())

    def test_parameters_are_read_only(self):
        model = build_network(NetworkSpec.rbm(2, 2))
        with self.assertRaises(ValueError):
            model.weights[(1, 0)][0, 0] = 1.0

    def test_unmasked_block_rejected(self):
        spec   = NetworkSpec.dbm([2, 2, 2])
        params = Parameters.zeros(NetworkSpec.sdbm([2, 2, 2]))
        with self.assertRaises(ValidationError):
            build_network(spec, ParameterInit.explicit(params))

    def test_non_finite_rejected(self):
        spec = NetworkSpec.rbm(1, 1)
        with self.assertRaises(ValidationError):
            build_network(spec, ParameterInit.explicit(Parameters(
                {(1, 0): np.array([[np.nan]])}, (np.zeros(1), np.zeros(1)))))

    def test_offsets_outside_unit_interval_rejected(self):
        spec = NetworkSpec.rbm(1, 1)
        with self.assertRaises(ValidationError):
            build_network(spec, ParameterInit.explicit(Parameters(
                {(1, 0): np.zeros((1, 1))}, (np.zeros(1), np.zeros(1)), (np.array([1.5]), np.zeros(1)))))


class EnergyTests(SimpleTestCase):

    def test_hand_computed_energy(self):
        spec  = NetworkSpec.rbm(1, 1)
        model = build_network(spec, ParameterInit.explicit(Parameters(
            {(1, 0): np.array([[2.0]])}, (np.array([1.0]), np.array([-1.0])))))
        self.assertEqual(energy(model, BinaryState.of([[1.0], [1.0]])), -2.0)
        self.assertEqual(energy(model, BinaryState.of([[1.0], [0.0]])), -1.0)
        self.assertEqual(energy(model, BinaryState.of([[0.0], [0.0]])), 0.0)

    def test_batch_energy_matches_single(self):
        model = random_model(NetworkSpec.sdbm([3, 2, 2]), seed=1)
        batch = BinaryState.random(model.spec, np.random.default_rng(0), batch=5)
        values = energy(model, batch)
        for r in range(5):
            single = BinaryState(tuple(x[r] for x in batch.layers))
            self.assertAlmostEqual(values[r], energy(model, single), places=12)

    def test_uncentered_model_differs_by_a_constant(self):
        model = random_model(NetworkSpec.sdbm([3, 2, 2]), seed=2, centered=True)
        plain, constant = model.uncentered()
        states = BinaryState.from_flat(model.spec, configuration_bits(0, 2 ** 7, 7))
        np.testing.assert_allclose(energy(model, states), energy(plain, states) + constant, atol=1e-12)

    def test_flatten_reproduces_energy(self):
        rng = np.random.default_rng(30)
        for trial in range(100):
            sizes = [int(rng.integers(1, 4)) for _ in range(int(rng.integers(2, 4)))]
            spec  = (NetworkSpec.rbm(*sizes) if len(sizes) == 2 else
                     (NetworkSpec.dbm, NetworkSpec.sdbm)[trial % 2](sizes))
            model = random_model(spec, seed=300 + trial, centered=bool(trial % 3))
            weights, biases, constant = flatten(model)
            n = spec.n_vis + spec.n_hid
            np.testing.assert_array_equal(weights, weights.T)
            np.testing.assert_array_equal(np.diag(weights), np.zeros(n))
            x = configuration_bits(0, 2 ** n, n)
            flat = -0.5 * np.sum((x @ weights) * x, axis=1) - x @ biases + constant
            np.testing.assert_allclose(energy(model, BinaryState.from_flat(spec, x)), flat, atol=1e-10)

    def test_conditional_matches_energy_difference(self):
        model = random_model(NetworkSpec.sdbm([2, 2, 2]), seed=4, centered=True)
        state = BinaryState.of([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        p = layer_conditional(model, 1, state)
        on  = state.with_layer(1, [1.0, 1.0])
        off = state.with_layer(1, [0.0, 1.0])
        expected = 1.0 / (1.0 + np.exp(energy(model, on) - energy(model, off)))
        self.assertAlmostEqual(p[0], expected, places=12)

    def test_two_layer_chain(self):
        model = soft_deep_model(2)
        ones  = BinaryState.of([[1.0], [1.0], [1.0]])
        self.assertAlmostEqual(energy(model, ones), 0.0, places=12)
        self.assertAlmostEqual(layer_conditional(model, 2, ones)[0], 0.2689414213699951, places=12)
        self.assertEqual(energy(model, BinaryState.zeros(model.spec)), 0.0)


class ScheduleTests(SimpleTestCase):

    def test_parity_schedule_for_dbm(self):
        self.assertEqual(parity_schedule(NetworkSpec.dbm([2, 2, 2])), ((0, 2), (1,)))

    def test_connected_group_rejected(self):
        with self.assertRaises(ValidationError):
            validate_schedule(NetworkSpec.sdbm([2, 2, 2]), ((0, 2), (1,)))

    def test_repeated_layer_rejected(self):
        with self.assertRaises(ValidationError):
            validate_schedule(NetworkSpec.dbm([2, 2, 2]), ((0,), (0,), (1,), (2,)))


class SamplingTests(SimpleTestCase):

    def test_clamped_layer_is_untouched(self):
        model = random_model(NetworkSpec.rbm(4, 3), seed=5)
        rng   = np.random.default_rng(0)
        start = BinaryState.random(model.spec, rng, batch=10)
        after = sample_chain(model, start, 5, rng, clamp=(0,))[-1]
        np.testing.assert_array_equal(after.visible, start.visible)

    def test_child_generators_do_not_depend_on_count(self):
        a = split_rng(11, 2)
        b = split_rng(11, 5)
        np.testing.assert_array_equal(a[1].random(8), b[1].random(8))

    def test_thinning(self):
        model = random_model(NetworkSpec.rbm(2, 2), seed=6)
        state = BinaryState.zeros(model.spec)
        self.assertEqual(len(sample_chain(model, state, 10, np.random.default_rng(0), thin=3)), 3)

    def test_gibbs_reaches_the_visible_marginal(self):
        model = random_model(NetworkSpec.sdbm([2, 2, 2]), seed=8)
        visible = configuration_bits(0, 4, 2)
        p = np.exp(-exact_free_energy(model, visible) - exact_log_z(model))
        expected = p @ visible

        rng   = np.random.default_rng(1)
        state = BinaryState.random(model.spec, rng, batch=4000)
        for _ in range(60):
            state = gibbs_sweep(model, state, rng)
        np.testing.assert_allclose(state.visible.mean(axis=0), expected, atol=0.04)

    def test_strong_coupling_follows_the_clamped_visible(self):
        model = build_network(NetworkSpec.rbm(1, 1), ParameterInit.explicit(Parameters(
            {(1, 0): np.array([[10.0]])}, (np.zeros(1), np.zeros(1)))))
        rng   = np.random.default_rng(2)
        state = BinaryState.of([np.ones((10_000, 1)), np.zeros((10_000, 1))])
        state = gibbs_sweep(model, state, rng, clamp=(0,))
        self.assertGreaterEqual(state.hidden[0].mean(), 0.999)

    def test_independent_units_sample_their_bias_sigmoids(self):
        spec  = NetworkSpec.sdbm([2, 1, 1])
        rng   = np.random.default_rng(31)
        model = build_network(spec, ParameterInit.explicit(Parameters(
            Parameters.zeros(spec).weights, tuple(rng.normal(0.0, 1.0, n) for n in spec.layer_sizes))))
        n, samples = spec.n_vis + spec.n_hid, 100_000
        state = BinaryState.zeros(spec, batch=samples)
        for _ in range(3):
            state = gibbs_sweep(model, state, rng)
        x = np.hstack(state.layers)
        p = expit(np.concatenate(model.biases))

        z = (x.sum(axis=0) - samples * p) / np.sqrt(samples * p * (1.0 - p))
        self.assertTrue(np.all(np.abs(z) < 3.0), z)

        index    = (x @ (2 ** np.arange(n))).astype(np.int64)
        observed = np.bincount(index, minlength=2 ** n)
        bits     = (np.arange(2 ** n)[:, None] >> np.arange(n)) & 1
        expected = samples * np.prod(np.where(bits == 1, p, 1.0 - p), axis=1)
        chi2 = float(np.sum((observed - expected) ** 2 / expected))
        dof  = 2 ** n - 1
        self.assertLess(chi2, dof + 3.0 * np.sqrt(2.0 * dof))
