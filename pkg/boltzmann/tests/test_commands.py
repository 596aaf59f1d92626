import json
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
import pandas as pd
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, override_settings

from boltzmann import training
from boltzmann.datasets import BinaryDataset, load_silhouettes, toy_dataset, write_idx, write_silhouettes
from boltzmann.management.commands import sample as sample_command
from boltzmann.presets import MNIST_TEST, MNIST_TRAIN, SILHOUETTES_FILE
from boltzmann.storage import load_model, save_model
from boltzmann.tests.test_network import random_model
from boltzmann.network import NetworkSpec

PARITY_4 = json.dumps({'n': 4})


class CommandTestCase(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        self.override = override_settings(BM_OUTPUT_DIR=self.dir / 'runs', BM_DATA_DIR=self.dir / 'data')
        self.override.enable()

    def tearDown(self):
        self.override.disable()
        self.tmp.cleanup()

    def call(self, name, out_name=None, **options):
        out = StringIO()
        options.setdefault('output_dir', str(self.dir / (out_name or name)))
        call_command(name, stdout=out, **options)
        return out.getvalue(), Path(options['output_dir'])

    def read(self, path):
        return json.loads(Path(path).read_text(encoding='utf-8'))


class ConstructCommandTests(CommandTestCase):

    def test_soft_deep_chain(self):
        out, where = self.call('construct', gbm=3)
        self.assertIn('tangency: ok', out)
        model = load_model(where / 'model.json')
        self.assertEqual(model.spec.layer_sizes, (1, 1, 1, 1))
        self.assertEqual(float(model.weights[(3, 2)][0, 0]), -8.0)
        self.assertTrue(self.read(where / 'tangency.json')['passed'])
        snapshot = self.read(where / 'resolved_config.json')
        self.assertEqual(snapshot['command'], 'construct')
        self.assertEqual(snapshot['settings']['gbm'], 3)

    def test_bundle(self):
        _, where = self.call('construct', bundle='2x2')
        self.assertEqual(load_model(where / 'model.json').spec.layer_sizes, (2, 2, 2))

    def test_seeded_initialisation_is_reproducible(self):
        _, a = self.call('construct', 'a', rbm=[2, 4], init='gaussian:0.1', seed=7)
        _, b = self.call('construct', 'b', rbm=[2, 4], init='gaussian:0.1', seed=7)
        self.assertEqual((a / 'model.json').read_bytes(), (b / 'model.json').read_bytes())

    def test_default_output_dir(self):
        call_command('construct', gbm=1, stdout=StringIO())
        self.assertTrue((self.dir / 'runs' / 'construct' / 'model.json').exists())

    def test_missing_source_exits_with_validation_code(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('construct')
        self.assertEqual(ctx.exception.returncode, 2)

    def test_two_sources_rejected(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('construct', gbm=2, rbm=[2, 2])
        self.assertEqual(ctx.exception.returncode, 2)

    def test_missing_model_file_exits_with_io_code(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('construct', model=str(self.dir / 'absent.json'))
        self.assertEqual(ctx.exception.returncode, 4)

    def test_config_file_and_explicit_flags(self):
        config = self.dir / 'config.json'
        config.write_text(json.dumps({'gbm': 2, 'encoding': 'ieee754'}), encoding='utf-8')
        _, where = self.call('construct', 'from_file', config=str(config))
        self.assertEqual(load_model(where / 'model.json').spec.layer_sizes, (1, 1, 1))
        self.assertEqual(self.read(where / 'model.json')['encoding'], 'ieee754')

        _, where = self.call('construct', 'flag_wins', config=str(config), gbm=3)
        self.assertEqual(load_model(where / 'model.json').spec.layer_sizes, (1, 1, 1, 1))

    def test_unknown_config_key_rejected(self):
        config = self.dir / 'config.json'
        config.write_text(json.dumps({'gbm': 2, 'depthh': 3}), encoding='utf-8')
        with self.assertRaises(CommandError) as ctx:
            self.call('construct', config=str(config))
        self.assertEqual(ctx.exception.returncode, 2)


class RegionCommandTests(CommandTestCase):

    def test_chain_count(self):
        out, where = self.call('regions', gbm=3)
        self.assertIn('count: 8', out)
        report = self.read(where / 'regions.json')
        self.assertEqual(report['count'], 8)
        self.assertEqual(report['method'], 'envelope-1d')
        self.assertTrue(self.read(where / 'bounds.json')['passed'])

    def test_bundle_count(self):
        out, _ = self.call('regions', bundle='2x2', method='lp-exact')
        self.assertIn('count: 16', out)

    def test_dbm_respects_its_bounds(self):
        _, where = self.call('regions', dbm=[2, 2, 2], init='gaussian:1', seed=3)
        self.assertLessEqual(self.read(where / 'regions.json')['count'], 4)
        self.assertTrue(self.read(where / 'bounds.json')['passed'])

    def test_domain(self):
        out, _ = self.call('regions', gbm=2, domain='0.25:0.75')
        self.assertIn('count: 1', out)


class EnvelopeCommandTests(CommandTestCase):

    def test_bounds_hold_on_the_chain(self):
        out, where = self.call('bounds', gbm=2)
        check = self.read(where / 'bound_check.json')
        self.assertEqual(check['points'], 501)
        self.assertEqual(check['passed'], 501)
        self.assertIn('bounds: 501/501', out)
        self.assertTrue((where / 'envelope.csv').exists())

    def test_export_envelope_breakpoints(self):
        _, where = self.call('export_envelope', gbm=2, figure=True)
        doc = self.read(where / 'envelope.json')
        np.testing.assert_allclose(doc['breakpoints'], [0.0, 1.0, 2.0], atol=1e-9)
        lines = pd.read_csv(where / 'envelope_lines.csv')
        self.assertEqual(len(lines), 4)

    def test_two_dimensional_slice(self):
        _, where = self.call('export_envelope', rbm=[2, 2], init='gaussian:1', axis=['0:-1:1:5', '1:-1:1:6'])
        self.assertEqual(self.read(where / 'envelope.json')['points'], 30)

    def test_bad_axis_rejected(self):
        with self.assertRaises(CommandError):
            self.call('export_envelope', gbm=2, axis=['0:-1'])


class EvalCommandTests(CommandTestCase):

    def test_ais_against_exact(self):
        out, where = self.call('eval', rbm=[4, 5], init='gaussian:0.5', dataset='parity', dataset_params=PARITY_4,
                               ais=['runs=200', 'betas=1000'], seed=1)
        doc = self.read(where / 'evaluation.json')
        self.assertEqual(doc['log_z']['method'], 'ais')
        self.assertLess(abs(doc['log_z']['delta']), 0.1)
        self.assertIn('exact log Z', out)

    def test_exact_only(self):
        _, where = self.call('eval', sdbm=[4, 2, 2], init='gaussian:0.5', dataset='parity', dataset_params=PARITY_4)
        doc = self.read(where / 'evaluation.json')
        self.assertEqual(doc['log_z']['method'], 'exact')
        self.assertIn('test_exact', doc['ll'])

    def test_width_mismatch(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('eval', rbm=[3, 2], dataset='parity', dataset_params=PARITY_4)
        self.assertEqual(ctx.exception.returncode, 2)

    def test_bad_ais_arguments(self):
        with self.assertRaises(CommandError):
            self.call('eval', rbm=[4, 2], dataset='parity', dataset_params=PARITY_4, ais=['runs'])


class SampleCommandTests(CommandTestCase):

    def test_independent_chains(self):
        out, where = self.call('sample', rbm=[4, 3], init='gaussian:1', dataset='parity', dataset_params=PARITY_4,
                               chain_steps=10, count=40, seed=2)
        samples = pd.read_csv(where / 'samples.csv')
        self.assertEqual(samples.shape, (40, 4))
        self.assertTrue(set(np.unique(samples.to_numpy())) <= {0, 1})
        neighbours = pd.read_csv(where / 'neighbors.csv')
        self.assertIn('train_distance', neighbours.columns)
        self.assertIn('samples: 40 (independent)', out)

    def test_thread_count_does_not_change_samples(self):
        _, a = self.call('sample', 'one', sdbm=[3, 2, 2], init='gaussian:1', chain_steps=5, count=70, threads=1)
        _, b = self.call('sample', 'three', sdbm=[3, 2, 2], init='gaussian:1', chain_steps=5, count=70, threads=3)
        self.assertEqual((a / 'samples.csv').read_bytes(), (b / 'samples.csv').read_bytes())

    def test_chain_blocks_follow_training(self):
        self.assertIs(sample_command.CHAIN_BLOCK, training.CHAIN_BLOCK)

    def test_consecutive_chain(self):
        _, where = self.call('sample', gbm=2, chain_steps=5, count=12, consecutive=True, thin=3)
        self.assertEqual(len(pd.read_csv(where / 'samples.csv')), 12)
        self.assertEqual(self.read(where / 'samples.json')['mode'], 'consecutive')


class TrainCommandTests(CommandTestCase):

    def test_small_run(self):
        out, where = self.call('train', sdbm=[4, 2, 2], dataset='parity', dataset_params=PARITY_4, updates=30,
                               batch_size=4, log_every=10, lr=0.05, seed=3)
        records = [json.loads(line) for line in (where / 'metrics.jsonl').read_text().splitlines()]
        self.assertEqual([r['update'] for r in records], [10, 20, 30])
        summary = self.read(where / 'summary.json')
        self.assertEqual(summary['ll_method'], 'exact')
        self.assertEqual(summary['config']['seed'], 3)
        self.assertIsNone(summary['config']['reg'])
        self.assertIn('final ll', out)
        load_model(where / 'model.json')

    def test_regularisation_and_centering_flags(self):
        _, where = self.call('train', rbm=[4, 3], dataset='parity', dataset_params=PARITY_4, updates=5,
                             batch_size=4, eta=2.0, reg=1e-4, centering_rate=0.1)
        config = self.read(where / 'summary.json')['config']
        self.assertEqual(config['reg'], {'eta': 2.0, 'base_strength': 1e-4})
        self.assertEqual(config['centering'], {'offset_update_rate': 0.1})

    def test_checkpoint_and_resume(self):
        common = dict(sdbm=[4, 2, 2], dataset='parity', dataset_params=PARITY_4, updates=20, batch_size=4,
                      log_every=10, seed=5)
        _, first = self.call('train', 'first', checkpoint=True, **common)
        self.assertTrue((first / 'checkpoint' / 'chains.json').exists())
        _, again = self.call('train', 'again', resume=str(first / 'checkpoint'), **common)
        a = load_model(first / 'model.json').params.flat_vector()
        b = load_model(again / 'model.json').params.flat_vector()
        np.testing.assert_array_equal(a, b)

    def test_smoke_preset(self):
        out, where = self.call('train', preset='toy-bas-smoke', seed=1)
        records = (where / 'metrics.jsonl').read_text().splitlines()
        self.assertEqual(len(records), 2)
        self.assertIn('bernoulli baseline', out)

    def test_mnist_smoke_preset(self):
        rng = np.random.default_rng(4)
        data = self.dir / 'data'
        write_idx(data / MNIST_TRAIN, rng.integers(0, 256, (30, 28, 28), dtype=np.uint8), compress=True)
        write_idx(data / MNIST_TEST, rng.integers(0, 256, (10, 28, 28), dtype=np.uint8), compress=True)
        out, where = self.call('train', preset='mnist-2hl-smoke', seed=1)
        records = [json.loads(line) for line in (where / 'metrics.jsonl').read_text().splitlines()]
        self.assertEqual([r['update'] for r in records], [50, 100])
        summary = self.read(where / 'summary.json')
        self.assertEqual(summary['dataset']['source'], 'mnist')
        self.assertEqual(load_model(where / 'model.json').spec.layer_sizes, (784, 500, 500))
        self.assertIn('bernoulli baseline', out)

    def test_silhouettes_smoke_preset(self):
        rng    = np.random.default_rng(5)
        splits = ['train'] * 30 + ['valid'] * 5 + ['test'] * 10
        write_silhouettes(self.dir / 'data' / SILHOUETTES_FILE, BinaryDataset(
            (rng.random((45, 784)) < 0.3).astype(np.uint8), np.array(splits), {}, (28, 28)))
        out, where = self.call('train', preset='silhouettes-2hl-smoke', seed=1)
        records = [json.loads(line) for line in (where / 'metrics.jsonl').read_text().splitlines()]
        self.assertEqual([r['update'] for r in records], [50, 100])
        self.assertEqual(self.read(where / 'summary.json')['config']['pos_chain_steps'], 1)
        self.assertEqual(load_model(where / 'model.json').spec.layer_sizes, (784, 500, 500))
        self.assertIn('bernoulli baseline', out)

    def test_unknown_preset(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('train', preset='nope')
        self.assertEqual(ctx.exception.returncode, 2)


class SweepCommandTests(CommandTestCase):

    def test_ranked_runs(self):
        out, where = self.call('sweep', count=2, updates=20, seed=4)
        doc = self.read(where / 'sweep.json')
        self.assertEqual(doc['preset'], 'toy-bas')
        self.assertEqual(len(doc['runs']), 2)
        lls = [r['final_ll'] for r in doc['runs']]
        self.assertEqual(lls, sorted(lls, reverse=True))
        self.assertTrue((where / 'run_00' / 'model.json').exists())
        self.assertIn('best: run_0', out)


class ConvertDataCommandTests(CommandTestCase):

    def test_generated_dataset_to_silb(self):
        _, where = self.call('convert_data', dataset='bars-and-stripes',
                             dataset_params=json.dumps({'width': 3, 'height': 3}))
        loaded = load_silhouettes(where / 'dataset.silb')
        expected = toy_dataset('bars-and-stripes', {'width': 3, 'height': 3})
        np.testing.assert_array_equal(loaded.train, expected.train)
        np.testing.assert_array_equal(loaded.test, expected.test)
        self.assertEqual(self.read(where / 'provenance.json')['counts'], {'train': 14, 'valid': 0, 'test': 14})

    def test_silb_to_idx(self):
        _, first = self.call('convert_data', 'silb', dataset='parity', dataset_params=PARITY_4)
        _, where = self.call('convert_data', 'idx', silb=str(first / 'dataset.silb'), format='idx', compress=True)
        self.assertTrue((where / 'train.idx.gz').exists())
        self.assertTrue((where / 'test.idx.gz').exists())

    def test_csv(self):
        _, where = self.call('convert_data', dataset='parity', dataset_params=PARITY_4, format='csv')
        frame = pd.read_csv(where / 'dataset.csv')
        self.assertEqual(list(frame.columns), ['p0', 'p1', 'p2', 'p3', 'split'])

    def test_exactly_one_input(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('convert_data', dataset='parity', dataset_params=PARITY_4, silb='x.silb')
        self.assertEqual(ctx.exception.returncode, 2)


class ModelFileCommandTests(CommandTestCase):

    def test_regions_from_a_saved_model(self):
        path = save_model(random_model(NetworkSpec.rbm(2, 3), seed=12), self.dir / 'rbm.json')
        out, where = self.call('regions', model=str(path), method='lp-exact')
        self.assertIn('count: 7', out)

    def test_inspect(self):
        out, where = self.call('inspect', gbm=2)
        summary = self.read(where / 'inspect.json')
        self.assertEqual(summary['layer_sizes'], [1, 1, 1])
        self.assertTrue(summary['exact_log_z'])
        self.assertIn('exact log Z: True', out)
