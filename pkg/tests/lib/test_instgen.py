from casflow.lib import carbon, core, instgen
from ..util.mock_progress import MockProgress

import unittest
from hamcrest import (assert_that, contains_exactly, empty, greater_than_or_equal_to, has_entries,
                      has_length, is_, less_than, less_than_or_equal_to)

import numpy as np

import dataclasses
import json
import os
import tempfile


SAMPLE_DATA = os.path.join(os.path.dirname(__file__), '..', '..', 'docs', 'data')


def historical(days = 2, prices = True):
    periods = days * 96
    t = np.arange(periods)
    return instgen.HistoricalData(
        carbon = 300 + 100 * np.sin(2 * np.pi * t / 96),
        onsite = np.clip(800 * np.sin(np.pi * (t % 96 - 24) / 48), 0, None),
        prices = (0.1 + 0.05 * np.cos(2 * np.pi * t / 96)) if prices else None)


class InstgenTestCase(unittest.TestCase):

    def test_config(self):
        config = instgen.GenConfig(machine_count = 1, horizon = 96)
        assert_that(config.duration_bounds, is_((2, 16)))
        assert_that(config.instance_count, is_(50))
        assert_that(config.pool_size, is_(2000))
        assert_that(config.periods_per_day, is_(96))
        assert_that(instgen.GenConfig(machine_count = 3, horizon = 96).duration_bounds,
                    is_((0, 8)))

        echo = config.echo()
        assert_that(echo, has_entries({'machine_count': 1, 'duration_bounds': [2, 16],
                                       'jitter_bounds': [-250, 250]}))
        json.dumps(echo)

        for kwargs in [
            {'machine_count': 0},
            {'horizon': 0},
            {'duration_bounds': (5, 2)},
            {'duration_bounds': (-1, 2)},
            {'power_bounds': (0, 3000)},
            {'jitter_bounds': (1.5, 2)},
            {'power_bounds': (100,)},
            {'pool_size': 0},
            {'max_rejections': 0},
        ]:
            self.assertRaises(instgen.GenerationError, instgen.GenConfig,
                              **{'machine_count': 1, 'horizon': 96, **kwargs})


    def test_operation_pool(self):
        config = instgen.GenConfig(machine_count = 1, horizon = 96)
        pool = instgen.build_operation_pool(config, np.random.default_rng(0))
        assert_that(pool, has_length(2000))
        durations = [op.duration for op in pool]
        assert_that(min(durations), greater_than_or_equal_to(2))
        assert_that(max(durations), less_than_or_equal_to(16))
        power = [p for op in pool for p in op.power]
        assert_that(min(power), greater_than_or_equal_to(0))
        assert_that(max(power), less_than_or_equal_to(3250))

        config = instgen.GenConfig(machine_count = 3, horizon = 96, pool_size = 500)
        pool = instgen.build_operation_pool(config, np.random.default_rng(0))
        assert_that(pool, has_length(500))
        assert_that(min(op.duration for op in pool), is_(0))
        assert_that(max(op.duration for op in pool), less_than_or_equal_to(8))


    def test_fcfs_completion(self):
        assert_that(instgen.fcfs_completion([]), is_(0))
        assert_that(instgen.fcfs_completion([[11], [8], [13], [8], [8]]), is_(48))

        rng = np.random.default_rng(1)
        for _ in range(100):
            machines = int(rng.integers(1, 4))
            rows = rng.integers(0, 5, size = (int(rng.integers(1, 6)), machines)).tolist()
            instance = core.Instance(
                machine_count = machines,
                horizon = 100,
                jobs = tuple(core.Job(tuple(core.OperationSpec(d, (1.0,) * d) for d in row))
                             for row in rows),
                carbon_intensity = (1.0,) * 100,
                onsite_available = (0.0,) * 100)
            assert_that(instgen.fcfs_completion(rows),
                        is_(core.fcfs_schedule(instance).completion))


    def test_generate_dataset(self):
        config = instgen.GenConfig(machine_count = 1, horizon = 96, seed = 7)
        pool = instgen.build_operation_pool(config, instgen.pool_rng(config))
        instances = instgen.generate_dataset(config, pool, historical())

        assert_that(instances, has_length(50))
        assert_that(instances[0].label, is_('M1T96-001'))
        assert_that(instances[-1].label, is_('M1T96-050'))

        operations = []
        for instance in instances:
            assert_that(instance.job_count, greater_than_or_equal_to(1))
            assert_that(core.fcfs_schedule(instance).completion, less_than(96))
            for s in core.slack_vector(instance):
                assert_that(s, greater_than_or_equal_to(1))
                assert_that(s, less_than_or_equal_to(95))
            assert_that(core.instance_from_document(instance.to_document()), is_(instance))
            operations.append(instance.operation_count)

        assert_that(float(np.median(operations)), greater_than_or_equal_to(6))
        assert_that(float(np.median(operations)), less_than_or_equal_to(15))


    def test_multi_machine(self):
        config = instgen.GenConfig(machine_count = 3, horizon = 96, instance_count = 5,
                                   pool_size = 300, seed = 2)
        pool = instgen.build_operation_pool(config, instgen.pool_rng(config))
        for instance in instgen.generate_dataset(config, pool, historical(prices = False)):
            assert_that(instance.machine_count, is_(3))
            assert_that(instance.prices, is_(None))
            assert_that(core.fcfs_schedule(instance).completion, less_than(96))
            for job in instance.jobs:
                assert_that(all(op.is_dummy for op in job.operations), is_(False))


    def test_determinism(self):
        config = instgen.GenConfig(machine_count = 1, horizon = 96, instance_count = 5,
                                   seed = 11)
        fewer = instgen.GenConfig(machine_count = 1, horizon = 96, instance_count = 3,
                                  seed = 11)
        data = historical()

        def generate(config):
            return instgen.generate_dataset(
                config, instgen.build_operation_pool(config, instgen.pool_rng(config)), data)

        first = generate(config)
        assert_that(generate(config), is_(first))
        assert_that(generate(fewer), is_(first[:3]))

        with tempfile.TemporaryDirectory() as dir:
            a = instgen.write_dataset(os.path.join(dir, 'a'), first, config)
            b = instgen.write_dataset(os.path.join(dir, 'b'), generate(config), config)
            for name in ['manifest.json', 'M1T96-001.json', 'M1T96-005.json']:
                with open(os.path.join(os.path.dirname(a), name), 'rb') as x, \
                     open(os.path.join(os.path.dirname(b), name), 'rb') as y:
                    assert_that(x.read(), is_(y.read()))


    def test_energy_window(self):
        periods = 192
        data = instgen.HistoricalData(carbon = np.arange(periods, dtype = float),
                                      onsite = np.zeros(periods))
        config = instgen.GenConfig(machine_count = 1, horizon = 150, instance_count = 10,
                                   seed = 3)
        pool = instgen.build_operation_pool(config, instgen.pool_rng(config))
        for instance in instgen.generate_dataset(config, pool, data):
            c = np.array(instance.carbon_intensity)
            assert_that(c[0] in (0.0, 96.0), is_(True))
            assert_that(c.tolist(), is_(((c[0] + np.arange(150)) % periods).tolist()))

        config = instgen.GenConfig(machine_count = 1, horizon = 288, instance_count = 1)
        self.assertRaises(instgen.GenerationError, instgen.generate_dataset, config, pool, data)

        self.assertRaises(instgen.GenerationError, instgen.HistoricalData,
                          np.zeros(10), np.zeros(9))
        self.assertRaises(instgen.GenerationError, instgen.HistoricalData,
                          np.zeros(10), np.zeros(10), np.zeros(11))


    def test_no_job_fits(self):
        config = instgen.GenConfig(machine_count = 2, horizon = 96, instance_count = 1,
                                   duration_bounds = (0, 0), pool_size = 10,
                                   max_rejections = 20)
        pool = instgen.build_operation_pool(config, instgen.pool_rng(config))
        self.assertRaises(instgen.GenerationError, instgen.generate_dataset, config, pool,
                          historical())

        config = instgen.GenConfig(machine_count = 1, horizon = 2, instance_count = 1,
                                   max_rejections = 20)
        pool = instgen.build_operation_pool(config, instgen.pool_rng(config))
        self.assertRaises(instgen.GenerationError, instgen.generate_dataset, config, pool,
                          historical())


    def test_manifest(self):
        config = instgen.GenConfig(machine_count = 1, horizon = 96, instance_count = 4, seed = 5)
        pool = instgen.build_operation_pool(config, instgen.pool_rng(config))
        instances = instgen.generate_dataset(config, pool, historical())

        with tempfile.TemporaryDirectory() as dir:
            path = instgen.write_dataset(dir, instances, config)
            with open(path) as reader:
                doc = json.load(reader)
            assert_that(sorted(os.listdir(dir)), contains_exactly(
                'M1T96-001.json', 'M1T96-002.json', 'M1T96-003.json', 'M1T96-004.json',
                'manifest.json'))
            loaded = core.load_instance(os.path.join(dir, 'M1T96-002.json'))
            assert_that(loaded, is_(instances[1]))

        assert_that(doc['seed'], is_(5))
        assert_that(doc['config']['horizon'], is_(96))
        assert_that(doc['instances'], has_length(4))
        entry = doc['instances'][0]
        assert_that(entry, has_entries({
            'label':      'M1T96-001',
            'file':       'M1T96-001.json',
            'jobs':       instances[0].job_count,
            'operations': instances[0].operation_count,
            'slack':      list(core.slack_vector(instances[0])),
        }))
        assert_that(doc['summary']['jobs']['min'],
                    is_(min(instance.job_count for instance in instances)))
        assert_that(instgen.manifest([], config), is_({'config': config.echo(), 'seed': 5,
                                                       'instances': []}))


    def test_load_historical(self):
        feeds = carbon.synthesise_feeds(days = 2, seed = 1)
        with tempfile.TemporaryDirectory() as dir:
            paths = {}
            for name, frame in feeds.items():
                paths[name] = os.path.join(dir, f'{name}.csv')
                frame.to_csv(paths[name], index = False)

            config = instgen.GenConfig(machine_count = 1, horizon = 96,
                                       carbon_path = paths['grid_mix'],
                                       onsite_path = paths['onsite'],
                                       prices_path = paths['prices'])
            progress = MockProgress()
            data = instgen.load_historical(config, progress = progress)
            assert_that(data.period_count, is_(192))
            assert_that(data.prices, has_length(192))

            without_prices = instgen.GenConfig(machine_count = 1, horizon = 96,
                                               carbon_path = paths['grid_mix'],
                                               onsite_path = paths['onsite'])
            assert_that(instgen.load_historical(without_prices).prices, is_(None))

            for missing in [{'carbon_path': None}, {'onsite_path': None}]:
                config = dataclasses.replace(without_prices, **missing)
                self.assertRaises(instgen.GenerationError, instgen.load_historical, config)


    def test_sample_feeds(self):
        config = instgen.GenConfig(
            machine_count = 1, horizon = 96, instance_count = 3, seed = 2,
            carbon_path = os.path.join(SAMPLE_DATA, 'grid_mix.csv'),
            onsite_path = os.path.join(SAMPLE_DATA, 'onsite.csv'),
            prices_path = os.path.join(SAMPLE_DATA, 'prices.csv'),
            column_map_path = os.path.join(SAMPLE_DATA, 'column_map.ini'))

        progress = MockProgress()
        data = instgen.load_historical(config, progress = progress)
        assert_that(progress.warning_messages, empty())
        assert_that(data.period_count, is_(192))
        assert_that(data.onsite, has_length(192))
        assert_that(data.prices, has_length(192))

        # Wind (11) and gas (490) bound the factors of the mapped sources.
        assert_that(float(data.carbon.min()), greater_than_or_equal_to(11))
        assert_that(float(data.carbon.max()), less_than_or_equal_to(490))
        assert_that(float(data.onsite.min()), greater_than_or_equal_to(0))
        assert_that(float(data.prices.min()), greater_than_or_equal_to(0.04))
        assert_that(float(data.prices.max()), less_than_or_equal_to(0.14))

        pool = instgen.build_operation_pool(config, instgen.pool_rng(config))
        for instance in instgen.generate_dataset(config, pool, data):
            assert_that(instance.prices, has_length(96))
            assert_that(set(instance.carbon.tolist()) <= set(data.carbon.tolist()), is_(True))
