from casflow.lib import carbon, core, evaluator, memetic, milp
from casflow.lib.carbon import InfeasibleInstanceError
from ..util.fixtures import make_instance, random_instance
from ..util.mock_cache import MockCache
from ..util.mock_progress import MockProgress

import unittest
from hamcrest import (assert_that, close_to, contains_exactly, empty, has_length, is_,
                      less_than_or_equal_to, starts_with)

import numpy as np

from concurrent.futures import ThreadPoolExecutor
import itertools
import os
import tempfile


def brute_force_single_machine(instance, kind):
    'Every job order with every way of spreading the slack, by plain nested loops.'
    n = instance.job_count
    slack = core.slack_vector(instance)[0]
    best = None
    count = 0
    for sequence in itertools.permutations(range(n)):
        for cuts in itertools.combinations_with_replacement(range(slack + 1), n):
            pauses = [cuts[0]] + [cuts[k] - cuts[k - 1] for k in range(1, n)]
            schedule = core.place_operations(instance, sequence, [pauses + [0]])
            value = evaluator.fitness(instance, schedule, kind)
            count += 1
            if best is None or value < best:
                best = value
    return best, count


class MilpTestCase(unittest.TestCase):

    def test_variable_counts(self):
        instance = make_instance([[[1] * 3], [[1] * 4]], 10)
        model = milp.build_milp(instance)
        assert_that(model.x_count, is_(15))
        assert_that(model.s_count, is_(1))
        assert_that(model.y_count, is_(10))
        assert_that([name for name in model.constraints if name.startswith('c4f')],
                    contains_exactly('c4f_0_1_0'))

        rng = np.random.default_rng(0)
        for _ in range(10):
            instance = random_instance(rng, machines = int(rng.integers(1, 4)),
                                       jobs = int(rng.integers(1, 5)), durations = (0, 3))
            model = milp.build_milp(instance)
            matrix = carbon.emission_matrix(instance)
            first, last = matrix.first, matrix.last
            n = instance.job_count
            assert_that(model.x_count, is_(int((last - first + 1).sum())))
            assert_that(model.s_count, is_(n * (n - 1) // 2))
            assert_that(model.y_count, is_(instance.horizon))
            assert_that(model.binaries, has_length(model.x_count + model.s_count))

            # Every row refers only to declared variables, and every declared variable is used.
            declared = set(model.variables)
            for constraint in model.constraints.values():
                for var in constraint.keys():
                    assert_that(var.name in declared, is_(True))
            assert_that(sorted(var.name for var in model.problem.variables()),
                        is_(sorted(declared)))


    def test_single_job(self):
        instance = make_instance([[[5, 6], [7]]], 6)
        model = milp.build_milp(instance)
        assert_that(model.s_count, is_(0))
        assert_that([name for name in model.constraints if name.startswith(('c4f', 'c4g'))],
                    empty())

        self.assertRaises(InfeasibleInstanceError, milp.build_milp,
                          make_instance([[[1] * 4, [1] * 3]], 6))


    def test_indicator_encoding(self):
        rng = np.random.default_rng(14)
        for _ in range(20):
            instance = random_instance(rng, machines = int(rng.integers(1, 4)),
                                       jobs = int(rng.integers(1, 5)), durations = (0, 4))
            model = milp.build_milp(instance)
            schedules = [core.fcfs_schedule(instance),
                         core.place_operations(instance, rng.permutation(instance.job_count))]
            for schedule in schedules:
                if not schedule.feasible:
                    continue
                assignment = milp.indicator_encoding(model, instance, schedule)
                assert_that(model.violations(assignment), empty())
                value = evaluator.evaluate(instance, schedule, 'carbon').value
                assert_that(model.objective_value(assignment),
                            close_to(value, 1e-6 * max(1.0, abs(value))))

        # Breaking the job order on one machine breaks the model.
        instance = make_instance([[[1] * 2, [1] * 2], [[1] * 2, [1] * 2]], 8)
        model = milp.build_milp(instance)
        schedule = core.fcfs_schedule(instance)
        assignment = milp.indicator_encoding(model, instance, schedule)
        assignment[milp.s_name(0, 1)] = 0.0
        assert_that(model.violations(assignment), is_(['c4f_0_1_0', 'c4f_0_1_1']))


    def test_model_files(self):
        instance = make_instance([[[1000] * 3], [[1500] * 4]], 10,
                                 carbon = [100 + 10 * t for t in range(10)], onsite = 500.0)
        model = milp.build_milp(instance)

        with tempfile.TemporaryDirectory() as dir:
            first = os.path.join(dir, 'a.lp')
            second = os.path.join(dir, 'b.lp')
            milp.export_lp(model, first)
            milp.export_lp(milp.build_milp(instance), second)
            with open(first, 'rb') as a, open(second, 'rb') as b:
                text = a.read()
                assert_that(text, is_(b.read()))

            lines = text.decode().splitlines()
            assert_that(lines[1], is_('Minimize'))
            assert_that(lines[2], starts_with(f'{milp.OBJECTIVE_NAME}:'))
            assert_that(lines[-1], is_('End'))
            for keyword in ['Subject To', 'Binaries']:
                assert_that(keyword in lines, is_(True))
            binaries = lines[lines.index('Binaries') + 1:-1]
            assert_that(sorted(binaries), is_(sorted(model.binaries)))

            mps = os.path.join(dir, 'a.mps')
            milp.export_mps(model, mps)
            counts = milp.read_model_counts(mps)
            assert_that(counts.binaries, is_(16))
            assert_that(counts.continuous, is_(len(model.continuous)))
            assert_that(counts.constraints, is_(len(model.constraints)))
            assert_that(counts, is_(milp.model_counts(model)))


    def test_compositions(self):
        assert_that(list(milp.compositions(2, 2)), contains_exactly((0, 2), (1, 1), (2, 0)))
        assert_that(list(milp.compositions(6, 4)), has_length(84))
        assert_that(list(milp.compositions(0, 3)), contains_exactly((0, 0, 0)))
        assert_that(milp.pause_space_size(3, 6), is_(504))


    def test_oracle_single_machine(self):
        rng = np.random.default_rng(19)
        power = [[rng.integers(100, 3000, size = d).tolist()] for d in (2, 3, 1)]
        instance = make_instance(power, 12, carbon = rng.uniform(11, 820, 12).tolist(),
                                 onsite = rng.uniform(0, 1500, 12).tolist())

        result = milp.exact_oracle(instance, 'carbon')
        assert_that(result.enumerated, is_(504))
        assert_that(result.space, is_(milp.PAUSE_SPACE))
        assert_that(result.schedule.feasible, is_(True))
        assert_that(core.check_schedule(instance, result.schedule), empty())

        expected, count = brute_force_single_machine(instance, 'carbon')
        assert_that(count, is_(504))
        assert_that(result.objective.fitness, close_to(expected, 1e-9 * max(1.0, expected)))

        # The exact model scores the optimum the same way.
        model = milp.build_milp(instance)
        assignment = milp.indicator_encoding(model, instance, result.schedule)
        assert_that(model.violations(assignment), empty())
        assert_that(model.objective_value(assignment),
                    close_to(result.objective.value, 1e-6 * max(1.0, result.objective.value)))

        header = result.header()
        assert_that(header['enumerated'], is_(504))
        assert_that(header['space'], is_(milp.PAUSE_SPACE))


    def test_oracle_single_job(self):
        instance = make_instance([[[300, 200]]], 7, carbon = [9, 8, 7, 1, 2, 3, 4])
        result = milp.exact_oracle(instance, 'carbon')
        assert_that(result.enumerated, is_(6))
        assert_that(result.schedule.start, is_(((4,),)))


    def test_oracle_ties(self):
        instance = make_instance([[[100] * 2], [[200] * 3], [[300]]], 10, carbon = 250.0)
        result = milp.exact_oracle(instance, 'carbon')
        assert_that(result.schedule, is_(core.fcfs_schedule(instance)))

        result = milp.exact_oracle(instance, 'makespan')
        assert_that(result.objective.value, is_(6))
        assert_that(result.schedule, is_(core.fcfs_schedule(instance)))


    def test_oracle_multi_machine(self):
        rng = np.random.default_rng(23)
        instance = random_instance(rng, machines = 2, jobs = 3, durations = (0, 2),
                                   extra_slack = 2)
        result = milp.exact_oracle(instance, 'carbon')
        assert_that(result.space, is_(milp.START_SPACE))
        assert_that(result.schedule.feasible, is_(True))
        assert_that(core.check_schedule(instance, result.schedule), empty())

        fcfs = evaluator.fitness(instance, core.fcfs_schedule(instance), 'carbon')
        assert_that(result.objective.fitness, less_than_or_equal_to(fcfs + 1e-9))

        slack = memetic.require_slack(instance)
        for _ in range(100):
            genome = memetic.random_individual(instance, rng)
            schedule = memetic.decode(genome, instance, slack)
            value = evaluator.fitness(instance, schedule, 'carbon')
            assert_that(result.objective.fitness, less_than_or_equal_to(value + 1e-9))

        model = milp.build_milp(instance)
        assignment = milp.indicator_encoding(model, instance, result.schedule)
        assert_that(model.violations(assignment), empty())


    def test_oracle_executor(self):
        rng = np.random.default_rng(29)
        instance = random_instance(rng, jobs = 4, durations = (1, 2), extra_slack = 4)
        serial = milp.exact_oracle(instance, 'carbon')
        with ThreadPoolExecutor(max_workers = 2) as executor:
            parallel = milp.exact_oracle(instance, 'carbon', executor = executor)
        assert_that(parallel.schedule, is_(serial.schedule))
        assert_that(parallel.enumerated, is_(serial.enumerated))


    def test_oracle_refusal(self):
        for instance, budget, message in [
            (make_instance([[[1]]] * 7, 10),                            10 ** 7, 'jobs'),
            (make_instance([[[1]]] * 2, 25),                            10 ** 7, 'slack'),
            (make_instance([[[1]]] * 4, 20),                            100,     'budget'),
            (make_instance([[[1]]] * 3, 2),                             10 ** 7, 'horizon'),
            (make_instance([[[1], [1]]] * 4, 10),                       10,      'budget'),
            (make_instance([[[1], [1]]] * 3, 3),                        10 ** 7, 'on-time'),
        ]:
            with self.assertRaises(milp.OracleRefusal) as cm:
                milp.exact_oracle(instance, 'carbon', budget = budget)
            assert_that(message in str(cm.exception), is_(True))


    def test_oracle_cache(self):
        instance = make_instance([[[100] * 2], [[300] * 2]], 6, carbon = [5, 1, 1, 9, 9, 9])
        cache = MockCache()
        first = milp.exact_oracle(instance, 'carbon', cache = cache)
        assert_that(cache.set_calls, has_length(1))
        key, value = cache.set_calls[0]
        assert_that(key[0], is_('oracle'))
        assert_that(key[1], is_(instance.digest()))

        progress = MockProgress()
        second = milp.exact_oracle(instance, 'carbon', cache = cache, progress = progress)
        assert_that(second.schedule, is_(first.schedule))
        assert_that(second.enumerated, is_(first.enumerated))
        assert_that(progress.cache_messages, has_length(1))
        assert_that(cache.set_calls, has_length(1))
        assert_that([hit for _, hit in cache.get_calls], contains_exactly(False, True))

        # A different objective is a different entry.
        milp.exact_oracle(instance, 'makespan', cache = cache)
        assert_that(cache.set_calls, has_length(2))
        assert_that(str(first.schedule.sequence), starts_with('(1'))
