'''
# Dual random-key memetic algorithm

A genome holds one array of N job keys (sorted ascending to give the job sequence) and, for each
machine, N+1 pause keys whose shares of that machine's slack become the idle periods in front of
each sequence position. Every genome decodes to some schedule; late schedules are only penalised.

Each generation creates offspring by controlled swap crossover (plus elitist copies), mutates and
locally improves every offspring, and keeps the best of parents and offspring together.
'''

from __future__ import annotations
from .carbon import InfeasibleInstanceError
from .core import Instance, Schedule, place_operations, slack_vector
from .evaluator import Objective, evaluate
from .progress import Progress

import numpy as np
import pandas as pd

import configparser
from concurrent.futures import Executor
from dataclasses import dataclass, fields, replace
import functools
import importlib.resources
import os
import time
from typing import Sequence

NAME = 'memetic'  # For progress/error messages

NORMALISATION_TOLERANCE = 1e-9
PROFILE_NAMES = ('m1t1', 'm1t3', 'm3t1', 'm3t3')
ONE_DAY_PERIODS = 96


class ParamsError(Exception):
    pass


class IndividualError(Exception):
    pass


@dataclass(frozen = True)
class MaParams:
    rho: int = 250
    gamma: int = 100
    xi: float = 0.5851
    chi_j: float = 0.3779
    chi_p: float = 0.1041
    pi_j: float = 0.1662
    pi_p: float = 0.1985
    sigma_j: float = 0.0564
    sigma_p: float = 0.1873
    seed: int = 0

    def __post_init__(self):
        if self.rho < 2:
            raise ParamsError(f'population size rho must be at least 2, not {self.rho}')
        if self.gamma < 1:
            raise ParamsError(f'generation count gamma must be at least 1, not {self.gamma}')
        for name in ('xi', 'chi_j', 'chi_p', 'pi_j', 'pi_p'):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise ParamsError(f'{name} must lie in [0, 1], not {value}')
        for name in ('sigma_j', 'sigma_p'):
            value = getattr(self, name)
            if not value >= 0:
                raise ParamsError(f'{name} must be non-negative, not {value}')

    @property
    def offspring_count(self) -> int:
        'Crossover children per generation: xi * rho rounded to the nearest even number.'
        count = 2 * round(self.xi * self.rho / 2)
        return min(count, self.rho - self.rho % 2)

    def with_seed(self, seed: int) -> MaParams:
        return replace(self, seed = seed)


def _params_from_parser(parser: configparser.ConfigParser, source: str) -> MaParams:
    if not parser.has_section('params'):
        raise ParamsError(f'{source}: missing [params] section')

    types = {f.name: f.type for f in fields(MaParams)}
    values: dict[str, int | float] = {}
    for key, text in parser.items('params'):
        if key not in types:
            raise ParamsError(f'{source}: unknown parameter "{key}"')
        try:
            values[key] = int(text) if types[key] in ('int', int) else float(text)
        except ValueError:
            raise ParamsError(f'{source}: "{key}" has non-numeric value "{text}"')

    return MaParams(**values)  # type: ignore


def load_params(path: str) -> MaParams:
    '''
    Reads a key-value parameter file. Keys left out take the single-machine one-day defaults.
    '''
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding = 'utf-8') as reader:
            parser.read_file(reader)
    except configparser.Error as e:
        raise ParamsError(f'{path}: {e}') from e
    return _params_from_parser(parser, path)


@functools.cache
def profile(name: str) -> MaParams:
    name = name.lower()
    if name not in PROFILE_NAMES:
        raise ParamsError(f'unknown profile "{name}"; expected one of {", ".join(PROFILE_NAMES)}')
    parser = configparser.ConfigParser()
    parser.read_string(
        importlib.resources.files('casflow.profiles').joinpath(f'{name}.ini')
        .read_text(encoding = 'utf-8'))
    return _params_from_parser(parser, f'profile {name}')


def profile_for(instance: Instance) -> str:
    'Picks the tuned profile matching the instance shape.'
    machines = 'm1' if instance.machine_count == 1 else 'm3'
    days = 't1' if instance.horizon <= ONE_DAY_PERIODS else 't3'
    return machines + days


def resolve_params(spec: str, instance: Instance) -> MaParams:
    '''
    `spec` is 'auto', a profile name, or the path of a parameter file.
    '''
    if spec == 'auto':
        return profile(profile_for(instance))
    if spec.lower() in PROFILE_NAMES:
        return profile(spec)
    if os.path.isfile(spec):
        return load_params(spec)
    raise ParamsError(f'"{spec}" is neither a profile name nor a parameter file')


def require_slack(instance: Instance) -> tuple[int, ...]:
    slack = slack_vector(instance)
    for m, s in enumerate(slack):
        if s < 0:
            raise InfeasibleInstanceError(
                f'machine {m} needs {instance.horizon - s} periods but the horizon is '
                f'{instance.horizon}')
    return slack


# ------------------------------------------------------------------------------------------------
# Genome

@dataclass(eq = False)
class Individual:
    job_keys: np.ndarray     # N
    pause_keys: np.ndarray   # M x (N+1)
    fitness: float | None = None
    objective: Objective | None = None

    def copy(self) -> Individual:
        return Individual(self.job_keys.copy(), self.pause_keys.copy(), self.fitness,
                          self.objective)


def normalise(keys: np.ndarray) -> np.ndarray:
    '''
    Clips negative keys to zero and rescales each row to sum to one. A row with nothing left
    becomes uniform.
    '''
    keys = np.clip(keys, 0, None)
    totals = keys.sum(axis = -1, keepdims = True)
    empty = (totals <= 0)
    if np.any(empty):
        uniform = np.full(keys.shape[-1], 1.0 / keys.shape[-1])
        keys = np.where(empty, uniform, keys)
        totals = np.where(empty, 1.0, totals)
    return keys / totals


def check_individual(individual: Individual, job_count: int, machine_count: int):
    problems = []
    if individual.job_keys.shape != (job_count,):
        problems.append(f'job keys have shape {individual.job_keys.shape}')
    if individual.pause_keys.shape != (machine_count, job_count + 1):
        problems.append(f'pause keys have shape {individual.pause_keys.shape}')
    for name, keys in (('job', individual.job_keys), ('pause', individual.pause_keys)):
        if np.any(keys < 0):
            problems.append(f'negative {name} key')
        if np.any(np.abs(keys.sum(axis = -1) - 1) > NORMALISATION_TOLERANCE):
            problems.append(f'{name} keys do not sum to one')
    if problems:
        raise IndividualError('; '.join(problems))


def allocate_pauses(keys: np.ndarray, slack: int) -> np.ndarray:
    '''
    Splits `slack` integer periods across the key slots in proportion to the keys, by the largest
    remainder method: floors first, then one period at a time to the slots with the largest
    fractional parts (lowest index first among equals). The result always sums to `slack`.
    '''
    if slack <= 0:
        return np.zeros(len(keys), dtype = np.int64)

    raw = keys / keys.sum() * slack
    # A share like 0.25 * 48 may land a hair below 12 after renormalisation.
    allocation = np.floor(raw + 1e-9).astype(np.int64)
    remainder = slack - int(allocation.sum())
    if remainder > 0:
        order = np.argsort(-(raw - allocation), kind = 'stable')
        allocation[order[:remainder]] += 1
    return allocation


def job_sequence(individual: Individual) -> np.ndarray:
    return np.argsort(individual.job_keys, kind = 'stable')


def decode(individual: Individual, instance: Instance, slack: Sequence[int]) -> Schedule:
    pauses = [allocate_pauses(individual.pause_keys[m], slack[m])
              for m in range(instance.machine_count)]
    return place_operations(instance, job_sequence(individual), pauses)


def encode_fcfs(instance: Instance) -> Individual:
    n = instance.job_count
    job_keys = np.arange(1, n + 1, dtype = float)
    pause_keys = np.zeros((instance.machine_count, n + 1))
    pause_keys[:, -1] = 1.0
    return Individual(job_keys / job_keys.sum(), pause_keys)


def random_individual(instance: Instance, rng: np.random.Generator) -> Individual:
    n = instance.job_count
    return Individual(
        normalise(rng.uniform(0, 1, n)),
        normalise(rng.exponential(1.0, (instance.machine_count, n + 1))))


def assess(individual: Individual, instance: Instance, slack: Sequence[int],
           kind: str) -> Individual:
    'Fills in the individual\'s objective and fitness (in place) and returns it.'
    objective = evaluate(instance, decode(individual, instance, slack), kind)
    individual.objective = objective
    individual.fitness = objective.fitness
    return individual


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy = seed, spawn_key = key))


def init_population(instance: Instance, params: MaParams, kind: str = 'carbon',
                    slack: Sequence[int] | None = None) -> list[Individual]:
    '''
    rho - 1 random genomes plus the FCFS genome, all assessed, best first.
    '''
    if slack is None:
        slack = require_slack(instance)
    rng = _stream(params.seed, 0)
    population = [random_individual(instance, rng) for _ in range(params.rho - 1)]
    population.append(encode_fcfs(instance))
    for individual in population:
        assess(individual, instance, slack, kind)
    return _ranked(population)


def _ranked(population: list[Individual]) -> list[Individual]:
    return sorted(population, key = lambda ind: ind.fitness)  # type: ignore


def crossover(parent_a: Individual, parent_b: Individual, params: MaParams,
              rng: np.random.Generator) -> tuple[Individual, Individual]:
    '''
    Controlled swap crossover: each job key is exchanged between the parents with probability
    chi_j, and each pause key with probability chi_p.
    '''
    job_mask = rng.random(parent_a.job_keys.shape) < params.chi_j
    pause_mask = rng.random(parent_a.pause_keys.shape) < params.chi_p

    def child(a: Individual, b: Individual) -> Individual:
        return Individual(
            normalise(np.where(job_mask, b.job_keys, a.job_keys)),
            normalise(np.where(pause_mask, b.pause_keys, a.pause_keys)))

    return child(parent_a, parent_b), child(parent_b, parent_a)


def mutate(individual: Individual, params: MaParams, rng: np.random.Generator) -> Individual:
    '''
    Nonuniform mutation: adds N(0, sigma) noise to each key with probability pi, then clips and
    renormalises.
    '''
    job_mask = rng.random(individual.job_keys.shape) < params.pi_j
    job_noise = rng.normal(0.0, params.sigma_j, individual.job_keys.shape)
    pause_mask = rng.random(individual.pause_keys.shape) < params.pi_p
    pause_noise = rng.normal(0.0, params.sigma_p, individual.pause_keys.shape)

    mutant = individual.copy()
    mutant.fitness = None
    mutant.objective = None

    job_delta = np.where(job_mask, job_noise, 0.0)
    if np.any(job_delta != 0):
        mutant.job_keys = normalise(individual.job_keys + job_delta)

    pause_delta = np.where(pause_mask, pause_noise, 0.0)
    changed_rows = np.any(pause_delta != 0, axis = 1)
    if np.any(changed_rows):
        mutated = normalise(individual.pause_keys + pause_delta)
        mutant.pause_keys = np.where(changed_rows[:, None], mutated, individual.pause_keys)

    return mutant


def local_search(individual: Individual, instance: Instance, slack: Sequence[int],
                 kind: str = 'carbon') -> Individual:
    '''
    First-improvement adjacent swap. Tries exchanging the jobs at sequence positions (0, 1),
    (1, 2), ... and keeps the first exchange that strictly lowers the fitness, swapping the two
    jobs' keys. Returns the input unchanged if no exchange helps.
    '''
    if individual.fitness is None:
        assess(individual, instance, slack, kind)

    sequence = job_sequence(individual)
    for k in range(len(sequence) - 1):
        a, b = sequence[k], sequence[k + 1]
        candidate = individual.copy()
        candidate.job_keys[a], candidate.job_keys[b] = (
            individual.job_keys[b], individual.job_keys[a])
        assess(candidate, instance, slack, kind)
        if candidate.fitness < individual.fitness:  # type: ignore
            return candidate

    return individual


def _develop(instance: Instance, slack: Sequence[int], kind: str,
             individual: Individual) -> Individual:
    return local_search(assess(individual, instance, slack, kind), instance, slack, kind)


@dataclass
class GenerationRecord:
    generation: int
    best_fitness: float
    mean_fitness: float


@dataclass
class MaResult:
    schedule: Schedule
    objective: Objective
    individual: Individual
    history: list[GenerationRecord]

    @property
    def generations(self) -> int:
        return self.history[-1].generation


def _record(generation: int, population: list[Individual]) -> GenerationRecord:
    values = [ind.fitness for ind in population]
    return GenerationRecord(generation, float(values[0]), float(np.mean(values)))  # type: ignore


def breed(population: list[Individual], params: MaParams, generation: int) -> list[Individual]:
    '''
    Produces rho unassessed offspring: crossover children for the first `offspring_count` slots
    and copies of the best current individuals for the rest, all mutated. Each pair of children
    (and each copy) draws from its own random stream, keyed by generation and slot.
    '''
    rho = params.rho
    crossed = params.offspring_count
    offspring = []

    for pair in range(crossed // 2):
        rng = _stream(params.seed, generation, pair)
        a, b = rng.choice(len(population), size = 2, replace = False)
        for child in crossover(population[a], population[b], params, rng):
            offspring.append(mutate(child, params, rng))

    for slot, elite in enumerate(population[:rho - crossed], start = crossed // 2):
        rng = _stream(params.seed, generation, slot)
        offspring.append(mutate(elite, params, rng))

    return offspring


def run(instance: Instance,
        params: MaParams,
        kind: str = 'carbon',
        time_limit: float | None = None,
        executor: Executor | None = None,
        progress: Progress | None = None) -> MaResult:
    '''
    Runs the generational loop for `params.gamma` generations, or until `time_limit` seconds have
    passed. Given an executor, offspring are assessed and locally improved in parallel; the
    result is the same either way.
    '''
    slack = require_slack(instance)
    start_time = time.monotonic()

    population = init_population(instance, params, kind, slack)
    history = [_record(0, population)]
    develop = functools.partial(_develop, instance, slack, kind)

    for generation in range(1, params.gamma + 1):
        offspring = breed(population, params, generation)
        if executor is None:
            offspring = [develop(ind) for ind in offspring]
        else:
            offspring = list(executor.map(develop, offspring))

        population = _ranked(population + offspring)[:params.rho]
        history.append(_record(generation, population))

        if time_limit is not None and time.monotonic() - start_time >= time_limit:
            if progress is not None and generation < params.gamma:
                progress.progress(
                    NAME,
                    msg = f'{instance.label or "instance"}: time limit reached after '
                          f'{generation} of {params.gamma} generations')
            break

    best = population[0]
    schedule = decode(best, instance, slack)
    return MaResult(schedule, evaluate(instance, schedule, kind), best, history)


def write_history_csv(path: str, history: Sequence[GenerationRecord]):
    frame = pd.DataFrame(
        [[r.generation, r.best_fitness, r.mean_fitness] for r in history],
        columns = ['generation', 'best_fitness', 'mean_fitness'])
    frame.to_csv(path, index = False, lineterminator = '\n')
