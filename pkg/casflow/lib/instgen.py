'''
# Instance generation

Builds benchmark datasets: draws a pool of random operations, assembles jobs from it for as long
as their first-come-first-serve schedule still finishes inside the horizon, and attaches a window
of historical carbon-intensity, on-site and price data starting at a randomly drawn day.
'''

from __future__ import annotations
from .carbon import (EmissionFactorTable, carbon_intensity, ingest_grid_mix, ingest_onsite,
                     ingest_prices, load_column_map, DEFAULT_ONSITE_SCALE)
from .core import Instance, Job, OperationSpec, save_instance, slack_vector, DEFAULT_PERIOD_HOURS
from .progress import Progress

import numpy as np

from dataclasses import asdict, dataclass
import json
import os
from typing import Any, Sequence

NAME = 'instgen'  # For progress/error messages

MULTI_MACHINE_DURATIONS = (0, 8)
SINGLE_MACHINE_DURATIONS = (2, 16)


class GenerationError(Exception):
    pass


def _check_bounds(bounds: Sequence[int], name: str):
    if len(bounds) != 2 or any(isinstance(b, bool) or int(b) != b for b in bounds):
        raise GenerationError(f'{name} must be a pair of integers, not {bounds!r}')
    if bounds[0] > bounds[1]:
        raise GenerationError(f'{name}: lower bound {bounds[0]} exceeds upper bound {bounds[1]}')


@dataclass(frozen = True)
class GenConfig:
    machine_count: int
    horizon: int
    instance_count: int = 50
    pool_size: int = 2000
    duration_bounds: tuple[int, int] | None = None
    power_bounds: tuple[int, int] = (100, 3000)
    jitter_bounds: tuple[int, int] = (-250, 250)
    seed: int = 0
    max_rejections: int = 1000
    period_hours: float = DEFAULT_PERIOD_HOURS
    carbon_path: str | None = None
    onsite_path: str | None = None
    prices_path: str | None = None
    column_map_path: str | None = None
    onsite_scale: float = DEFAULT_ONSITE_SCALE

    def __post_init__(self):
        if self.machine_count < 1:
            raise GenerationError('machine count must be at least 1')
        if self.horizon < 1:
            raise GenerationError('horizon must be at least 1 period')
        if self.instance_count < 0:
            raise GenerationError('instance count must not be negative')
        if self.pool_size < 1:
            raise GenerationError('pool size must be at least 1')
        if self.max_rejections < 1:
            raise GenerationError('rejection cap must be at least 1')

        if self.duration_bounds is None:
            object.__setattr__(
                self, 'duration_bounds',
                SINGLE_MACHINE_DURATIONS if self.machine_count == 1 else MULTI_MACHINE_DURATIONS)

        for name in ('duration_bounds', 'power_bounds', 'jitter_bounds'):
            _check_bounds(getattr(self, name), name)
            object.__setattr__(self, name, tuple(int(b) for b in getattr(self, name)))

        if self.duration_bounds[0] < 0:  # type: ignore
            raise GenerationError('durations cannot be negative')
        if self.power_bounds[0] <= 0:
            raise GenerationError('the lowest base power must be positive')

    @property
    def periods_per_day(self) -> int:
        return round(24 / self.period_hours)

    def echo(self) -> dict[str, Any]:
        doc = asdict(self)
        for key, value in doc.items():
            if isinstance(value, tuple):
                doc[key] = list(value)
        return doc


@dataclass(frozen = True, eq = False)
class HistoricalData:
    carbon: np.ndarray
    onsite: np.ndarray
    prices: np.ndarray | None = None

    def __post_init__(self):
        if len(self.onsite) != len(self.carbon):
            raise GenerationError(
                f'on-site series has {len(self.onsite)} periods but carbon series has '
                f'{len(self.carbon)}')
        if self.prices is not None and len(self.prices) != len(self.carbon):
            raise GenerationError(
                f'price series has {len(self.prices)} periods but carbon series has '
                f'{len(self.carbon)}')

    @property
    def period_count(self) -> int:
        return len(self.carbon)


def load_historical(config: GenConfig,
                    factors: EmissionFactorTable | None = None,
                    progress: Progress | None = None) -> HistoricalData:
    '''
    Reads the historical feeds named in the config: generation mix (converted to carbon
    intensity with the median lifecycle factors), on-site generation, and optionally prices.
    '''
    if config.carbon_path is None:
        raise GenerationError('no generation-mix data given')
    if config.onsite_path is None:
        raise GenerationError('no on-site generation data given')

    factors = factors or EmissionFactorTable.default()
    column_map = load_column_map(config.column_map_path) if config.column_map_path else None
    mix = ingest_grid_mix(config.carbon_path, factors, column_map, progress)

    return HistoricalData(
        carbon = carbon_intensity(mix, factors),
        onsite = ingest_onsite(config.onsite_path, config.onsite_scale, progress),
        prices = (None if config.prices_path is None
                  else ingest_prices(config.prices_path, config.period_hours, progress)))


def build_operation_pool(config: GenConfig, rng: np.random.Generator) -> list[OperationSpec]:
    d_lo, d_hi = config.duration_bounds  # type: ignore
    p_lo, p_hi = config.power_bounds
    j_lo, j_hi = config.jitter_bounds
    pool = []
    for _ in range(config.pool_size):
        duration = int(rng.integers(d_lo, d_hi + 1))
        base = int(rng.integers(p_lo, p_hi + 1))
        jitter = rng.integers(j_lo, j_hi + 1, size = duration)
        pool.append(OperationSpec(duration, tuple(np.maximum(0, base + jitter).tolist())))
    return pool


def fcfs_completion(durations: Sequence[Sequence[int]]) -> int:
    '''
    Completion period of the jobs run in the given order with no planned idle. Zero-duration
    operations take no time but keep their place in each machine's order.
    '''
    if not durations:
        return 0
    machines = len(durations[0])
    available = [1] * machines
    completion = 0
    for row in durations:
        ready = 1
        for m, d in enumerate(row):
            begin = max(available[m], ready)
            available[m] = ready = begin + d
            completion = max(completion, begin + d - 1)
    return completion


def _energy_window(historical: HistoricalData, config: GenConfig,
                   rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    length = historical.period_count
    days = length // config.periods_per_day
    if length < config.horizon or days < 1:
        raise GenerationError(
            f'historical data covers {length} periods; at least {config.horizon} '
            f'(and one whole day) are needed')

    day = int(rng.integers(0, days))
    index = (day * config.periods_per_day + np.arange(config.horizon)) % length
    prices = None if historical.prices is None else historical.prices[index]
    return historical.carbon[index], historical.onsite[index], prices


def generate_instance(config: GenConfig,
                      pool: Sequence[OperationSpec],
                      historical: HistoricalData,
                      rng: np.random.Generator,
                      label: str = '',
                      progress: Progress | None = None) -> Instance:
    jobs: list[Job] = []
    rows: list[list[int]] = []
    rejections = 0

    while rejections < config.max_rejections:
        candidate = [pool[k] for k in rng.integers(0, len(pool), size = config.machine_count)]
        if all(op.is_dummy for op in candidate):
            rejections += 1
            continue

        row = [op.duration for op in candidate]
        if fcfs_completion(rows + [row]) < config.horizon:
            jobs.append(Job(tuple(candidate)))
            rows.append(row)
            rejections = 0
        else:
            rejections += 1

    if not jobs:
        raise GenerationError(
            f'{label or "instance"}: no job fits within {config.horizon} periods '
            f'after {config.max_rejections} attempts')

    carbon, onsite, prices = _energy_window(historical, config, rng)
    return Instance(
        machine_count = config.machine_count,
        horizon = config.horizon,
        jobs = tuple(jobs),
        carbon_intensity = tuple(carbon.tolist()),
        onsite_available = tuple(onsite.tolist()),
        prices = None if prices is None else tuple(prices.tolist()),
        period_hours = config.period_hours,
        label = label)


def dataset_prefix(config: GenConfig) -> str:
    return f'M{config.machine_count}T{config.horizon}'


def generate_dataset(config: GenConfig,
                     pool: Sequence[OperationSpec],
                     historical: HistoricalData,
                     progress: Progress | None = None) -> list[Instance]:
    '''
    Each instance draws from its own random stream, so instance k is the same whatever the
    instance count.
    '''
    instances = []
    for k in range(config.instance_count):
        rng = np.random.default_rng(np.random.SeedSequence(entropy = config.seed,
                                                           spawn_key = (1, k)))
        label = f'{dataset_prefix(config)}-{k + 1:03d}'
        instances.append(generate_instance(config, pool, historical, rng, label, progress))
    return instances


def pool_rng(config: GenConfig) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy = config.seed, spawn_key = (0,)))


def _summary(values: Sequence[float]) -> dict[str, float]:
    return {'min': float(np.min(values)),
            'median': float(np.median(values)),
            'max': float(np.max(values))}


def manifest(instances: Sequence[Instance], config: GenConfig) -> dict[str, Any]:
    entries = []
    for instance in instances:
        entries.append({
            'label':      instance.label,
            'file':       f'{instance.label}.json',
            'jobs':       instance.job_count,
            'operations': instance.operation_count,
            'slack':      list(slack_vector(instance)),
        })

    doc: dict[str, Any] = {
        'config':    config.echo(),
        'seed':      config.seed,
        'instances': entries,
    }
    if entries:
        doc['summary'] = {
            'jobs':       _summary([e['jobs'] for e in entries]),
            'operations': _summary([e['operations'] for e in entries]),
            'slack':      _summary([s for e in entries for s in e['slack']]),
        }
    return doc


def write_dataset(directory: str, instances: Sequence[Instance], config: GenConfig) -> str:
    '''
    Writes one instance file per instance plus manifest.json; returns the manifest path.
    '''
    os.makedirs(directory, exist_ok = True)
    for instance in instances:
        save_instance(instance, os.path.join(directory, f'{instance.label}.json'))

    path = os.path.join(directory, 'manifest.json')
    with open(path, 'w', encoding = 'utf-8') as writer:
        json.dump(manifest(instances, config), writer, indent = 1, sort_keys = True)
        writer.write('\n')
    return path
