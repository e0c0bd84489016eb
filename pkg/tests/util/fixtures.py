'''
Shared test instances: the five-job single-machine example, and a factory for small random
instances that are guaranteed to fit their horizon.
'''

from __future__ import annotations
from casflow.lib.core import Instance, Job, OperationSpec
from casflow.lib.instgen import fcfs_completion

import numpy as np


TABLE2_POWER = [
    [1500] * 11,
    [2000, 2000, 2000, 1900, 1900, 1900, 2000, 2000],
    [1600] * 13,
    [1200] * 8,
    [1400] * 8,
]
TABLE2_DURATIONS = [len(p) for p in TABLE2_POWER]   # [11, 8, 13, 8, 8]
TABLE2_ENERGY_PERIODS = sum(sum(p) for p in TABLE2_POWER)   # 73,800 kW-periods

# Job 2 (index 1) has the smallest key; the order is 2-4-5-1-3.
FIG6_JOB_KEYS = [0.24, 0.06, 0.35, 0.15, 0.20]
FIG6_PAUSE_KEYS = [0.25, 0.17, 0.19, 0.0, 0.25, 0.14]
FIG6_PAUSES = [12, 8, 9, 0, 12, 7]


def make_instance(power: list[list[list[float]]],
                  horizon: int,
                  carbon: list[float] | float = 300.0,
                  onsite: list[float] | float = 0.0,
                  prices: list[float] | float | None = None,
                  period_hours: float = 0.25,
                  label: str = 'test') -> Instance:
    '''
    power[i][m] is the per-period power of operation (i, m); scalar series are repeated over the
    horizon.
    '''
    def series(value):
        if value is None:
            return None
        if isinstance(value, (int, float)):
            return tuple([float(value)] * horizon)
        return tuple(float(v) for v in value)

    machines = len(power[0])
    return Instance(
        machine_count = machines,
        horizon = horizon,
        jobs = tuple(Job(tuple(OperationSpec(len(p), tuple(p)) for p in job)) for job in power),
        carbon_intensity = series(carbon),
        onsite_available = series(onsite),
        prices = series(prices),
        period_hours = period_hours,
        label = label)


def table2_instance(carbon: list[float] | float = 300.0,
                    onsite: list[float] | float = 0.0,
                    prices: list[float] | float | None = None) -> Instance:
    return make_instance([[p] for p in TABLE2_POWER], 96, carbon, onsite, prices,
                         label = 'table2')


def random_instance(rng: np.random.Generator,
                    machines: int = 1,
                    jobs: int = 4,
                    durations: tuple[int, int] = (1, 4),
                    extra_slack: int = 4,
                    onsite: bool = True,
                    prices: bool = True,
                    label: str = 'random') -> Instance:
    '''
    A small instance whose horizon is the FCFS completion plus `extra_slack` periods, with
    time-varying carbon intensity, on-site availability and prices.
    '''
    power = []
    for _ in range(jobs):
        job = []
        for _ in range(machines):
            d = int(rng.integers(durations[0], durations[1] + 1))
            job.append(rng.integers(100, 3000, size = d).astype(float).tolist())
        power.append(job)

    horizon = max(1, fcfs_completion([[len(p) for p in job] for job in power])) + extra_slack
    return make_instance(
        power,
        horizon,
        carbon = rng.uniform(11, 820, horizon).tolist(),
        onsite = rng.uniform(0, 1500, horizon).tolist() if onsite else 0.0,
        prices = rng.uniform(-0.02, 0.3, horizon).tolist() if prices else None,
        label = label)
