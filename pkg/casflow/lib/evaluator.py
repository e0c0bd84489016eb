'''
Objective evaluation: power-demand profile of a schedule, netted against on-site generation, and
the carbon, cost and makespan objectives with the lateness penalty.
'''

from __future__ import annotations
from .carbon import EmissionMatrix
from .core import Instance, Schedule

import numpy as np
import pandas as pd

from dataclasses import dataclass
from typing import Iterable

NAME = 'evaluator'  # For progress/error messages

CARBON = 'carbon'
COST = 'cost'
MAKESPAN = 'makespan'
OBJECTIVES = (CARBON, COST, MAKESPAN)

PENALTY_PER_PERIOD = 1e10

OBJECTIVE_COLUMNS = ['instance_label', 'objective_kind', 'value', 'penalty', 'feasible']


class MissingSeriesError(Exception):
    def __init__(self, series: str):
        super().__init__(f'instance has no "{series}" series')
        self.series = series


@dataclass(frozen = True, eq = False)
class DemandProfile:
    demand: np.ndarray
    onsite_used: np.ndarray
    grid_draw: np.ndarray


@dataclass(frozen = True)
class Objective:
    kind: str
    value: float
    penalty: float

    @property
    def fitness(self) -> float:
        return self.value + self.penalty

    @property
    def feasible(self) -> bool:
        return self.penalty == 0


def check_kind(kind: str):
    if kind not in OBJECTIVES:
        raise ValueError(f'unknown objective "{kind}"; expected one of {", ".join(OBJECTIVES)}')


def penalty(instance: Instance, schedule: Schedule) -> float:
    return max(0, schedule.completion - instance.horizon) * PENALTY_PER_PERIOD


def demand_profile(instance: Instance, schedule: Schedule) -> DemandProfile:
    '''
    Total power drawn in each period 1..T by the operations running then. Anything an operation
    draws after period T is left out; lateness is accounted for by the penalty alone.
    '''
    horizon = instance.horizon
    demand = np.zeros(horizon)

    for i, job_power in enumerate(instance.power):
        for m, power in enumerate(job_power):
            first = schedule.start[i][m] - 1
            last = min(first + len(power), horizon)
            if first < last:
                demand[first:last] += power[:last - first]

    onsite_used = np.minimum(demand, instance.onsite)
    return DemandProfile(demand, onsite_used, demand - onsite_used)


def evaluate(instance: Instance, schedule: Schedule, kind: str) -> Objective:
    check_kind(kind)
    if kind == CARBON:
        grid = demand_profile(instance, schedule).grid_draw
        value = float(instance.carbon @ grid) * instance.period_hours

    elif kind == COST:
        prices = instance.price_array
        if prices is None:
            raise MissingSeriesError('prices')
        grid = demand_profile(instance, schedule).grid_draw
        value = float(prices @ grid) * instance.period_hours

    else:
        value = float(schedule.completion)

    return Objective(kind, value, penalty(instance, schedule))


def fitness(instance: Instance, schedule: Schedule, kind: str) -> float:
    return evaluate(instance, schedule, kind).fitness


def objective_identity_check(instance: Instance,
                             schedule: Schedule,
                             matrix: EmissionMatrix | None = None,
                             rel_tol: float = 1e-6) -> bool:
    '''
    Checks that the emission-matrix form of the carbon objective (emissions of each operation at
    its start period, less the emissions avoided by using on-site power) agrees with direct
    per-period evaluation.
    '''
    if matrix is None:
        from .carbon import emission_matrix
        matrix = emission_matrix(instance)

    try:
        gross = sum(
            matrix.at(i, m, schedule.start[i][m])
            for i in range(instance.job_count)
            for m in range(instance.machine_count))
    except IndexError:
        return False

    profile = demand_profile(instance, schedule)
    saved = float(instance.carbon @ profile.onsite_used) * instance.period_hours
    direct = evaluate(instance, schedule, CARBON).value

    return bool(np.isclose(gross - saved, direct, rtol = rel_tol, atol = 1e-9))


def profile_records(instance: Instance, profile: DemandProfile) -> list[dict]:
    'Per-period rows for power-profile plots.'
    return [
        {
            'period':      t + 1,
            'demand':      float(profile.demand[t]),
            'onsite_used': float(profile.onsite_used[t]),
            'grid_draw':   float(profile.grid_draw[t]),
            'carbon':      float(instance.carbon[t]),
        }
        for t in range(instance.horizon)
    ]


@dataclass(frozen = True)
class ObjectiveRow:
    instance_label: str
    objective_kind: str
    value: float
    penalty: float
    feasible: bool

    @staticmethod
    def of(label: str, objective: Objective) -> ObjectiveRow:
        return ObjectiveRow(label, objective.kind, objective.value, objective.penalty,
                            objective.feasible)


def write_objective_rows(path: str, rows: Iterable[ObjectiveRow]):
    frame = pd.DataFrame(
        [[r.instance_label, r.objective_kind, r.value, r.penalty, r.feasible] for r in rows],
        columns = OBJECTIVE_COLUMNS)
    frame.to_csv(path, index = False, lineterminator = '\n')
