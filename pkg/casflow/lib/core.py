'''
# Core domain types

Instances, jobs, operations and schedules, plus the instance and schedule file formats.

Periods are one-based (t = 1..T), matching how start times are reported everywhere else. Job and
machine indices are zero-based. Power is in kW; one period lasts `period_hours` hours, so an
operation drawing P kW for one period consumes P * period_hours kWh.
'''

from __future__ import annotations
from .progress import Progress

import numpy as np

from dataclasses import dataclass
from functools import cached_property
import hashlib
import json
import math
from typing import Any, Sequence

NAME = 'instance'  # For progress/error messages

DEFAULT_PERIOD_HOURS = 0.25


class InstanceError(Exception):
    def __init__(self, msg: str, field: str | None = None):
        super().__init__(f'{field}: {msg}' if field else msg)
        self.field = field


class InstanceParseError(InstanceError):
    pass


class InstanceValidationError(InstanceError):
    pass


class ScheduleError(Exception):
    pass


def _check_series(values: Sequence[float], length: int, name: str, non_negative: bool = True):
    if len(values) != length:
        raise InstanceValidationError(
            f'expected {length} values (one per period), found {len(values)}', name)
    for t, value in enumerate(values, start = 1):
        if not math.isfinite(value):
            raise InstanceValidationError(f'non-finite value at period {t}', name)
        if non_negative and value < 0:
            raise InstanceValidationError(f'negative value {value} at period {t}', name)


@dataclass(frozen = True)
class OperationSpec:
    duration: int
    power: tuple[float, ...] = ()

    def __post_init__(self):
        if isinstance(self.duration, bool) or not isinstance(self.duration, (int, np.integer)):
            raise InstanceValidationError(f'duration must be an integer, not {self.duration!r}',
                                          'duration')
        object.__setattr__(self, 'duration', int(self.duration))
        object.__setattr__(self, 'power', tuple(float(p) for p in self.power))
        if self.duration < 0:
            raise InstanceValidationError(f'negative duration {self.duration}', 'duration')
        if len(self.power) != self.duration:
            raise InstanceValidationError(
                f'{len(self.power)} power values given for duration {self.duration}', 'power')
        if any(not math.isfinite(p) or p < 0 for p in self.power):
            raise InstanceValidationError('power values must be finite and non-negative', 'power')

    @property
    def is_dummy(self) -> bool:
        return self.duration == 0

    @property
    def energy_periods(self) -> float:
        'Sum of per-period power (kW-periods).'
        return float(sum(self.power))


@dataclass(frozen = True)
class Job:
    operations: tuple[OperationSpec, ...]


@dataclass(frozen = True)
class Instance:
    machine_count: int
    horizon: int
    jobs: tuple[Job, ...]
    carbon_intensity: tuple[float, ...]
    onsite_available: tuple[float, ...]
    prices: tuple[float, ...] | None = None
    period_hours: float = DEFAULT_PERIOD_HOURS
    label: str = ''

    def __post_init__(self):
        if self.machine_count < 1:
            raise InstanceValidationError('must be at least 1', 'machines')
        if self.horizon < 1:
            raise InstanceValidationError('must be at least 1', 'horizon')
        if not (math.isfinite(self.period_hours) and self.period_hours > 0):
            raise InstanceValidationError('must be positive', 'period_hours')
        if len(self.jobs) < 1:
            raise InstanceValidationError('at least one job is required', 'jobs')
        for i, job in enumerate(self.jobs):
            if len(job.operations) != self.machine_count:
                raise InstanceValidationError(
                    f'job {i} has {len(job.operations)} operations for '
                    f'{self.machine_count} machines',
                    'jobs')

        _check_series(self.carbon_intensity, self.horizon, 'carbon')
        _check_series(self.onsite_available, self.horizon, 'onsite')
        if self.prices is not None:
            # Day-ahead prices can legitimately be negative.
            _check_series(self.prices, self.horizon, 'prices', non_negative = False)

    @property
    def job_count(self) -> int:
        return len(self.jobs)

    @cached_property
    def durations(self) -> np.ndarray:
        'N x M integer matrix of processing times.'
        d = np.array([[op.duration for op in job.operations] for job in self.jobs],
                     dtype = np.int64)
        d.setflags(write = False)
        return d

    @cached_property
    def power(self) -> tuple[tuple[np.ndarray, ...], ...]:
        'power[i][m] is the per-period power array of operation (i, m).'
        return tuple(
            tuple(np.array(op.power, dtype = float) for op in job.operations)
            for job in self.jobs)

    @cached_property
    def carbon(self) -> np.ndarray:
        c = np.array(self.carbon_intensity, dtype = float)
        c.setflags(write = False)
        return c

    @cached_property
    def onsite(self) -> np.ndarray:
        a = np.array(self.onsite_available, dtype = float)
        a.setflags(write = False)
        return a

    @cached_property
    def price_array(self) -> np.ndarray | None:
        if self.prices is None:
            return None
        p = np.array(self.prices, dtype = float)
        p.setflags(write = False)
        return p

    @property
    def operation_count(self) -> int:
        return self.job_count * self.machine_count

    def to_document(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            'label':        self.label,
            'machines':     self.machine_count,
            'horizon':      self.horizon,
            'period_hours': self.period_hours,
            'jobs': [
                [{'duration': op.duration, 'power': list(op.power)} for op in job.operations]
                for job in self.jobs
            ],
            'carbon': list(self.carbon_intensity),
            'onsite': list(self.onsite_available),
        }
        if self.prices is not None:
            doc['prices'] = list(self.prices)
        return doc

    def digest(self) -> str:
        canonical = json.dumps(self.to_document(), sort_keys = True, separators = (',', ':'))
        return hashlib.sha256(canonical.encode()).hexdigest()


def slack_vector(instance: Instance) -> tuple[int, ...]:
    '''
    Per-machine slack S^m = T - sum_i D_im. Negative slack means the jobs cannot fit on that
    machine at all.
    '''
    return tuple(int(instance.horizon - s) for s in instance.durations.sum(axis = 0))


@dataclass(frozen = True)
class Schedule:
    sequence: tuple[int, ...]
    start: tuple[tuple[int, ...], ...]   # start[i][m], one-based period
    completion: int
    feasible: bool

    @cached_property
    def start_array(self) -> np.ndarray:
        return np.array(self.start, dtype = np.int64)

    def to_document(self) -> dict[str, Any]:
        return {
            'sequence':   list(self.sequence),
            'start':      [list(row) for row in self.start],
            'completion': self.completion,
            'feasible':   self.feasible,
        }


def place_operations(instance: Instance,
                     sequence: Sequence[int],
                     pauses: Sequence[Sequence[int]] | None = None) -> Schedule:
    '''
    Builds a permutation schedule from a job sequence and, optionally, the planned idle periods
    in front of each sequence position on each machine (pauses[m][k], k = 0..N-1; any trailing
    pause entry is ignored).

    Each operation starts at max(machine available time + pause, completion of the job's
    previous operation). Zero-duration operations occupy no periods, but still sit at their place
    in the sequence: the machine becomes available again at their start period.
    '''
    durations = instance.durations
    machines = instance.machine_count
    start = [[0] * machines for _ in range(instance.job_count)]

    for m in range(machines):
        available = 1
        for k, i in enumerate(sequence):
            begin = available + (int(pauses[m][k]) if pauses is not None else 0)
            if m > 0:
                ready = start[i][m - 1] + int(durations[i][m - 1])
                if ready > begin:
                    begin = ready
            start[i][m] = begin
            available = begin + int(durations[i][m])

    return schedule_from_starts(instance, sequence, start)


def schedule_from_starts(instance: Instance,
                         sequence: Sequence[int],
                         start: Sequence[Sequence[int]]) -> Schedule:
    durations = instance.durations
    completion = max(
        (int(start[i][m]) + int(durations[i][m]) - 1
         for i in range(instance.job_count)
         for m in range(instance.machine_count)),
        default = 0)
    completion = max(completion, 0)
    return Schedule(
        sequence = tuple(int(i) for i in sequence),
        start = tuple(tuple(int(t) for t in row) for row in start),
        completion = completion,
        feasible = completion <= instance.horizon)


def fcfs_schedule(instance: Instance) -> Schedule:
    'Jobs in index order, every operation as early as machine availability and precedence allow.'
    return place_operations(instance, range(instance.job_count))


def check_schedule(instance: Instance, schedule: Schedule) -> list[str]:
    '''
    Returns a description of each structural problem with the schedule: wrong shape, a sequence
    that is not a permutation, precedence violations, overlapping operations on a machine, or a
    recorded completion/feasibility that the start periods do not produce. An empty list means
    the schedule is structurally valid (it may still be late).
    '''
    problems = []
    n = instance.job_count
    machines = instance.machine_count
    durations = instance.durations

    if sorted(schedule.sequence) != list(range(n)):
        problems.append(f'sequence {list(schedule.sequence)} is not a permutation of 0..{n - 1}')
        return problems

    if len(schedule.start) != n or any(len(row) != machines for row in schedule.start):
        problems.append(f'start matrix must be {n} x {machines}')
        return problems

    for i in range(n):
        for m in range(machines):
            if schedule.start[i][m] < 1:
                problems.append(f'job {i} machine {m}: start period {schedule.start[i][m]} < 1')
        for m in range(machines - 1):
            if schedule.start[i][m + 1] < schedule.start[i][m] + durations[i][m]:
                problems.append(f'job {i}: machine {m + 1} starts before machine {m} finishes')

    for m in range(machines):
        for a, b in zip(schedule.sequence, schedule.sequence[1:]):
            if schedule.start[b][m] < schedule.start[a][m] + durations[a][m]:
                problems.append(f'machine {m}: job {b} starts before job {a} finishes')

    derived = schedule_from_starts(instance, schedule.sequence, schedule.start)
    if schedule.completion != derived.completion:
        problems.append(f'completion {schedule.completion} recorded, but the start periods '
                        f'finish at {derived.completion}')
    if schedule.feasible != derived.feasible:
        problems.append(f'feasible={schedule.feasible} recorded, but completion '
                        f'{derived.completion} against horizon {instance.horizon} gives '
                        f'feasible={derived.feasible}')

    return problems


def _require(doc: dict[str, Any], key: str, kind: type | tuple[type, ...]):
    if key not in doc:
        raise InstanceParseError('missing field', key)
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, kind):
        raise InstanceParseError(f'unexpected value {value!r}', key)
    return value


def _numbers(values: Any, key: str) -> tuple[float, ...]:
    if not isinstance(values, list) or any(
            isinstance(v, bool) or not isinstance(v, (int, float)) for v in values):
        raise InstanceParseError('expected a list of numbers', key)
    return tuple(float(v) for v in values)


def instance_from_document(doc: Any) -> Instance:
    if not isinstance(doc, dict):
        raise InstanceParseError('instance document must be a JSON object')

    machines = _require(doc, 'machines', int)
    horizon = _require(doc, 'horizon', int)
    period_hours = doc.get('period_hours', DEFAULT_PERIOD_HOURS)
    if isinstance(period_hours, bool) or not isinstance(period_hours, (int, float)):
        raise InstanceParseError(f'unexpected value {period_hours!r}', 'period_hours')
    label = str(doc.get('label', ''))

    raw_jobs = _require(doc, 'jobs', list)
    jobs = []
    for i, raw_job in enumerate(raw_jobs):
        if not isinstance(raw_job, list):
            raise InstanceParseError(f'job {i} must be a list of operations', 'jobs')
        operations = []
        for m, raw_op in enumerate(raw_job):
            if not isinstance(raw_op, dict):
                raise InstanceParseError(f'job {i} operation {m} must be an object', 'jobs')
            duration = _require(raw_op, 'duration', int)
            power = _numbers(raw_op.get('power', []), 'power')
            operations.append(OperationSpec(duration, power))
        jobs.append(Job(tuple(operations)))

    prices = doc.get('prices')
    return Instance(
        machine_count = machines,
        horizon = horizon,
        jobs = tuple(jobs),
        carbon_intensity = _numbers(_require(doc, 'carbon', list), 'carbon'),
        onsite_available = _numbers(_require(doc, 'onsite', list), 'onsite'),
        prices = None if prices is None else _numbers(prices, 'prices'),
        period_hours = float(period_hours),
        label = label)


def load_instance(path: str, progress: Progress | None = None) -> Instance:
    try:
        with open(path, encoding = 'utf-8') as reader:
            doc = json.load(reader)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise InstanceParseError(f'{path}: {e}') from e

    instance = instance_from_document(doc)

    if progress is not None:
        fcfs = fcfs_schedule(instance)
        if not fcfs.feasible:
            progress.warning(
                NAME,
                msg = (f'{path}: FCFS completion {fcfs.completion} exceeds horizon '
                       f'{instance.horizon}; no schedule may be on time'))
    return instance


def save_instance(instance: Instance, path: str):
    with open(path, 'w', encoding = 'utf-8') as writer:
        json.dump(instance.to_document(), writer, indent = 1)
        writer.write('\n')


def save_schedule(schedule: Schedule, path: str, header: dict[str, Any] | None = None):
    with open(path, 'w', encoding = 'utf-8') as writer:
        if header:
            writer.write('# ' + ' '.join(f'{k}={v}' for k, v in header.items()) + '\n')
        json.dump(schedule.to_document(), writer)
        writer.write('\n')


def read_schedule_header(path: str) -> dict[str, str]:
    with open(path, encoding = 'utf-8') as reader:
        first = reader.readline()
    if not first.startswith('#'):
        return {}
    return dict(item.split('=', 1) for item in first[1:].split() if '=' in item)


def load_schedule(path: str) -> Schedule:
    try:
        with open(path, encoding = 'utf-8') as reader:
            text = ''.join(line for line in reader if not line.startswith('#'))
    except UnicodeDecodeError as e:
        raise ScheduleError(f'{path}: not a UTF-8 text file ({e})') from e
    try:
        doc = json.loads(text)
        return Schedule(
            sequence = tuple(int(i) for i in doc['sequence']),
            start = tuple(tuple(int(t) for t in row) for row in doc['start']),
            completion = int(doc['completion']),
            feasible = bool(doc['feasible']))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise ScheduleError(f'{path}: malformed schedule document ({e})') from e
