'''
# Exact model

Builds the time-indexed mixed-integer model of the carbon-aware permutation flow shop as a pulp
problem, writes it in LP and MPS formats for an external solver, and provides an exhaustive oracle
for tiny instances. Nothing here invokes a solver.

Model variables (job and machine indices zero-based, periods one-based):

* `x_i_m_t`: binary; operation (i, m) starts in period t, for t in its start window.
* `s_i_j`: binary, i < j; job i precedes job j on every machine.
* `y_t`: on-site power used in period t (kW).
* `tau_i_m`: start period of operation (i, m).
* `p_i_m_t`: power drawn by operation (i, m) in period t.

The objective is the grid-only emissions of the chosen starts, less the emissions avoided by
drawing on-site power: sum E_imt x_imt - sum C_t h y_t (grams).
'''

from __future__ import annotations
from .carbon import EmissionMatrix, emission_matrix
from .core import Instance, Schedule, schedule_from_starts, slack_vector
from .evaluator import Objective, demand_profile, evaluate
from .progress import Progress

import pulp

import itertools
import math
from concurrent.futures import Executor
from dataclasses import dataclass, field
import re
from typing import Any, Iterator, Mapping, Sequence

NAME = 'milp'  # For progress/error messages

DEFAULT_BUDGET = 10 ** 7
SINGLE_MACHINE_MAX_JOBS = 6
SINGLE_MACHINE_MAX_SLACK = 20

PAUSE_SPACE = 'pause-compositions'
START_SPACE = 'start-times'

OBJECTIVE_NAME = 'emissions'


class OracleRefusal(Exception):
    pass


def x_name(i: int, m: int, t: int) -> str:
    return f'x_{i}_{m}_{t}'


def s_name(i: int, j: int) -> str:
    return f's_{i}_{j}'


def y_name(t: int) -> str:
    return f'y_{t}'


def tau_name(i: int, m: int) -> str:
    return f'tau_{i}_{m}'


def p_name(i: int, m: int, t: int) -> str:
    return f'p_{i}_{m}_{t}'


def problem_name(label: str) -> str:
    return re.sub(r'\W', '_', label) or 'casflow'


@dataclass(eq = False)
class MilpModel:
    problem: pulp.LpProblem
    variables: dict[str, pulp.LpVariable] = field(default_factory = dict)
    binaries: list[str] = field(default_factory = list)
    continuous: list[str] = field(default_factory = list)
    x_count: int = 0
    s_count: int = 0
    y_count: int = 0

    def declare(self, name: str, binary: bool = False) -> pulp.LpVariable:
        if binary:
            var = pulp.LpVariable(name, cat = pulp.LpBinary)
            self.binaries.append(name)
        else:
            var = pulp.LpVariable(name, lowBound = 0)
            self.continuous.append(name)
        self.variables[name] = var
        return var

    @property
    def constraints(self) -> dict[str, pulp.LpConstraint]:
        return self.problem.constraints

    def assign(self, assignment: Mapping[str, float]):
        'Sets every variable to its value in `assignment` (0 if absent).'
        for name, var in self.variables.items():
            var.varValue = float(assignment.get(name, 0.0))

    def objective_value(self, assignment: Mapping[str, float]) -> float:
        self.assign(assignment)
        return float(self.problem.objective.value())

    def violations(self, assignment: Mapping[str, float], tol: float = 1e-6) -> list[str]:
        '''
        Names of the constraints the assignment breaks, plus any variable outside its bounds (a
        binary not at 0 or 1, or a continuous variable below 0).
        '''
        self.assign(assignment)
        problems = [name for name, c in self.problem.constraints.items() if not c.valid(tol)]
        problems.extend(name for name, var in self.variables.items() if not var.valid(tol))
        return problems


def build_milp(instance: Instance, matrix: EmissionMatrix | None = None) -> MilpModel:
    if matrix is None:
        matrix = emission_matrix(instance)   # Raises InfeasibleInstanceError for bad windows.

    n = instance.job_count
    machines = instance.machine_count
    horizon = instance.horizon
    h = instance.period_hours
    durations = instance.durations
    model = MilpModel(pulp.LpProblem(problem_name(instance.label), pulp.LpMinimize))
    problem = model.problem

    x = {(i, m, t): model.declare(x_name(i, m, t), binary = True)
         for i in range(n)
         for m in range(machines)
         for t in matrix.window(i, m)}
    s = {(i, j): model.declare(s_name(i, j), binary = True)
         for i, j in itertools.combinations(range(n), 2)}
    y = {t: model.declare(y_name(t)) for t in range(1, horizon + 1)}
    tau = {(i, m): model.declare(tau_name(i, m)) for i in range(n) for m in range(machines)}
    model.x_count, model.s_count, model.y_count = len(x), len(s), len(y)

    problem += (
        pulp.lpSum(float(matrix.at(i, m, t)) * var for (i, m, t), var in x.items())
        - pulp.lpSum(float(instance.carbon[t - 1]) * h * var for t, var in y.items()),
        OBJECTIVE_NAME)

    # (b) every operation starts exactly once; (c) its start period.
    for i in range(n):
        for m in range(machines):
            window = matrix.window(i, m)
            problem += pulp.lpSum(x[i, m, t] for t in window) == 1, f'c4b_{i}_{m}'
            problem += (tau[i, m] - pulp.lpSum(float(t) * x[i, m, t] for t in window) == 0,
                        f'c4c_{i}_{m}')

    # (d) power drawn per period.
    drawn_by: dict[int, list[pulp.LpVariable]] = {t: [] for t in range(1, horizon + 1)}
    for i in range(n):
        for m in range(machines):
            power = instance.power[i][m]
            d = len(power)
            if d == 0:
                continue
            first, last = matrix.window(i, m)[0], matrix.window(i, m)[-1]
            for t in range(first, last + d):
                p = model.declare(p_name(i, m, t))
                drawn_by[t].append(p)
                running = pulp.lpSum(
                    float(power[k - 1]) * x[i, m, t - k + 1]
                    for k in range(max(1, t + 1 - last), min(d, t + 1 - first) + 1))
                problem += p - running == 0, f'c4d_{i}_{m}_{t}'

    # (e) job precedence across machines.
    for i in range(n):
        for m in range(machines - 1):
            problem += tau[i, m + 1] - tau[i, m] >= int(durations[i][m]), f'c4e_{i}_{m}'

    # (f, g) the same job order on every machine; s_i_j = 1 puts i first.
    for (i, j), order in s.items():
        for m in range(machines):
            problem += (tau[i, m] - tau[j, m] + horizon * order >= int(durations[j][m]),
                        f'c4f_{i}_{j}_{m}')
            problem += (tau[j, m] - tau[i, m] - horizon * order >= int(durations[i][m]) - horizon,
                        f'c4g_{i}_{j}_{m}')

    # (h, i) on-site power use is bounded by demand and by availability.
    for t, used in y.items():
        problem += used - pulp.lpSum(drawn_by[t]) <= 0, f'c4h_{t}'
    for t, used in y.items():
        problem += used <= float(instance.onsite[t - 1]), f'c4i_{t}'

    return model


def indicator_encoding(model: MilpModel, instance: Instance,
                       schedule: Schedule) -> dict[str, float]:
    '''
    The model variable values corresponding to a schedule, with on-site power used wherever it
    is available.
    '''
    assignment = {name: 0.0 for name in model.variables}
    position = {job: k for k, job in enumerate(schedule.sequence)}

    for i in range(instance.job_count):
        for m in range(instance.machine_count):
            start = schedule.start[i][m]
            assignment[x_name(i, m, start)] = 1.0
            assignment[tau_name(i, m)] = float(start)
            for k, power in enumerate(instance.power[i][m]):
                assignment[p_name(i, m, start + k)] = float(power)

    for i, j in itertools.combinations(range(instance.job_count), 2):
        assignment[s_name(i, j)] = 1.0 if position[i] < position[j] else 0.0

    profile = demand_profile(instance, schedule)
    for t in range(1, instance.horizon + 1):
        assignment[y_name(t)] = float(profile.onsite_used[t - 1])

    return assignment


# ------------------------------------------------------------------------------------------------
# Model files

def export_lp(model: MilpModel, path: str):
    model.problem.writeLP(path)


def export_mps(model: MilpModel, path: str):
    model.problem.writeMPS(path)


@dataclass(frozen = True)
class ModelCounts:
    binaries: int
    continuous: int
    constraints: int


def read_model_counts(path: str) -> ModelCounts:
    '''
    Reads an MPS file written by `export_mps` back into a pulp problem, and counts its binary and
    continuous variables and its constraints.
    '''
    variables, problem = pulp.LpProblem.fromMPS(path)
    binaries = sum(1 for var in variables.values() if var.isBinary())
    return ModelCounts(binaries, len(variables) - binaries, len(problem.constraints))


def model_counts(model: MilpModel) -> ModelCounts:
    return ModelCounts(len(model.binaries), len(model.continuous), len(model.constraints))


# ------------------------------------------------------------------------------------------------
# Exhaustive oracle

@dataclass(frozen = True)
class OracleResult:
    schedule: Schedule
    objective: Objective
    enumerated: int
    space: str

    def header(self) -> dict[str, Any]:
        return {'enumerated': self.enumerated, 'space': self.space,
                'objective': self.objective.kind, 'value': repr(self.objective.value)}


def compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    'All ways of writing `total` as an ordered sum of `parts` non-negative integers.'
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


def pause_space_size(job_count: int, slack: int) -> int:
    return math.factorial(job_count) * math.comb(slack + job_count, job_count)


def start_space_bound(instance: Instance) -> int:
    'An upper bound on the number of on-time schedules of a multi-machine instance.'
    n = instance.job_count
    return math.factorial(n) * math.prod(
        math.comb(max(s, 0) + n, n) for s in slack_vector(instance))


def _order_key(schedule: Schedule) -> tuple:
    return (schedule.sequence, schedule.start)


def _better(candidate: tuple[float, tuple], best: tuple[float, tuple] | None) -> bool:
    return best is None or candidate < best


def _start_vectors(instance: Instance, sequence: Sequence[int]) -> Iterator[list[list[int]]]:
    '''
    Every on-time assignment of start periods for a fixed job order: each machine processes the
    jobs in that order without overlap, and each job visits the machines in order.
    '''
    n = instance.job_count
    machines = instance.machine_count
    horizon = instance.horizon
    d = instance.durations
    start = [[0] * machines for _ in range(n)]

    # tail[m][k]: periods still needed on machine m from sequence position k onwards.
    tail = [[int(sum(d[sequence[j]][m] for j in range(k, n))) for k in range(n + 1)]
            for m in range(machines)]
    job_tail = [[int(d[i][m:].sum()) for m in range(machines)] for i in range(n)]

    def place(m: int, k: int, available: int) -> Iterator[list[list[int]]]:
        if k == n:
            if m + 1 == machines:
                yield start
            else:
                yield from place(m + 1, 0, 1)
            return

        i = sequence[k]
        lo = available
        if m > 0:
            lo = max(lo, start[i][m - 1] + int(d[i][m - 1]))
        hi = min(horizon + 1 - tail[m][k], horizon + 1 - job_tail[i][m])
        for t in range(lo, hi + 1):
            start[i][m] = t
            yield from place(m, k + 1, t + int(d[i][m]))

    yield from place(0, 0, 1)


def _search(instance: Instance, kind: str, leading: Sequence[int],
            budget: int) -> tuple[tuple[float, tuple] | None, Schedule | None, int]:
    '''
    Exhausts every job order beginning with one of `leading`. Returns the best (fitness, order)
    key, the schedule and the number of schedules evaluated.
    '''
    n = instance.job_count
    single = instance.machine_count == 1
    slack = slack_vector(instance)[0]
    best_key = None
    best = None
    count = 0

    for first in leading:
        others = [j for j in range(n) if j != first]
        for rest in itertools.permutations(others):
            sequence = (first,) + rest

            if single:
                candidates: Iterator[Schedule] = (
                    _single_machine_schedule(instance, sequence, pauses)
                    for pauses in compositions(slack, n + 1))
            else:
                candidates = (
                    schedule_from_starts(instance, sequence, starts)
                    for starts in _start_vectors(instance, sequence))

            for schedule in candidates:
                count += 1
                if count > budget:
                    raise OracleRefusal(f'more than {budget} schedules to enumerate')
                key = (evaluate(instance, schedule, kind).fitness, _order_key(schedule))
                if _better(key, best_key):
                    best_key, best = key, schedule

    return best_key, best, count


def _single_machine_schedule(instance: Instance, sequence: Sequence[int],
                             pauses: Sequence[int]) -> Schedule:
    d = instance.durations
    start = [[0] for _ in range(instance.job_count)]
    available = 1
    for k, i in enumerate(sequence):
        start[i][0] = available + pauses[k]
        available = start[i][0] + int(d[i][0])
    return schedule_from_starts(instance, sequence, start)


def check_oracle_domain(instance: Instance, budget: int = DEFAULT_BUDGET) -> str:
    '''
    Raises OracleRefusal if the instance is too large to enumerate; otherwise returns the name of
    the space that will be enumerated.
    '''
    slack = slack_vector(instance)
    if min(slack) < 0:
        raise OracleRefusal('the jobs do not fit within the horizon')

    n = instance.job_count
    if instance.machine_count == 1:
        if n > SINGLE_MACHINE_MAX_JOBS:
            raise OracleRefusal(f'{n} jobs; at most {SINGLE_MACHINE_MAX_JOBS} can be enumerated')
        if slack[0] > SINGLE_MACHINE_MAX_SLACK:
            raise OracleRefusal(
                f'slack {slack[0]}; at most {SINGLE_MACHINE_MAX_SLACK} can be enumerated')
        size = pause_space_size(n, slack[0])
        if size > budget:
            raise OracleRefusal(f'{size} schedules to enumerate; the budget is {budget}')
        return PAUSE_SPACE

    if math.factorial(n) > budget:
        raise OracleRefusal(f'{n}! job orders to enumerate; the budget is {budget}')
    return START_SPACE


def exact_oracle(instance: Instance,
                 kind: str = 'carbon',
                 budget: int = DEFAULT_BUDGET,
                 cache: Any = None,
                 executor: Executor | None = None,
                 progress: Progress | None = None) -> OracleResult:
    '''
    Finds an optimal schedule by trying every one. Single-machine instances are enumerated as job
    orders times integer pause compositions; multi-machine instances as job orders times every
    on-time start assignment. Among equal objectives, the lexicographically smallest job order
    (then start matrix) wins.

    Refuses (OracleRefusal) rather than return the best of a partial enumeration.
    '''
    space = check_oracle_domain(instance, budget)

    cache_key = ('oracle', instance.digest(), kind, budget)
    if cache is not None:
        cached = cache.get(cache_key)
        if cached is not None:
            if progress is not None:
                progress.cache_hit(NAME, resource = instance.label or 'oracle result')
            sequence, start, enumerated = cached
            schedule = schedule_from_starts(instance, sequence, start)
            return OracleResult(schedule, evaluate(instance, schedule, kind), enumerated, space)

    n = instance.job_count
    if executor is None or n == 1:
        best_key, best, enumerated = _search(instance, kind, range(n), budget)
    else:
        best_key, best, enumerated = None, None, 0
        for key, schedule, count in executor.map(
                _search, *zip(*[(instance, kind, (first,), budget) for first in range(n)])):
            enumerated += count
            if key is not None and _better(key, best_key):
                best_key, best = key, schedule
        if enumerated > budget:
            raise OracleRefusal(f'more than {budget} schedules to enumerate')

    if best is None:
        raise OracleRefusal('no on-time schedule exists')

    if cache is not None:
        cache[cache_key] = ([int(i) for i in best.sequence],
                            [list(row) for row in best.start],
                            enumerated)

    return OracleResult(best, evaluate(instance, best, kind), enumerated, space)
