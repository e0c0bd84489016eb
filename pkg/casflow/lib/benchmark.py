'''
# Benchmark reporting

Per-run result records, per-instance statistics (mean, standard deviation, coefficient of
variation, mean run time, percentage gap to a reference method), the cross-objective table and
the plain-text summary.

All statistics are computed from the raw per-run table, so re-reading runs.csv reproduces them.
'''

from __future__ import annotations
from .evaluator import OBJECTIVES

import numpy as np
import pandas as pd

from dataclasses import dataclass, field
from typing import Iterable, Sequence

NAME = 'benchmark'  # For progress/error messages

MA = 'ma'
ORACLE = 'oracle'
EXTERNAL = 'external'
METHODS = (MA, ORACLE, EXTERNAL)

RESULT_COLUMNS = ['instance', 'run', 'objective', 'value', 'penalty', 'feasible', 'seconds']
RUN_COLUMNS = ['instance', 'method', 'objective', 'run', 'value', 'penalty', 'feasible',
               'seconds']
STATS_COLUMNS = ['instance', 'method', 'objective', 'runs', 'feasible_runs', 'mean', 'std', 'cv',
                 'mean_seconds', 'gap']
EXTERNAL_COLUMNS = ['instance', 'objective', 'value', 'seconds']


class BenchmarkError(Exception):
    pass


@dataclass(frozen = True)
class RunRecord:
    instance: str
    method: str
    objective: str
    run: int
    value: float
    penalty: float
    feasible: bool
    seconds: float | None = None

    @property
    def fitness(self) -> float:
        return self.value + self.penalty


def records_frame(records: Iterable[RunRecord], columns: Sequence[str] = RUN_COLUMNS
                  ) -> pd.DataFrame:
    frame = pd.DataFrame(
        [{c: getattr(r, c) for c in columns} for r in records],
        columns = list(columns))
    keys = [c for c in ('instance', 'method', 'objective', 'run') if c in columns]
    return frame.sort_values(keys, kind = 'stable').reset_index(drop = True)


def write_frame(frame: pd.DataFrame, path: str):
    frame.to_csv(path, index = False, lineterminator = '\n')


def read_runs(path: str) -> pd.DataFrame:
    return pd.read_csv(path, dtype = {'instance': str, 'method': str, 'objective': str})


def read_external(path: str) -> list[RunRecord]:
    '''
    Reads results produced outside this toolkit (e.g. by a MILP solver given the exported
    model): one row per instance and objective.
    '''
    try:
        frame = pd.read_csv(path, dtype = {'instance': str, 'objective': str})
    except pd.errors.EmptyDataError as e:
        raise BenchmarkError(f'{path}: empty file') from e

    missing = [c for c in EXTERNAL_COLUMNS if c not in frame.columns]
    if missing:
        raise BenchmarkError(f'{path}: missing column(s) {", ".join(missing)}')

    records = []
    for row in frame.itertuples(index = False):
        if row.objective not in OBJECTIVES:
            raise BenchmarkError(f'{path}: unknown objective "{row.objective}"')
        seconds = None if pd.isna(row.seconds) else float(row.seconds)
        records.append(RunRecord(row.instance, EXTERNAL, row.objective, 0, float(row.value), 0.0,
                                 True, seconds))
    return records


def percentage_gap(reference: float, value: float) -> float | None:
    '''
    Relative improvement of `value` over `reference`, in percent. Undefined (None) unless the
    reference is positive.
    '''
    if not reference > 0:
        return None
    return (reference - value) / reference * 100


def summarise(runs: pd.DataFrame, reference: str | None = None) -> pd.DataFrame:
    '''
    One row per (instance, method, objective). The standard deviation is the population standard
    deviation. `gap` compares each method's mean with the reference method's mean on the same
    instance and objective.
    '''
    rows = []
    for (instance, method, objective), group in runs.groupby(
            ['instance', 'method', 'objective'], sort = True):
        fitness = (group['value'] + group['penalty']).to_numpy(dtype = float)
        mean = float(np.mean(fitness))
        std = float(np.std(fitness, ddof = 0))
        seconds = pd.to_numeric(group['seconds'], errors = 'coerce').dropna()
        rows.append({
            'instance':      instance,
            'method':        method,
            'objective':     objective,
            'runs':          len(group),
            'feasible_runs': int(group['feasible'].astype(bool).sum()),
            'mean':          mean,
            'std':           std,
            'cv':            std / abs(mean) if mean != 0 else 0.0,
            'mean_seconds':  float(seconds.mean()) if len(seconds) else None,
            'gap':           None,
        })

    stats = pd.DataFrame(rows, columns = STATS_COLUMNS)
    if reference is not None and not stats.empty:
        ref = stats[stats['method'] == reference].set_index(['instance', 'objective'])['mean']
        gaps = []
        for row in stats.itertuples(index = False):
            key = (row.instance, row.objective)
            if row.method == reference or key not in ref.index:
                gaps.append(None)
            else:
                gaps.append(percentage_gap(float(ref[key]), row.mean))
        stats['gap'] = gaps
    return stats


@dataclass(frozen = True)
class Anomaly:
    instance: str
    objective: str
    run: int
    value: float
    optimum: float

    def __str__(self):
        return (f'{self.instance} ({self.objective}, run {self.run}): MA value {self.value!r} is '
                f'below the exhaustive optimum {self.optimum!r}')


def oracle_anomalies(runs: pd.DataFrame) -> list[Anomaly]:
    '''
    MA runs that claim to beat the exhaustive optimum. There should never be any.
    '''
    oracle = runs[runs['method'] == ORACLE]
    optimum = {(r.instance, r.objective): r.value + r.penalty
               for r in oracle.itertuples(index = False)}
    anomalies = []
    for r in runs[runs['method'] == MA].itertuples(index = False):
        best = optimum.get((r.instance, r.objective))
        if best is not None and r.value + r.penalty < best:
            anomalies.append(Anomaly(r.instance, r.objective, int(r.run), r.value + r.penalty,
                                     best))
    return anomalies


@dataclass
class CrossRow:
    '''
    The best schedule found for one objective (the row), evaluated under every objective.
    '''
    instance: str
    optimised: str
    values: dict[str, float] = field(default_factory = dict)


def cross_table(rows: Iterable[CrossRow]) -> pd.DataFrame:
    '''
    Each objective's champion schedule against the others, with each value also expressed as a
    percentage above the best value in its column for that instance.
    '''
    rows = list(rows)
    kinds = [k for k in OBJECTIVES if any(k in r.values for r in rows)]
    frame = pd.DataFrame(
        [{'instance': r.instance, 'row': f'{r.optimised}-min',
          **{k: r.values.get(k, np.nan) for k in kinds}} for r in rows],
        columns = ['instance', 'row'] + kinds)

    for kind in kinds:
        best = frame.groupby('instance')[kind].transform('min')
        frame[f'{kind}_rel'] = np.where(best > 0, (frame[kind] - best) / best * 100, np.nan)
    return frame


def summary_text(stats: pd.DataFrame,
                 cross: pd.DataFrame | None = None,
                 anomalies: Sequence[Anomaly] = ()) -> str:
    lines = ['Benchmark summary', '=================', '']

    for (method, objective), group in stats.groupby(['method', 'objective'], sort = True):
        gaps = group['gap'].dropna()
        seconds = group['mean_seconds'].dropna()
        lines.append(f'{method} / {objective}: {len(group)} instance(s)')
        lines.append(f'  mean objective: {group["mean"].mean()!r}')
        lines.append(f'  mean CV:        {group["cv"].mean()!r}')
        if len(gaps):
            lines.append(f'  mean gap (%):   {gaps.mean()!r}')
        if len(seconds):
            lines.append(f'  mean seconds:   {seconds.mean()!r}')
        lines.append('')

    if cross is not None and not cross.empty:
        kinds = [k for k in OBJECTIVES if k in cross.columns]
        lines.append('Cross-objective table (mean % above column best)')
        for row_name, group in cross.groupby('row', sort = True):
            cells = ', '.join(f'{k} {group[f"{k}_rel"].mean():.1f} %' for k in kinds)
            lines.append(f'  {row_name}: {cells}')
        lines.append('')

    if anomalies:
        lines.append('ANOMALIES (MA below exhaustive optimum)')
        lines.extend(f'  {a}' for a in anomalies)
        lines.append('')

    return '\n'.join(lines)
