'''
# Grid carbon intensity

Derives the per-period carbon intensity of grid electricity from generation-mix data, using
lifecycle emission factors per energy source, and precomputes the grid-only emissions of every
operation at every feasible start period.

Also reads the three external data feeds (generation mix, on-site generation, day-ahead prices)
from CSV files, and can synthesise feeds with the same schema when no downloaded data is at hand.
'''

from __future__ import annotations
from .core import Instance
from .progress import Progress

import numpy as np
import pandas as pd

import configparser
from dataclasses import dataclass, field
from typing import Mapping

NAME = 'carbon'  # For progress/error messages

TIMESTAMP_COLUMN = 'timestamp'
DEFAULT_ONSITE_SCALE = 0.005

# Lifecycle emissions in gCO2eq/kWh (min, median, max).
LIFECYCLE_EMISSIONS: dict[str, tuple[float, float, float]] = {
    'coal':              (740.0, 820.0, 910.0),
    'gas-cc':            (410.0, 490.0, 650.0),
    'biomass-cofiring':  (620.0, 740.0, 890.0),
    'biomass-dedicated': (130.0, 230.0, 420.0),
    'geothermal':        (6.0,   38.0,  79.0),
    'hydro':             (1.0,   24.0,  2200.0),
    'nuclear':           (3.7,   12.0,  110.0),
    'solar-pv':          (26.0,  41.0,  60.0),
    'wind-onshore':      (7.0,   11.0,  56.0),
    'wind-offshore':     (8.0,   12.0,  35.0),
}

_STATISTICS = {'min': 0, 'median': 1, 'max': 2}


class CarbonDataError(Exception):
    pass


class InfeasibleInstanceError(Exception):
    pass


class IngestError(Exception):
    def __init__(self, msg: str, column: str | None = None):
        super().__init__(msg)
        self.column = column


@dataclass(frozen = True)
class EmissionFactorTable:
    entries: Mapping[str, float]

    def __post_init__(self):
        if not self.entries:
            raise CarbonDataError('emission factor table is empty')
        for source, theta in self.entries.items():
            if not theta > 0:
                raise CarbonDataError(f'emission factor for "{source}" must be positive')

    @classmethod
    def default(cls, statistic: str = 'median') -> EmissionFactorTable:
        '''
        The ten lifecycle factors of the standard table. 'median' is the normal choice; 'min' and
        'max' give the bounds for sensitivity runs.
        '''
        try:
            col = _STATISTICS[statistic]
        except KeyError:
            raise CarbonDataError(
                f'unknown statistic "{statistic}"; expected one of {", ".join(_STATISTICS)}')
        return cls({source: row[col] for source, row in LIFECYCLE_EMISSIONS.items()})

    @property
    def sources(self) -> tuple[str, ...]:
        return tuple(self.entries)

    def __contains__(self, source: str) -> bool:
        return source in self.entries

    def __getitem__(self, source: str) -> float:
        return self.entries[source]


@dataclass(frozen = True, eq = False)
class GenerationMixSeries:
    sources: tuple[str, ...]
    quantities: np.ndarray   # T x G
    filled_count: int = 0

    def __post_init__(self):
        q = np.asarray(self.quantities, dtype = float)
        if q.ndim != 2 or q.shape[1] != len(self.sources):
            raise CarbonDataError(
                f'quantities must be a (periods x {len(self.sources)}) matrix, got {q.shape}')
        if np.any(~np.isfinite(q)) or np.any(q < 0):
            raise CarbonDataError('generation quantities must be finite and non-negative')
        totals = q.sum(axis = 1)
        zero = np.flatnonzero(totals <= 0)
        if len(zero) > 0:
            raise CarbonDataError(f'zero total generation in period {zero[0] + 1}')
        q.setflags(write = False)
        object.__setattr__(self, 'quantities', q)

    @property
    def period_count(self) -> int:
        return self.quantities.shape[0]

    def shares(self) -> np.ndarray:
        'w_t^g: the share of each source in each period; rows sum to one.'
        return self.quantities / self.quantities.sum(axis = 1, keepdims = True)


def carbon_intensity(mix: GenerationMixSeries, factors: EmissionFactorTable) -> np.ndarray:
    '''
    C_t = sum_g w_t^g * theta_g, in gCO2eq/kWh, for every period of the mix.
    '''
    unknown = [s for s in mix.sources if s not in factors]
    if unknown:
        raise CarbonDataError(f'no emission factor for source(s): {", ".join(unknown)}')
    theta = np.array([factors[s] for s in mix.sources], dtype = float)
    return mix.shares() @ theta


def start_windows(instance: Instance) -> tuple[np.ndarray, np.ndarray]:
    '''
    First and last feasible start periods, S_im = 1 + sum_{l<m} D_il and
    F_im = T + 1 - sum_{l>=m} D_il, as two N x M matrices.
    '''
    d = instance.durations
    before = np.cumsum(d, axis = 1) - d
    remaining = np.cumsum(d[:, ::-1], axis = 1)[:, ::-1]
    first = 1 + before
    last = instance.horizon + 1 - remaining

    bad = np.argwhere(last < first)
    if len(bad) > 0:
        i = int(bad[0][0])
        raise InfeasibleInstanceError(
            f'job {i} needs {int(d[i].sum())} periods but the horizon is {instance.horizon}')
    return first, last


@dataclass(frozen = True, eq = False)
class EmissionMatrix:
    '''
    Grid-only emissions E_im^t (grams) of starting operation (i, m) in period t, for t within the
    operation's start window.
    '''
    first: np.ndarray
    last: np.ndarray
    values: dict[tuple[int, int], np.ndarray] = field(default_factory = dict)

    def window(self, i: int, m: int) -> range:
        return range(int(self.first[i][m]), int(self.last[i][m]) + 1)

    def at(self, i: int, m: int, t: int) -> float:
        s = int(self.first[i][m])
        if not s <= t <= int(self.last[i][m]):
            raise IndexError(f'period {t} outside start window of operation ({i}, {m})')
        return float(self.values[i, m][t - s])


def emission_matrix(instance: Instance) -> EmissionMatrix:
    first, last = start_windows(instance)
    carbon = instance.carbon
    h = instance.period_hours
    values = {}

    for i, job_power in enumerate(instance.power):
        for m, power in enumerate(job_power):
            s = int(first[i][m])
            f = int(last[i][m])
            if len(power) == 0:
                values[i, m] = np.zeros(f - s + 1)
            else:
                windows = np.lib.stride_tricks.sliding_window_view(carbon, len(power))
                values[i, m] = h * (windows[s - 1:f] @ power)

    return EmissionMatrix(first, last, values)


# ------------------------------------------------------------------------------------------------
# Data feeds

def load_column_map(path: str) -> dict[str, str]:
    '''
    Reads a key-value file mapping CSV headers to emission-factor source names:

        [columns]
        Nuclear = nuclear
        Fossil Gas = gas-cc
    '''
    parser = configparser.ConfigParser(interpolation = None, delimiters = ('=',))
    parser.optionxform = str  # type: ignore  # CSV headers are case-sensitive.
    try:
        with open(path, encoding = 'utf-8') as reader:
            parser.read_file(reader)
    except configparser.Error as e:
        raise IngestError(f'{path}: {e}') from e

    if not parser.has_section('columns'):
        raise IngestError(f'{path}: missing [columns] section')
    return dict(parser.items('columns'))


def _read_frame(path: str) -> pd.DataFrame:
    try:
        df = pd.read_csv(path, dtype = str, keep_default_na = False, skipinitialspace = True)
    except pd.errors.EmptyDataError as e:
        raise IngestError(f'{path}: empty file') from e
    if df.empty:
        raise IngestError(f'{path}: no data rows')
    return df


def _order_rows(df: pd.DataFrame, path: str) -> pd.DataFrame:
    if TIMESTAMP_COLUMN not in df.columns:
        return df
    try:
        stamps = pd.to_datetime(df[TIMESTAMP_COLUMN], utc = True)
    except (ValueError, TypeError) as e:
        raise IngestError(f'{path}: unreadable timestamp ({e})', TIMESTAMP_COLUMN) from e
    order = np.argsort(stamps.to_numpy(), kind = 'stable')
    return df.iloc[order].reset_index(drop = True)


def _numeric(df: pd.DataFrame, columns: list[str], path: str) -> tuple[np.ndarray, int]:
    '''
    Converts the given text columns to floats, carrying the previous period's value forward into
    empty cells. Returns the values and the number of cells filled in.
    '''
    text = df[columns].apply(lambda col: col.str.strip())
    values = text.apply(pd.to_numeric, errors = 'coerce')

    missing = text.eq('')
    bad = values.isna() & ~missing
    if bad.to_numpy().any():
        row, col = np.argwhere(bad.to_numpy())[0]
        column = columns[col]
        raise IngestError(
            f'{path}: non-numeric value "{text.iat[row, col]}" in column "{column}" '
            f'(row {row + 1})',
            column)

    filled = int(missing.to_numpy().sum())
    if filled > 0:
        if missing.iloc[0].any():
            column = columns[int(np.flatnonzero(missing.iloc[0].to_numpy())[0])]
            raise IngestError(
                f'{path}: first row has no value in column "{column}" to carry forward', column)
        values = values.ffill()

    return values.to_numpy(dtype = float), filled


def _value_columns(df: pd.DataFrame) -> list[str]:
    return [c for c in df.columns if c != TIMESTAMP_COLUMN]


def _single_series(path: str, progress: Progress | None) -> np.ndarray:
    df = _order_rows(_read_frame(path), path)
    columns = _value_columns(df)
    if len(columns) != 1:
        raise IngestError(
            f'{path}: expected one value column besides "{TIMESTAMP_COLUMN}", '
            f'found {len(columns)}')
    values, filled = _numeric(df, columns, path)
    if filled and progress is not None:
        progress.warning(NAME, msg = f'{path}: carried forward {filled} missing value(s)')
    return values[:, 0]


def grid_mix_from_frame(df: pd.DataFrame,
                        factors: EmissionFactorTable,
                        column_map: Mapping[str, str] | None = None,
                        path: str = '<data>',
                        progress: Progress | None = None) -> GenerationMixSeries:
    column_map = column_map or {}
    df = _order_rows(df, path)
    columns = _value_columns(df)
    if not columns:
        raise IngestError(f'{path}: no generation columns')

    column_sources = []
    for column in columns:
        source = column_map.get(column, column)
        if source not in factors:
            raise IngestError(
                f'{path}: column "{column}" does not map to a known energy source', column)
        column_sources.append(source)

    values, filled = _numeric(df, columns, path)

    negative = int((values < 0).sum())
    if negative:
        values = np.clip(values, 0, None)
        if progress is not None:
            progress.warning(NAME, msg = f'{path}: clipped {negative} negative value(s) to zero')

    # Several columns may feed the same source (e.g. two hydro categories).
    sources = list(dict.fromkeys(column_sources))
    quantities = np.zeros((values.shape[0], len(sources)))
    for col, source in enumerate(column_sources):
        quantities[:, sources.index(source)] += values[:, col]

    if filled and progress is not None:
        progress.warning(NAME, msg = f'{path}: carried forward {filled} missing value(s)')

    try:
        return GenerationMixSeries(tuple(sources), quantities, filled)
    except CarbonDataError as e:
        raise IngestError(f'{path}: {e}') from e


def ingest_grid_mix(csv: str,
                    factors: EmissionFactorTable,
                    column_map: Mapping[str, str] | None = None,
                    progress: Progress | None = None) -> GenerationMixSeries:
    '''
    Reads a generation-mix CSV: a 'timestamp' column plus one column per energy source, one row
    per period. Headers are resolved through `column_map`, or used directly if they already name
    a source in the factor table.
    '''
    return grid_mix_from_frame(_read_frame(csv), factors, column_map, csv, progress)


def ingest_onsite(csv: str,
                  scale: float = DEFAULT_ONSITE_SCALE,
                  progress: Progress | None = None) -> np.ndarray:
    '''
    Reads regional renewable generation (kW, one row per period) and scales it down to a single
    site. Negative readings are metering artefacts and become zero.
    '''
    if scale < 0:
        raise IngestError(f'scale must be non-negative, not {scale}')
    return np.clip(scale * _single_series(csv, progress), 0, None)


def ingest_prices(csv: str,
                  period_hours: float = 0.25,
                  progress: Progress | None = None) -> np.ndarray:
    '''
    Reads hourly day-ahead prices (currency/MWh), returning per-period prices in currency/kWh.
    '''
    hourly = _single_series(csv, progress)
    if len(hourly) % 24 != 0:
        raise IngestError(f'{csv}: {len(hourly)} hourly prices is not a whole number of days '
                          f'(24 x days)')
    per_hour = round(1 / period_hours)
    if per_hour < 1 or abs(per_hour * period_hours - 1) > 1e-9:
        raise IngestError(f'period length {period_hours} h does not divide an hour')
    return np.repeat(hourly / 1000.0, per_hour)


# ------------------------------------------------------------------------------------------------
# Synthetic feeds

def synthesise_feeds(days: int,
                     seed: int,
                     period_hours: float = 0.25,
                     start: str = '2023-01-01') -> dict[str, pd.DataFrame]:
    '''
    Produces plausible generation-mix, on-site and price feeds (same CSV schema as the real ones)
    for `days` days. Solar follows a seasonal daylight curve with random cloud cover, wind a
    smoothed random walk, gas fills the gap to a daily demand curve, and prices track gas.
    '''
    rng = np.random.default_rng(seed)
    per_day = round(24 / period_hours)
    periods = days * per_day
    stamps = pd.date_range(start, periods = periods, freq = pd.Timedelta(hours = period_hours),
                           tz = 'UTC')

    hour = (np.arange(periods) % per_day) * period_hours
    day = np.arange(periods) // per_day
    season = 0.6 + 0.4 * np.sin(2 * np.pi * (day - 80) / 365)

    daylight = np.clip(np.sin(np.pi * (hour - 6) / 12), 0, None) * season
    clouds = np.repeat(rng.uniform(0.3, 1.0, days), per_day)
    solar = 3000 * daylight * clouds

    wind = np.abs(np.cumsum(rng.normal(0, 60, periods)) % 4000 - 2000) + 200
    demand = 9000 + 2000 * np.sin(np.pi * (hour - 9) / 12) ** 2 + rng.normal(0, 150, periods)
    nuclear = np.full(periods, 4000.0)
    hydro = np.full(periods, 150.0)
    biomass = np.full(periods, 300.0)
    onshore = 0.6 * wind
    offshore = 0.4 * wind
    gas = np.clip(demand - solar - wind - nuclear - hydro - biomass, 200, None)

    mix = pd.DataFrame({
        TIMESTAMP_COLUMN:    stamps.strftime('%Y-%m-%dT%H:%M:%SZ'),
        'nuclear':           nuclear.round(1),
        'gas-cc':            gas.round(1),
        'solar-pv':          solar.round(1),
        'wind-onshore':      onshore.round(1),
        'wind-offshore':     offshore.round(1),
        'hydro':             hydro.round(1),
        'biomass-dedicated': biomass.round(1),
    })

    regional_solar = 10000 * daylight * clouds * rng.uniform(0.9, 1.1, periods)
    onsite = pd.DataFrame({
        TIMESTAMP_COLUMN: stamps.strftime('%Y-%m-%dT%H:%M:%SZ'),
        'kW':             regional_solar.round(1),
    })

    hours = pd.date_range(start, periods = days * 24, freq = pd.Timedelta(hours = 1), tz = 'UTC')
    hourly_gas = gas.reshape(days * 24, -1).mean(axis = 1)
    prices = pd.DataFrame({
        TIMESTAMP_COLUMN: hours.strftime('%Y-%m-%dT%H:%M:%SZ'),
        'price':          (40 + hourly_gas / 60 + rng.normal(0, 5, days * 24)).round(2),
    })

    return {'grid_mix': mix, 'onsite': onsite, 'prices': prices}
