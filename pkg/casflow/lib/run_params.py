'''
The 'run parameters' are everything (apart from the instances themselves) needed to carry out a
command: where output goes, how randomness is seeded, how much parallelism to use, and which
algorithm parameters and caches apply.
'''

from __future__ import annotations
from .memetic import MaParams, resolve_params
from .core import Instance
from .progress import Progress

import numpy as np

from concurrent.futures import Executor, ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
import os
from typing import Any, Iterator


class RunParamsError(Exception):
    pass


@dataclass
class RunParams:
    out_dir: str
    progress: Progress
    seed: int = 0
    jobs: int = 1
    time_limit: float | None = None
    params_spec: str = 'auto'
    oracle_cache: Any = None
    timing: bool = False

    def __post_init__(self):
        if self.jobs < 1:
            raise RunParamsError(f'worker count must be at least 1, not {self.jobs}')
        if self.time_limit is not None and self.time_limit <= 0:
            raise RunParamsError(f'time limit must be positive, not {self.time_limit}')

    def output_path(self, *parts: str) -> str:
        'A path under the output directory, creating intermediate directories.'
        path = os.path.join(self.out_dir, *parts)
        os.makedirs(os.path.dirname(path), exist_ok = True)
        return path

    def run_seed(self, run: int) -> int:
        'Seed of the run-th repetition; independent of the worker that runs it.'
        return int(np.random.SeedSequence([self.seed, run]).generate_state(1)[0])

    def ma_params(self, instance: Instance, run: int) -> MaParams:
        return resolve_params(self.params_spec, instance).with_seed(self.run_seed(run))

    def seconds(self, elapsed: float) -> float | None:
        return elapsed if self.timing else None

    @contextmanager
    def executor(self) -> Iterator[Executor | None]:
        if self.jobs == 1:
            yield None
        else:
            with ProcessPoolExecutor(max_workers = self.jobs) as pool:
                yield pool
