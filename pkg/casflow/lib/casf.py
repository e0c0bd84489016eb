from __future__ import annotations
from . import benchmark as bench, carbon, core, evaluator, instgen, memetic, milp
from . import progress as prog
from .run_params import RunParams, RunParamsError

import diskcache  # type: ignore
import platformdirs

import argparse
from dataclasses import dataclass, replace
import glob
import json
import os
import os.path
import sys
import time
from typing import Any, Callable

VERSION = '0.1'

NAME = 'casf'  # For errors/warnings


def objective_list_type(s: str) -> list[str]:
    kinds = [k.strip() for k in s.split(',') if k.strip()]
    for kind in kinds:
        if kind not in evaluator.OBJECTIVES:
            raise argparse.ArgumentTypeError(
                f'unknown objective "{kind}"; choose from {", ".join(evaluator.OBJECTIVES)}')
    if not kinds:
        raise argparse.ArgumentTypeError('at least one objective is needed')
    return kinds


def method_list_type(s: str) -> list[str]:
    methods = [m.strip() for m in s.split(',') if m.strip()]
    for method in methods:
        if method not in bench.METHODS:
            raise argparse.ArgumentTypeError(
                f'unknown method "{method}"; choose from {", ".join(bench.METHODS)}')
    if not methods:
        raise argparse.ArgumentTypeError('at least one method is needed')
    return methods


def positive_int_type(s: str) -> int:
    try:
        value = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f'"{s}" is not an integer')
    if value < 1:
        raise argparse.ArgumentTypeError('must be at least 1')
    return value


def get_oracle_cache_dir() -> str:
    return platformdirs.user_cache_dir(appname = 'casflow', version = VERSION)


def find_instance_files(paths: list[str]) -> list[str]:
    '''
    Expands directories into the instance files they contain (every .json file except the
    dataset manifest).
    '''
    files = []
    for path in paths:
        if os.path.isdir(path):
            files.extend(
                f for f in sorted(glob.glob(os.path.join(path, '*.json')))
                if os.path.basename(f) != 'manifest.json')
        else:
            files.append(path)
    return files


def load_instances(paths: list[str], progress: prog.Progress) -> list[core.Instance]:
    instances = []
    for path in find_instance_files(paths):
        try:
            instance = core.load_instance(path, progress)
        except (OSError, core.InstanceError) as e:
            progress.error(NAME, msg = f'cannot load "{path}"', exception = e,
                           show_traceback = False)
            continue

        if not instance.label:
            instance = replace(instance,
                               label = os.path.splitext(os.path.basename(path))[0])
        instances.append(instance)

    if not instances and not progress.get_errors():
        progress.error(NAME, msg = 'no instance files found')
    return instances


def has_series(instance: core.Instance, kind: str) -> bool:
    return kind != evaluator.COST or instance.prices is not None


def write_json(path: str, doc: Any):
    with open(path, 'w', encoding = 'utf-8') as writer:
        json.dump(doc, writer, indent = 1)
        writer.write('\n')


# ------------------------------------------------------------------------------------------------
# Memetic runs (fanned out to worker processes)

@dataclass(frozen = True)
class SolveTask:
    instance: core.Instance
    kind: str
    run: int
    params: memetic.MaParams
    time_limit: float | None


@dataclass
class SolveOutcome:
    task: SolveTask
    result: memetic.MaResult
    seconds: float

    def record(self, run_params: RunParams) -> bench.RunRecord:
        objective = self.result.objective
        return bench.RunRecord(
            instance  = self.task.instance.label,
            method    = bench.MA,
            objective = objective.kind,
            run       = self.task.run,
            value     = objective.value,
            penalty   = objective.penalty,
            feasible  = objective.feasible,
            seconds   = run_params.seconds(self.seconds))


def solve_task(task: SolveTask) -> SolveOutcome:
    start = time.perf_counter()
    result = memetic.run(task.instance, task.params, task.kind, task.time_limit)
    return SolveOutcome(task, result, time.perf_counter() - start)


def make_tasks(instances: list[core.Instance], kinds: list[str], runs: int,
               run_params: RunParams) -> list[SolveTask]:
    progress = run_params.progress
    tasks = []
    for instance in instances:
        try:
            memetic.require_slack(instance)
            params = [run_params.ma_params(instance, r) for r in range(runs)]
        except (memetic.ParamsError, carbon.InfeasibleInstanceError) as e:
            progress.error(NAME, msg = f'{instance.label}: {e}')
            continue

        for kind in kinds:
            if not has_series(instance, kind):
                progress.error(NAME, msg = f'{instance.label}: cannot optimise {kind}: '
                                           f'{evaluator.MissingSeriesError("prices")}')
                continue
            tasks.extend(SolveTask(instance, kind, r, params[r], run_params.time_limit)
                         for r in range(runs))
    return tasks


def run_tasks(tasks: list[SolveTask], run_params: RunParams) -> list[SolveOutcome]:
    with run_params.executor() as executor:
        if executor is None:
            return [solve_task(t) for t in tasks]
        return list(executor.map(solve_task, tasks))


def best_outcomes(outcomes: list[SolveOutcome]) -> dict[tuple[str, str], SolveOutcome]:
    'The lowest-fitness run per (instance, objective); the earliest run among equals.'
    best: dict[tuple[str, str], SolveOutcome] = {}
    for outcome in outcomes:
        key = (outcome.task.instance.label, outcome.task.kind)
        current = best.get(key)
        if current is None or (outcome.result.objective.fitness, outcome.task.run) < (
                current.result.objective.fitness, current.task.run):
            best[key] = outcome
    return best


def gantt_document(instance: core.Instance, schedule: core.Schedule, kind: str) -> dict:
    d = instance.durations
    return {
        'instance':   instance.label,
        'objective':  kind,
        'horizon':    instance.horizon,
        'completion': schedule.completion,
        'sequence':   list(schedule.sequence),
        'operations': [
            {'job': i, 'machine': m, 'start': schedule.start[i][m], 'duration': int(d[i][m])}
            for m in range(instance.machine_count)
            for i in schedule.sequence
        ],
    }


def power_document(instance: core.Instance, schedule: core.Schedule) -> dict:
    profile = evaluator.demand_profile(instance, schedule)
    return {
        'instance':     instance.label,
        'period_hours': instance.period_hours,
        'periods':      evaluator.profile_records(instance, profile),
    }


# ------------------------------------------------------------------------------------------------
# Commands

def cmd_generate(args, run_params: RunParams, parser: argparse.ArgumentParser):
    progress = run_params.progress

    if args.synthetic is None:
        for flag, value in (('--carbon', args.carbon), ('--onsite', args.onsite)):
            if value is None:
                parser.error(f'the following argument is required: {flag} '
                             f'(or generate synthetic data with --synthetic DAYS)')

    carbon_path, onsite_path, prices_path = args.carbon, args.onsite, args.prices
    if args.synthetic is not None:
        feeds = carbon.synthesise_feeds(args.synthetic, run_params.seed)
        paths = {name: run_params.output_path('data', f'{name}.csv') for name in feeds}
        for name, frame in feeds.items():
            bench.write_frame(frame, paths[name])
        carbon_path, onsite_path, prices_path = paths['grid_mix'], paths['onsite'], paths['prices']
        progress.progress(NAME, msg = f'synthesised {args.synthetic} day(s) of energy data')

    try:
        config = instgen.GenConfig(
            machine_count   = args.machines,
            horizon         = args.horizon,
            instance_count  = args.count,
            pool_size       = args.pool_size,
            duration_bounds = tuple(args.durations) if args.durations else None,
            seed            = run_params.seed,
            carbon_path     = carbon_path and os.path.abspath(carbon_path),
            onsite_path     = onsite_path and os.path.abspath(onsite_path),
            prices_path     = prices_path and os.path.abspath(prices_path),
            column_map_path = args.column_map and os.path.abspath(args.column_map),
            onsite_scale    = args.onsite_scale)

        historical = instgen.load_historical(config, progress = progress)
        pool = instgen.build_operation_pool(config, instgen.pool_rng(config))
        instances = instgen.generate_dataset(config, pool, historical, progress)
        manifest_path = instgen.write_dataset(run_params.out_dir, instances, config)

    except (OSError, instgen.GenerationError, carbon.IngestError, carbon.CarbonDataError) as e:
        progress.error(NAME, msg = 'cannot generate dataset', exception = e,
                       show_traceback = False)
        return

    summary = instgen.manifest(instances, config).get('summary', {})
    ops = summary.get('operations', {})
    progress.progress(
        NAME,
        msg = (f'wrote {len(instances)} instance(s) and {manifest_path}; operations per instance '
               f'min {ops.get("min")}, median {ops.get("median")}, max {ops.get("max")}'))


def cmd_solve(args, run_params: RunParams, parser: argparse.ArgumentParser):
    progress = run_params.progress
    instances = load_instances(args.instances, progress)
    tasks = make_tasks(instances, [args.objective], args.runs, run_params)
    outcomes = run_tasks(tasks, run_params)

    records = [o.record(run_params) for o in outcomes]
    results_path = run_params.output_path('results.csv')
    bench.write_frame(bench.records_frame(records, bench.RESULT_COLUMNS), results_path)

    for outcome in outcomes:
        label = outcome.task.instance.label
        memetic.write_history_csv(
            run_params.output_path('history', f'{label}_run{outcome.task.run}.csv'),
            outcome.result.history)

    for (label, kind), outcome in sorted(best_outcomes(outcomes).items()):
        instance = outcome.task.instance
        schedule = outcome.result.schedule
        core.save_schedule(schedule, run_params.output_path('schedules', f'{label}_{kind}.json'))

        if args.emit_plot:
            write_json(run_params.output_path('plots', f'{label}_gantt.json'),
                       gantt_document(instance, schedule, kind))
            write_json(run_params.output_path('plots', f'{label}_power.json'),
                       power_document(instance, schedule))

        objective = outcome.result.objective
        fcfs = evaluator.evaluate(instance, core.fcfs_schedule(instance), kind)
        progress.progress(
            NAME,
            msg = (f'{label}: best {kind} {objective.fitness:.6g} (FCFS {fcfs.fitness:.6g}) '
                   f'over {args.runs} run(s)'))

    if outcomes:
        progress.progress(NAME, msg = f'results written to {results_path}')


def cmd_oracle(args, run_params: RunParams, parser: argparse.ArgumentParser):
    progress = run_params.progress
    with run_params.executor() as executor:
        for instance in load_instances(args.instances, progress):
            if not has_series(instance, args.objective):
                progress.error(NAME, msg = f'{instance.label}: '
                                           f'{evaluator.MissingSeriesError("prices")}')
                continue
            try:
                result = milp.exact_oracle(instance, args.objective, args.budget,
                                           run_params.oracle_cache, executor, progress)
            except milp.OracleRefusal as e:
                progress.error(NAME, msg = f'{instance.label}: oracle refused: {e}')
                continue

            path = run_params.output_path('oracle', f'{instance.label}_{args.objective}.json')
            core.save_schedule(result.schedule, path, header = result.header())
            progress.progress(
                NAME,
                msg = (f'{instance.label}: optimum {args.objective} '
                       f'{result.objective.fitness:.6g} over {result.enumerated} '
                       f'{result.space} schedules'))


def cmd_export_milp(args, run_params: RunParams, parser: argparse.ArgumentParser):
    progress = run_params.progress
    for instance in load_instances(args.instances, progress):
        try:
            model = milp.build_milp(instance)
            lp_path = run_params.output_path(f'{instance.label}.lp')
            mps_path = run_params.output_path(f'{instance.label}.mps')
            milp.export_lp(model, lp_path)
            milp.export_mps(model, mps_path)
            written = milp.read_model_counts(mps_path)
        except (OSError, carbon.InfeasibleInstanceError) as e:
            progress.error(NAME, msg = f'{instance.label}: cannot export model', exception = e,
                           show_traceback = False)
            continue

        if written != milp.model_counts(model):
            progress.error(NAME, msg = f'{mps_path}: re-read as {written}, but the model has '
                                       f'{milp.model_counts(model)}')
            continue

        progress.progress(
            NAME,
            msg = (f'{lp_path}: {model.x_count} start, {model.s_count} order and {model.y_count} '
                   f'on-site variables; {len(model.constraints)} constraints'))


def cmd_evaluate(args, run_params: RunParams, parser: argparse.ArgumentParser):
    progress = run_params.progress
    instances = load_instances([args.instance], progress)
    if not instances:
        return
    instance = instances[0]

    try:
        schedule = core.load_schedule(args.schedule)
    except (OSError, core.ScheduleError) as e:
        progress.error(NAME, msg = 'cannot load schedule', exception = e, show_traceback = False)
        return

    problems = core.check_schedule(instance, schedule)
    for problem in problems:
        progress.error(NAME, msg = f'{args.schedule}: {problem}')
    if problems:
        return

    rows = []
    for kind in args.objective:
        try:
            objective = evaluator.evaluate(instance, schedule, kind)
        except evaluator.MissingSeriesError as e:
            progress.error(NAME, msg = f'cannot evaluate {kind}: {e}')
            continue
        rows.append(evaluator.ObjectiveRow.of(instance.label, objective))
        progress.progress(
            NAME,
            msg = (f'{instance.label} {kind}: {objective.value!r}'
                   + (f' + penalty {objective.penalty!r}' if objective.penalty else '')))

    if rows:
        evaluator.write_objective_rows(run_params.output_path('evaluation.csv'), rows)


def _oracle_records(instances: list[core.Instance], kinds: list[str], budget: int,
                    run_params: RunParams) -> list[bench.RunRecord]:
    progress = run_params.progress
    records = []
    with run_params.executor() as executor:
        for instance in instances:
            for kind in kinds:
                if not has_series(instance, kind):
                    continue
                start = time.perf_counter()
                try:
                    result = milp.exact_oracle(instance, kind, budget, run_params.oracle_cache,
                                               executor, progress)
                except milp.OracleRefusal as e:
                    progress.warning(NAME, msg = f'{instance.label} ({kind}): oracle refused: {e}')
                    continue
                records.append(bench.RunRecord(
                    instance.label, bench.ORACLE, kind, 0, result.objective.value,
                    result.objective.penalty, result.objective.feasible,
                    run_params.seconds(time.perf_counter() - start)))
    return records


def _cross_rows(outcomes: list[SolveOutcome], kinds: list[str]) -> list[bench.CrossRow]:
    rows = []
    for (label, kind), outcome in sorted(best_outcomes(outcomes).items()):
        instance = outcome.task.instance
        schedule = outcome.result.schedule
        rows.append(bench.CrossRow(label, kind, {
            other: evaluator.evaluate(instance, schedule, other).fitness
            for other in kinds
            if has_series(instance, other)
        }))
    return rows


def cmd_benchmark(args, run_params: RunParams, parser: argparse.ArgumentParser):
    progress = run_params.progress
    methods = args.methods

    reference = args.reference
    if reference is None:
        reference = next((m for m in (bench.ORACLE, bench.EXTERNAL) if m in methods), None)
    if reference is not None and reference not in methods:
        parser.error(f'reference results missing for gap computation: add "{reference}" to '
                     f'--methods')
    if bench.EXTERNAL in methods and args.external is None:
        parser.error('the "external" method needs --external RESULTS.csv')

    instances = load_instances(args.instances, progress)
    for instance in instances:
        for kind in args.objectives:
            if not has_series(instance, kind):
                progress.warning(NAME, msg = f'{instance.label}: no prices; skipping {kind}')

    records: list[bench.RunRecord] = []
    outcomes: list[SolveOutcome] = []

    if bench.MA in methods:
        kinds_with_data = [
            (instance, [k for k in args.objectives if has_series(instance, k)])
            for instance in instances]
        tasks = [t for instance, kinds in kinds_with_data
                 for t in make_tasks([instance], kinds, args.runs, run_params)]
        outcomes = run_tasks(tasks, run_params)
        records.extend(o.record(run_params) for o in outcomes)

    if bench.ORACLE in methods:
        records.extend(_oracle_records(instances, args.objectives, args.budget, run_params))

    if bench.EXTERNAL in methods:
        try:
            records.extend(bench.read_external(args.external))
        except (OSError, bench.BenchmarkError) as e:
            progress.error(NAME, msg = 'cannot read external results', exception = e,
                           show_traceback = False)
            return

    runs_path = run_params.output_path('runs.csv')
    bench.write_frame(bench.records_frame(records), runs_path)

    if not records:
        progress.error(NAME, msg = 'no results to summarise')
        return

    # Everything below is derived from runs.csv as written.
    runs = bench.read_runs(runs_path)
    stats = bench.summarise(runs, reference)
    bench.write_frame(stats, run_params.output_path('stats.csv'))

    if reference is not None:
        have = set(zip(stats[stats['method'] == reference]['instance'],
                       stats[stats['method'] == reference]['objective']))
        for row in stats[stats['method'] == bench.MA].itertuples(index = False):
            if (row.instance, row.objective) not in have:
                progress.warning(NAME, msg = f'{row.instance} ({row.objective}): no {reference} '
                                             f'result; gap undefined')

    anomalies = bench.oracle_anomalies(runs)
    for anomaly in anomalies:
        progress.error(NAME, msg = str(anomaly))

    cross = bench.cross_table(_cross_rows(outcomes, args.objectives)) if outcomes else None
    if cross is not None:
        bench.write_frame(cross, run_params.output_path('cross.csv'))

    summary = bench.summary_text(stats, cross, anomalies)
    with open(run_params.output_path('summary.txt'), 'w', encoding = 'utf-8') as writer:
        writer.write(summary)

    progress.progress(NAME, msg = f'benchmark written to {run_params.out_dir}')


# ------------------------------------------------------------------------------------------------

def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help = False)

    common.add_argument(
        '--seed', metavar = 'N', type = int, default = 0,
        help = 'Master random seed. Every command is deterministic given the seed.')

    common.add_argument(
        '--params', metavar = 'PROFILE|FILE', type = str, default = 'auto',
        help = ('Memetic algorithm parameters: "auto" (pick a tuned profile by instance shape), '
                f'one of {", ".join(memetic.PROFILE_NAMES)}, or a parameter file.'))

    common.add_argument(
        '--jobs', metavar = 'N', type = positive_int_type, default = 1,
        help = 'Number of worker processes.')

    common.add_argument(
        '--time-limit', metavar = 'SECONDS', type = float,
        help = 'Stop each memetic run after this long, even if generations remain.')

    common.add_argument(
        '-o', '--out', metavar = 'DIR', type = str, default = 'casf-out',
        help = 'Directory for all output files (default "casf-out").')

    common.add_argument(
        '--clean', action = 'store_true',
        help = 'Clear the oracle result cache first.')

    common.add_argument(
        '--no-cache', action = 'store_true',
        help = 'Neither read nor write the oracle result cache.')

    common.add_argument(
        '--timing', action = 'store_true',
        help = ('Record wall-clock time in the "seconds" columns. Without it those columns are '
                'empty, and repeated runs give byte-identical files.'))

    return common


def _objective_option(parser: argparse.ArgumentParser):
    parser.add_argument(
        '--objective', choices = evaluator.OBJECTIVES, default = evaluator.CARBON,
        help = 'Objective to minimise (default carbon).')


def build_parser() -> argparse.ArgumentParser:
    oracle_cache_dir = get_oracle_cache_dir()
    common = _common_options()

    parser = argparse.ArgumentParser(
        prog        = 'casf',
        description = ('Carbon-aware permutation flow-shop scheduling: generate instances, solve '
                       'them with a memetic algorithm, check them exhaustively, export the exact '
                       'model, and benchmark. See README.md for key details.'),
        formatter_class = argparse.RawDescriptionHelpFormatter)

    parser.add_argument(
        '-v', '--version', action = 'version',
        version = f'casflow {VERSION}\n(oracle cache: {oracle_cache_dir})')

    commands = parser.add_subparsers(dest = 'command', metavar = 'COMMAND', required = True)

    gen = commands.add_parser('generate', parents = [common], help = 'Generate a dataset.')
    gen.add_argument('--machines', metavar = 'M', type = positive_int_type, required = True)
    gen.add_argument('--horizon', metavar = 'T', type = positive_int_type, required = True,
                     help = 'Horizon in periods (96 = one day of quarter-hours).')
    gen.add_argument('--count', metavar = 'N', type = int, default = 50,
                     help = 'Number of instances (default 50).')
    gen.add_argument('--pool-size', metavar = 'N', type = positive_int_type, default = 2000,
                     help = 'Number of operations in the random pool (default 2000).')
    gen.add_argument('--durations', metavar = ('LO', 'HI'), type = int, nargs = 2,
                     help = 'Duration bounds (default 0 8 for several machines, 2 16 for one).')
    gen.add_argument('--carbon', metavar = 'MIX.csv', type = str,
                     help = 'Historical generation-mix CSV.')
    gen.add_argument('--onsite', metavar = 'ONSITE.csv', type = str,
                     help = 'Historical regional renewable generation CSV (kW).')
    gen.add_argument('--prices', metavar = 'PRICES.csv', type = str,
                     help = 'Historical hourly day-ahead prices CSV (currency/MWh).')
    gen.add_argument('--column-map', metavar = 'MAP.ini', type = str,
                     help = 'Maps generation-mix CSV headers to energy source names.')
    gen.add_argument('--onsite-scale', metavar = 'FACTOR', type = float,
                     default = carbon.DEFAULT_ONSITE_SCALE,
                     help = f'Scales regional generation to one site '
                            f'(default {carbon.DEFAULT_ONSITE_SCALE}).')
    gen.add_argument('--synthetic', metavar = 'DAYS', type = positive_int_type,
                     help = 'Synthesise DAYS days of energy data instead of reading CSV files.')
    gen.set_defaults(handler = cmd_generate)

    solve = commands.add_parser('solve', parents = [common],
                                help = 'Run the memetic algorithm.')
    solve.add_argument('instances', metavar = 'INSTANCE', nargs = '+',
                       help = 'Instance files, or dataset directories.')
    _objective_option(solve)
    solve.add_argument('--runs', metavar = 'R', type = positive_int_type, default = 10,
                       help = 'Independent runs per instance (default 10).')
    solve.add_argument('--emit-plot', action = 'store_true',
                       help = 'Write Gantt and power-profile data for each best schedule.')
    solve.set_defaults(handler = cmd_solve)

    oracle = commands.add_parser('oracle', parents = [common],
                                 help = 'Find an optimum exhaustively (tiny instances only).')
    oracle.add_argument('instances', metavar = 'INSTANCE', nargs = '+')
    _objective_option(oracle)
    oracle.add_argument('--budget', metavar = 'N', type = positive_int_type,
                        default = milp.DEFAULT_BUDGET,
                        help = f'Most schedules to enumerate (default {milp.DEFAULT_BUDGET}).')
    oracle.set_defaults(handler = cmd_oracle)

    export = commands.add_parser('export-milp', parents = [common],
                                 help = 'Write the exact model in LP and MPS formats.')
    export.add_argument('instances', metavar = 'INSTANCE', nargs = '+')
    export.set_defaults(handler = cmd_export_milp)

    evaluate = commands.add_parser('evaluate', parents = [common],
                                   help = 'Evaluate a schedule.')
    evaluate.add_argument('instance', metavar = 'INSTANCE')
    evaluate.add_argument('--schedule', metavar = 'SCHEDULE.json', type = str, required = True)
    evaluate.add_argument('--objective', metavar = 'KIND[,KIND...]', type = objective_list_type,
                          default = [evaluator.CARBON],
                          help = 'Objective(s) to report (default carbon).')
    evaluate.set_defaults(handler = cmd_evaluate)

    benchmark = commands.add_parser('benchmark', parents = [common],
                                    help = 'Compare methods over a dataset.')
    benchmark.add_argument('instances', metavar = 'INSTANCE', nargs = '+')
    benchmark.add_argument('--methods', metavar = 'METHOD[,METHOD...]', type = method_list_type,
                           default = [bench.MA],
                           help = f'Any of {", ".join(bench.METHODS)} (default ma).')
    benchmark.add_argument('--objectives', metavar = 'KIND[,KIND...]',
                           type = objective_list_type, default = [evaluator.CARBON],
                           help = 'Objectives to optimise and cross-evaluate (default carbon).')
    benchmark.add_argument('--reference', choices = [bench.ORACLE, bench.EXTERNAL],
                           help = 'Method the percentage gap is measured against.')
    benchmark.add_argument('--external', metavar = 'RESULTS.csv', type = str,
                           help = 'Results from an external solver: instance, objective, value, '
                                  'seconds.')
    benchmark.add_argument('--runs', metavar = 'R', type = positive_int_type, default = 10)
    benchmark.add_argument('--budget', metavar = 'N', type = positive_int_type,
                           default = milp.DEFAULT_BUDGET)
    benchmark.set_defaults(handler = cmd_benchmark)

    return parser


def main() -> int:
    parser = build_parser()
    args = parser.parse_args()

    progress = prog.Progress()
    out_dir = os.path.abspath(args.out)
    go = True

    try:
        os.makedirs(out_dir, exist_ok = True)
    except OSError as e:
        go = False
        progress.error(NAME, msg = f'cannot create output directory: {e}')

    if go and not os.access(out_dir, os.W_OK):
        go = False
        progress.error(NAME, msg = f'cannot write output: "{out_dir}" is not writable')

    oracle_cache = None
    if not args.no_cache:
        try:
            oracle_cache = diskcache.Cache(get_oracle_cache_dir())
        except Exception as e:
            go = False
            progress.error(NAME, msg = 'cannot create/open oracle cache: ' + str(e))

    if go:
        try:
            run_params = RunParams(
                out_dir      = out_dir,
                progress     = progress,
                seed         = args.seed,
                jobs         = args.jobs,
                time_limit   = args.time_limit,
                params_spec  = args.params,
                oracle_cache = oracle_cache,
                timing       = args.timing)
        except RunParamsError as e:
            go = False
            progress.error(NAME, msg = str(e))

    if go:
        if args.clean and oracle_cache is not None:
            oracle_cache.clear()

        handler: Callable = args.handler
        try:
            handler(args, run_params, parser)
        except memetic.ParamsError as e:
            progress.error(NAME, msg = f'invalid parameters: {e}')

    if oracle_cache is not None:
        oracle_cache.close()

    errors = progress.get_errors()
    warnings = progress.get_warnings()
    if errors or warnings:
        progress.progress(NAME, msg = f'finished with {len(errors)} error(s) and '
                                      f'{len(warnings)} warning(s)')
    return 1 if errors else 0


if __name__ == "__main__":
    sys.exit(main())
